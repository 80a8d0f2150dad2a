//! Hermitian eigensolvers.
//!
//! Small operators (dim <= 32) use a cyclic complex Jacobi sweep, which is
//! accurate to working precision on tiny spectra and trivially deterministic.
//! Larger operators go through faer's self-adjoint solver (Householder
//! tridiagonalization followed by an implicit tridiagonal QR/divide-and-conquer
//! stage), run sequentially.

use faer::Side;

use super::matrix::CMat;
use super::C64;
use crate::error::{Error, Result};

pub const JACOBI_MAX_DIM: usize = 32;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Largest |λ|, the spectral norm.
    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// V f(Λ) V†.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> CMat {
        let weights: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        self.weighted_sum(&weights)
    }

    /// Σ_k w_k |v_k⟩⟨v_k|, skipping zero weights.
    pub fn weighted_sum(&self, weights: &[f64]) -> CMat {
        let n = self.vectors.rows();
        let kept: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] != 0.0).collect();
        if kept.is_empty() {
            return CMat::zeros(n, n);
        }
        let left = CMat::from_fn(n, kept.len(), |i, j| self.vectors[(i, kept[j])] * weights[kept[j]]);
        let right = CMat::from_fn(kept.len(), n, |i, j| self.vectors[(j, kept[i])].conj());
        let mut out = left.matmul(&right);
        out.hermitize();
        out
    }

    pub fn reconstruct(&self) -> CMat {
        self.map(|v| v)
    }
}

/// Spectral decomposition of a Hermitian matrix. The caller is responsible for
/// the Hermiticity check; only the lower triangle is trusted.
pub fn eigh(a: &CMat) -> Result<Spectrum> {
    assert!(a.is_square());
    let n = a.rows();
    if n == 0 {
        return Ok(Spectrum { values: vec![], vectors: CMat::zeros(0, 0) });
    }
    if n <= JACOBI_MAX_DIM {
        Ok(jacobi(a))
    } else {
        faer_eigh(a)
    }
}

fn faer_eigh(a: &CMat) -> Result<Spectrum> {
    let n = a.rows();
    let m = a.to_faer();
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver did not converge: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer sorts ascending
    let values: Vec<f64> = (0..n).rev().map(|k| s[k].re).collect();
    let vectors = CMat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok(Spectrum { values, vectors })
}

fn jacobi(a0: &CMat) -> Spectrum {
    let n = a0.rows();
    let mut a = a0.clone();
    a.hermitize();
    let mut v = CMat::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 || mag <= 1e-17 * scale {
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / mag;
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J = diag(1, conj(phase)) * real rotation [[c, s], [-s, c]]
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = phase.conj() * (-s);
                let jqq = phase.conj() * c;
                // A <- A J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                // A <- J† A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                // V <- V J
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re).then(i.cmp(&j)));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let vectors = CMat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Spectrum { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> CMat {
        let mut m = CMat::from_fn(n, n, |i, j| {
            C64::new(((i * 13 + j * 7) % 11) as f64 / 11.0 - 0.5, ((i * 5 + j * 3) % 7) as f64 / 7.0 - 0.5)
        });
        m.hermitize();
        m
    }

    fn check(n: usize) {
        let a = test_matrix(n);
        let s = eigh(&a).unwrap();
        assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
        let err = (&s.reconstruct() - &a).max_abs();
        assert!(err < 1e-10, "reconstruction error {err} at n={n}");
        let gram = s.vectors.adjoint().matmul(&s.vectors);
        assert!((&gram - &CMat::identity(n)).max_abs() < 1e-10);
    }

    #[test]
    fn jacobi_reconstructs() {
        for n in [1, 2, 3, 7, 16, 32] {
            check(n);
        }
    }

    #[test]
    fn faer_path_reconstructs() {
        check(33);
        check(70);
    }

    #[test]
    fn paths_agree_on_eigenvalues() {
        let a = test_matrix(32);
        let j = jacobi(&a);
        let f = faer_eigh(&a).unwrap();
        for (x, y) in j.values.iter().zip(&f.values) {
            assert!((x - y).abs() < 1e-11);
        }
    }
}
