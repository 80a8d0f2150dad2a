//! Nonnegative least squares (Lawson-Hanson active set) and its simplex
//! constrained variant, used for convex-hull membership.

use faer::prelude::SolveLstsq;
use faer::Mat;

use super::{CMat, HermOperator, C64};
use crate::error::{Error, Result};

/// Real coordinates of a Hermitian matrix in an orthonormal basis of the
/// Hermitian space, so Euclidean distances equal Frobenius distances.
pub fn herm_coordinates(x: &HermOperator) -> Vec<f64> {
    let m = x.mat();
    let d = m.rows();
    let mut out = Vec::with_capacity(d * d);
    let r2 = std::f64::consts::SQRT_2;
    for i in 0..d {
        out.push(m[(i, i)].re);
        for j in i + 1..d {
            let z: C64 = m[(i, j)];
            out.push(r2 * z.re);
            out.push(r2 * z.im);
        }
    }
    out
}

/// Inverse of [`herm_coordinates`] for a d x d operator.
pub fn from_herm_coordinates(v: &[f64], dims: &[usize]) -> Result<HermOperator> {
    let d: usize = dims.iter().product();
    if v.len() != d * d {
        return Err(Error::DimensionMismatch(format!("{} coordinates for a {d}-dimensional operator", v.len())));
    }
    let mut m = CMat::zeros(d, d);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut k = 0;
    for i in 0..d {
        m[(i, i)] = C64::new(v[k], 0.0);
        k += 1;
        for j in i + 1..d {
            let z = C64::new(s * v[k], s * v[k + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            k += 2;
        }
    }
    HermOperator::new(dims.to_vec(), m)
}

fn solve_passive(cols: &[Vec<f64>], passive: &[usize], b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let a = Mat::<f64>::from_fn(m, passive.len(), |i, j| cols[passive[j]][i]);
    let rhs = Mat::<f64>::from_fn(m, 1, |i, _| b[i]);
    let z = a.col_piv_qr().solve_lstsq(&rhs);
    (0..passive.len()).map(|j| z[(j, 0)]).collect()
}

fn residual(cols: &[Vec<f64>], x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = b.to_vec();
    for (c, &w) in cols.iter().zip(x) {
        if w != 0.0 {
            for (ri, ci) in r.iter_mut().zip(c) {
                *ri -= w * ci;
            }
        }
    }
    r
}

/// argmin_{x ≥ 0} ‖A x − b‖ with A given column by column.
pub fn nnls(cols: &[Vec<f64>], b: &[f64], max_iter: usize) -> Vec<f64> {
    let n = cols.len();
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let tol = 1e-12 * (1.0 + b.iter().map(|v| v * v).sum::<f64>().sqrt());
    for _ in 0..max_iter {
        let r = residual(cols, &x, b);
        let w: Vec<f64> = cols.iter().map(|c| c.iter().zip(&r).map(|(a, b)| a * b).sum()).collect();
        let entering = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = entering else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z = solve_passive(cols, &idx, b);
            if z.iter().all(|&v| v > 0.0) {
                for (k, &v) in idx.iter().zip(&z) {
                    x[*k] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &v) in idx.iter().zip(&z) {
                if v <= 0.0 {
                    alpha = alpha.min(x[*k] / (x[*k] - v));
                }
            }
            for (k, &v) in idx.iter().zip(&z) {
                x[*k] += alpha * (v - x[*k]);
                if x[*k] <= 1e-15 {
                    x[*k] = 0.0;
                    passive[*k] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// argmin over the probability simplex of ‖Σ_k w_k a_k − b‖. The sum
/// constraint enters as a heavily weighted extra row of an NNLS problem;
/// weights are renormalized afterwards.
pub fn simplex_least_squares(cols: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    const WEIGHT: f64 = 1e4;
    let aug: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let mut v = c.clone();
            v.push(WEIGHT);
            v
        })
        .collect();
    let mut rhs = b.to_vec();
    rhs.push(WEIGHT);
    let mut w = nnls(&aug, &rhs, 10 * cols.len() + 50);
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|v| *v /= s);
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nnls_recovers_nonnegative_solution() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 1.0]];
        let b = [1.5, 2.0, 0.5];
        let x = nnls(&cols, &b, 100);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.5).abs() < 1e-12 && (x[2] - 0.5).abs() < 1e-12);
        let x = nnls(&cols, &[-1.0, -1.0, -1.0], 100);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simplex_weights_sum_to_one() {
        let cols = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let w = simplex_least_squares(&cols, &[0.25, 0.25]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((w[1] - 0.25).abs() < 1e-6 && (w[2] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn coordinates_are_isometric() {
        let a = HermOperator::new(vec![2], crate::linalg::CMat::from_fn(2, 2, |i, j| C64::new((i + j) as f64, if i < j { 1.0 } else if i > j { -1.0 } else { 0.0 }))).unwrap();
        let v = herm_coordinates(&a);
        let n2: f64 = v.iter().map(|x| x * x).sum();
        assert!((n2 - a.mat().frobenius_norm().powi(2)).abs() < 1e-12);
    }
}
