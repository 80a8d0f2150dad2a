//! Relative entropies, the Rényi-type function ψ(s), binary entropy and the
//! classical tail bounds used in the converse arguments. All logarithms are
//! base 2.

use crate::error::{Error, Result};
use crate::linalg::{clip_threshold, HermOperator, Spectrum};
use crate::states::DensityMatrix;

/// Leaked weight above which supp(ρ) ⊄ supp(σ) is declared.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Spacing of the s-grid used by [`stein_upper_bound`] and [`cramer_exponent`].
pub const S_GRID_STEP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct DivergenceReport {
    /// Value in bits; `+∞` when the support condition fails.
    pub value: f64,
    pub support_ok: bool,
    pub gap_to_bound: Option<f64>,
}

impl DivergenceReport {
    fn finite(value: f64) -> Self {
        Self { value, support_ok: true, gap_to_bound: None }
    }

    fn infinite() -> Self {
        Self { value: f64::INFINITY, support_ok: false, gap_to_bound: None }
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.gap_to_bound = Some(bound - self.value);
        self
    }
}

/// Joint spectral data of a pair (ρ, σ): eigenvalues of both and the squared
/// overlaps |⟨a_i|b_j⟩|² of their eigenvectors. Every trace functional of the
/// form tr f(ρ) g(σ) reduces to a weighted sum over this table.
#[derive(Clone, Debug)]
pub struct PairSpectrum {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Row-major `overlap[i * d + j] = |⟨a_i|b_j⟩|²`.
    pub overlap: Vec<f64>,
    clip_p: f64,
    clip_q: f64,
}

impl PairSpectrum {
    pub fn new(rho: &HermOperator, sigma: &HermOperator) -> Result<Self> {
        if rho.dim() != sigma.dim() {
            return Err(Error::DimensionMismatch(format!("{} vs {}", rho.dim(), sigma.dim())));
        }
        let a = rho.eig()?;
        let b = sigma.eig()?;
        Ok(Self::from_spectra(&a, &b))
    }

    pub fn from_spectra(a: &Spectrum, b: &Spectrum) -> Self {
        let d = a.dim();
        // ⟨a_i|b_j⟩ = (A† B)_{ij}
        let g = a.vectors.adjoint().matmul(&b.vectors);
        let overlap = g.data().iter().map(|z| z.norm_sqr()).collect::<Vec<_>>();
        debug_assert_eq!(overlap.len(), d * d);
        Self {
            p: a.values.clone(),
            q: b.values.clone(),
            overlap,
            clip_p: clip_threshold(a),
            clip_q: clip_threshold(b),
        }
    }

    fn dim(&self) -> usize {
        self.p.len()
    }

    fn in_supp_p(&self, i: usize) -> bool {
        self.p[i] > self.clip_p
    }

    fn in_supp_q(&self, j: usize) -> bool {
        self.q[j] > self.clip_q
    }

    /// tr(ρ (1 - Π_σ)): the weight of ρ outside the support of σ.
    pub fn leak(&self) -> f64 {
        let d = self.dim();
        let mut leak = 0.0;
        for i in (0..d).filter(|&i| self.in_supp_p(i)) {
            for j in (0..d).filter(|&j| !self.in_supp_q(j)) {
                leak += self.p[i] * self.overlap[i * d + j];
            }
        }
        leak
    }

    pub fn support_ok(&self) -> bool {
        self.leak() <= SUPPORT_TOL
    }

    pub fn relative_entropy(&self) -> f64 {
        let d = self.dim();
        let mut s = 0.0;
        for i in (0..d).filter(|&i| self.in_supp_p(i)) {
            let mut cross = 0.0;
            for j in (0..d).filter(|&j| self.in_supp_q(j)) {
                cross += self.overlap[i * d + j] * self.q[j].log2();
            }
            s += self.p[i] * (self.p[i].log2() - cross);
        }
        s
    }

    /// tr(ρ^{1+s} σ^{-s}) restricted to the supports.
    pub fn renyi_trace(&self, s: f64) -> f64 {
        let d = self.dim();
        let mut t = 0.0;
        for i in (0..d).filter(|&i| self.in_supp_p(i)) {
            let pi = self.p[i].powf(1.0 + s);
            for j in (0..d).filter(|&j| self.in_supp_q(j)) {
                t += pi * self.q[j].powf(-s) * self.overlap[i * d + j];
            }
        }
        t
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.renyi_trace(s).log2()
    }
}

fn same_dim(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", rho.dim(), sigma.dim())));
    }
    Ok(())
}

/// S(ρ‖σ) = tr ρ(log ρ − log σ), evaluated in the two eigenbases.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<DivergenceReport> {
    same_dim(rho, sigma)?;
    relative_entropy_op(rho.op(), sigma.op())
}

/// Relative entropy for arbitrary PSD operators (no trace requirement).
pub fn relative_entropy_op(rho: &HermOperator, sigma: &HermOperator) -> Result<DivergenceReport> {
    let ps = PairSpectrum::new(rho, sigma)?;
    if !ps.support_ok() {
        return Ok(DivergenceReport::infinite());
    }
    Ok(DivergenceReport::finite(ps.relative_entropy()))
}

/// S_max(ρ‖σ) = log₂ λ_max(σ^{-1/2} ρ σ^{-1/2}) with the inverse taken on
/// supp(σ).
pub fn max_relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<DivergenceReport> {
    same_dim(rho, sigma)?;
    max_relative_entropy_op(rho.op(), sigma.op())
}

pub fn max_relative_entropy_op(rho: &HermOperator, sigma: &HermOperator) -> Result<DivergenceReport> {
    let b = sigma.eig()?;
    let a = rho.eig()?;
    if !PairSpectrum::from_spectra(&a, &b).support_ok() {
        return Ok(DivergenceReport::infinite());
    }
    let clip = clip_threshold(&b);
    let inv_root = b.map(|v| if v > clip { 1.0 / v.sqrt() } else { 0.0 });
    let mut m = inv_root.matmul(rho.mat()).matmul(&inv_root);
    m.hermitize();
    let top = HermOperator::new(rho.dims().to_vec(), m)?.eig()?.lambda_max();
    if top <= 0.0 {
        return Ok(DivergenceReport::finite(f64::NEG_INFINITY));
    }
    Ok(DivergenceReport::finite(top.log2()))
}

/// ψ(s) = log₂ tr(ρ^{1+s} σ^{-s}).
pub fn psi(rho: &DensityMatrix, sigma: &DensityMatrix, s: f64) -> Result<f64> {
    same_dim(rho, sigma)?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("s = {s} must lie in [0, 1]")));
    }
    let ps = supported_pair(rho, sigma)?;
    Ok(ps.psi(s))
}

fn supported_pair(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<PairSpectrum> {
    let ps = PairSpectrum::new(rho.op(), sigma.op())?;
    let leak = ps.leak();
    if leak > SUPPORT_TOL {
        return Err(Error::Support { leak });
    }
    Ok(ps)
}

fn s_grid() -> impl Iterator<Item = f64> {
    let steps = (1.0 / S_GRID_STEP).round() as usize;
    (0..=steps).map(move |k| k as f64 * S_GRID_STEP)
}

/// min_s 2^{-n(λs - ψ(s))} over the s-grid on [0, 1], clamped to 1. Upper
/// bound on tr(ρ^{⊗n} - 2^{λn} σ^{⊗n})_+.
pub fn stein_upper_bound(rho: &DensityMatrix, sigma: &DensityMatrix, n: usize, lambda: f64) -> Result<f64> {
    same_dim(rho, sigma)?;
    let ps = supported_pair(rho, sigma)?;
    Ok(stein_upper_bound_from(&ps, n, lambda))
}

pub fn stein_upper_bound_from(ps: &PairSpectrum, n: usize, lambda: f64) -> f64 {
    let best = s_grid().map(|s| lambda * s - ps.psi(s)).fold(f64::NEG_INFINITY, f64::max);
    2f64.powf(-(n as f64) * best).min(1.0)
}

pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("binary entropy argument {x} outside [0, 1]")));
    }
    let t = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    Ok(t(x) + t(1.0 - x))
}

/// Both sides of Σ λ_i (p_i − 2^μ q_i) ≤ Pr_p[log(p/q) ≥ μ].
#[derive(Clone, Debug, PartialEq)]
pub struct HanCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

pub fn han_inequality_check(p: &[f64], q: &[f64], weights: &[f64], mu: f64) -> Result<HanCheck> {
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    if p.len() != q.len() || p.len() != weights.len() {
        return Err(Error::DimensionMismatch("p, q and the weights must have equal length".into()));
    }
    if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::InvalidArgument("weights must lie in [0, 1]".into()));
    }
    let scale = 2f64.powf(mu);
    let lhs: f64 = weights.iter().zip(p.iter().zip(q)).map(|(w, (pi, qi))| w * (pi - scale * qi)).sum();
    let rhs: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pi, &qi)| pi > 0.0 && (qi == 0.0 || (pi / qi).log2() >= mu))
        .map(|(pi, _)| pi)
        .sum();
    Ok(HanCheck { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

/// Λ(X, r, a) = sup_{0≤s≤1} (a s − log₂ Σ_i r_i 2^{s X_i}): grid search followed
/// by golden-section refinement around the best grid point.
pub fn cramer_exponent(r: &[f64], x: &[f64], a: f64) -> Result<f64> {
    if r.len() != x.len() {
        return Err(Error::DimensionMismatch(format!("{} probabilities vs {} values", r.len(), x.len())));
    }
    check_distribution(r, "r")?;
    let f = |s: f64| {
        let m: f64 = r.iter().zip(x).map(|(ri, xi)| ri * 2f64.powf(s * xi)).sum();
        a * s - m.log2()
    };
    let (mut best_s, mut best) = (0.0, f(0.0));
    for s in s_grid() {
        let v = f(s);
        if v > best {
            best = v;
            best_s = s;
        }
    }
    let lo = (best_s - S_GRID_STEP).max(0.0);
    let hi = (best_s + S_GRID_STEP).min(1.0);
    let (_, refined) = golden_max(f, lo, hi, 60);
    Ok(best.max(refined).max(0.0))
}

/// Golden-section maximization of a unimodal function on [lo, hi].
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMat};
    use crate::states::random_state;

    fn diag(p: &[f64]) -> DensityMatrix {
        DensityMatrix::from_diag(p).unwrap()
    }

    #[test]
    fn relative_entropy_examples() {
        let rho = random_state(3, 3, 1).unwrap();
        assert!(relative_entropy(&rho, &rho).unwrap().value.abs() < 1e-10);
        let p = [0.2, 0.3, 0.5];
        let q = [0.4, 0.4, 0.2];
        let kl: f64 = p.iter().zip(&q).map(|(a, b): (&f64, &f64)| a * (a / b).log2()).sum();
        assert!((relative_entropy(&diag(&p), &diag(&q)).unwrap().value - kl).abs() < 1e-12);
        let one = relative_entropy(&diag(&[1.0, 0.0]), &diag(&[0.5, 0.5])).unwrap();
        assert!((one.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_violation_is_infinite() {
        let r = relative_entropy(&diag(&[0.5, 0.5]), &diag(&[1.0, 0.0])).unwrap();
        assert!(!r.support_ok && r.value.is_infinite());
        let m = max_relative_entropy(&diag(&[0.5, 0.5]), &diag(&[1.0, 0.0])).unwrap();
        assert!(m.value.is_infinite());
        assert!(matches!(psi(&diag(&[0.5, 0.5]), &diag(&[1.0, 0.0]), 0.5), Err(Error::Support { .. })));
    }

    #[test]
    fn max_relative_entropy_examples() {
        let rho = random_state(2, 2, 5).unwrap();
        assert!(max_relative_entropy(&rho, &rho).unwrap().value.abs() < 1e-10);
        let psi = random_state(3, 1, 2).unwrap();
        let mixed = DensityMatrix::maximally_mixed(&[3]);
        assert!((max_relative_entropy(&psi, &mixed).unwrap().value - 3f64.log2()).abs() < 1e-10);
    }

    #[test]
    fn max_relative_entropy_matches_bisection() {
        let rho = random_state(2, 2, 8).unwrap();
        let sigma = random_state(2, 2, 9).unwrap();
        let smax = max_relative_entropy(&rho, &sigma).unwrap().value;
        let feasible = |s: f64| sigma.op().scaled(2f64.powf(s)).minus(rho.op()).eig().unwrap().lambda_min() >= 0.0;
        let (mut lo, mut hi) = (-10.0, 40.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((smax - hi).abs() < 1e-6, "{smax} vs {hi}");
    }

    #[test]
    fn psi_examples() {
        let rho = random_state(2, 2, 21).unwrap();
        let sigma = random_state(2, 2, 22).unwrap();
        assert!(psi(&rho, &sigma, 0.0).unwrap().abs() < 1e-12);
        let h = 1e-4;
        let slope = (psi(&rho, &sigma, 2.0 * h).unwrap() - psi(&rho, &sigma, 0.0).unwrap()) / (2.0 * h);
        let central = {
            let ps = PairSpectrum::new(rho.op(), sigma.op()).unwrap();
            (ps.psi(h) - ps.psi(-h)) / (2.0 * h)
        };
        let s = relative_entropy(&rho, &sigma).unwrap().value;
        assert!((central - s).abs() < 1e-4, "{central} vs {s}");
        assert!((slope - s).abs() < 1e-3);
        let (p, q) = ([0.7, 0.3], [0.4, 0.6]);
        let expect: f64 = p.iter().zip(&q).map(|(a, b): (&f64, &f64)| a.powf(1.5) * b.powf(-0.5)).sum::<f64>().log2();
        assert!((psi(&diag(&p), &diag(&q), 0.5).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn stein_upper_bound_examples() {
        let rho = random_state(2, 2, 31).unwrap();
        let sigma = random_state(2, 2, 32).unwrap();
        assert_eq!(stein_upper_bound(&rho, &sigma, 5, 0.0).unwrap(), 1.0);
        let s = relative_entropy(&rho, &sigma).unwrap().value;
        let lam = s + 0.3;
        let mut prev = 1.0;
        for n in 1..8 {
            let b = stein_upper_bound(&rho, &sigma, n, lam).unwrap();
            assert!(b < prev, "n = {n}: {b} ≥ {prev}");
            prev = b;
        }
        let n = 6;
        let r6 = rho.tensor_power(n, 4096).unwrap();
        let s6 = sigma.tensor_power(n, 4096).unwrap();
        let exact = crate::linalg::positive_part_trace(&r6.op().combine(1.0, s6.op(), -(2f64.powf(6.0 * lam)))).unwrap();
        assert!(exact <= stein_upper_bound(&rho, &sigma, n, lam).unwrap() + 1e-12);
    }

    #[test]
    fn binary_entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((binary_entropy(0.11).unwrap() - 0.5).abs() < 2e-4);
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn han_examples() {
        let p = [0.3, 0.7];
        let r = han_inequality_check(&p, &p, &[1.0, 1.0], 0.0).unwrap();
        assert!(r.lhs.abs() < 1e-15 && r.holds);
        let r = han_inequality_check(&p, &[0.5, 0.5], &[0.0, 0.0], 0.3).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(han_inequality_check(&[0.3, 0.3], &p, &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn cramer_examples() {
        let r = [0.5, 0.5];
        let x = [0.0, 1.0];
        assert!(cramer_exponent(&r, &x, 0.4).unwrap() < 1e-12);
        // Two-point closed form in bits: with a = 0.6 the maximizer s* solves
        // r₁2^{s}/(r₀+r₁2^{s}) = a, so 2^{s*} = a/(1-a).
        let a: f64 = 0.6;
        let s_star = (a / (1.0 - a)).log2();
        assert!(s_star < 1.0);
        let closed = a * s_star - (0.5 + 0.5 * 2f64.powf(s_star)).log2();
        assert!((cramer_exponent(&r, &x, a).unwrap() - closed).abs() < 1e-4);
        let det = [1.0];
        let v = [0.2];
        assert!((cramer_exponent(&det, &v, 0.5).unwrap() - 0.3).abs() < 1e-9);
        assert!((cramer_exponent(&det, &v, 0.9).unwrap() - 0.7).abs() < 1e-9);
    }

    #[test]
    fn commuting_pair_from_non_diagonal_bases() {
        // both diagonal in the Hadamard basis
        let h = CMat::from_fn(2, 2, |i, j| c(if i == 1 && j == 1 { -1.0 } else { 1.0 } / 2f64.sqrt(), 0.0));
        let rho = diag(&[0.8, 0.2]).op().conjugate_by(&h);
        let sigma = diag(&[0.3, 0.7]).op().conjugate_by(&h);
        let kl = 0.8 * (0.8f64 / 0.3).log2() + 0.2 * (0.2f64 / 0.7).log2();
        assert!((relative_entropy_op(&rho, &sigma).unwrap().value - kl).abs() < 1e-12);
    }
}
