//! Asymmetric hypothesis testing between ρ^{⊗n} and an alternative: optimal
//! Neyman-Pearson tests, the minimal type-II error β_n(ε), Stein exponent
//! sequences, positive-part curves against set families, and the primal and
//! dual programs defining λ(π, M, K).

use serde::Serialize;

use crate::divergences::{golden_max, relative_entropy_op, PairSpectrum};
use crate::error::{Error, Result};
use crate::linalg::tensor::apply_kron_power;
use crate::linalg::{checked_power, fmt12, CMat, HermOperator, DEFAULT_DIM_CAP};
use crate::measures::{CancelToken, FwOptions};
use crate::state_sets::{dykstra, ConvexSet, Projector, SetFamily};
use crate::states::DensityMatrix;

/// Required agreement between the requested and the achieved type-I error.
pub const CALIBRATION_TOL: f64 = 1e-9;
/// Largest number of type classes enumerated by the commuting fast path.
pub const MAX_TYPE_CLASSES: usize = 5_000_000;
const THRESHOLD_BISECTIONS: usize = 120;
const COMMUTATOR_TOL: f64 = 1e-12;

/// A = projector_part + boundary_weight · boundary.
#[derive(Clone, Debug)]
pub struct TestOperator {
    pub projector_part: HermOperator,
    pub boundary: HermOperator,
    pub boundary_weight: f64,
    pub threshold: f64,
}

impl TestOperator {
    pub fn operator(&self) -> HermOperator {
        self.projector_part.combine(1.0, &self.boundary, self.boundary_weight)
    }

    pub fn with_boundary_weight(mut self, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArgument(format!("boundary weight {w} outside [0, 1]")));
        }
        self.boundary_weight = w;
        Ok(self)
    }

    /// max(−λ_min(A), λ_max(A) − 1); nonpositive for a valid test.
    pub fn bound_violation(&self) -> Result<f64> {
        let s = self.operator().eig()?;
        Ok((-s.lambda_min()).max(s.lambda_max() - 1.0))
    }

    /// Error probabilities evaluated directly on ρ^{⊗n} and σ^{⊗n}.
    pub fn report(&self, rho: &DensityMatrix, sigma: &DensityMatrix, n: usize) -> Result<TestReport> {
        let a = self.operator();
        let accept_rho = iid_expectation(rho, n, a.mat())?;
        let accept_sigma = iid_expectation(sigma, n, a.mat())?;
        Ok(TestReport { n, type1: 1.0 - accept_rho, type2: accept_sigma, optimality_gap: f64::NAN })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub n: usize,
    /// α_n = tr ρ^{⊗n}(1 − A).
    pub type1: f64,
    /// β_n = tr σ^{⊗n} A.
    pub type2: f64,
    /// Certified bound on β_n minus the optimum at the same type-I error.
    pub optimality_gap: f64,
}

/// tr(ρ^{⊗n} A) without forming the tensor power.
fn iid_expectation(rho: &DensityMatrix, n: usize, a: &CMat) -> Result<f64> {
    if checked_power(rho.dim(), n, DEFAULT_DIM_CAP)? != a.rows() {
        return Err(Error::DimensionMismatch(format!("operator of size {} is not on {n} copies", a.rows())));
    }
    Ok(apply_kron_power(a, rho.op().mat(), n).trace().re)
}

fn check_pair(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dims() != sigma.dims() {
        return Err(Error::DimensionMismatch(format!("ρ dims {:?} vs σ dims {:?}", rho.dims(), sigma.dims())));
    }
    Ok(())
}

fn iid_power(rho: &DensityMatrix, n: usize) -> Result<HermOperator> {
    Ok(rho.tensor_power(n, DEFAULT_DIM_CAP)?.into_op())
}

/// Projector onto the strictly positive part of ρ^{⊗n} − tσ^{⊗n}, with the
/// (numerically) null eigenspace kept as a separate boundary at weight 0.
pub fn np_test(rho: &DensityMatrix, sigma: &DensityMatrix, n: usize, t: f64) -> Result<TestOperator> {
    check_pair(rho, sigma)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold {t} must be nonnegative")));
    }
    let x = iid_power(rho, n)?.minus(&iid_power(sigma, n)?.scaled(t));
    let s = x.eig()?;
    let tol = 1e-12 * s.spectral_radius().max(f64::MIN_POSITIVE);
    let pos: Vec<f64> = s.values.iter().map(|&v| if v > tol { 1.0 } else { 0.0 }).collect();
    let null: Vec<f64> = s.values.iter().map(|&v| if v.abs() <= tol { 1.0 } else { 0.0 }).collect();
    let dims = x.dims().to_vec();
    Ok(TestOperator {
        projector_part: HermOperator::from_hermitian_part(dims.clone(), s.weighted_sum(&pos)),
        boundary: HermOperator::from_hermitian_part(dims, s.weighted_sum(&null)),
        boundary_weight: 0.0,
        threshold: t,
    })
}

/// Eigendecomposition of ρ^{⊗n} − tσ^{⊗n} with the ρ- and σ-weights of each
/// eigenvector.
struct NpSplit {
    t: f64,
    values: Vec<f64>,
    vectors: CMat,
    rho_mass: Vec<f64>,
    sigma_mass: Vec<f64>,
}

struct Calibrated {
    full: usize,
    weight: f64,
    beta: f64,
    /// tr X_+ − tr X A ≥ 0 for X = ρ^{⊗n} − tσ^{⊗n}.
    deficit: f64,
}

impl NpSplit {
    fn new(rho: &DensityMatrix, sigma: &DensityMatrix, rho_n: &HermOperator, sigma_n: &HermOperator, n: usize, t: f64) -> Result<Self> {
        let s = rho_n.minus(&sigma_n.scaled(t)).eig()?;
        let masses = |local: &DensityMatrix| -> Vec<f64> {
            let applied = apply_kron_power(&s.vectors, local.op().mat(), n);
            (0..s.vectors.cols())
                .map(|j| (0..s.vectors.rows()).map(|i| (s.vectors[(i, j)].conj() * applied[(i, j)]).re).sum::<f64>().max(0.0))
                .collect()
        };
        let (rho_mass, sigma_mass) = (masses(rho), masses(sigma));
        Ok(Self { t, values: s.values, vectors: s.vectors, rho_mass, sigma_mass })
    }

    /// Fills eigenvectors in decreasing eigenvalue order until the ρ-weight
    /// reaches 1 − ε, splitting the last one. `None` when the positive part
    /// carries less than 1 − ε.
    fn calibrate(&self, eps: f64) -> Option<Calibrated> {
        let target = 1.0 - eps;
        let mut acc = 0.0;
        let mut beta = 0.0;
        for i in 0..self.values.len() {
            if self.values[i] <= 0.0 {
                return None;
            }
            let m = self.rho_mass[i];
            if acc + m >= target && m > 0.0 {
                let weight = ((target - acc) / m).clamp(0.0, 1.0);
                beta += weight * self.sigma_mass[i];
                let deficit = (1.0 - weight) * self.values[i]
                    + self.values[i + 1..].iter().filter(|&&v| v > 0.0).sum::<f64>();
                return Some(Calibrated { full: i, weight, beta, deficit });
            }
            acc += m;
            beta += self.sigma_mass[i];
        }
        None
    }

    fn test(&self, c: &Calibrated, dims: &[usize]) -> TestOperator {
        let d = self.values.len();
        let proj: Vec<f64> = (0..d).map(|i| if i < c.full { 1.0 } else { 0.0 }).collect();
        let v = self.vectors.column(c.full);
        let spec = crate::linalg::Spectrum { values: self.values.clone(), vectors: self.vectors.clone() };
        TestOperator {
            projector_part: HermOperator::from_hermitian_part(dims.to_vec(), spec.weighted_sum(&proj)),
            boundary: HermOperator::projector(&v, dims),
            boundary_weight: c.weight,
            threshold: self.t,
        }
    }
}

/// β_n(ε) = min{tr σ^{⊗n}A : tr ρ^{⊗n}(1 − A) ≤ ε} by bisection on the
/// Neyman-Pearson threshold with randomization on one boundary eigenvector.
/// The type-I error equals ε to rounding; the reported optimality gap is the
/// certified excess of the returned β over the optimum.
pub fn beta_n(rho: &DensityMatrix, sigma: &DensityMatrix, n: usize, eps: f64) -> Result<(TestReport, TestOperator)> {
    check_pair(rho, sigma)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("ε = {eps} must lie in (0, 1)")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let dims = rho.tensor_power(n, DEFAULT_DIM_CAP)?.dims().to_vec();
    let rho_n = iid_power(rho, n)?;
    let sigma_n = iid_power(sigma, n)?;
    let split = |u: f64| NpSplit::new(rho, sigma, &rho_n, &sigma_n, n, 2f64.powf(u));

    let rs = rho.op().eig()?;
    let ss = sigma.op().eig()?;
    let floor = |s: &crate::linalg::Spectrum| s.values.iter().copied().filter(|&v| v > 1e-14).fold(1.0, f64::min);
    let nf = n as f64;
    let mut lo = nf * (floor(&rs).log2() - ss.lambda_max().log2()) - 1.0;
    let mut hi = nf * (rs.lambda_max().log2() - floor(&ss).log2()) + 1.0;

    let mut best: Option<(NpSplit, Calibrated)> = None;
    let consider = |s: NpSplit, best: &mut Option<(NpSplit, Calibrated)>| -> bool {
        match s.calibrate(eps) {
            Some(c) => {
                if best.as_ref().is_none_or(|(_, b)| c.beta < b.beta) {
                    *best = Some((s, c));
                }
                true
            }
            None => false,
        }
    };
    let mut widen = 0;
    while !consider(split(lo)?, &mut best) {
        lo -= 2.0 * nf + 8.0;
        widen += 1;
        if widen > 20 {
            return Err(Error::Numerical("no threshold keeps the type-I error below ε".into()));
        }
    }
    if !consider(split(hi)?, &mut best) {
        for _ in 0..THRESHOLD_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if consider(split(mid)?, &mut best) {
                lo = mid;
            } else {
                hi = mid;
            }
            let (s, c) = best.as_ref().expect("lower end is feasible");
            if c.deficit / s.t <= 1e-13 * c.beta.max(1e-300) || hi - lo <= 1e-14 * lo.abs().max(1.0) {
                break;
            }
        }
    }
    let (s, c) = best.expect("lower end is feasible");
    let test = s.test(&c, &dims);
    let accept: f64 = (0..c.full).map(|i| s.rho_mass[i]).sum::<f64>() + c.weight * s.rho_mass[c.full];
    let report = TestReport { n, type1: 1.0 - accept, type2: c.beta, optimality_gap: c.deficit / s.t };
    Ok((report, test))
}

/// Joint eigenvalue lists (p_i, q_i) when ρ and σ commute.
pub fn commuting_spectra(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    check_pair(rho, sigma)?;
    let (a, b) = (rho.op().mat(), sigma.op().mat());
    let comm = &a.matmul(b) - &b.matmul(a);
    if comm.max_abs() > COMMUTATOR_TOL {
        return Ok(None);
    }
    // a generic combination separates every joint eigenspace
    let s = rho.op().combine(1.0, sigma.op(), 0.618_033_988_749_895).eig()?;
    let mut p = Vec::new();
    let mut q = Vec::new();
    for k in 0..s.dim() {
        let v = s.vector(k);
        p.push(rho.op().expectation(&v).max(0.0));
        q.push(sigma.op().expectation(&v).max(0.0));
    }
    Ok(Some((p, q)))
}

/// Type classes of length-n words over d letters, with log-probabilities
/// under p and q.
struct TypeClass {
    ln_p: f64,
    ln_q: f64,
}

fn type_classes(p: &[f64], q: &[f64], n: usize) -> Result<Vec<TypeClass>> {
    let d = p.len();
    if d == 0 || q.len() != d {
        return Err(Error::DimensionMismatch("distributions of different lengths".into()));
    }
    // C(n + d − 1, d − 1) classes
    let mut count: f64 = 1.0;
    for i in 1..d {
        count = count * (n + i) as f64 / i as f64;
    }
    if count > MAX_TYPE_CLASSES as f64 {
        return Err(Error::Capacity { requested: count as usize, limit: MAX_TYPE_CLASSES });
    }
    let mut ln_fact = vec![0.0; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let ln = |x: f64| if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
    let (lp, lq): (Vec<f64>, Vec<f64>) = p.iter().zip(q).map(|(&a, &b)| (ln(a), ln(b))).unzip();
    let mut out = Vec::with_capacity(count as usize);
    let mut counts = vec![0usize; d];
    fn rec(
        i: usize,
        left: usize,
        counts: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]),
    ) {
        if i + 1 == counts.len() {
            counts[i] = left;
            f(counts);
            return;
        }
        for k in 0..=left {
            counts[i] = k;
            rec(i + 1, left - k, counts, f);
        }
    }
    let term = |k: usize, l: f64| if k == 0 { 0.0 } else { k as f64 * l };
    rec(0, n, &mut counts, &mut |k: &[usize]| {
        let mult = ln_fact[n] - k.iter().map(|&c| ln_fact[c]).sum::<f64>();
        let ln_p = mult + k.iter().zip(&lp).map(|(&c, &l)| term(c, l)).sum::<f64>();
        let ln_q = mult + k.iter().zip(&lq).map(|(&c, &l)| term(c, l)).sum::<f64>();
        out.push(TypeClass { ln_p, ln_q });
    });
    Ok(out)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalBeta {
    pub n: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub log2_beta: f64,
    pub type1: f64,
}

/// β_n(ε) for commuting states with eigenvalue lists p and q, by sorting
/// type classes by likelihood ratio.
pub fn beta_n_classical(p: &[f64], q: &[f64], n: usize, eps: f64) -> Result<ClassicalBeta> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("ε = {eps} must lie in (0, 1)")));
    }
    let mut classes: Vec<TypeClass> = type_classes(p, q, n)?.into_iter().filter(|c| c.ln_p > f64::NEG_INFINITY).collect();
    let score = |c: &TypeClass| c.ln_p - c.ln_q;
    classes.sort_by(|a, b| score(b).total_cmp(&score(a)));
    let target = 1.0 - eps;
    let mut acc = 0.0;
    let mut q_terms = Vec::new();
    for c in &classes {
        let pm = c.ln_p.exp();
        if acc + pm >= target {
            let w = ((target - acc) / pm).clamp(0.0, 1.0);
            if w > 0.0 {
                q_terms.push(w.ln() + c.ln_q);
            }
            acc = target;
            break;
        }
        acc += pm;
        q_terms.push(c.ln_q);
    }
    let ln_beta = log_sum_exp(&q_terms);
    Ok(ClassicalBeta {
        n,
        epsilon: eps,
        beta: ln_beta.exp(),
        log2_beta: ln_beta / std::f64::consts::LN_2,
        type1: 1.0 - acc,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentPoint {
    pub n: usize,
    pub epsilon: f64,
    pub beta: f64,
    /// −log₂ β_n / n; +∞ when β_n = 0.
    pub exponent: f64,
    pub reference_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SteinCurve {
    pub epsilon: f64,
    pub reference_s: f64,
    /// Whether the commuting type-class path was used.
    pub classical: bool,
    pub points: Vec<ExponentPoint>,
}

impl SteinCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,epsilon,beta,exponent,reference_S\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{},{},{}\n", p.n, fmt12(p.epsilon), fmt12(p.beta), fmt12(p.exponent), fmt12(p.reference_s)));
        }
        s
    }

    pub fn has_infinite_exponent(&self) -> bool {
        self.points.iter().any(|p| p.exponent.is_infinite())
    }
}

/// −log₂ β_n(ε)/n for n = 1..=n_max next to S(ρ‖σ).
pub fn stein_exponent_estimate(rho: &DensityMatrix, sigma: &DensityMatrix, eps: f64, n_max: usize) -> Result<SteinCurve> {
    check_pair(rho, sigma)?;
    let ps = PairSpectrum::new(rho.op(), sigma.op())?;
    if !ps.support_ok() {
        return Err(Error::Support { leak: ps.leak() });
    }
    let reference_s = ps.relative_entropy();
    let joint = commuting_spectra(rho, sigma)?;
    if joint.is_none() {
        checked_power(rho.dim(), n_max, DEFAULT_DIM_CAP)?;
    }
    let mut points = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (beta, log2_beta) = match &joint {
            Some((p, q)) => {
                let c = beta_n_classical(p, q, n, eps)?;
                (c.beta, c.log2_beta)
            }
            None => {
                let (r, _) = beta_n(rho, sigma, n, eps)?;
                (r.type2, if r.type2 > 0.0 { r.type2.log2() } else { f64::NEG_INFINITY })
            }
        };
        points.push(ExponentPoint { n, epsilon: eps, beta, exponent: -log2_beta / n as f64, reference_s });
    }
    Ok(SteinCurve { epsilon: eps, reference_s, classical: joint.is_some(), points })
}

/// tr(ρ^{⊗n} − 2^{yn} σ^{⊗n})_+.
pub fn positive_part_iid(rho: &DensityMatrix, sigma: &DensityMatrix, n: usize, y: f64) -> Result<f64> {
    check_pair(rho, sigma)?;
    let ln_c = y * n as f64 * std::f64::consts::LN_2;
    if let Some((p, q)) = commuting_spectra(rho, sigma)? {
        let classes = type_classes(&p, &q, n)?;
        return Ok(classes.iter().map(|c| (c.ln_p.exp() - (ln_c + c.ln_q).exp()).max(0.0)).sum::<f64>().min(1.0));
    }
    let x = iid_power(rho, n)?.minus(&iid_power(sigma, n)?.scaled(ln_c.exp()));
    Ok(x.eig()?.values.iter().filter(|&&v| v > 0.0).sum())
}

/// τ ln(1 + e^{x/τ}), an upper approximation of max(0, x) within τ ln 2.
fn softplus(x: f64, tau: f64) -> f64 {
    let z = x / tau;
    tau * if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug)]
pub struct PositivePartMin {
    /// tr(R − cω)_+ at the returned point.
    pub value: f64,
    /// Certified lower bound on min_{ω∈M} tr(R − cω)_+.
    pub lower: f64,
    pub point: HermOperator,
    pub iterations: usize,
}

const SMOOTHING_STAGES: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// min_{ω∈M} tr(R − cω)_+ by Frank-Wolfe on softplus smoothings of the
/// positive part with decreasing temperature. The lower bound comes from the
/// linearization at the best point, which is valid for any subgradient.
pub fn min_positive_part(
    r: &HermOperator,
    set: &dyn ConvexSet,
    c: f64,
    start: Option<&HermOperator>,
    opts: &FwOptions,
) -> Result<PositivePartMin> {
    if r.dim() != set.dim() {
        return Err(Error::DimensionMismatch(format!("operator dimension {} vs set dimension {}", r.dim(), set.dim())));
    }
    let exact = |w: &HermOperator| -> Result<f64> {
        Ok(r.minus(&w.scaled(c)).eig()?.values.iter().filter(|&&v| v > 0.0).sum())
    };
    let mut omega = match start {
        Some(s) => s.clone(),
        None => {
            let a = set.linear_min(&r.scaled(-1.0))?;
            let b = set.interior_point()?.into_op();
            if exact(&a)? <= exact(&b)? { a } else { b }
        }
    };
    let mut best_value = exact(&omega)?;
    let mut best = omega.clone();
    let mut lower = 0.0f64;
    let mut iterations = 0;
    let per_stage = (opts.max_iter / SMOOTHING_STAGES.len()).max(1);
    let d = r.dim() as f64;
    let cancelled = |t: &Option<CancelToken>| t.as_ref().is_some_and(CancelToken::is_cancelled);
    'stages: for &tau in &SMOOTHING_STAGES {
        let smooth = |w: &HermOperator| -> f64 {
            match r.minus(&w.scaled(c)).eig() {
                Ok(s) => s.values.iter().map(|&v| softplus(v, tau)).sum(),
                Err(_) => f64::INFINITY,
            }
        };
        for _ in 0..per_stage {
            if cancelled(&opts.cancel) {
                break 'stages;
            }
            iterations += 1;
            let s = r.minus(&omega.scaled(c)).eig()?;
            let fs: f64 = s.values.iter().map(|&v| softplus(v, tau)).sum();
            let weights: Vec<f64> = s.values.iter().map(|&v| -c * logistic(v / tau)).collect();
            let grad = HermOperator::from_hermitian_part(r.dims().to_vec(), s.weighted_sum(&weights));
            let vertex = set.linear_min(&grad)?;
            let gap = grad.inner(&omega) - grad.inner(&vertex);
            lower = lower.max(fs - gap - d * tau * std::f64::consts::LN_2);
            if gap <= opts.tol * 1e-2 {
                break;
            }
            let (gamma, neg) = golden_max(|g| -smooth(&omega.combine(1.0 - g, &vertex, g)), 0.0, 1.0, crate::measures::LINE_SEARCH_ITERS);
            if -neg >= fs {
                break;
            }
            omega = omega.combine(1.0 - gamma, &vertex, gamma);
            let v = exact(&omega)?;
            if v < best_value {
                best_value = v;
                best = omega.clone();
            }
        }
    }
    // subgradient linearization at the best point
    let s = r.minus(&best.scaled(c)).eig()?;
    let pos: Vec<f64> = s.values.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
    let p = HermOperator::from_hermitian_part(r.dims().to_vec(), s.weighted_sum(&pos));
    let vertex = set.linear_min(&p.scaled(-1.0))?;
    lower = lower.max(best_value - c * (p.inner(&vertex) - p.inner(&best)));
    Ok(PositivePartMin { value: best_value, lower: lower.clamp(0.0, best_value), point: best, iterations })
}

#[derive(Clone, Debug, Serialize)]
pub struct PositivePartPoint {
    pub y: f64,
    /// Minimum over the outer set (a lower curve).
    pub outer_value: f64,
    pub outer_lower: f64,
    /// Minimum over the inner set (an upper curve), when given.
    pub inner_value: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PositivePartCurve {
    pub n: usize,
    pub points: Vec<PositivePartPoint>,
}

impl PositivePartCurve {
    /// First grid y where the outer (resp. inner) curve falls to `threshold`.
    pub fn transition(&self, threshold: f64) -> (Option<f64>, Option<f64>) {
        let outer = self.points.iter().find(|p| p.outer_value <= threshold).map(|p| p.y);
        let inner = self.points.iter().find(|p| p.inner_value.is_some_and(|v| v <= threshold)).map(|p| p.y);
        (outer, inner)
    }
}

/// y ↦ min_{ω∈M_n} tr(ρ^{⊗n} − 2^{yn}ω)_+ on a grid, for an outer family and
/// optionally an inner one.
pub fn positive_part_curve(
    rho: &DensityMatrix,
    outer: &dyn SetFamily,
    inner: Option<&dyn SetFamily>,
    n: usize,
    y_grid: &[f64],
    opts: &FwOptions,
) -> Result<PositivePartCurve> {
    if rho.dims() != outer.copy_dims() {
        return Err(Error::DimensionMismatch(format!("state dims {:?} vs family copy dims {:?}", rho.dims(), outer.copy_dims())));
    }
    let r = rho.tensor_power(n, DEFAULT_DIM_CAP)?.with_dims(outer.dims(n))?.into_op();
    let outer_set = outer.set(n)?;
    let inner_set = inner.map(|f| f.set(n)).transpose()?;
    let mut points = Vec::with_capacity(y_grid.len());
    for &y in y_grid {
        let c = 2f64.powf(y * n as f64);
        let o = min_positive_part(&r, outer_set.as_ref(), c, None, opts)?;
        let i = match &inner_set {
            Some(s) => Some(min_positive_part(&r, s.as_ref(), c, None, opts)?.value),
            None => None,
        };
        points.push(PositivePartPoint { y, outer_value: o.value, outer_lower: o.lower, inner_value: i });
    }
    Ok(PositivePartCurve { n, points })
}

struct UnitBox;

impl Projector for UnitBox {
    fn project(&self, x: &HermOperator) -> Result<HermOperator> {
        let s = x.eig()?;
        Ok(HermOperator::from_hermitian_part(x.dims().to_vec(), s.map(|v| v.clamp(0.0, 1.0))))
    }
}

/// {A : tr(Aσ) ≤ bound}.
struct HalfSpace {
    normal: HermOperator,
    bound: f64,
    norm_sq: f64,
}

impl Projector for HalfSpace {
    fn project(&self, x: &HermOperator) -> Result<HermOperator> {
        let excess = x.inner(&self.normal) - self.bound;
        Ok(if excess > 0.0 { x.combine(1.0, &self.normal, -excess / self.norm_sq) } else { x.clone() })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaPrimal {
    pub value: f64,
    /// The final test passed the separation oracle without rescaling.
    pub certified: bool,
    pub witnesses: usize,
    pub rounds: usize,
    /// max_{σ∈M} tr(Aσ) for the returned A, as found by the oracle.
    pub constraint_max: f64,
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidArgument(format!("K = {k} must be positive")));
    }
    Ok(())
}

/// Largest tr(Aσ) over M via the set's linear minimization oracle.
fn oracle_max(set: &dyn ConvexSet, a: &HermOperator) -> Result<(f64, HermOperator)> {
    let s = set.linear_min(&a.scaled(-1.0))?;
    Ok((a.inner(&s), s))
}

/// max tr(Aπ) subject to 0 ⪯ A ⪯ 1 and tr(Aσ) ≤ 1/K for σ ∈ M, by cutting
/// planes: a finite witness set is grown with the oracle's most violated
/// member, each finite problem is solved by projected gradient ascent, and
/// the final A is rescaled against a fresh oracle call so the value is
/// feasible for every member the oracle can see.
pub fn lambda_primal(pi: &DensityMatrix, set: &dyn ConvexSet, k: f64, witness_budget: usize) -> Result<LambdaPrimal> {
    check_k(k)?;
    if pi.dim() != set.dim() {
        return Err(Error::DimensionMismatch("π and the set act on different spaces".into()));
    }
    let bound = 1.0 / k;
    if k <= 1.0 {
        return Ok(LambdaPrimal { value: 1.0, certified: true, witnesses: 0, rounds: 0, constraint_max: 1.0 });
    }
    // A = I/K is always feasible
    let mut best = LambdaPrimal { value: bound, certified: true, witnesses: 0, rounds: 0, constraint_max: bound };
    let mut witnesses = vec![set.linear_min(&pi.op().scaled(-1.0))?];
    let mut a = HermOperator::zeros(pi.dims());
    for round in 1..=witness_budget.max(1) {
        a = solve_finite_primal(pi.op(), &witnesses, bound, &a)?;
        let (c, sigma) = oracle_max(set, &a)?;
        let scale = if c > bound { bound / c } else { 1.0 };
        let value = scale * a.inner(pi.op());
        let certified = c <= bound * (1.0 + 1e-9);
        if value > best.value {
            best = LambdaPrimal { value, certified, witnesses: witnesses.len(), rounds: round, constraint_max: c * scale };
        }
        if certified {
            break;
        }
        witnesses.push(sigma);
    }
    Ok(best)
}

fn solve_finite_primal(pi: &HermOperator, witnesses: &[HermOperator], bound: f64, start: &HermOperator) -> Result<HermOperator> {
    let halves: Vec<HalfSpace> = witnesses
        .iter()
        .map(|w| HalfSpace { normal: w.clone(), bound, norm_sq: w.inner(w).max(f64::MIN_POSITIVE) })
        .collect();
    let mut parts: Vec<&dyn Projector> = vec![&UnitBox];
    parts.extend(halves.iter().map(|h| h as &dyn Projector));
    let mut a = start.clone();
    for _ in 0..400 {
        let step = a.combine(1.0, pi, 0.25);
        let next = dykstra(&step, &parts, 2000, 1e-12)?.point;
        let moved = next.frobenius_distance(&a);
        a = next;
        if moved < 1e-11 {
            break;
        }
    }
    Ok(a)
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaDual {
    pub value: f64,
    pub b: f64,
    #[serde(skip)]
    pub mu: HermOperator,
    pub rounds: usize,
}

/// min_{μ∈M, b≥0} tr(π − bμ)_+ + b/K by alternating a golden-section search
/// over b ∈ [0, 2K] with Frank-Wolfe over μ, from several starts. Every
/// returned value is attained by a member of M, so it bounds λ from above.
pub fn lambda_dual(pi: &DensityMatrix, set: &dyn ConvexSet, k: f64, opts: &FwOptions, seed: u64) -> Result<LambdaDual> {
    check_k(k)?;
    if pi.dim() != set.dim() {
        return Err(Error::DimensionMismatch("π and the set act on different spaces".into()));
    }
    let r = pi.op();
    let objective = |mu: &HermOperator, b: f64| -> f64 {
        match r.minus(&mu.scaled(b)).eig() {
            Ok(s) => s.values.iter().filter(|&&v| v > 0.0).sum::<f64>() + b / k,
            Err(_) => f64::INFINITY,
        }
    };
    let best_b = |mu: &HermOperator| -> (f64, f64) {
        let (b, neg) = golden_max(|b| -objective(mu, b), 0.0, 2.0 * k, 80);
        let mut out = (b, -neg);
        for edge in [0.0, 2.0 * k] {
            let v = objective(mu, edge);
            if v < out.1 {
                out = (edge, v);
            }
        }
        out
    };
    let starts = [set.linear_min(&r.scaled(-1.0))?, set.interior_point()?.into_op(), set.sample_member(seed)?.into_op()];
    let mut best: Option<LambdaDual> = None;
    for start in starts {
        let mut mu = start;
        let (mut b, mut value) = best_b(&mu);
        let mut rounds = 0;
        for _ in 0..30 {
            rounds += 1;
            let step = min_positive_part(r, set, b, Some(&mu), opts)?;
            let (nb, nv) = best_b(&step.point);
            if nv >= value - 1e-10 {
                if nv < value {
                    (mu, b, value) = (step.point, nb, nv);
                }
                break;
            }
            (mu, b, value) = (step.point, nb, nv);
        }
        if best.as_ref().is_none_or(|x| value < x.value) {
            best = Some(LambdaDual { value, b, mu, rounds });
        }
    }
    Ok(best.expect("at least one start"))
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaPoint {
    pub k: f64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub certified: bool,
}

/// Primal and dual values of λ(π, M, K) on one K. The primal is also tried
/// with the test read off the dual solution, a scaled projector onto the
/// positive part of π − bμ.
pub fn lambda_point(pi: &DensityMatrix, set: &dyn ConvexSet, k: f64, witness_budget: usize, opts: &FwOptions, seed: u64) -> Result<LambdaPoint> {
    let mut primal = lambda_primal(pi, set, k, witness_budget)?;
    let dual = lambda_dual(pi, set, k, opts, seed)?;
    let s = pi.op().minus(&dual.mu.scaled(dual.b)).eig()?;
    let pos: Vec<f64> = s.values.iter().map(|&v| if v > 1e-12 { 1.0 } else { 0.0 }).collect();
    let p = HermOperator::from_hermitian_part(pi.dims().to_vec(), s.weighted_sum(&pos));
    let (c, _) = oracle_max(set, &p)?;
    let scale = if c > 1.0 / k { 1.0 / (k * c) } else { 1.0 };
    let v = scale * p.inner(pi.op());
    if v > primal.value {
        primal.value = v;
        primal.constraint_max = c * scale;
    }
    Ok(LambdaPoint { k, primal: primal.value, dual: dual.value, gap: dual.value - primal.value, certified: primal.certified })
}

/// S(ρ‖σ) for witnesses σ, the diagnostic ceiling of the exponent sequence.
pub fn witness_ceiling(rho: &DensityMatrix, witnesses: &[DensityMatrix]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for w in witnesses {
        best = best.min(relative_entropy_op(rho.op(), w.op())?.value);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_sets::ppt_set;
    use crate::states::{max_entangled, random_state, PureState};

    fn pair() -> (DensityMatrix, DensityMatrix) {
        (random_state(2, 2, 21).unwrap(), random_state(2, 2, 22).unwrap())
    }

    #[test]
    fn np_test_extremes() {
        let (rho, sigma) = pair();
        let t0 = np_test(&rho, &sigma, 2, 0.0).unwrap().report(&rho, &sigma, 2).unwrap();
        assert!(t0.type1.abs() < 1e-12);
        let big = np_test(&rho, &sigma, 2, 1e12).unwrap().report(&rho, &sigma, 2).unwrap();
        assert!(big.type2.abs() < 1e-12 && (big.type1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_of_identical_states() {
        let (rho, _) = pair();
        let (r, t) = beta_n(&rho, &rho, 3, 0.1).unwrap();
        assert!((r.type2 - 0.9).abs() < 1e-9, "{r:?}");
        assert!((r.type1 - 0.1).abs() < 1e-9);
        let direct = t.report(&rho, &rho, 3).unwrap();
        assert!((direct.type1 - 0.1).abs() < 1e-9);
        assert!(t.bound_violation().unwrap() < 1e-9);
    }

    #[test]
    fn beta_of_orthogonal_states() {
        let a = DensityMatrix::pure(&PureState::basis(&[2], 0));
        let b = DensityMatrix::pure(&PureState::basis(&[2], 1));
        let (r, _) = beta_n(&a, &b, 1, 0.05).unwrap();
        assert!(r.type2.abs() < 1e-12);
    }

    #[test]
    fn dense_matches_classical_on_diagonal_pair() {
        let rho = DensityMatrix::from_diag(&[0.7, 0.3]).unwrap();
        let sigma = DensityMatrix::from_diag(&[0.4, 0.6]).unwrap();
        for n in 1..=5 {
            let (r, _) = beta_n(&rho, &sigma, n, 0.1).unwrap();
            let c = beta_n_classical(&[0.7, 0.3], &[0.4, 0.6], n, 0.1).unwrap();
            assert!((r.type2 - c.beta).abs() < 1e-9, "n = {n}: {} vs {}", r.type2, c.beta);
        }
    }

    #[test]
    fn beta_is_monotone_in_eps() {
        let (rho, sigma) = pair();
        let mut prev = 1.0;
        for k in 1..10 {
            let (r, _) = beta_n(&rho, &sigma, 2, 0.1 * k as f64).unwrap();
            assert!(r.type2 <= prev + 1e-12);
            prev = r.type2;
        }
    }

    #[test]
    fn positive_part_extremes() {
        let (rho, sigma) = pair();
        assert!(positive_part_iid(&rho, &sigma, 3, 50.0).unwrap() < 1e-12);
        assert!(positive_part_iid(&rho, &sigma, 3, -50.0).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn lambda_for_bell_against_ppt() {
        let pi = max_entangled(2).density();
        let set = ppt_set(&[2, 2]).unwrap();
        for k in [0.5, 2f64.sqrt(), 4.0] {
            let p = lambda_point(&pi, &set, k, 8, &FwOptions::default(), 1).unwrap();
            let expect = (2.0 / k).min(1.0);
            assert!(p.primal <= p.dual + 1e-6, "{p:?}");
            assert!(p.gap <= 1e-3, "{p:?}");
            assert!((p.primal - expect).abs() < 2e-3, "{p:?}");
        }
    }
}
