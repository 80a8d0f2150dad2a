//! Entanglement-type measures relative to a convex set M: the relative
//! entropy distance E_M, the log robustness LR_M, certified upper bounds on
//! its smoothed version, the constructive smoothing of a state under an
//! operator bound, and the per-copy regularization curve.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::Serialize;

use crate::divergences::{golden_max, max_relative_entropy_op, PairSpectrum};
use crate::error::{Error, Result};
use crate::linalg::{
    fidelity, matrix_fn_spectrum, positive_part, trace_norm, CMat, HermOperator, MatrixFn, Spectrum, DEFAULT_DIM_CAP,
};
use crate::state_sets::{dykstra, ConvexSet, Part, Projector, SetFamily, SetProjector, DYKSTRA_MAX_ITER, DYKSTRA_TOL};
use crate::states::DensityMatrix;

/// Weight of I/D mixed into every iterate before taking logarithms.
pub const FULL_RANK_SAFEGUARD: f64 = 1e-10;
/// Golden-section iterations of the Frank-Wolfe line search.
pub const LINE_SEARCH_ITERS: usize = 30;
/// Largest Dykstra residual accepted as "feasible" by the robustness bisection.
pub const FEASIBILITY_TOL: f64 = 1e-7;

/// Cooperative cancellation flag shared with long-running optimizations.
#[derive(Clone, Debug, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

/// Whether a value is the quantity itself (up to solver tolerance) or only a
/// certified upper bound on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Estimate,
    UpperBound,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureResult {
    pub value: f64,
    #[serde(skip)]
    pub certificate: DensityMatrix,
    /// (lower, upper).
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub kind: BoundKind,
    pub converged: bool,
    /// Objective values per iteration, for solvers that have them.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct FwOptions {
    pub max_iter: usize,
    /// Stop when the Frank-Wolfe gap falls below this.
    pub tol: f64,
    pub cancel: Option<CancelToken>,
}

impl Default for FwOptions {
    fn default() -> Self {
        Self { max_iter: 400, tol: 1e-4, cancel: None }
    }
}

/// Relative entropy S(ρ‖σ) in bits together with its gradient in σ.
struct RelEntObjective {
    rho: HermOperator,
    rho_spec: Spectrum,
    eta: f64,
}

impl RelEntObjective {
    fn new(rho: &DensityMatrix) -> Result<Self> {
        Ok(Self { rho: rho.op().clone(), rho_spec: rho.op().eig()?, eta: FULL_RANK_SAFEGUARD })
    }

    fn guarded(&self, sigma: &HermOperator) -> HermOperator {
        crate::state_sets::mix_with_identity(sigma, self.eta)
    }

    fn value(&self, sigma: &HermOperator) -> Result<f64> {
        let g = self.guarded(sigma);
        let ps = PairSpectrum::from_spectra(&self.rho_spec, &g.eig()?);
        Ok(ps.relative_entropy())
    }

    /// −D log₂(σ)[ρ]: in the eigenbasis of σ, entries of ρ times the divided
    /// differences of the logarithm.
    fn gradient(&self, sigma: &HermOperator) -> Result<(f64, HermOperator)> {
        let g = self.guarded(sigma);
        let s = g.eig()?;
        let value = PairSpectrum::from_spectra(&self.rho_spec, &s).relative_entropy();
        let v = &s.vectors;
        let r = v.adjoint().matmul(self.rho.mat()).matmul(v);
        let q = &s.values;
        let d = q.len();
        let ln2 = std::f64::consts::LN_2;
        let mut m = CMat::zeros(d, d);
        for j in 0..d {
            for k in 0..d {
                let (a, b) = (q[j].max(f64::MIN_POSITIVE), q[k].max(f64::MIN_POSITIVE));
                let dd = if (a - b).abs() > 1e-12 * a.max(b) { (a.ln() - b.ln()) / (a - b) } else { 2.0 / (a + b) };
                m[(j, k)] = r[(j, k)] * (-dd / ln2);
            }
        }
        let grad = v.matmul(&m).matmul(&v.adjoint());
        Ok((value, HermOperator::from_hermitian_part(sigma.dims().to_vec(), grad)))
    }
}

fn exact_relative_entropy(rho: &DensityMatrix, sigma: &HermOperator) -> Result<f64> {
    Ok(crate::divergences::relative_entropy_op(rho.op(), sigma)?.value)
}

fn check_layout(rho: &DensityMatrix, set: &dyn ConvexSet) -> Result<()> {
    if rho.dim() != set.dim() {
        return Err(Error::DimensionMismatch(format!("state dimension {} vs set dimension {}", rho.dim(), set.dim())));
    }
    Ok(())
}

/// E_M(ρ) = inf_{σ∈M} S(ρ‖σ) by Frank-Wolfe: linear minimization over M
/// along the gradient, exact line search on the segment, and the Frank-Wolfe
/// gap as a lower bound on the optimum.
pub fn rel_ent_to_set(rho: &DensityMatrix, set: &dyn ConvexSet, opts: &FwOptions) -> Result<MeasureResult> {
    check_layout(rho, set)?;
    let start = set.interior_point()?;
    let lmin = start.op().eig()?.lambda_min();
    if lmin <= 0.0 {
        return Err(Error::Numerical(format!("set {} offered no full-rank starting point (λ_min = {lmin:.3e})", set.label())));
    }
    let obj = RelEntObjective::new(rho)?;
    let mut sigma = warm_start(rho, set, start.op(), &obj)?;
    let mut lower = 0.0f64;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut f = obj.value(&sigma)?;
    while iterations < opts.max_iter {
        if opts.cancel.as_ref().is_some_and(CancelToken::is_cancelled) {
            break;
        }
        iterations += 1;
        let (value, grad) = obj.gradient(&sigma)?;
        f = value;
        trace.push(f);
        let vertex = set.linear_min(&grad)?;
        let gap = grad.inner(&sigma) - grad.inner(&vertex);
        lower = lower.max(f - gap);
        if gap < opts.tol {
            converged = true;
            break;
        }
        let phi = |g: f64| -> f64 {
            let cand = sigma.combine(1.0 - g, &vertex, g);
            obj.value(&cand).map(|v| -v).unwrap_or(f64::NEG_INFINITY)
        };
        let (gamma, neg) = golden_max(phi, 0.0, 1.0, LINE_SEARCH_ITERS);
        if -neg >= f {
            // no descent along the segment within line-search resolution
            converged = gap < 10.0 * opts.tol;
            break;
        }
        sigma = sigma.combine(1.0 - gamma, &vertex, gamma);
        f = -neg;
    }
    let cert_value = exact_relative_entropy(rho, &sigma)?;
    let value = if cert_value.is_finite() { cert_value } else { f };
    Ok(MeasureResult {
        value,
        certificate: DensityMatrix::assume_valid(sigma),
        bracket: (lower.min(value), value),
        iterations,
        kind: BoundKind::Estimate,
        converged,
        trace,
    })
}

/// Best of the interior point and its mixtures with the projection of ρ onto
/// the set. For members of the set this lands next to ρ itself, which plain
/// Frank-Wolfe only approaches at a sublinear rate.
fn warm_start(rho: &DensityMatrix, set: &dyn ConvexSet, interior: &HermOperator, obj: &RelEntObjective) -> Result<HermOperator> {
    let mut best = interior.clone();
    let mut best_value = obj.value(&best)?;
    let near = set.repair(&set.project(rho.op())?.point)?;
    for k in 1..=8 {
        let t = 10f64.powi(-k);
        let cand = near.combine(1.0 - t, interior, t);
        let v = obj.value(&cand)?;
        if v < best_value {
            best_value = v;
            best = cand;
        }
    }
    Ok(best)
}

/// Decides whether {σ ∈ M : σ ⪰ B} is nonempty by Dykstra projections; on
/// success returns the repaired feasible point.
fn feasible_above(set: &dyn ConvexSet, b: &HermOperator, start: &HermOperator) -> Result<Feasibility> {
    let above = Part::Above(b.clone());
    let own_parts = set.parts();
    let set_proj = SetProjector(set);
    let mut refs: Vec<&dyn Projector> = vec![&above];
    match &own_parts {
        Some(parts) => refs.extend(parts.iter().map(|p| p as &dyn Projector)),
        None => refs.push(&set_proj),
    }
    let out = dykstra(start, &refs, DYKSTRA_MAX_ITER, DYKSTRA_TOL)?;
    if out.max_violation <= FEASIBILITY_TOL {
        Ok(Feasibility::Feasible(set.repair(&out.point)?))
    } else if out.converged {
        Ok(Feasibility::Infeasible)
    } else {
        Ok(Feasibility::Unknown)
    }
}

enum Feasibility {
    Feasible(HermOperator),
    Infeasible,
    Unknown,
}

/// LR_M(ρ) = inf_{σ∈M} S_max(ρ‖σ) by bisection on s with Dykstra feasibility
/// of {σ ∈ M : σ ⪰ 2^{-s}ρ}. The upper end is always certified by an exact
/// S_max evaluation of a member of M.
pub fn log_robustness(rho: &DensityMatrix, set: &dyn ConvexSet, tol: f64) -> Result<MeasureResult> {
    check_layout(rho, set)?;
    let start = set.interior_point()?;
    let mut best = start.op().clone();
    let mut hi = max_relative_entropy_op(rho.op(), &best)?.value;
    if !hi.is_finite() {
        return Err(Error::Numerical("interior point does not cover the support of ρ".into()));
    }
    let mut lo = 0.0f64;
    let mut iterations = 0;
    let mut converged = true;
    if let Feasibility::Feasible(sigma) = feasible_above(set, rho.op(), &best)? {
        let v = max_relative_entropy_op(rho.op(), &sigma)?.value;
        if v < hi {
            hi = v;
            best = sigma;
        }
    }
    while hi - lo > tol && iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let b = rho.op().scaled(2f64.powf(-mid));
        match feasible_above(set, &b, &best)? {
            Feasibility::Feasible(sigma) => {
                let v = max_relative_entropy_op(rho.op(), &sigma)?.value;
                if v < hi {
                    hi = v;
                    best = sigma;
                } else {
                    // repair overshoot; shrink toward the certified value
                    hi = hi.min(v);
                    if v >= hi && mid - lo < tol {
                        break;
                    }
                    lo = lo.max(mid - tol);
                }
            }
            Feasibility::Infeasible => lo = mid,
            Feasibility::Unknown => {
                converged = false;
                break;
            }
        }
    }
    Ok(MeasureResult {
        value: hi,
        certificate: DensityMatrix::assume_valid(best),
        bracket: (lo, hi),
        iterations,
        kind: BoundKind::Estimate,
        converged,
        trace: Vec::new(),
    })
}

/// Slack of each postcondition of the smoothing construction (≥ 0 means it
/// holds).
#[derive(Clone, Debug, Serialize)]
pub struct DrReport {
    pub trace_delta: f64,
    /// λ_min((1 − trΔ)^{-1} Y − ρ̃).
    pub operator_bound_slack: f64,
    pub fidelity: f64,
    /// F(ρ, ρ̃) − (1 − trΔ).
    pub fidelity_slack: f64,
    pub trace_distance: f64,
    /// 4√trΔ − ‖ρ − ρ̃‖₁.
    pub trace_norm_slack: f64,
}

impl DrReport {
    pub fn min_slack(&self) -> f64 {
        self.operator_bound_slack.min(self.fidelity_slack).min(self.trace_norm_slack)
    }

    pub fn all_hold(&self, slack: f64) -> bool {
        self.min_slack() >= -slack
    }
}

/// Given ρ ≤ Y + Δ with trΔ < 1, returns ρ̃ = TρT†/tr(TρT†) with
/// T = Y^{1/2}(Y+Δ)^{-1/2}, plus the slack of its three guarantees.
pub fn dr_smooth(rho: &DensityMatrix, y: &HermOperator, delta: &HermOperator) -> Result<(DensityMatrix, DrReport)> {
    if y.dim() != rho.dim() || delta.dim() != rho.dim() {
        return Err(Error::DimensionMismatch("ρ, Y and Δ must have equal dimensions".into()));
    }
    crate::linalg::check_psd(y, "dr_smooth (Y)")?;
    crate::linalg::check_psd(delta, "dr_smooth (Δ)")?;
    let sum = y.plus(delta);
    let gap = sum.minus(rho.op()).eig()?.lambda_min();
    if gap < -1e-9 {
        return Err(Error::Domain { op: "dr_smooth (Y + Δ − ρ)", eigenvalue: gap });
    }
    let tr_delta = delta.trace();
    if tr_delta >= 1.0 {
        return Err(Error::InvalidArgument(format!("tr Δ = {tr_delta} must be below 1")));
    }
    let y_root = matrix_fn_spectrum(&y.eig()?, y.dims(), MatrixFn::Sqrt)?;
    let inv_root = matrix_fn_spectrum(&sum.eig()?, y.dims(), MatrixFn::Pow(-0.5))?;
    let t = y_root.mat().matmul(inv_root.mat());
    let prime = HermOperator::new(rho.dims().to_vec(), t.matmul(rho.op().mat()).matmul(&t.adjoint()))?;
    let tp = prime.trace();
    if tp <= 0.0 {
        return Err(Error::Numerical("TρT† vanished".into()));
    }
    let smoothed = prime.scaled(1.0 / tp);
    let operator_bound_slack = y.scaled(1.0 / (1.0 - tr_delta)).minus(&smoothed).eig()?.lambda_min();
    let fid = fidelity(rho.op(), &smoothed)?;
    let dist = trace_norm(&rho.op().minus(&smoothed))?;
    let report = DrReport {
        trace_delta: tr_delta,
        operator_bound_slack,
        fidelity: fid,
        fidelity_slack: fid - (1.0 - tr_delta),
        trace_distance: dist,
        trace_norm_slack: 4.0 * tr_delta.sqrt() - dist,
    };
    Ok((DensityMatrix::assume_valid(smoothed), report))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothingStrategy {
    /// Smoothing by [`dr_smooth`] against 2^s σ on a fixed grid of s.
    Dr,
    /// ρ̃ = (1 − ε/2)ρ + (ε/2)σ with σ the robustness certificate.
    Mixing,
    /// The smaller of the two.
    Best,
}

/// Number of s values tried by the DR route, spread over [0, LR].
const DR_GRID: usize = 200;

/// Certified upper bound on LR^ε_M(ρ) = min over the trace-norm ε-ball of
/// LR_M. The unsmoothed value is always a candidate, so the bound never
/// exceeds LR_M(ρ), and every candidate set grows with ε, so the bound is
/// nonincreasing in ε.
pub fn smooth_log_robustness(
    rho: &DensityMatrix,
    set: &dyn ConvexSet,
    eps: f64,
    strategy: SmoothingStrategy,
    tol: f64,
) -> Result<MeasureResult> {
    if !(0.0..2.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("smoothing parameter {eps} outside [0, 2)")));
    }
    let base = log_robustness(rho, set, tol)?;
    smooth_from_certificate(rho, &base, eps, strategy)
}

/// Smoothing bounds built on an already computed robustness result.
pub fn smooth_from_certificate(
    rho: &DensityMatrix,
    base: &MeasureResult,
    eps: f64,
    strategy: SmoothingStrategy,
) -> Result<MeasureResult> {
    if !(0.0..2.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("smoothing parameter {eps} outside [0, 2)")));
    }
    let l = base.value;
    let sigma = base.certificate.op();
    let mut best = l;
    let mut best_state = rho.clone();
    if eps > 0.0 && matches!(strategy, SmoothingStrategy::Mixing | SmoothingStrategy::Best) {
        let mixed = rho.mix(1.0 - eps / 2.0, &base.certificate);
        let closed = ((1.0 - eps / 2.0) * 2f64.powf(l) + eps / 2.0).log2();
        let exact = max_relative_entropy_op(mixed.op(), sigma)?.value;
        let v = closed.min(exact);
        if v < best {
            best = v;
            best_state = mixed;
        }
    }
    if eps > 0.0 && matches!(strategy, SmoothingStrategy::Dr | SmoothingStrategy::Best) {
        for j in 0..DR_GRID {
            let s = l * j as f64 / DR_GRID as f64;
            let y = sigma.scaled(2f64.powf(s));
            let (delta, _) = positive_part(&rho.op().minus(&y))?;
            let td = delta.trace();
            if td >= 1.0 {
                continue;
            }
            let Ok((smoothed, report)) = dr_smooth(rho, &y, &delta) else { continue };
            if report.trace_distance > eps {
                continue;
            }
            let v = s - (1.0 - td).log2();
            if v < best {
                best = v;
                best_state = smoothed;
            }
        }
    }
    Ok(MeasureResult {
        value: best,
        certificate: best_state,
        bracket: (f64::NEG_INFINITY, best),
        iterations: base.iterations,
        kind: BoundKind::UpperBound,
        converged: base.converged,
        trace: Vec::new(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    /// E_{M_n}(ρ^{⊗n}) / n.
    pub per_copy: f64,
    pub result: MeasureResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubadditivityCheck {
    pub n: usize,
    pub m: usize,
    pub a_sum: f64,
    pub a_n_plus_a_m: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularizedCurve {
    pub points: Vec<CurvePoint>,
    pub subadditivity: Vec<SubadditivityCheck>,
}

/// E_{M_n}(ρ^{⊗n})/n for n = 1..=n_max and the subadditivity diagnostic
/// a_{n+m} ≤ a_n + a_m on the computed values.
pub fn regularized_curve(rho: &DensityMatrix, family: &dyn SetFamily, n_max: usize, opts: &FwOptions) -> Result<RegularizedCurve> {
    if rho.dims() != family.copy_dims() {
        return Err(Error::DimensionMismatch(format!("state dims {:?} vs family copy dims {:?}", rho.dims(), family.copy_dims())));
    }
    let mut points = Vec::new();
    for n in 1..=n_max {
        let p = rho.tensor_power(n, DEFAULT_DIM_CAP)?.with_dims(family.dims(n))?;
        let set = family.set(n)?;
        let r = rel_ent_to_set(&p, set.as_ref(), opts)?;
        points.push(CurvePoint { n, per_copy: r.value / n as f64, result: r });
    }
    let a: Vec<f64> = points.iter().map(|p| p.result.value).collect();
    let mut subadditivity = Vec::new();
    for n in 1..=n_max {
        for m in n..=n_max {
            if n + m <= n_max {
                let lhs = a[n + m - 1];
                let rhs = a[n - 1] + a[m - 1];
                subadditivity.push(SubadditivityCheck { n, m, a_sum: lhs, a_n_plus_a_m: rhs, holds: lhs <= rhs + 1e-6 });
            }
        }
    }
    Ok(RegularizedCurve { points, subadditivity })
}

/// E for separable states bracketed by the PPT relaxation (the Frank-Wolfe
/// lower bound) and the product-hull inner approximation.
#[derive(Clone, Debug, Serialize)]
pub struct SeparabilityBracket {
    pub ppt: MeasureResult,
    pub inner: MeasureResult,
    pub lower: f64,
    pub upper: f64,
}

pub fn separability_bracket(
    rho: &DensityMatrix,
    ppt: &dyn ConvexSet,
    inner: &dyn ConvexSet,
    opts: &FwOptions,
) -> Result<SeparabilityBracket> {
    let p = rel_ent_to_set(rho, ppt, opts)?;
    let i = rel_ent_to_set(rho, inner, opts)?;
    let (lower, upper) = (p.bracket.0, i.value);
    Ok(SeparabilityBracket { ppt: p, inner: i, lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_sets::{ppt_set, sep_inner_set};
    use crate::states::{max_entangled, random_state};

    fn bell() -> DensityMatrix {
        max_entangled(2).density()
    }

    #[test]
    fn member_has_zero_measures() {
        let set = ppt_set(&[2, 2]).unwrap();
        let rho = random_state(2, 2, 1).unwrap().kron(&random_state(2, 1, 2).unwrap());
        let e = rel_ent_to_set(&rho, &set, &FwOptions::default()).unwrap();
        assert!(e.value < 1e-3, "{}", e.value);
        let lr = log_robustness(&rho, &set, 1e-4).unwrap();
        assert!(lr.value < 1e-3, "{}", lr.value);
    }

    #[test]
    fn bell_measures_against_ppt() {
        let set = ppt_set(&[2, 2]).unwrap();
        let e = rel_ent_to_set(&bell(), &set, &FwOptions::default()).unwrap();
        assert!((e.value - 1.0).abs() < 0.02, "{e:?}");
        let w = e.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        assert!(w, "objective not monotone");
        let lr = log_robustness(&bell(), &set, 1e-4).unwrap();
        assert!((lr.value - 1.0).abs() < 0.01, "{lr:?}");
        assert!(e.value <= lr.value + 1e-6);
    }

    #[test]
    fn dr_trivial_cases() {
        let rho = random_state(3, 3, 4).unwrap();
        let zero = HermOperator::zeros(&[3]);
        let (r, rep) = dr_smooth(&rho, rho.op(), &zero).unwrap();
        assert!(r.op().frobenius_distance(rho.op()) < 1e-10);
        assert!((rep.fidelity - 1.0).abs() < 1e-9);
        let half = rho.op().scaled(0.5);
        let (r, rep) = dr_smooth(&rho, &half, &half).unwrap();
        assert!(r.op().frobenius_distance(rho.op()) < 1e-9);
        assert!(rep.all_hold(1e-9));
    }

    #[test]
    fn dr_rejects_violated_precondition() {
        let rho = random_state(2, 2, 4).unwrap();
        let y = rho.op().scaled(0.5);
        let zero = HermOperator::zeros(&[2]);
        assert!(matches!(dr_smooth(&rho, &y, &zero), Err(Error::Domain { .. })));
    }

    #[test]
    fn smoothing_is_monotone_and_bounded() {
        let set = ppt_set(&[2, 2]).unwrap();
        let base = log_robustness(&bell(), &set, 1e-4).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..8 {
            let eps = 0.05 * k as f64;
            let v = smooth_from_certificate(&bell(), &base, eps, SmoothingStrategy::Best).unwrap();
            assert!(v.value <= prev + 1e-9);
            assert!(v.value <= base.value + 1e-12);
            prev = v.value;
        }
        let zero = smooth_from_certificate(&bell(), &base, 0.0, SmoothingStrategy::Best).unwrap();
        assert_eq!(zero.value, base.value);
        assert!(smooth_from_certificate(&bell(), &base, 2.0, SmoothingStrategy::Best).is_err());
    }

    #[test]
    fn inner_bracket_contains_ppt_value() {
        let ppt = ppt_set(&[2, 2]).unwrap();
        let inner = sep_inner_set(&[2, 2], 8, 3).unwrap();
        let b = separability_bracket(&bell(), &ppt, &inner, &FwOptions::default()).unwrap();
        assert!(b.lower <= 1.0 + 1e-6 && b.upper >= 1.0 - 0.02, "{b:?}");
    }
}
