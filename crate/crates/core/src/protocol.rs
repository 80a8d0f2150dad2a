//! Monte-Carlo simulation of the symmetrize / discard / measure / reconstruct
//! entanglement test.
//!
//! A run never forms the n-copy state. Each copy carries its own single-copy
//! state, the copy sequence is permuted uniformly at random, the first ⌊αn⌋
//! positions are discarded, and every remaining copy is measured with the
//! product frame independently. The frequencies feed the dual-frame
//! reconstruction L_n, and the trial accepts when ‖L_n − ρ‖₁ ≤ ε_gap/2.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{fmt12, trace_norm, HermOperator};
use crate::povm::{reconstruct, Frame};
use crate::random;
use crate::measures::{rel_ent_to_set, FwOptions};
use crate::state_sets::{ppt_set, sep_inner_set, ConvexSet, Membership};
use crate::states::DensityMatrix;

/// Two-sided 95% normal quantile for the Wilson interval.
const WILSON_Z: f64 = 1.959_963_984_540_054;
/// Tolerance for the separability check on adversary copies.
const ADVERSARY_PPT_TOL: f64 = 1e-9;

pub const THREADS_ENV: &str = "STEINLAB_THREADS";

/// Recorded on every alternative run.
pub const ADVERSARY_LIMITATION: &str = "adversaries are convex mixtures of permuted product-copy sequences, a strict subset of all separable n-copy states";

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub target: DensityMatrix,
    pub n: usize,
    pub alpha: f64,
    pub eps_gap: f64,
    /// One local frame per party; the measured frame is their tensor product.
    pub frames: Vec<Frame>,
    pub trials: usize,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn threshold(&self) -> f64 {
        self.eps_gap / 2.0
    }

    pub fn discarded(&self, n: usize) -> usize {
        (self.alpha * n as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.eps_gap > 0.0) {
            return Err(Error::InvalidArgument(format!("eps_gap = {} must be positive", self.eps_gap)));
        }
        if self.frames.is_empty() {
            return Err(Error::InvalidArgument("no local frames".into()));
        }
        let frame_dims: Vec<usize> = self.frames.iter().map(Frame::dim).collect();
        if frame_dims.iter().product::<usize>() != self.target.dim() {
            return Err(Error::DimensionMismatch(format!("local frames on {:?} do not match target dimension {}", frame_dims, self.target.dim())));
        }
        Ok(())
    }

    /// Product of the local frames, relabelled with the target's layout.
    pub fn global_frame(&self) -> Result<Frame> {
        self.validate()?;
        let mut f = self.frames[0].clone();
        for g in &self.frames[1..] {
            f = f.tensor(g);
        }
        let dims = self.target.dims().to_vec();
        f.elements = f.elements.into_iter().map(|m| m.with_dims(dims.clone())).collect::<Result<_>>()?;
        f.duals = f.duals.into_iter().map(|m| m.with_dims(dims.clone())).collect::<Result<_>>()?;
        Ok(f)
    }
}

/// Produces the single-copy states of one n-copy sequence.
pub type SequenceGenerator = dyn Fn(usize, &mut random::SeededRng) -> Vec<DensityMatrix> + Send + Sync;

pub enum Adversary {
    /// ω_n = σ^⊗n.
    Iid(DensityMatrix),
    /// Copy i carries `pool[i mod len]` before the random permutation.
    PermutedProducts(Vec<DensityMatrix>),
    /// Arbitrary per-trial sequence; not checked for separability.
    Custom { label: String, generator: Box<SequenceGenerator> },
}

impl std::fmt::Debug for Adversary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl Adversary {
    pub fn label(&self) -> String {
        match self {
            Self::Iid(_) => "iid".into(),
            Self::PermutedProducts(pool) => format!("permuted_products[{}]", pool.len()),
            Self::Custom { label, .. } => format!("custom:{label}"),
        }
    }

    /// Checks every fixed copy state against the PPT set of the target
    /// layout. PPT coincides with separability for 2×2 and 2×3.
    pub fn validate(&self, dims: &[usize]) -> Result<bool> {
        let states: &[DensityMatrix] = match self {
            Self::Iid(s) => std::slice::from_ref(s),
            Self::PermutedProducts(pool) => pool,
            Self::Custom { .. } => return Ok(false),
        };
        if states.is_empty() {
            return Err(Error::InvalidArgument("adversary pool is empty".into()));
        }
        let ppt = ppt_set(dims)?;
        for s in states {
            if s.dims() != dims {
                return Err(Error::DimensionMismatch(format!("adversary copy on {:?}, target on {:?}", s.dims(), dims)));
            }
            if let Membership::NotMember { violation } = ppt.membership(s.op(), ADVERSARY_PPT_TOL)? {
                return Err(Error::InvalidState(format!("adversary copy is not PPT (violation {violation:.3e})")));
            }
        }
        Ok(dims.len() == 2 && dims.iter().product::<usize>() <= 6)
    }
}

/// Relative-entropy-closest state to `target` in the product-hull inner
/// approximation of the separable set, for use as an i.i.d. adversary.
pub fn closest_separable(target: &DensityMatrix, seed: u64) -> Result<DensityMatrix> {
    let set = sep_inner_set(target.dims(), 16, seed)?;
    Ok(rel_ent_to_set(target, &set, &FwOptions::default())?.certificate)
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationPoint {
    pub n: usize,
    pub discarded: usize,
    pub measured: usize,
    pub trials: usize,
    pub accepted: usize,
    pub accept_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Mean of ‖L_n − ρ‖₁ over trials.
    pub mean_distance: f64,
    pub notes: Vec<String>,
}

/// Wilson score interval at 95%; (0, 1) when there are no trials.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Worker count from `STEINLAB_THREADS`, else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Cumulative outcome distribution of one copy state, clamped to be a
/// probability vector.
fn cumulative(frame: &Frame, state: &DensityMatrix) -> Result<Vec<f64>> {
    let p = frame.probabilities(state.op())?;
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|&x| {
            acc += x.max(0.0);
            acc
        })
        .collect();
    let total = acc;
    for c in &mut out {
        *c /= total;
    }
    Ok(out)
}

fn draw(cdf: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

enum Source<'a> {
    Fixed { cdfs: Vec<Vec<f64>> },
    Generated { generator: &'a SequenceGenerator, frame: &'a Frame },
}

struct TrialOutcome {
    accepted: bool,
    distance: f64,
}

fn run_trial(source: &Source<'_>, frame: &Frame, target: &HermOperator, n: usize, discard: usize, threshold: f64, seed: u64) -> Result<TrialOutcome> {
    let mut rng = random::rng(seed);
    let generated;
    let cdfs: &[Vec<f64>] = match source {
        Source::Fixed { cdfs } => cdfs,
        Source::Generated { generator, frame } => {
            let seq = generator(n, &mut rng);
            if seq.len() != n {
                return Err(Error::InvalidArgument(format!("sequence generator produced {} copies for n = {n}", seq.len())));
            }
            generated = seq.iter().map(|s| cumulative(frame, s)).collect::<Result<Vec<_>>>()?;
            &generated
        }
    };
    let order = random::permutation(n, &mut rng);
    let mut counts = vec![0usize; frame.len()];
    for &copy in &order[discard..] {
        counts[draw(&cdfs[copy % cdfs.len()], &mut rng)] += 1;
    }
    let measured = (n - discard).max(1) as f64;
    let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / measured).collect();
    let l = reconstruct(frame, &freqs)?;
    let distance = trace_norm(&l.operator.minus(target))?;
    Ok(TrialOutcome { accepted: distance <= threshold, distance })
}

fn simulate(config: &ProtocolConfig, source: &Source<'_>, frame: &Frame, n: usize, stream: u64) -> Result<SimulationPoint> {
    let discarded = config.discarded(n);
    let measured = n - discarded;
    let trials = config.trials;
    let base = random::child_seed(random::child_seed(config.seed, stream), n as u64);
    let threshold = config.threshold();
    let target = config.target.op();
    let mut outcomes: Vec<Option<Result<TrialOutcome>>> = (0..trials).map(|_| None).collect();
    if measured > 0 && trials > 0 {
        let workers = thread_count().min(trials).max(1);
        let chunk = trials.div_ceil(workers);
        std::thread::scope(|scope| {
            for (w, slots) in outcomes.chunks_mut(chunk).enumerate() {
                scope.spawn(move || {
                    for (i, slot) in slots.iter_mut().enumerate() {
                        let t = (w * chunk + i) as u64;
                        *slot = Some(run_trial(source, frame, target, n, discarded, threshold, random::child_seed(base, t)));
                    }
                });
            }
        });
    }
    let mut accepted = 0;
    let mut total_distance = 0.0;
    let mut done = 0;
    for o in outcomes.into_iter().flatten() {
        let o = o?;
        done += 1;
        total_distance += o.distance;
        if o.accepted {
            accepted += 1;
        }
    }
    let (ci_low, ci_high) = wilson_interval(accepted, done);
    let mut notes = Vec::new();
    if measured == 0 {
        notes.push("no copies left after discarding; nothing measured".into());
    }
    Ok(SimulationPoint {
        n,
        discarded,
        measured,
        trials: done,
        accepted,
        accept_rate: if done == 0 { 0.0 } else { accepted as f64 / done as f64 },
        ci_low,
        ci_high,
        mean_distance: if done == 0 { 0.0 } else { total_distance / done as f64 },
        notes,
    })
}

/// Acceptance rate on ρ^⊗n.
pub fn simulate_null(config: &ProtocolConfig) -> Result<SimulationPoint> {
    let frame = config.global_frame()?;
    let source = Source::Fixed { cdfs: vec![cumulative(&frame, &config.target)?] };
    let mut point = simulate(config, &source, &frame, config.n, 0)?;
    point.notes.push("i.i.d. input: discarding copies only shortens the sample".into());
    Ok(point)
}

#[derive(Clone, Debug, Serialize)]
pub struct AlternativeReport {
    pub adversary: String,
    /// All fixed copy states passed the PPT check on a layout where PPT
    /// equals separability.
    pub separability_certified: bool,
    pub limitation: String,
    pub points: Vec<SimulationPoint>,
    pub fit: ExponentFit,
}

impl AlternativeReport {
    /// Rates along the grid are nonincreasing up to overlapping intervals.
    pub fn monotone_within_ci(&self) -> bool {
        self.points.windows(2).all(|w| w[1].ci_low <= w[0].ci_high)
    }
}

/// Acceptance rate against the adversary for each n of `n_grid`.
pub fn simulate_alternative(config: &ProtocolConfig, adversary: &Adversary, n_grid: &[usize]) -> Result<AlternativeReport> {
    let frame = config.global_frame()?;
    let separability_certified = adversary.validate(config.target.dims())?;
    let source = match adversary {
        Adversary::Iid(s) => Source::Fixed { cdfs: vec![cumulative(&frame, s)?] },
        Adversary::PermutedProducts(pool) => Source::Fixed { cdfs: pool.iter().map(|s| cumulative(&frame, s)).collect::<Result<_>>()? },
        Adversary::Custom { generator, .. } => Source::Generated { generator: generator.as_ref(), frame: &frame },
    };
    let points = n_grid.iter().map(|&n| simulate(config, &source, &frame, n, 1)).collect::<Result<Vec<_>>>()?;
    let curve: Vec<(usize, f64)> = points.iter().map(|p| (p.n, p.accept_rate)).collect();
    let fit = exponent_fit(&curve, config.trials);
    Ok(AlternativeReport { adversary: adversary.label(), separability_certified, limitation: ADVERSARY_LIMITATION.into(), points, fit })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExponentFit {
    /// log₂(rate) ≈ intercept + slope·n over the nonzero points.
    Fit { slope: f64, intercept: f64, r2: f64, points_used: usize },
    /// Every rate is zero: the decay is below the resolution 1/trials.
    BelowMonteCarloFloor { floor: f64 },
    /// Fewer than three nonzero rates.
    Insufficient { nonzero: usize },
}

impl ExponentFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            Self::Fit { slope, .. } => Some(*slope),
            _ => None,
        }
    }
}

/// Least-squares fit of log₂(rate) against n.
pub fn exponent_fit(curve: &[(usize, f64)], trials: usize) -> ExponentFit {
    let pts: Vec<(f64, f64)> = curve.iter().filter(|(_, r)| *r > 0.0).map(|&(n, r)| (n as f64, r.log2())).collect();
    if pts.is_empty() {
        return ExponentFit::BelowMonteCarloFloor { floor: 1.0 / trials.max(1) as f64 };
    }
    if pts.len() < 3 {
        return ExponentFit::Insufficient { nonzero: pts.len() };
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy > 1e-300 { 1.0 - sse / syy } else { 1.0 };
    ExponentFit::Fit { slope, intercept, r2, points_used: pts.len() }
}

/// Curve as CSV with columns n, accept_rate, ci_low, ci_high.
pub fn curve_csv(points: &[SimulationPoint]) -> String {
    let mut s = String::from("n,accept_rate,ci_low,ci_high\n");
    for p in points {
        s.push_str(&format!("{},{},{},{}\n", p.n, fmt12(p.accept_rate), fmt12(p.ci_low), fmt12(p.ci_high)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::tetrahedral_frame;
    use crate::states::max_entangled;

    fn bell_config(n: usize, trials: usize) -> ProtocolConfig {
        let f = tetrahedral_frame().unwrap();
        ProtocolConfig { target: max_entangled(2).density(), n, alpha: 0.5, eps_gap: 0.5, frames: vec![f.clone(), f], trials, seed: 7 }
    }

    #[test]
    fn synthetic_exponential_fit() {
        let curve: Vec<(usize, f64)> = [10, 20, 40, 80].iter().map(|&n| (n, 2f64.powf(-0.1 * n as f64))).collect();
        let ExponentFit::Fit { slope, r2, .. } = exponent_fit(&curve, 100) else { panic!() };
        assert!((slope + 0.1).abs() < 1e-6);
        assert!((r2 - 1.0).abs() < 1e-9);
        let flat = exponent_fit(&[(1, 0.5), (2, 0.5), (3, 0.5)], 10);
        assert_eq!(flat.slope(), Some(0.0));
        assert_eq!(exponent_fit(&[(1, 0.0), (2, 0.0)], 50), ExponentFit::BelowMonteCarloFloor { floor: 0.02 });
    }

    #[test]
    fn zero_trials_give_empty_report() {
        let p = simulate_null(&bell_config(20, 0)).unwrap();
        assert_eq!(p.trials, 0);
        assert_eq!(p.accept_rate, 0.0);
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(30, 100);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
    }

    #[test]
    fn maximally_mixed_adversary_is_rejected() {
        let cfg = bell_config(200, 200);
        let adv = Adversary::Iid(DensityMatrix::maximally_mixed(&[2, 2]));
        let r = simulate_alternative(&cfg, &adv, &[200]).unwrap();
        assert!(r.points[0].accept_rate < 0.01, "{:?}", r.points[0]);
        assert!(r.separability_certified);
    }

    #[test]
    fn entangled_iid_adversary_rejected_by_validation() {
        let cfg = bell_config(10, 1);
        assert!(simulate_alternative(&cfg, &Adversary::Iid(max_entangled(2).density()), &[10]).is_err());
    }

    #[test]
    fn runs_are_reproducible_and_thread_independent() {
        let cfg = bell_config(60, 64);
        let a = simulate_null(&cfg).unwrap();
        let b = simulate_null(&cfg).unwrap();
        assert_eq!(a.accepted, b.accepted);
        assert_eq!(a.mean_distance.to_bits(), b.mean_distance.to_bits());
    }

    #[test]
    fn closest_separable_to_bell_sits_at_unit_trace_distance() {
        let bell = max_entangled(2).density();
        let s = closest_separable(&bell, 3).unwrap();
        let d = trace_norm(&s.op().minus(bell.op())).unwrap();
        assert!((d - 1.0).abs() < 0.02, "{d}");
        assert!(Adversary::Iid(s).validate(&[2, 2]).unwrap());
    }
}
