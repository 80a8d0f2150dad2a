//! Families {M_n} of sets on n copies and randomized checks of the five
//! closure properties: convexity, containing σ^{⊗n} for a full-rank σ,
//! closure under tracing out a copy, under tensor products, and under copy
//! permutations.

use rand::Rng;
use serde::Serialize;

use super::{ConvexSet, FixedHull, Membership, PptSet, SepInnerSet, Singleton};
use crate::error::{Error, Result};
use crate::linalg::DEFAULT_DIM_CAP;
use crate::random;
use crate::states::{copy_blocks, permute_operator, DensityMatrix, Permutation};

/// Membership tolerance used by the property checks.
pub const FAMILY_TOL: f64 = 1e-8;

pub trait SetFamily {
    fn label(&self) -> String;

    /// Subsystem dimensions of a single copy.
    fn copy_dims(&self) -> &[usize];

    /// The full-rank state whose powers belong to every M_n.
    fn base_state(&self) -> &DensityMatrix;

    fn set(&self, n: usize) -> Result<Box<dyn ConvexSet>>;

    fn dims(&self, n: usize) -> Vec<usize> {
        self.copy_dims().repeat(n)
    }
}

/// PPT across A^n : B^n, where each copy is laid out as (A, B).
#[derive(Clone, Debug)]
pub struct PptFamily {
    copy_dims: Vec<usize>,
    b_sites: Vec<usize>,
    base: DensityMatrix,
}

impl PptFamily {
    /// Bipartite copies `[d_a, d_b]` with base state I/(d_a d_b).
    pub fn new(da: usize, db: usize) -> Self {
        let copy_dims = vec![da, db];
        Self { base: DensityMatrix::maximally_mixed(&copy_dims), copy_dims, b_sites: vec![1] }
    }

    pub fn with_base(mut self, base: DensityMatrix) -> Result<Self> {
        if base.dims() != self.copy_dims.as_slice() {
            return Err(Error::DimensionMismatch(format!("base state dims {:?}", base.dims())));
        }
        self.base = base;
        Ok(self)
    }
}

impl SetFamily for PptFamily {
    fn label(&self) -> String {
        format!("ppt-family{:?}", self.copy_dims)
    }

    fn copy_dims(&self) -> &[usize] {
        &self.copy_dims
    }

    fn base_state(&self) -> &DensityMatrix {
        &self.base
    }

    fn set(&self, n: usize) -> Result<Box<dyn ConvexSet>> {
        let c = self.copy_dims.len();
        let b: Vec<usize> = (0..n).flat_map(|i| self.b_sites.iter().map(move |&s| i * c + s)).collect();
        Ok(Box::new(PptSet::bipartite(self.dims(n), b)?))
    }
}

/// Product-hull inner approximation across A^n : B^n.
#[derive(Clone, Debug)]
pub struct SepInnerFamily {
    copy_dims: Vec<usize>,
    base: DensityMatrix,
    anchors: usize,
    seed: u64,
}

impl SepInnerFamily {
    pub fn new(da: usize, db: usize, anchors: usize, seed: u64) -> Self {
        let copy_dims = vec![da, db];
        Self { base: DensityMatrix::maximally_mixed(&copy_dims), copy_dims, anchors, seed }
    }
}

impl SetFamily for SepInnerFamily {
    fn label(&self) -> String {
        format!("sep-inner-family{:?}", self.copy_dims)
    }

    fn copy_dims(&self) -> &[usize] {
        &self.copy_dims
    }

    fn base_state(&self) -> &DensityMatrix {
        &self.base
    }

    fn set(&self, n: usize) -> Result<Box<dyn ConvexSet>> {
        let a: Vec<usize> = (0..n).map(|i| 2 * i).collect();
        let b: Vec<usize> = (0..n).map(|i| 2 * i + 1).collect();
        Ok(Box::new(SepInnerSet::new(self.dims(n), vec![a, b], self.anchors, random::child_seed(self.seed, n as u64))?))
    }
}

/// M_n = {σ^{⊗n}}.
#[derive(Clone, Debug)]
pub struct SingletonFamily {
    sigma: DensityMatrix,
}

impl SingletonFamily {
    pub fn new(sigma: DensityMatrix) -> Self {
        Self { sigma }
    }
}

impl SetFamily for SingletonFamily {
    fn label(&self) -> String {
        format!("singleton-family{:?}", self.sigma.dims())
    }

    fn copy_dims(&self) -> &[usize] {
        self.sigma.dims()
    }

    fn base_state(&self) -> &DensityMatrix {
        &self.sigma
    }

    fn set(&self, n: usize) -> Result<Box<dyn ConvexSet>> {
        let p = self.sigma.tensor_power(n, DEFAULT_DIM_CAP)?.with_dims(self.dims(n))?;
        Ok(Box::new(Singleton::new(p)))
    }
}

/// M_n = conv{ω_i^{⊗n}}. Convex, permutation and partial-trace closed, but
/// not closed under tensor products.
#[derive(Clone, Debug)]
pub struct FixedHullFamily {
    anchors: Vec<DensityMatrix>,
}

impl FixedHullFamily {
    /// The first anchor must be full rank.
    pub fn new(anchors: Vec<DensityMatrix>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidArgument("family needs at least one anchor".into()));
        }
        Ok(Self { anchors })
    }
}

impl SetFamily for FixedHullFamily {
    fn label(&self) -> String {
        format!("fixed-hull-family[{}]", self.anchors.len())
    }

    fn copy_dims(&self) -> &[usize] {
        self.anchors[0].dims()
    }

    fn base_state(&self) -> &DensityMatrix {
        &self.anchors[0]
    }

    fn set(&self, n: usize) -> Result<Box<dyn ConvexSet>> {
        let atoms = self
            .anchors
            .iter()
            .map(|a| a.tensor_power(n, DEFAULT_DIM_CAP)?.with_dims(self.dims(n)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Box::new(FixedHull::new(atoms)?))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClauseReport {
    pub clause: u8,
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    /// Description of the first failing instance.
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    pub label: String,
    pub n_max: usize,
    pub clauses: Vec<ClauseReport>,
}

impl FamilyReport {
    pub fn all_passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }
}

struct Clause {
    report: ClauseReport,
}

impl Clause {
    fn new(clause: u8, name: &'static str) -> Self {
        Self { report: ClauseReport { clause, name, passed: true, checks: 0, witness: None } }
    }

    fn record(&mut self, m: &Membership, describe: impl FnOnce() -> String) {
        self.report.checks += 1;
        if !m.is_member() && self.report.passed {
            self.report.passed = false;
            self.report.witness = Some(format!("{}: {m:?}", describe()));
        }
    }
}

/// Randomized verification of the five closure properties for n ≤ `n_max`.
pub fn family_property_check(family: &dyn SetFamily, n_max: usize, trials: usize, seed: u64) -> Result<FamilyReport> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be positive".into()));
    }
    let sets: Vec<Box<dyn ConvexSet>> = (1..=n_max).map(|n| family.set(n)).collect::<Result<_>>()?;
    let set = |n: usize| -> &dyn ConvexSet { sets[n - 1].as_ref() };
    let c = family.copy_dims().len();
    let mut stream = 0u64;
    let mut next_seed = || {
        stream += 1;
        random::child_seed(seed, stream)
    };

    let mut convex = Clause::new(1, "convexity");
    let mut power = Clause::new(2, "contains full-rank power");
    let mut trace = Clause::new(3, "partial trace closure");
    let mut tensor = Clause::new(4, "tensor product closure");
    let mut perm = Clause::new(5, "permutation closure");

    for n in 1..=n_max {
        let m = set(n);
        for _ in 0..trials {
            let a = m.sample_member(next_seed())?;
            let b = m.sample_member(next_seed())?;
            let lam = random::rng(next_seed()).random_range(0.0..1.0);
            let mid = a.mix(lam, &b);
            convex.record(&m.membership(mid.op(), FAMILY_TOL)?, || format!("n = {n}, weight {lam:.4}"));
        }

        let p = family.base_state().tensor_power(n, DEFAULT_DIM_CAP)?.with_dims(family.dims(n))?;
        power.record(&m.membership(p.op(), FAMILY_TOL)?, || format!("base state to the power {n}"));

        if n >= 2 {
            for _ in 0..trials {
                let x = m.sample_member(next_seed())?;
                for k in 0..n {
                    let keep: Vec<usize> = (0..n * c).filter(|s| s / c != k).collect();
                    let r = x.partial_trace(&keep)?;
                    trace.record(&set(n - 1).membership(r.op(), FAMILY_TOL)?, || format!("n = {n}, traced copy {k}"));
                }
            }
            let blocks = copy_blocks(&family.dims(n), n)?;
            for _ in 0..trials {
                let x = m.sample_member(next_seed())?;
                let mut rng = random::rng(next_seed());
                let mut perms: Vec<Permutation> = (1..n).map(|j| Permutation::transposition(n, j - 1, j)).collect();
                perms.push(Permutation::random(n, &mut rng));
                for pi in perms {
                    let y = permute_operator(x.op(), &blocks, &pi)?;
                    perm.record(&m.membership(&y, FAMILY_TOL)?, || format!("n = {n}, permutation {:?}", pi.images()));
                }
            }
        }
    }
    for n in 1..n_max {
        for k in 1..=(n_max - n) {
            for _ in 0..trials {
                let x = set(n).sample_member(next_seed())?;
                let y = set(k).sample_member(next_seed())?;
                let z = x.kron(&y);
                tensor.record(&set(n + k).membership(z.op(), FAMILY_TOL)?, || format!("member of M_{n} ⊗ member of M_{k}"));
            }
        }
    }
    Ok(FamilyReport {
        label: family.label(),
        n_max,
        clauses: vec![convex.report, power.report, trace.report, tensor.report, perm.report],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::random_state_dims;

    #[test]
    fn singleton_family_passes() {
        let sigma = random_state_dims(&[2], 2, 4).unwrap();
        let r = family_property_check(&SingletonFamily::new(sigma), 3, 2, 1).unwrap();
        assert!(r.all_passed(), "{r:?}");
    }

    #[test]
    fn fixed_hull_fails_tensor_closure_only() {
        let a = random_state_dims(&[2], 2, 1).unwrap();
        let b = random_state_dims(&[2], 1, 2).unwrap();
        let r = family_property_check(&FixedHullFamily::new(vec![a, b]).unwrap(), 2, 3, 7).unwrap();
        for c in &r.clauses {
            assert_eq!(c.passed, c.clause != 4, "{c:?}");
        }
        assert!(r.clauses[3].witness.is_some());
    }

    #[test]
    fn ppt_family_passes() {
        let r = family_property_check(&PptFamily::new(2, 2), 2, 3, 11).unwrap();
        assert!(r.all_passed(), "{r:?}");
    }
}
