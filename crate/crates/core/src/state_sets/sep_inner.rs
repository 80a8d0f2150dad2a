//! Inner approximation of the separable states: the convex hull of the seeded
//! anchor product states together with every pure product state the seesaw
//! can reach. Oracles never mutate the set; each call regrows its own atoms.

use super::{ConvexSet, Membership, Projection};
use crate::error::{Error, Result};
use crate::linalg::{herm_coordinates, partial_transpose, simplex_least_squares, tensor, CMat, HermOperator, C64};
use crate::random;
use crate::states::DensityMatrix;

const SEESAW_SWEEPS: usize = 200;
const FIT_ROUNDS: usize = 150;
const FIT_RESTARTS: usize = 8;

/// A pure product state found by the seesaw, with its per-party factors.
#[derive(Clone, Debug)]
pub struct ProductCertificate {
    /// One unit vector per party.
    pub factors: Vec<Vec<C64>>,
    /// Full vector in the set's original subsystem order.
    pub vector: Vec<C64>,
    /// ⟨v|H|v⟩ for the operator it was optimized against.
    pub value: f64,
}

pub struct SepInnerSet {
    dims: Vec<usize>,
    parties: Vec<Vec<usize>>,
    party_dims: Vec<usize>,
    /// Subsystem order that makes each party contiguous.
    order: Vec<usize>,
    restarts: usize,
    seed: u64,
    anchors: Vec<Vec<C64>>,
}

impl std::fmt::Debug for SepInnerSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SepInnerSet").field("dims", &self.dims).field("parties", &self.parties).finish()
    }
}

/// Hull of `n_anchor_products` random product states (one party per
/// subsystem), extended by every product state the seesaw discovers.
pub fn sep_inner_set(dims: &[usize], n_anchor_products: usize, seed: u64) -> Result<SepInnerSet> {
    SepInnerSet::new(dims.to_vec(), (0..dims.len()).map(|i| vec![i]).collect(), n_anchor_products, seed)
}

impl SepInnerSet {
    pub fn new(dims: Vec<usize>, parties: Vec<Vec<usize>>, n_anchor_products: usize, seed: u64) -> Result<Self> {
        let mut seen = vec![false; dims.len()];
        for p in &parties {
            if p.is_empty() {
                return Err(Error::InvalidSubsystems("empty party".into()));
            }
            for &s in p {
                if s >= dims.len() || seen[s] {
                    return Err(Error::InvalidSubsystems(format!("parties {parties:?} do not partition {dims:?}")));
                }
                seen[s] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidSubsystems(format!("parties {parties:?} do not cover {dims:?}")));
        }
        let party_dims = parties.iter().map(|p| p.iter().map(|&s| dims[s]).product()).collect();
        let order = parties.iter().flatten().copied().collect();
        let mut set = Self { dims, parties, party_dims, order, restarts: super::SEESAW_RESTARTS, seed, anchors: Vec::new() };
        let mut rng = random::rng(seed);
        let anchors: Vec<Vec<C64>> = (0..n_anchor_products)
            .map(|_| {
                let f: Vec<Vec<C64>> = set.party_dims.iter().map(|&d| random::unit_vector(d, &mut rng)).collect();
                set.assemble(&f)
            })
            .collect::<Result<_>>()?;
        set.anchors = anchors;
        Ok(set)
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts.max(1);
        self
    }

    pub fn parties(&self) -> &[Vec<usize>] {
        &self.parties
    }

    pub fn anchors(&self) -> &[Vec<C64>] {
        &self.anchors
    }

    fn party_layout_dims(&self) -> Vec<usize> {
        self.order.iter().map(|&s| self.dims[s]).collect()
    }

    /// Product vector in the original subsystem order.
    fn assemble(&self, factors: &[Vec<C64>]) -> Result<Vec<C64>> {
        let mut v = vec![C64::new(1.0, 0.0)];
        for f in factors {
            v = tensor::kron_vectors(&v, f);
        }
        // position of each original subsystem in the party layout
        let mut back = vec![0; self.order.len()];
        for (pos, &s) in self.order.iter().enumerate() {
            back[s] = pos;
        }
        tensor::reorder_vector(&v, &self.party_layout_dims(), &back)
    }

    /// Environment contraction (⊗_{q≠p}⟨v_q|) H (⊗_{q≠p}|v_q⟩) in the party layout.
    fn contract(&self, h: &CMat, factors: &[Vec<C64>], p: usize) -> HermOperator {
        let dp = self.party_dims[p];
        let cols: Vec<Vec<C64>> = (0..dp)
            .map(|a| {
                let mut v = vec![C64::new(1.0, 0.0)];
                for (q, f) in factors.iter().enumerate() {
                    if q == p {
                        let mut e = vec![C64::new(0.0, 0.0); dp];
                        e[a] = C64::new(1.0, 0.0);
                        v = tensor::kron_vectors(&v, &e);
                    } else {
                        v = tensor::kron_vectors(&v, f);
                    }
                }
                v
            })
            .collect();
        let w = CMat::from_columns(h.rows(), &cols);
        let hw = h.matmul(&w);
        HermOperator::from_hermitian_part(vec![dp], w.adjoint().matmul(&hw))
    }

    /// Minimizes ⟨v|H|v⟩ over pure product vectors: alternately sets each
    /// party's factor to the lowest eigenvector of the contracted operator,
    /// keeping the best of `restarts` seeded starts.
    pub fn seesaw(&self, h: &HermOperator, restarts: usize, seed: u64) -> Result<ProductCertificate> {
        if h.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!("operator dimension {} vs set dimension {}", h.dim(), self.dim())));
        }
        let hp = h.reorder(&self.order)?;
        let mut best: Option<(f64, Vec<Vec<C64>>)> = None;
        for r in 0..restarts.max(1) {
            let mut rng = random::rng(random::child_seed(seed, r as u64));
            let mut factors: Vec<Vec<C64>> = self.party_dims.iter().map(|&d| random::unit_vector(d, &mut rng)).collect();
            let mut value = f64::INFINITY;
            for _ in 0..SEESAW_SWEEPS {
                let mut last = value;
                for p in 0..factors.len() {
                    let s = self.contract(hp.mat(), &factors, p).eig()?;
                    factors[p] = s.vector(s.dim() - 1);
                    last = s.lambda_min();
                }
                let improved = value - last;
                value = last;
                if improved.abs() < 1e-13 {
                    break;
                }
            }
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, factors));
            }
        }
        let (value, factors) = best.expect("at least one restart");
        let vector = self.assemble(&factors)?;
        Ok(ProductCertificate { factors, vector, value })
    }

    /// Products of eigenvectors of the single-party marginals of `x`; these
    /// decompose product and classically correlated states exactly.
    fn marginal_atoms(&self, x: &HermOperator) -> Result<Vec<Vec<C64>>> {
        let xp = x.reorder(&self.order)?.with_dims(self.party_dims.clone())?;
        let mut bases = Vec::new();
        for p in 0..self.party_dims.len() {
            let m = crate::linalg::partial_trace(&xp, &[p])?;
            let s = m.eig()?;
            bases.push((0..s.dim()).map(|k| s.vector(k)).collect::<Vec<_>>());
        }
        let total: usize = self.party_dims.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; bases.len()];
        for _ in 0..total {
            let f: Vec<Vec<C64>> = idx.iter().enumerate().map(|(p, &k)| bases[p][k].clone()).collect();
            out.push(self.assemble(&f)?);
            for p in (0..idx.len()).rev() {
                idx[p] += 1;
                if idx[p] < bases[p].len() {
                    break;
                }
                idx[p] = 0;
            }
        }
        Ok(out)
    }

    /// Fully corrective hull fit of `x`: least squares over the simplex on the
    /// current atoms, then a seesaw step on the residual adds the best new
    /// atom, until the residual or the Frank-Wolfe gap vanishes.
    fn fit(&self, x: &HermOperator, tol: f64) -> Result<HullFit> {
        let mut atoms = self.anchors.clone();
        atoms.extend(self.marginal_atoms(x)?);
        let target = herm_coordinates(x);
        let mut cols: Vec<Vec<f64>> = atoms.iter().map(|a| herm_coordinates(&HermOperator::projector(a, &self.dims))).collect();
        let mut fit = HullFit::default();
        for round in 0..FIT_ROUNDS {
            let w = simplex_least_squares(&cols, &target);
            let mut point = HermOperator::zeros(&self.dims);
            for (a, &wk) in atoms.iter().zip(&w) {
                if wk > 0.0 {
                    point = point.plus(&HermOperator::projector(a, &self.dims).scaled(wk));
                }
            }
            let resid = point.minus(x);
            let r = resid.mat().frobenius_norm();
            fit = HullFit { point, residual: r, gap: f64::INFINITY, rounds: round + 1, converged: false };
            if r <= tol {
                fit.converged = true;
                break;
            }
            let cert = self.seesaw(&resid, FIT_RESTARTS, random::child_seed(self.seed ^ 0x5eed, round as u64))?;
            let gap = resid.inner(&fit.point) - cert.value;
            fit.gap = gap;
            if gap <= 1e-12 {
                fit.converged = true;
                break;
            }
            cols.push(herm_coordinates(&HermOperator::projector(&cert.vector, &self.dims)));
            atoms.push(cert.vector);
        }
        Ok(fit)
    }

    /// Most negative partial-transpose eigenvalue over the party bipartitions.
    fn ppt_violation(&self, x: &HermOperator) -> Result<f64> {
        let mut worst: f64 = 0.0;
        if self.parties.len() < 2 {
            return Ok(0.0);
        }
        for p in &self.parties {
            worst = worst.min(partial_transpose(x, p)?.eig()?.lambda_min());
        }
        Ok(-worst)
    }
}

#[derive(Clone, Debug)]
struct HullFit {
    point: HermOperator,
    residual: f64,
    gap: f64,
    rounds: usize,
    converged: bool,
}

impl Default for HullFit {
    fn default() -> Self {
        Self { point: HermOperator::zeros(&[1]), residual: f64::INFINITY, gap: f64::INFINITY, rounds: 0, converged: false }
    }
}

impl ConvexSet for SepInnerSet {
    fn label(&self) -> String {
        format!("sep_inner{:?}", self.parties)
    }

    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn membership(&self, x: &HermOperator, tol: f64) -> Result<Membership> {
        let s = x.eig()?;
        let state_violation = (-s.lambda_min()).max((x.trace() - 1.0).abs());
        if state_violation > tol {
            return Ok(Membership::NotMember { violation: state_violation });
        }
        // Peres: a PPT violation certifies non-separability
        let ppt = self.ppt_violation(x)?;
        if ppt > tol {
            return Ok(Membership::NotMember { violation: ppt });
        }
        let fit = self.fit(x, tol)?;
        if fit.residual <= tol {
            Ok(Membership::Member)
        } else if fit.converged {
            Ok(Membership::NotMember { violation: fit.residual })
        } else {
            Ok(Membership::Indeterminate { residual: fit.residual })
        }
    }

    fn project(&self, x: &HermOperator) -> Result<Projection> {
        let fit = self.fit(x, 1e-12)?;
        Ok(Projection { point: fit.point, iterations: fit.rounds, converged: fit.converged })
    }

    fn linear_min(&self, h: &HermOperator) -> Result<HermOperator> {
        let cert = self.seesaw(h, self.restarts, self.seed)?;
        let mut best = (cert.value, cert.vector.clone());
        for a in &self.anchors {
            let v = h.expectation(a);
            if v < best.0 {
                best = (v, a.clone());
            }
        }
        Ok(HermOperator::projector(&best.1, &self.dims))
    }

    fn interior_point(&self) -> Result<DensityMatrix> {
        Ok(DensityMatrix::maximally_mixed(&self.dims))
    }

    fn sample_member(&self, seed: u64) -> Result<DensityMatrix> {
        let mut rng = random::rng(seed);
        let k = 4;
        let w = random::distribution(k, &mut rng);
        let mut acc = HermOperator::zeros(&self.dims);
        for wk in w {
            let f: Vec<Vec<C64>> = self.party_dims.iter().map(|&d| random::unit_vector(d, &mut rng)).collect();
            let v = self.assemble(&f)?;
            acc = acc.plus(&HermOperator::projector(&v, &self.dims).scaled(wk));
        }
        Ok(DensityMatrix::assume_valid(acc))
    }

    fn repair(&self, x: &HermOperator) -> Result<HermOperator> {
        Ok(self.fit(x, 1e-12)?.point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{max_entangled, random_state};

    #[test]
    fn product_of_mixed_states_is_member() {
        let s = sep_inner_set(&[2, 2], 4, 1).unwrap();
        let x = random_state(2, 2, 3).unwrap().kron(&random_state(2, 2, 4).unwrap());
        assert!(s.membership(x.op(), 1e-6).unwrap().is_member());
    }

    #[test]
    fn bell_linear_min_overlap_half() {
        let s = sep_inner_set(&[2, 2], 4, 2).unwrap();
        let phi = max_entangled(2).density().into_op();
        let x = s.linear_min(&phi.scaled(-1.0)).unwrap();
        assert!((x.inner(&phi) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn bell_is_not_member_and_witnessed() {
        let s = sep_inner_set(&[2, 2], 4, 3).unwrap();
        let phi = max_entangled(2).density().into_op();
        assert!(matches!(s.membership(&phi, 1e-6).unwrap(), Membership::NotMember { .. }));
        // W = I/2 − Φ: min over products of tr(W P) ≥ 0 while tr(W Φ) = −1/2
        let w = HermOperator::identity(&[2, 2]).scaled(0.5).minus(&phi);
        let cert = s.seesaw(&w, 32, 9).unwrap();
        assert!(cert.value > -1e-9 && w.inner(&phi) < -0.49);
    }

    #[test]
    fn separable_mixture_is_member() {
        let s = sep_inner_set(&[2, 2], 4, 5).unwrap();
        let m = s.sample_member(77).unwrap();
        assert!(s.membership(m.op(), 1e-6).unwrap().is_member());
    }

    #[test]
    fn grouped_parties() {
        let s = SepInnerSet::new(vec![2, 2, 2, 2], vec![vec![0, 2], vec![1, 3]], 4, 1).unwrap();
        let phi = max_entangled(2).density();
        // Φ⊗Φ on (A1 B1 A2 B2): maximal product overlap across A1A2 : B1B2 is 1/4
        let x = phi.kron(&phi).into_op();
        let y = s.linear_min(&x.scaled(-1.0)).unwrap();
        assert!((y.inner(&x) - 0.25).abs() < 1e-8, "{}", y.inner(&x));
    }
}
