//! Symmetric subspaces, almost power states, the post-selection construction
//! approximating a symmetric vector by an almost power state, typical
//! projectors, and small operator inequalities about these objects.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::divergences::binary_entropy;
use crate::error::{Error, Result};
use crate::linalg::tensor::apply_kron_power;
use crate::linalg::{c, checked_power, CMat, HermOperator, C64, DEFAULT_DIM_CAP};
use crate::random;
use crate::states::{copy_blocks, inner, norm, symmetrize_vector, PureState};

/// Candidates whose residual norm falls below this are dropped as dependent.
pub const GRAM_SCHMIDT_DROP: f64 = 1e-10;
/// Largest allowed change of a "symmetric" input under symmetrization.
pub const SYMMETRY_INPUT_TOL: f64 = 1e-9;

/// Digits of `x` in base d, most significant (first copy) first.
fn digits(mut x: usize, d: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for k in (0..n).rev() {
        out[k] = x % d;
        x /= d;
    }
    out
}

fn occupation(x: usize, d: usize, n: usize) -> Vec<usize> {
    let mut occ = vec![0; d];
    for a in digits(x, d, n) {
        occ[a] += 1;
    }
    occ
}

/// Modified Gram-Schmidt with a second orthogonalization pass.
pub fn orthonormalize(candidates: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = Vec::new();
    for cand in candidates {
        let mut v = cand.clone();
        for _ in 0..2 {
            for b in &out {
                let p = inner(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= p * y;
                }
            }
        }
        let nv = norm(&v);
        if nv > GRAM_SCHMIDT_DROP {
            out.push(v.into_iter().map(|z| z / nv).collect());
        }
    }
    out
}

/// Orthonormal occupation-number basis of Sym((C^d)^{⊗n}).
#[derive(Clone, Debug)]
pub struct SymBasis {
    pub d: usize,
    pub n: usize,
    /// Occupation numbers (n_0, …, n_{d−1}) of each basis vector.
    pub occupations: Vec<Vec<usize>>,
    pub vectors: Vec<Vec<C64>>,
}

impl SymBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn projector(&self) -> HermOperator {
        projector_onto(&self.vectors, &vec![self.d; self.n])
    }
}

fn projector_onto(vectors: &[Vec<C64>], dims: &[usize]) -> HermOperator {
    let total: usize = dims.iter().product();
    let m = CMat::from_columns(total, vectors);
    HermOperator::from_hermitian_part(dims.to_vec(), m.matmul(&m.adjoint()))
}

/// Occupation states of (C^d)^{⊗n}, grouped by occupation, in decreasing
/// lexicographic order of (n_0, n_1, …).
fn occupation_states(d: usize, n: usize, keep: impl Fn(&[usize]) -> bool) -> Result<(Vec<Vec<usize>>, Vec<Vec<C64>>)> {
    if d == 0 {
        return Err(Error::InvalidArgument("local dimension must be positive".into()));
    }
    let total = checked_power(d, n, DEFAULT_DIM_CAP)?;
    let mut groups: BTreeMap<std::cmp::Reverse<Vec<usize>>, Vec<usize>> = BTreeMap::new();
    for x in 0..total {
        let occ = occupation(x, d, n);
        if keep(&occ) {
            groups.entry(std::cmp::Reverse(occ)).or_default().push(x);
        }
    }
    let mut occs = Vec::with_capacity(groups.len());
    let mut vecs = Vec::with_capacity(groups.len());
    for (std::cmp::Reverse(occ), members) in groups {
        let amp = 1.0 / (members.len() as f64).sqrt();
        let mut v = vec![c(0.0, 0.0); total];
        for x in members {
            v[x] = c(amp, 0.0);
        }
        occs.push(occ);
        vecs.push(v);
    }
    Ok((occs, orthonormalize(&vecs)))
}

pub fn sym_basis(d: usize, n: usize) -> Result<SymBasis> {
    let (occupations, vectors) = occupation_states(d, n, |_| true)?;
    Ok(SymBasis { d, n, occupations, vectors })
}

/// Normalized Σ_π P_π|ψ⟩ for ψ on n copies of its first factor's layout.
pub fn sym_vector(psi: &PureState, n: usize) -> Result<PureState> {
    let blocks = copy_blocks(psi.dims(), n)?;
    let v = symmetrize_vector(psi.amps(), psi.dims(), &blocks)?;
    if norm(&v) <= 1e-10 {
        return Err(Error::InvalidArgument("vector is orthogonal to the symmetric subspace".into()));
    }
    PureState::normalized(psi.dims().to_vec(), v)
}

/// Unitary whose first column is θ and whose other columns span θ^⊥, built
/// from the Householder reflection taking θ to the first axis.
pub fn theta_frame(theta: &PureState) -> Result<CMat> {
    let t = theta.amps();
    let d = t.len();
    let r0 = t[0].norm();
    let beta = if r0 > 0.0 { -t[0] / r0 } else { c(-1.0, 0.0) };
    let mut w = t.to_vec();
    w[0] -= beta;
    let ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    let mut h = CMat::identity(d);
    if ww > 0.0 {
        for i in 0..d {
            for j in 0..d {
                h[(i, j)] -= w[i] * w[j].conj() * (2.0 / ww);
            }
        }
    }
    for i in 0..d {
        h[(i, 0)] *= beta;
    }
    Ok(h)
}

/// Orthonormal basis of the almost power states |θ⟩^{[⊗,n,r]}, ordered by
/// the number k ≤ r of copies outside θ.
#[derive(Clone, Debug)]
pub struct AlmostPowerBasis {
    pub theta: PureState,
    pub n: usize,
    pub r: usize,
    /// Number of non-θ copies of each basis vector.
    pub sectors: Vec<usize>,
    pub vectors: Vec<Vec<C64>>,
}

impl AlmostPowerBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        vec![self.theta.dim(); self.n]
    }

    pub fn projector(&self) -> HermOperator {
        projector_onto(&self.vectors, &self.dims())
    }

    /// Basis vectors of the sector with exactly k copies outside θ.
    pub fn sector(&self, k: usize) -> Vec<&[C64]> {
        self.sectors.iter().zip(&self.vectors).filter(|(s, _)| **s == k).map(|(_, v)| v.as_slice()).collect()
    }
}

/// Rotates the columns by U^{⊗n}.
fn rotate(vectors: &[Vec<C64>], u: &CMat, n: usize) -> Vec<Vec<C64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let block = CMat::from_columns(vectors[0].len(), vectors);
    let out = apply_kron_power(&block, u, n);
    (0..out.cols()).map(|j| out.column(j)).collect()
}

pub fn almost_power_basis(theta: &PureState, n: usize, r: usize) -> Result<AlmostPowerBasis> {
    if r > n {
        return Err(Error::InvalidArgument(format!("r = {r} exceeds n = {n}")));
    }
    if theta.dims().len() != 1 {
        return Err(Error::InvalidSubsystems("θ must be a single-system state".into()));
    }
    let d = theta.dim();
    let (occs, local) = occupation_states(d, n, |occ| n - occ[0] <= r)?;
    let u = theta_frame(theta)?;
    let vectors = orthonormalize(&rotate(&local, &u, n));
    let sectors = occs.iter().map(|o| n - o[0]).collect();
    Ok(AlmostPowerBasis { theta: theta.clone(), n, r, sectors, vectors })
}

/// Σ_k Σ_j coeffs[k][j] · (j-th basis vector of sector k), on n copies. This
/// is Σ_k β_k Sym(η_k ⊗ θ^{⊗n−k}) with η_k expanded in the symmetric
/// occupation basis of (θ^⊥)^{⊗k}.
pub fn almost_power_state(theta: &PureState, n: usize, coeffs: &[Vec<C64>]) -> Result<Vec<C64>> {
    let r = coeffs.len().saturating_sub(1);
    let basis = almost_power_basis(theta, n, r.min(n))?;
    let mut out = vec![c(0.0, 0.0); checked_power(theta.dim(), n, DEFAULT_DIM_CAP)?];
    for (k, ck) in coeffs.iter().enumerate() {
        let sector = basis.sector(k);
        if ck.len() > sector.len() {
            return Err(Error::DimensionMismatch(format!("sector {k} has {} vectors, got {} coefficients", sector.len(), ck.len())));
        }
        for (a, v) in ck.iter().zip(sector) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += a * x;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct PostSelectionReport {
    /// |⟨Ψ_n|θ^{⊗n}⟩|.
    pub overlap: f64,
    /// λ_min(overlap^{-2} tr_{1..m}|Ψ_n⟩⟨Ψ_n| − |Ψ_{n,m}⟩⟨Ψ_{n,m}|).
    pub operator_bound_min_eig: f64,
    /// ‖|Ψ_{n,m}⟩⟨Ψ_{n,m}| − |Ψ_{n,m,r}⟩⟨Ψ_{n,m,r}|‖₁.
    pub trace_distance: f64,
    /// 2√2 overlap^{-1} e^{−mr/2n}.
    pub trace_distance_bound: f64,
}

impl PostSelectionReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.operator_bound_min_eig >= -slack && self.trace_distance <= self.trace_distance_bound + slack
    }
}

#[derive(Clone, Debug)]
pub struct PostSelection {
    /// (⟨θ|^{⊗m} ⊗ 1)Ψ_n, normalized.
    pub projected: PureState,
    /// `projected` restricted to at most r copies outside θ, normalized.
    pub truncated: PureState,
    pub report: PostSelectionReport,
}

fn check_copies(psi: &PureState, d: usize) -> Result<usize> {
    if psi.dims().iter().any(|&x| x != d) {
        return Err(Error::DimensionMismatch(format!("state dims {:?} are not copies of C^{d}", psi.dims())));
    }
    Ok(psi.dims().len())
}

/// Post-selects the first m copies of a symmetric Ψ_n on θ and truncates the
/// result to an almost power state with at most r copies outside θ.
pub fn postselect_power(psi_n: &PureState, theta: &PureState, m: usize, r: usize) -> Result<PostSelection> {
    let d = theta.dim();
    let n = check_copies(psi_n, d)?;
    if m + r > n {
        return Err(Error::InvalidArgument(format!("m + r = {} exceeds n = {n}", m + r)));
    }
    let sym = symmetrize_vector(psi_n.amps(), psi_n.dims(), &copy_blocks(psi_n.dims(), n)?)?;
    let residual = sym.iter().zip(psi_n.amps()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if residual > SYMMETRY_INPUT_TOL {
        return Err(Error::NotPermutationInvariant { residual });
    }
    let overlap = inner(theta.tensor_power(n).amps(), psi_n.amps()).norm();
    if overlap <= 1e-10 {
        return Err(Error::InvalidArgument(format!("overlap with θ^⊗n is {overlap:.3e}")));
    }
    let rest = n - m;
    let tail = checked_power(d, rest, DEFAULT_DIM_CAP)?;
    let theta_m = theta.tensor_power(m);
    let mut contracted = vec![c(0.0, 0.0); tail];
    for (x, t) in theta_m.amps().iter().enumerate() {
        let tc = t.conj();
        for (y, o) in contracted.iter_mut().enumerate() {
            *o += tc * psi_n.amps()[x * tail + y];
        }
    }
    let dims = vec![d; rest];
    let projected = PureState::normalized(dims.clone(), contracted)?;

    let u = theta_frame(theta)?;
    let local = rotate(&[projected.amps().to_vec()], &u.adjoint(), rest).remove(0);
    let kept: Vec<C64> = local
        .iter()
        .enumerate()
        .map(|(x, &z)| if digits(x, d, rest).iter().filter(|&&a| a != 0).count() <= r { z } else { c(0.0, 0.0) })
        .collect();
    let truncated = PureState::normalized(dims, rotate(&[kept], &u, rest).remove(0))?;

    let keep: Vec<usize> = (m..n).collect();
    let reduced = psi_n.reduced(&keep)?;
    let bound_op = reduced.op().scaled(overlap.powi(-2)).minus(projected.density().op());
    let operator_bound_min_eig = bound_op.eig()?.lambda_min();
    let f = projected.inner(&truncated).norm_sqr().min(1.0);
    let report = PostSelectionReport {
        overlap,
        operator_bound_min_eig,
        trace_distance: 2.0 * (1.0 - f).sqrt(),
        trace_distance_bound: 2.0 * 2f64.sqrt() / overlap * (-((m * r) as f64) / (2.0 * n as f64)).exp(),
    };
    Ok(PostSelection { projected, truncated, report })
}

/// Random symmetric Ψ_n = normalize(t θ^{⊗n} + (1 − t) v) with v Gaussian in
/// Sym(C^d ⊗ n) and t uniform, redrawn until |⟨Ψ_n|θ^{⊗n}⟩| ≥ `min_overlap`.
pub fn random_symmetric_near_power(theta: &PureState, n: usize, min_overlap: f64, seed: u64) -> Result<PureState> {
    if !(0.0..1.0).contains(&min_overlap) {
        return Err(Error::InvalidArgument(format!("min_overlap = {min_overlap} must lie in [0, 1)")));
    }
    let basis = sym_basis(theta.dim(), n)?;
    let power = theta.tensor_power(n);
    let mut rng = random::rng(seed);
    loop {
        let mut v = vec![c(0.0, 0.0); power.dim()];
        for b in &basis.vectors {
            let g = random::complex_gaussian(&mut rng);
            for (o, x) in v.iter_mut().zip(b) {
                *o += g * x;
            }
        }
        let scale = 1.0 / norm(&v);
        let t: f64 = rng.random();
        let mix: Vec<C64> = power.amps().iter().zip(&v).map(|(p, x)| p * t + x * ((1.0 - t) * scale)).collect();
        if norm(&mix) < 1e-9 {
            continue;
        }
        let psi = PureState::normalized(vec![theta.dim(); n], mix)?;
        if inner(power.amps(), psi.amps()).norm() >= min_overlap {
            return Ok(psi);
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DeFinettiSuite {
    pub n: usize,
    pub states: usize,
    /// Post-selections checked (states × admissible (m, r) pairs).
    pub instances: usize,
    pub failures: usize,
    pub worst_operator_min_eig: f64,
    /// min over instances of bound − trace distance.
    pub worst_trace_margin: f64,
}

/// Post-selection checks on `states` random symmetric qubit-or-qudit states
/// for every (m, r) with m ≥ 1, r ≥ 0 and m + r ≤ n.
pub fn definetti_suite(d: usize, n: usize, states: usize, min_overlap: f64, seed: u64, slack: f64) -> Result<DeFinettiSuite> {
    let mut out = DeFinettiSuite {
        n,
        states,
        instances: 0,
        failures: 0,
        worst_operator_min_eig: f64::INFINITY,
        worst_trace_margin: f64::INFINITY,
    };
    for k in 0..states {
        let s = random::child_seed(seed, k as u64);
        let theta = crate::states::random_pure(&[d], s);
        let psi = random_symmetric_near_power(&theta, n, min_overlap, s ^ 0x5eed)?;
        for m in 1..=n {
            for r in 0..=(n - m) {
                let rep = postselect_power(&psi, &theta, m, r)?.report;
                out.instances += 1;
                out.worst_operator_min_eig = out.worst_operator_min_eig.min(rep.operator_bound_min_eig);
                out.worst_trace_margin = out.worst_trace_margin.min(rep.trace_distance_bound - rep.trace_distance);
                if !rep.holds(slack) {
                    out.failures += 1;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct TypicalProjector {
    pub projector: HermOperator,
    /// tr(ρ^{⊗n} Π).
    pub mass: f64,
    /// Number of typical eigen-sequences.
    pub rank: usize,
}

/// Π_δ^n onto eigen-sequences i^n of ρ^{⊗n} with |−log₂ p_{i^n} − nS(ρ)| ≤ nδ.
pub fn typical_projector(rho: &crate::states::DensityMatrix, n: usize, delta: f64) -> Result<TypicalProjector> {
    if rho.dims().len() != 1 {
        return Err(Error::InvalidSubsystems("typical projectors are built for single-system states".into()));
    }
    let d = rho.dim();
    let total = checked_power(d, n, DEFAULT_DIM_CAP)?;
    let s = rho.op().eig()?;
    let p: Vec<f64> = s.values.iter().map(|&v| v.max(0.0)).collect();
    let entropy: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum();
    let mut cols = Vec::new();
    let mut mass = 0.0;
    for x in 0..total {
        let seq = digits(x, d, n);
        if seq.iter().any(|&a| p[a] == 0.0) {
            continue;
        }
        let info: f64 = seq.iter().map(|&a| -p[a].log2()).sum();
        if (info - n as f64 * entropy).abs() <= n as f64 * delta + 1e-9 {
            let mut e = vec![c(0.0, 0.0); total];
            e[x] = c(1.0, 0.0);
            cols.push(e);
            mass += seq.iter().map(|&a| p[a]).product::<f64>();
        }
    }
    let rank = cols.len();
    let projector = if cols.is_empty() {
        HermOperator::zeros(&vec![d; n])
    } else {
        projector_onto(&rotate(&cols, &s.vectors, n), &vec![d; n])
    };
    Ok(TypicalProjector { projector, mass, rank })
}

/// λ_min(|X| Σ_k |ψ_k⟩⟨ψ_k| − |Ψ⟩⟨Ψ|) for Ψ = Σ_k ψ_k.
pub fn superposition_check(psis: &[Vec<C64>]) -> Result<f64> {
    let Some(first) = psis.first() else {
        return Err(Error::InvalidArgument("no vectors".into()));
    };
    let dim = first.len();
    let mut total = vec![c(0.0, 0.0); dim];
    let mut mix = CMat::zeros(dim, dim);
    for v in psis {
        if v.len() != dim {
            return Err(Error::DimensionMismatch("vectors of different lengths".into()));
        }
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
        mix = &mix + &CMat::outer(v, v);
    }
    let lhs = HermOperator::from_hermitian_part(vec![dim], mix.scale(psis.len() as f64));
    Ok(lhs.minus(&HermOperator::projector(&total, &[dim])).eig()?.lambda_min())
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceBoundCheck {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub k_max: usize,
    /// λ_min(2^{n h(r/(n−m))} n² tr_{1..r}|Φ⟩⟨Φ| − (θθ†)^{⊗n−m−r}).
    pub min_eig: f64,
}

/// Operator inequality between the reduced state of an almost power vector
/// Φ on n − m copies and the corresponding power of θ. Φ need not be
/// normalized; `k_max` is its largest occupied sector.
pub fn trace_bound_check(phi: &[C64], theta: &PureState, n: usize, m: usize, r: usize, k_max: usize) -> Result<TraceBoundCheck> {
    let rest = n.checked_sub(m).ok_or_else(|| Error::InvalidArgument("m exceeds n".into()))?;
    if r > rest {
        return Err(Error::InvalidArgument(format!("r = {r} exceeds n − m = {rest}")));
    }
    let d = theta.dim();
    let dims = vec![d; rest];
    if phi.len() != checked_power(d, rest, DEFAULT_DIM_CAP)? {
        return Err(Error::DimensionMismatch("Φ does not live on n − m copies".into()));
    }
    let outer = HermOperator::from_hermitian_part(dims, CMat::outer(phi, phi));
    let keep: Vec<usize> = (r..rest).collect();
    let reduced = if keep.is_empty() {
        HermOperator::from_real_diag(&[outer.trace()])
    } else {
        crate::linalg::partial_trace(&outer, &keep)?
    };
    let h = binary_entropy(r as f64 / rest as f64)?;
    let scale = 2f64.powf(n as f64 * h) * (n * n) as f64;
    let power = if keep.is_empty() {
        HermOperator::from_real_diag(&[1.0])
    } else {
        theta.tensor_power(rest - r).density().into_op()
    };
    let min_eig = reduced.scaled(scale).minus(&power).eig()?.lambda_min();
    Ok(TraceBoundCheck { n, m, r, k_max, min_eig })
}

/// C(n, k) ≤ 2^{n h(k/n)} for all k ≤ n; returns the largest
/// log₂ C(n, k) − n h(k/n), which is ≤ 0 when the bound holds.
pub fn binomial_entropy_margin(n: usize) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    let mut log_binom = 0.0f64;
    for k in 0..=n {
        if k > 0 {
            log_binom += ((n - k + 1) as f64 / k as f64).log2();
        }
        let h = binary_entropy(k as f64 / n.max(1) as f64)?;
        worst = worst.max(log_binom - n as f64 * h);
    }
    Ok(worst)
}

/// Empirical letter frequencies from measuring every copy of ψ in the
/// computational basis `shots` times.
pub fn sample_frequencies(psi: &PureState, shots: usize, seed: u64) -> Result<Vec<f64>> {
    let d = *psi.dims().first().ok_or_else(|| Error::InvalidArgument("empty state".into()))?;
    let n = check_copies(psi, d)?;
    let probs: Vec<f64> = psi.amps().iter().map(|z| z.norm_sqr()).collect();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let mut rng = random::rng(seed);
    let mut counts = vec![0usize; d];
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * acc;
        let x = cdf.partition_point(|&c| c < u).min(probs.len() - 1);
        for a in digits(x, d, n) {
            counts[a] += 1;
        }
    }
    let total = (shots * n).max(1) as f64;
    Ok(counts.into_iter().map(|k| k as f64 / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{permute_vector, random_pure, Permutation};

    fn is_symmetric(v: &[C64], d: usize, n: usize) -> f64 {
        let dims = vec![d; n];
        let blocks = copy_blocks(&dims, n).unwrap();
        let mut worst: f64 = 0.0;
        for j in 1..n {
            let w = permute_vector(v, &dims, &blocks, &Permutation::transposition(n, j - 1, j)).unwrap();
            worst = worst.max(w.iter().zip(v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
        }
        worst
    }

    #[test]
    fn sym_basis_sizes() {
        let b = sym_basis(2, 2).unwrap();
        assert_eq!(b.len(), 3);
        assert!((b.vectors[1][1].re - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(sym_basis(2, 5).unwrap().len(), 6);
        let b = sym_basis(3, 3).unwrap();
        assert_eq!(b.len(), 10);
        for (i, u) in b.vectors.iter().enumerate() {
            assert!(is_symmetric(u, 3, 3) < 1e-10);
            for (j, v) in b.vectors.iter().enumerate() {
                let g = inner(u, v);
                assert!((g - c(if i == j { 1.0 } else { 0.0 }, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn sym_vector_of_01() {
        let s = sym_vector(&PureState::basis(&[2, 2], 1), 2).unwrap();
        assert!((s.amps()[1].re - 0.5f64.sqrt()).abs() < 1e-12 && (s.amps()[2].re - 0.5f64.sqrt()).abs() < 1e-12);
        let singlet = PureState::normalized(vec![2, 2], vec![c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(sym_vector(&singlet, 2).is_err());
    }

    #[test]
    fn frame_is_unitary_with_theta_first() {
        let theta = random_pure(&[3], 5);
        let u = theta_frame(&theta).unwrap();
        assert!((&u.adjoint().matmul(&u) - &CMat::identity(3)).max_abs() < 1e-12);
        for i in 0..3 {
            assert!((u[(i, 0)] - theta.amps()[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn almost_power_dimensions() {
        let theta = random_pure(&[2], 1);
        let b = almost_power_basis(&theta, 4, 0).unwrap();
        assert_eq!(b.len(), 1);
        assert!((inner(&b.vectors[0], theta.tensor_power(4).amps()).norm() - 1.0).abs() < 1e-12);
        let b = almost_power_basis(&theta, 4, 2).unwrap();
        assert_eq!(b.len(), 3);
        for v in &b.vectors {
            assert!(is_symmetric(v, 2, 4) < 1e-10);
        }
        let theta3 = random_pure(&[3], 2);
        // sectors k ≤ 1: 1 + 2 vectors
        assert_eq!(almost_power_basis(&theta3, 3, 1).unwrap().len(), 3);
    }

    #[test]
    fn postselection_of_power_state() {
        let theta = random_pure(&[2], 3);
        let psi = theta.tensor_power(5);
        let p = postselect_power(&psi, &theta, 2, 1).unwrap();
        assert!(p.report.trace_distance < 1e-10);
        assert!((p.projected.inner(&theta.tensor_power(3)).norm() - 1.0).abs() < 1e-10);
        assert!(p.report.holds(1e-9));
    }

    #[test]
    fn no_truncation_inside_sector_range() {
        let theta = random_pure(&[2], 4);
        let coeffs = vec![vec![c(0.8, 0.0)], vec![c(0.0, 0.6)]];
        let psi = PureState::normalized(vec![2; 5], almost_power_state(&theta, 5, &coeffs).unwrap()).unwrap();
        let p = postselect_power(&psi, &theta, 2, 1).unwrap();
        assert!((p.projected.inner(&p.truncated).norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn small_definetti_suite_has_no_failures() {
        let r = definetti_suite(2, 4, 5, 0.3, 2, 1e-9).unwrap();
        assert_eq!(r.instances, 5 * 10);
        assert_eq!(r.failures, 0, "{r:?}");
        let theta = random_pure(&[2], 1);
        let psi = random_symmetric_near_power(&theta, 4, 0.3, 8).unwrap();
        assert!(is_symmetric(psi.amps(), 2, 4) < 1e-10);
    }

    #[test]
    fn typical_projector_edge_cases() {
        let mixed = crate::states::DensityMatrix::maximally_mixed(&[2]);
        let t = typical_projector(&mixed, 4, 0.1).unwrap();
        assert_eq!(t.rank, 16);
        let pure = crate::states::DensityMatrix::pure(&random_pure(&[2], 9));
        let t = typical_projector(&pure, 3, 0.1).unwrap();
        assert_eq!(t.rank, 1);
        assert!((t.mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_bound_small_n() {
        for n in 1..=30 {
            assert!(binomial_entropy_margin(n).unwrap() <= 1e-12);
        }
    }
}
