//! Density matrices, pure states, purifications and random generation.

mod permutation;

pub use permutation::{
    copy_blocks, copy_layout, permutation_operator, permute_operator, permute_vector, symmetrization_residual,
    symmetrize, symmetrize_blocks, symmetrize_sampled, symmetrize_vector, Permutation,
};

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{
    self, fidelity, matrix_fn, tensor, CMat, HermOperator, MatrixFile, MatrixFn, C64, PSD_TOL,
};
use crate::random;

/// Trace tolerance for states.
pub const TRACE_TOL: f64 = 1e-10;
/// Tolerance on the permutation-invariance residual of symmetric inputs.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Positive semidefinite, unit-trace Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(HermOperator);

impl DensityMatrix {
    pub fn op(&self) -> &HermOperator {
        &self.0
    }

    pub fn into_op(self) -> HermOperator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn dims(&self) -> &[usize] {
        self.0.dims()
    }

    pub fn maximally_mixed(dims: &[usize]) -> Self {
        let d: usize = dims.iter().product();
        Self(HermOperator::identity(dims).scaled(1.0 / d as f64))
    }

    pub fn from_diag(p: &[f64]) -> Result<Self> {
        validate_state(HermOperator::from_real_diag(p))
    }

    pub fn pure(psi: &PureState) -> Self {
        Self(HermOperator::projector(&psi.amps, &psi.dims))
    }

    /// Wraps an operator already known to be a state up to roundoff; the trace
    /// is renormalized.
    pub fn assume_valid(op: HermOperator) -> Self {
        let t = op.trace();
        if (t - 1.0).abs() > 0.0 && t > 0.0 {
            Self(op.scaled(1.0 / t))
        } else {
            Self(op)
        }
    }

    /// λρ + (1-λ)σ.
    pub fn mix(&self, weight: f64, other: &Self) -> Self {
        Self(self.0.combine(weight, &other.0, 1.0 - weight))
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kron(&other.0))
    }

    pub fn tensor_power(&self, n: usize, cap: usize) -> Result<Self> {
        Ok(Self(linalg::kron_power(&self.0, n, cap)?))
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        Ok(Self(linalg::partial_trace(&self.0, keep)?))
    }

    pub fn with_dims(self, dims: Vec<usize>) -> Result<Self> {
        Ok(Self(self.0.with_dims(dims)?))
    }

    pub fn purity(&self) -> f64 {
        self.0.inner(&self.0)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        linalg::write_operator(path, &self.0, Some("density"))
    }
}

/// Checks PSD (λ_min ≥ -1e-9·max(1, λ_max)) and unit trace (1e-10); the
/// error names the violated invariant and the violation size.
pub fn validate_state(op: HermOperator) -> Result<DensityMatrix> {
    let s = op.eig()?;
    let floor = -PSD_TOL * s.spectral_radius().max(1.0);
    if s.lambda_min() < floor {
        return Err(Error::InvalidState(format!(
            "not positive semidefinite: λ_min = {:.6e} (tolerance {:.1e})",
            s.lambda_min(),
            floor
        )));
    }
    let t = op.trace();
    if (t - 1.0).abs() > TRACE_TOL {
        return Err(Error::InvalidState(format!("trace = {t:.12} deviates from 1 by {:.3e}", (t - 1.0).abs())));
    }
    Ok(DensityMatrix(op))
}

/// Unit vector with tensor-factor dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl PureState {
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if d != amps.len() {
            return Err(Error::DimensionMismatch(format!("{} amplitudes for dims {dims:?}", amps.len())));
        }
        let norm = norm(&amps);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("norm {norm:.12} is not 1")));
        }
        Ok(Self { dims, amps })
    }

    /// Normalizes a nonzero vector.
    pub fn normalized(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let n = norm(&amps);
        if n < 1e-300 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::new(dims, amps.into_iter().map(|z| z / n).collect())
    }

    pub fn basis(dims: &[usize], index: usize) -> Self {
        let d: usize = dims.iter().product();
        let mut amps = vec![C64::new(0.0, 0.0); d];
        amps[index] = C64::new(1.0, 0.0);
        Self { dims: dims.to_vec(), amps }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn inner(&self, other: &Self) -> C64 {
        inner(&self.amps, &other.amps)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::pure(self)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, amps: tensor::kron_vectors(&self.amps, &other.amps) }
    }

    pub fn tensor_power(&self, n: usize) -> Self {
        let mut out = self.clone();
        for _ in 1..n {
            out = out.kron(self);
        }
        out
    }

    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        self.density().partial_trace(keep)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let m = CMat::from_vec(self.dim(), 1, self.amps.clone());
        let f = MatrixFile::from_cmat(&self.dims, &m, Some("pure"));
        std::fs::write(path, serde_json::to_string_pretty(&f)?)?;
        Ok(())
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A state file holds either a density matrix or a pure state.
#[derive(Clone, Debug)]
pub enum StateFile {
    Density(DensityMatrix),
    Pure(PureState),
}

impl StateFile {
    pub fn into_density(self) -> DensityMatrix {
        match self {
            Self::Density(d) => d,
            Self::Pure(p) => p.density(),
        }
    }
}

pub fn read_state(path: &Path) -> Result<StateFile> {
    let text = std::fs::read_to_string(path)?;
    let f: MatrixFile = serde_json::from_str(&text)?;
    match f.kind.as_deref() {
        Some("pure") => {
            let m = f.to_cmat()?;
            if m.cols() != 1 {
                return Err(Error::InvalidState("pure state must be stored as a column".into()));
            }
            Ok(StateFile::Pure(PureState::new(f.dims.clone(), m.into_data())?))
        }
        Some("density") | None => Ok(StateFile::Density(validate_state(f.to_operator()?)?)),
        Some(other) => Err(Error::InvalidState(format!("unknown state kind {other:?}"))),
    }
}

/// (1⊗√ρ)|φ+⟩ with |φ+⟩ = Σ_k |k,k⟩. The first factor is the reference; the
/// second factor carries ρ.
pub fn purify(rho: &DensityMatrix) -> Result<PureState> {
    let root = matrix_fn(rho.op(), MatrixFn::Sqrt)?;
    let d = rho.dim();
    let m = root.mat();
    let mut amps = Vec::with_capacity(d * d);
    for k in 0..d {
        for j in 0..d {
            amps.push(m[(j, k)]);
        }
    }
    PureState::normalized(vec![d, d], amps)
}

/// Output of [`purify_symmetric`].
#[derive(Clone, Debug)]
pub struct SymmetricPurification {
    /// Purification on n (reference, system) pairs, laid out copy by copy.
    pub state: PureState,
    /// |⟨Ψ_n|θ^{⊗n}⟩| after symmetrization.
    pub overlap: f64,
    /// F(ρ_n, ρ^{⊗n}).
    pub fidelity: f64,
    /// ‖Ψ_sym - Ψ‖ introduced by the final symmetrization.
    pub symmetrization_shift: f64,
    /// max |tr_ref Ψ - ρ_n| after symmetrization.
    pub reduced_state_error: f64,
}

/// Builds a permutation-symmetric purification of a permutation-invariant
/// `rho_n` whose overlap with θ^{⊗n} (θ = purify(ρ)) equals the fidelity.
///
/// The unitary is the polar factor of √ρ_n·√(ρ^{⊗n}) (taken from its SVD);
/// the resulting vector is then symmetrized over copy pairs and the overlap
/// re-verified against the fidelity to 1e-8.
pub fn purify_symmetric(rho_n: &DensityMatrix, rho: &DensityMatrix, n: usize) -> Result<SymmetricPurification> {
    let d = rho.dim();
    let total = linalg::checked_power(d, n, linalg::DEFAULT_DIM_CAP)?;
    if rho_n.dim() != total {
        return Err(Error::DimensionMismatch(format!("rho_n has dimension {}, expected {d}^{n}", rho_n.dim())));
    }
    let residual = symmetrization_residual(rho_n.op(), n)?;
    if residual > SYMMETRY_TOL {
        return Err(Error::NotPermutationInvariant { residual });
    }
    let rho_pow = rho.tensor_power(n, linalg::DEFAULT_DIM_CAP)?;
    let sqrt_n = matrix_fn(rho_n.op(), MatrixFn::Sqrt)?;
    let sqrt_pow = matrix_fn(rho_pow.op(), MatrixFn::Sqrt)?;
    let x = sqrt_n.mat().matmul(sqrt_pow.mat());
    let svd = x.to_faer().svd().map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))?;
    let w = CMat::from_faer(svd.U()).matmul(&CMat::from_faer(svd.V()).adjoint());
    let m = sqrt_n.mat().matmul(&w);

    // (1⊗M)|φ+⟩ in the (ref^n, sys^n) layout, then interleave into pairs
    let mut amps = Vec::with_capacity(total * total);
    for k in 0..total {
        for j in 0..total {
            amps.push(m[(j, k)]);
        }
    }
    let grouped_dims = vec![d; 2 * n];
    let order: Vec<usize> = (0..n).flat_map(|i| [i, n + i]).collect();
    let paired = tensor::reorder_vector(&amps, &grouped_dims, &order)?;
    let blocks: Vec<Vec<usize>> = (0..n).map(|i| vec![2 * i, 2 * i + 1]).collect();
    let sym = symmetrize_vector(&paired, &grouped_dims, &blocks)?;
    let shift = norm(&sym.iter().zip(&paired).map(|(a, b)| a - b).collect::<Vec<_>>());
    let state = PureState::normalized(grouped_dims.clone(), sym)?;

    let theta = purify(rho)?.tensor_power(n);
    let overlap = state.inner(&theta).norm();
    let fid = fidelity(rho_n.op(), rho_pow.op())?;
    let sys_sites: Vec<usize> = (0..n).map(|i| 2 * i + 1).collect();
    let reduced = state.reduced(&sys_sites)?;
    let reduced_state_error = (reduced.op().mat() - rho_n.op().mat()).max_abs();
    if (overlap - fid).abs() > 1e-8 || reduced_state_error > 1e-8 {
        return Err(Error::Numerical(format!(
            "symmetrized purification drifted: overlap {overlap:.12} vs fidelity {fid:.12}, reduced-state error {reduced_state_error:.3e}"
        )));
    }
    Ok(SymmetricPurification { state, overlap, fidelity: fid, symmetrization_shift: shift, reduced_state_error })
}

/// Random state of the given rank: partial trace of a Gaussian pure state on
/// C^d ⊗ C^rank.
pub fn random_state(d: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    if rank == 0 || rank > d {
        return Err(Error::InvalidArgument(format!("rank {rank} must lie in 1..={d}")));
    }
    let mut rng = random::rng(seed);
    let g = CMat::from_fn(d, rank, |_, _| random::complex_gaussian(&mut rng));
    let rho = g.matmul(&g.adjoint());
    let t = rho.trace().re;
    Ok(DensityMatrix(HermOperator::from_hermitian_part(vec![d], rho.scale(1.0 / t))))
}

/// Random state with an explicit tensor layout.
pub fn random_state_dims(dims: &[usize], rank: usize, seed: u64) -> Result<DensityMatrix> {
    let d = dims.iter().product();
    random_state(d, rank, seed)?.with_dims(dims.to_vec())
}

pub fn random_pure(dims: &[usize], seed: u64) -> PureState {
    let d = dims.iter().product();
    let mut rng = random::rng(seed);
    PureState { dims: dims.to_vec(), amps: random::unit_vector(d, &mut rng) }
}

/// The maximally entangled state Σ_k |kk⟩/√d on C^d⊗C^d.
pub fn max_entangled(d: usize) -> PureState {
    let mut amps = vec![C64::new(0.0, 0.0); d * d];
    let s = 1.0 / (d as f64).sqrt();
    for k in 0..d {
        amps[k * d + k] = C64::new(s, 0.0);
    }
    PureState { dims: vec![d, d], amps }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_examples() {
        assert!(validate_state(HermOperator::identity(&[2]).scaled(0.5)).is_ok());
        let err = validate_state(HermOperator::from_real_diag(&[1.5, -0.5])).unwrap_err();
        assert!(err.to_string().contains("λ_min"));
        let err = validate_state(HermOperator::from_real_diag(&[0.5, 0.5001])).unwrap_err();
        assert!(err.to_string().contains("1.000e-4"), "{err}");
    }

    #[test]
    fn purify_pure_state_is_product() {
        let rho = DensityMatrix::from_diag(&[1.0, 0.0]).unwrap();
        let psi = purify(&rho).unwrap();
        assert!((psi.amps()[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn purify_maximally_mixed_gives_maximally_entangled() {
        let psi = purify(&DensityMatrix::maximally_mixed(&[2])).unwrap();
        let red = psi.reduced(&[1]).unwrap();
        let f = fidelity(red.op(), DensityMatrix::maximally_mixed(&[2]).op()).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        assert!((psi.inner(&max_entangled(2)).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_state_rank_one_is_pure_and_deterministic() {
        let a = random_state(3, 1, 11).unwrap();
        assert!((a.purity() - 1.0).abs() < 1e-10);
        let b = random_state(3, 1, 11).unwrap();
        assert_eq!(a, b);
        assert!(random_state(2, 3, 0).is_err());
    }

    #[test]
    fn purify_symmetric_on_power_state() {
        let rho = random_state(2, 2, 3).unwrap();
        let rho2 = rho.tensor_power(2, 4096).unwrap();
        let p = purify_symmetric(&rho2, &rho, 2).unwrap();
        assert!((p.overlap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn purify_symmetric_rejects_asymmetric_input() {
        let a = random_state(2, 2, 1).unwrap();
        let b = random_state(2, 2, 2).unwrap();
        let x = a.kron(&b);
        assert!(matches!(purify_symmetric(&x, &a, 2), Err(Error::NotPermutationInvariant { .. })));
    }
}
