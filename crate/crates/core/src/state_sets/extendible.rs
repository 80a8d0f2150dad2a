//! Symmetric extensions of a bipartite state over k copies of B.

use crate::divergences::relative_entropy;
use crate::error::{Error, Result};
use crate::linalg::{checked_power, HermOperator, DEFAULT_DIM_CAP};
use crate::states::{symmetrize_blocks, DensityMatrix};

#[derive(Clone, Debug)]
pub struct KExtension {
    /// ρ̃ on A ⊗ B_1 ⊗ … ⊗ B_k.
    pub extension: DensityMatrix,
    /// tr_{B_2…B_k} ρ̃ = ρ/k + (1 − 1/k) ρ_A ⊗ I/d_B.
    pub reduction: DensityMatrix,
    /// λ_min(ρ̃ − ρ ⊗ (I/d_B)^{⊗k−1}/k).
    pub bound_min_eig: f64,
    /// λ_min(ρ̃ − ρ ⊗ (I/d_B²)^{⊗k−1}/k), the weaker scaled-identity form.
    pub scaled_bound_min_eig: f64,
    /// S(ρ ‖ reduction) in bits; at most log₂ k.
    pub relative_entropy: f64,
    /// Largest entrywise change of ρ̃ under any transposition of B copies.
    pub b_symmetry_residual: f64,
}

/// Builds ρ̃ = Sym_{B_1…B_k}(ρ_{AB_1} ⊗ (I/d_B)^{⊗k−1}) and checks the operator
/// inequality ρ̃ ≥ ρ ⊗ (I/d_B)^{⊗k−1}/k, which gives S(ρ‖tr_{B_2…B_k} ρ̃) ≤ log₂ k
/// by operator monotonicity of the logarithm.
pub fn k_extendible_embed(rho: &DensityMatrix, k: usize) -> Result<KExtension> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let dims = rho.dims();
    if dims.len() != 2 {
        return Err(Error::InvalidSubsystems(format!("expected a bipartite state, got dims {dims:?}")));
    }
    let (da, db) = (dims[0], dims[1]);
    checked_power(db, k, DEFAULT_DIM_CAP / da.max(1))?;
    let pad = HermOperator::identity(&[db]).scaled(1.0 / db as f64);
    let mut base = rho.op().clone();
    for _ in 1..k {
        base = base.kron(&pad);
    }
    let blocks: Vec<Vec<usize>> = (1..=k).map(|i| vec![i]).collect();
    let ext = symmetrize_blocks(&base, &blocks)?;
    let bound_min_eig = ext.minus(&base.scaled(1.0 / k as f64)).eig()?.lambda_min();
    let mut scaled = rho.op().clone();
    let weak_pad = HermOperator::identity(&[db]).scaled(1.0 / (db * db) as f64);
    for _ in 1..k {
        scaled = scaled.kron(&weak_pad);
    }
    let scaled_bound_min_eig = ext.minus(&scaled.scaled(1.0 / k as f64)).eig()?.lambda_min();

    let mut b_symmetry_residual: f64 = 0.0;
    for j in 1..k {
        let pi = crate::states::Permutation::transposition(k, 0, j);
        let moved = crate::states::permute_operator(&ext, &blocks, &pi)?;
        b_symmetry_residual = b_symmetry_residual.max((moved.mat() - ext.mat()).max_abs());
    }
    let extension = DensityMatrix::assume_valid(ext);
    let reduction = extension.partial_trace(&[0, 1])?;
    let s = relative_entropy(rho, &reduction)?.value;
    Ok(KExtension {
        extension,
        reduction,
        bound_min_eig,
        scaled_bound_min_eig,
        relative_entropy: s,
        b_symmetry_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::max_entangled;

    #[test]
    fn k_one_is_identity() {
        let rho = crate::states::random_state_dims(&[2, 2], 4, 3).unwrap();
        let e = k_extendible_embed(&rho, 1).unwrap();
        assert!(e.relative_entropy.abs() < 1e-10);
    }

    #[test]
    fn bell_two_extension() {
        let rho = max_entangled(2).density();
        let e = k_extendible_embed(&rho, 2).unwrap();
        assert!(e.relative_entropy <= 1.0 + 1e-9, "{}", e.relative_entropy);
        assert!(e.bound_min_eig >= -1e-12);
        assert!(e.b_symmetry_residual == 0.0);
    }

    #[test]
    fn three_extension_bounds() {
        let rho = crate::states::random_state_dims(&[2, 2], 2, 8).unwrap();
        let e = k_extendible_embed(&rho, 3).unwrap();
        assert!(e.scaled_bound_min_eig >= -1e-9 && e.bound_min_eig >= -1e-9);
        assert!(e.relative_entropy <= 3f64.log2() + 1e-6);
    }
}
