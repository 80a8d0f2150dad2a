//! States with positive partial transposes.

use super::{
    admm_linear_min, dykstra, mix_with_identity, ConvexSet, Membership, Part, Projection, Projector, DYKSTRA_MAX_ITER,
    DYKSTRA_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::{check_psd, partial_transpose, tensor::check_subset, HermOperator};
use crate::states::{random_state, DensityMatrix};

const ADMM_MAX_ITER: usize = 20_000;
const ADMM_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct PptSet {
    dims: Vec<usize>,
    cuts: Vec<Vec<usize>>,
}

/// PPT states with respect to every single-subsystem cut.
pub fn ppt_set(dims: &[usize]) -> Result<PptSet> {
    if dims.len() < 2 {
        return Err(Error::InvalidSubsystems(format!("PPT needs at least two subsystems, got {dims:?}")));
    }
    // for two parties the two single-site cuts give the same condition
    let cuts = if dims.len() == 2 { vec![vec![1]] } else { (0..dims.len()).map(|i| vec![i]).collect() };
    Ok(PptSet { dims: dims.to_vec(), cuts })
}

impl PptSet {
    /// PPT across the bipartition (complement of `b_sites`) : `b_sites`.
    pub fn bipartite(dims: Vec<usize>, b_sites: Vec<usize>) -> Result<Self> {
        check_subset(&dims, &b_sites)?;
        if b_sites.is_empty() || b_sites.len() == dims.len() {
            return Err(Error::InvalidSubsystems("both sides of the cut must be nonempty".into()));
        }
        Ok(Self { dims, cuts: vec![b_sites] })
    }

    pub fn cuts(&self) -> &[Vec<usize>] {
        &self.cuts
    }

    fn parts_vec(&self) -> Vec<Part> {
        let mut v = vec![Part::Spectraplex];
        v.extend(self.cuts.iter().map(|c| Part::PtSpectraplex(c.clone())));
        v
    }

    /// Most negative eigenvalue over X and all of its cut transposes.
    fn worst_eigenvalue(&self, x: &HermOperator) -> Result<f64> {
        let mut worst = x.eig()?.lambda_min();
        for c in &self.cuts {
            worst = worst.min(partial_transpose(x, c)?.eig()?.lambda_min());
        }
        Ok(worst)
    }
}

impl ConvexSet for PptSet {
    fn label(&self) -> String {
        format!("ppt{:?}", self.dims)
    }

    fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn membership(&self, x: &HermOperator, tol: f64) -> Result<Membership> {
        let trace_err = (x.trace() - 1.0).abs();
        let worst = self.worst_eigenvalue(x)?;
        let violation = trace_err.max(-worst);
        if violation > tol {
            Ok(Membership::NotMember { violation })
        } else {
            Ok(Membership::Member)
        }
    }

    fn project(&self, x: &HermOperator) -> Result<Projection> {
        let parts = self.parts_vec();
        let refs: Vec<&dyn Projector> = parts.iter().map(|p| p as &dyn Projector).collect();
        let out = dykstra(x, &refs, DYKSTRA_MAX_ITER, DYKSTRA_TOL)?;
        Ok(Projection { point: self.repair(&out.point)?, iterations: out.iterations, converged: out.converged })
    }

    fn linear_min(&self, h: &HermOperator) -> Result<HermOperator> {
        let parts = self.parts_vec();
        let refs: Vec<&dyn Projector> = parts.iter().map(|p| p as &dyn Projector).collect();
        let (z, _) = admm_linear_min(h, &refs, ADMM_MAX_ITER, ADMM_TOL)?;
        self.repair(&z)
    }

    fn interior_point(&self) -> Result<DensityMatrix> {
        Ok(DensityMatrix::maximally_mixed(&self.dims))
    }

    fn sample_member(&self, seed: u64) -> Result<DensityMatrix> {
        let d = self.dim();
        let rank = 1 + (seed as usize % d);
        let r = random_state(d, rank, seed)?.into_op().with_dims(self.dims.clone())?;
        Ok(DensityMatrix::assume_valid(self.project(&r)?.point))
    }

    fn parts(&self) -> Option<Vec<Part>> {
        Some(self.parts_vec())
    }

    /// Spectraplex projection followed by the least mixing with I/D that
    /// makes every partial transpose PSD.
    fn repair(&self, x: &HermOperator) -> Result<HermOperator> {
        let y = super::project_spectraplex(x)?;
        let neg = (-self.worst_eigenvalue(&y)?).max(0.0);
        if neg == 0.0 {
            return Ok(y);
        }
        let d = self.dim() as f64;
        let t = ((neg * d) / (1.0 + neg * d) * (1.0 + 1e-9)).min(1.0);
        let out = mix_with_identity(&y, t);
        check_psd(&out, "ppt repair")?;
        Ok(out)
    }
}
