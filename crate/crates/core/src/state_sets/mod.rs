//! Convex sets of states given as oracle bundles (membership, Frobenius
//! projection, linear minimization), the concrete sets used throughout the
//! crate, and randomized checks of the closure properties of set families.
//!
//! Separability is bracketed rather than decided: [`PptSet`] is an outer
//! relaxation and [`SepInnerSet`] a hull of explicit product states.

mod extendible;
mod family;
mod ppt;
mod sep_inner;
mod simple;

pub use extendible::{k_extendible_embed, KExtension};
pub use family::{
    family_property_check, ClauseReport, FamilyReport, FixedHullFamily, PptFamily, SepInnerFamily, SetFamily,
    SingletonFamily,
};
pub use ppt::{ppt_set, PptSet};
pub use sep_inner::{sep_inner_set, ProductCertificate, SepInnerSet};
pub use simple::{FixedHull, Singleton};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{HermOperator, MatrixFile};
use crate::states::DensityMatrix;

/// Dykstra iteration cap.
pub const DYKSTRA_MAX_ITER: usize = 5000;
/// Dykstra stops when successive iterates differ by less than this (Frobenius).
pub const DYKSTRA_TOL: f64 = 1e-9;
/// Default number of seesaw restarts.
pub const SEESAW_RESTARTS: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum Membership {
    Member,
    /// Certified outside, with the size of the violated constraint.
    NotMember { violation: f64 },
    /// The oracle could not decide (e.g. an iterative fit did not converge).
    Indeterminate { residual: f64 },
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Self::Member)
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub point: HermOperator,
    pub iterations: usize,
    pub converged: bool,
}

/// One convex set M_n of states on a fixed tensor layout.
pub trait ConvexSet: Send + Sync {
    fn label(&self) -> String;

    fn dims(&self) -> &[usize];

    fn dim(&self) -> usize {
        self.dims().iter().product()
    }

    fn membership(&self, x: &HermOperator, tol: f64) -> Result<Membership>;

    /// Nearest member in Frobenius norm.
    fn project(&self, x: &HermOperator) -> Result<Projection>;

    /// A member minimizing tr(Hσ).
    fn linear_min(&self, h: &HermOperator) -> Result<HermOperator>;

    /// A full-rank member, used as the starting point of iterative solvers.
    fn interior_point(&self) -> Result<DensityMatrix>;

    /// A pseudo-random member (deterministic in `seed`).
    fn sample_member(&self, seed: u64) -> Result<DensityMatrix>;

    /// Decomposition as an intersection of sets with closed-form projections,
    /// when one exists. Lets callers run a single flat Dykstra loop instead of
    /// nesting [`ConvexSet::project`].
    fn parts(&self) -> Option<Vec<Part>> {
        None
    }

    /// Smallest shift into the set along the segment towards the interior
    /// point, for points that violate membership only by roundoff.
    fn repair(&self, x: &HermOperator) -> Result<HermOperator> {
        Ok(self.project(x)?.point)
    }
}

/// Anything with a Euclidean (Frobenius) projection.
pub trait Projector {
    fn project(&self, x: &HermOperator) -> Result<HermOperator>;
}

/// Sets with closed-form projections.
#[derive(Clone, Debug)]
pub enum Part {
    /// {X ⪰ 0, tr X = 1}.
    Spectraplex,
    /// {X : X^{Γ_S} ∈ spectraplex} for the partial transpose on subsystems S.
    PtSpectraplex(Vec<usize>),
    /// {X : X ⪰ B}.
    Above(HermOperator),
}

impl Projector for Part {
    fn project(&self, x: &HermOperator) -> Result<HermOperator> {
        match self {
            Self::Spectraplex => project_spectraplex(x),
            Self::PtSpectraplex(cut) => {
                // the partial transpose is a Frobenius isometry and an involution
                let t = crate::linalg::partial_transpose(x, cut)?;
                crate::linalg::partial_transpose(&project_spectraplex(&t)?, cut)
            }
            Self::Above(b) => {
                let (pos, _) = crate::linalg::positive_part(&x.minus(b))?;
                Ok(b.plus(&pos))
            }
        }
    }
}

/// Adapter exposing a whole set's projection as a Dykstra component.
pub struct SetProjector<'a>(pub &'a dyn ConvexSet);

impl Projector for SetProjector<'_> {
    fn project(&self, x: &HermOperator) -> Result<HermOperator> {
        Ok(self.0.project(x)?.point)
    }
}

/// Euclidean projection of a vector onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

pub fn project_spectraplex(x: &HermOperator) -> Result<HermOperator> {
    let s = x.eig()?;
    let w = project_simplex(&s.values);
    HermOperator::new(x.dims().to_vec(), s.weighted_sum(&w))
}

#[derive(Clone, Debug)]
pub struct DykstraOutcome {
    pub point: HermOperator,
    pub iterations: usize,
    pub converged: bool,
    /// max_i ‖x − P_i(x)‖ at the returned point.
    pub max_violation: f64,
}

/// Dykstra's alternating projections onto the intersection of `parts`,
/// started at `x0`. Converges to the projection of `x0` when the
/// intersection is nonempty.
pub fn dykstra(x0: &HermOperator, parts: &[&dyn Projector], max_iter: usize, tol: f64) -> Result<DykstraOutcome> {
    if parts.is_empty() {
        return Err(Error::InvalidArgument("dykstra needs at least one set".into()));
    }
    let mut x = x0.clone();
    let mut incr: Vec<HermOperator> = parts.iter().map(|_| HermOperator::zeros(x0.dims())).collect();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let start = x.clone();
        for (p, inc) in parts.iter().zip(incr.iter_mut()) {
            let y = x.plus(inc);
            let px = p.project(&y)?;
            *inc = y.minus(&px);
            x = px;
        }
        if x.frobenius_distance(&start) < tol {
            converged = true;
            break;
        }
    }
    let mut max_violation: f64 = 0.0;
    for p in parts {
        max_violation = max_violation.max(x.frobenius_distance(&p.project(&x)?));
    }
    Ok(DykstraOutcome { point: x, iterations, converged, max_violation })
}

/// min tr(HX) over the intersection of `parts` by consensus ADMM: each part
/// keeps a local copy, the linear term sits on the first one, and the
/// penalty is adapted by residual balancing. The returned point is the
/// consensus average; callers repair it into exact feasibility.
pub fn admm_linear_min(h: &HermOperator, parts: &[&dyn Projector], max_iter: usize, tol: f64) -> Result<(HermOperator, usize)> {
    let k = parts.len();
    let d = h.dim();
    let mut z = HermOperator::identity(h.dims()).scaled(1.0 / d as f64);
    let mut u: Vec<HermOperator> = (0..k).map(|_| HermOperator::zeros(h.dims())).collect();
    let mut xs: Vec<HermOperator> = vec![z.clone(); k];
    let mut rho = h.mat().frobenius_norm().max(1e-3);
    for it in 1..=max_iter {
        for i in 0..k {
            let mut v = z.minus(&u[i]);
            if i == 0 {
                v = v.combine(1.0, h, -1.0 / rho);
            }
            xs[i] = parts[i].project(&v)?;
        }
        let z_old = z.clone();
        let mut acc = HermOperator::zeros(h.dims());
        for i in 0..k {
            acc = acc.plus(&xs[i]).plus(&u[i]);
        }
        z = acc.scaled(1.0 / k as f64);
        let mut r2 = 0.0;
        for i in 0..k {
            let diff = xs[i].minus(&z);
            r2 += diff.mat().frobenius_norm().powi(2);
            u[i] = u[i].plus(&diff);
        }
        let r = r2.sqrt();
        let s = (k as f64).sqrt() * z.frobenius_distance(&z_old);
        if r < tol && s < tol {
            return Ok((z, it));
        }
        if it % 10 == 0 {
            let scale = if r > 10.0 * s {
                2.0
            } else if s > 10.0 * r {
                0.5
            } else {
                1.0
            };
            if scale != 1.0 {
                rho *= scale;
                for ui in u.iter_mut() {
                    *ui = ui.scaled(1.0 / scale);
                }
            }
        }
    }
    Ok((z, max_iter))
}

/// (1−t)X + t·I/D.
pub fn mix_with_identity(x: &HermOperator, t: f64) -> HermOperator {
    let d = x.dim() as f64;
    x.combine(1.0 - t, &HermOperator::identity(x.dims()), t / d)
}

/// JSON description of a set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SetDescriptor {
    pub label: String,
    pub subsystem_dims: Vec<usize>,
    /// "ppt" | "sep_inner" | "singleton" | "fixed_hull".
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Vec<MatrixFile>>,
    /// Groups of subsystems forming each party.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parties: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_anchor_products: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SetDescriptor {
    pub fn build(&self) -> Result<Box<dyn ConvexSet>> {
        let anchors = || -> Result<Vec<DensityMatrix>> {
            let list = self.anchors.as_ref().ok_or_else(|| Error::InvalidArgument(format!("{} set needs anchors", self.kind)))?;
            list.iter().map(|f| crate::states::validate_state(f.to_operator()?.with_dims(self.subsystem_dims.clone())?)).collect()
        };
        let set: Box<dyn ConvexSet> = match self.kind.as_str() {
            "ppt" => match &self.parties {
                Some(p) if p.len() == 2 => Box::new(PptSet::bipartite(self.subsystem_dims.clone(), p[1].clone())?),
                _ => Box::new(ppt_set(&self.subsystem_dims)?),
            },
            "sep_inner" => {
                let parties = self.parties.clone().unwrap_or_else(|| (0..self.subsystem_dims.len()).map(|i| vec![i]).collect());
                Box::new(SepInnerSet::new(
                    self.subsystem_dims.clone(),
                    parties,
                    self.n_anchor_products.unwrap_or(16),
                    self.seed.unwrap_or(0),
                )?)
            }
            "singleton" => {
                let mut a = anchors()?;
                if a.len() != 1 {
                    return Err(Error::InvalidArgument("singleton set needs exactly one anchor".into()));
                }
                Box::new(Singleton::new(a.remove(0)))
            }
            "fixed_hull" => Box::new(FixedHull::new(anchors()?)?),
            other => return Err(Error::InvalidArgument(format!("unknown set kind {other:?}"))),
        };
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = project_simplex(&[2.0, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn dykstra_finds_projection_onto_intersection() {
        // two halves of the qubit spectraplex: X ⪰ diag(0.3, 0) ∩ spectraplex
        let b = HermOperator::from_real_diag(&[0.3, 0.0]);
        let above = Part::Above(b);
        let x0 = HermOperator::from_real_diag(&[0.0, 1.0]);
        let out = dykstra(&x0, &[&Part::Spectraplex, &above], 5000, 1e-12).unwrap();
        assert!(out.converged);
        let m = out.point.mat();
        assert!((m[(0, 0)].re - 0.3).abs() < 1e-8 && (m[(1, 1)].re - 0.7).abs() < 1e-8);
    }

    #[test]
    fn descriptor_round_trip() {
        let d = SetDescriptor {
            label: "ppt-2x2".into(),
            subsystem_dims: vec![2, 2],
            kind: "ppt".into(),
            anchors: None,
            parties: None,
            n_anchor_products: None,
            seed: None,
        };
        let text = serde_json::to_string(&d).unwrap();
        let back: SetDescriptor = serde_json::from_str(&text).unwrap();
        assert_eq!(back.build().unwrap().dim(), 4);
    }
}
