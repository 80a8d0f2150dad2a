//! A single fixed state, and the convex hull of finitely many fixed states.

use super::{ConvexSet, Membership, Projection};
use crate::error::{Error, Result};
use crate::linalg::{herm_coordinates, simplex_least_squares, HermOperator};
use crate::random;
use crate::states::DensityMatrix;

/// {σ}: the i.i.d. alternative of ordinary Stein testing.
#[derive(Clone, Debug)]
pub struct Singleton {
    sigma: DensityMatrix,
}

impl Singleton {
    pub fn new(sigma: DensityMatrix) -> Self {
        Self { sigma }
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.sigma
    }
}

impl ConvexSet for Singleton {
    fn label(&self) -> String {
        format!("singleton{:?}", self.sigma.dims())
    }

    fn dims(&self) -> &[usize] {
        self.sigma.dims()
    }

    fn membership(&self, x: &HermOperator, tol: f64) -> Result<Membership> {
        let dist = x.frobenius_distance(self.sigma.op());
        Ok(if dist <= tol { Membership::Member } else { Membership::NotMember { violation: dist } })
    }

    fn project(&self, _x: &HermOperator) -> Result<Projection> {
        Ok(Projection { point: self.sigma.op().clone(), iterations: 0, converged: true })
    }

    fn linear_min(&self, _h: &HermOperator) -> Result<HermOperator> {
        Ok(self.sigma.op().clone())
    }

    fn interior_point(&self) -> Result<DensityMatrix> {
        Ok(self.sigma.clone())
    }

    fn sample_member(&self, _seed: u64) -> Result<DensityMatrix> {
        Ok(self.sigma.clone())
    }
}

/// conv{ω_1, …, ω_k} for fixed states ω_i.
#[derive(Clone, Debug)]
pub struct FixedHull {
    atoms: Vec<DensityMatrix>,
    coords: Vec<Vec<f64>>,
}

impl FixedHull {
    pub fn new(atoms: Vec<DensityMatrix>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::InvalidArgument("hull needs at least one state".into()));
        };
        if atoms.iter().any(|a| a.dims() != first.dims()) {
            return Err(Error::DimensionMismatch("hull states have different layouts".into()));
        }
        let coords = atoms.iter().map(|a| herm_coordinates(a.op())).collect();
        Ok(Self { atoms, coords })
    }

    pub fn atoms(&self) -> &[DensityMatrix] {
        &self.atoms
    }

    fn combination(&self, w: &[f64]) -> HermOperator {
        let mut acc = HermOperator::zeros(self.dims());
        for (a, &wk) in self.atoms.iter().zip(w) {
            if wk > 0.0 {
                acc = acc.plus(&a.op().scaled(wk));
            }
        }
        acc
    }
}

impl ConvexSet for FixedHull {
    fn label(&self) -> String {
        format!("hull[{} states]{:?}", self.atoms.len(), self.dims())
    }

    fn dims(&self) -> &[usize] {
        self.atoms[0].dims()
    }

    fn membership(&self, x: &HermOperator, tol: f64) -> Result<Membership> {
        let p = self.project(x)?.point;
        let dist = p.frobenius_distance(x);
        Ok(if dist <= tol { Membership::Member } else { Membership::NotMember { violation: dist } })
    }

    fn project(&self, x: &HermOperator) -> Result<Projection> {
        let w = simplex_least_squares(&self.coords, &herm_coordinates(x));
        Ok(Projection { point: self.combination(&w), iterations: 1, converged: true })
    }

    fn linear_min(&self, h: &HermOperator) -> Result<HermOperator> {
        let best = self
            .atoms
            .iter()
            .min_by(|a, b| h.inner(a.op()).total_cmp(&h.inner(b.op())))
            .expect("hull is nonempty");
        Ok(best.op().clone())
    }

    fn interior_point(&self) -> Result<DensityMatrix> {
        let w = vec![1.0 / self.atoms.len() as f64; self.atoms.len()];
        Ok(DensityMatrix::assume_valid(self.combination(&w)))
    }

    fn sample_member(&self, seed: u64) -> Result<DensityMatrix> {
        let w = random::distribution(self.atoms.len(), &mut random::rng(seed));
        Ok(DensityMatrix::assume_valid(self.combination(&w)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::random_state;

    #[test]
    fn hull_membership() {
        let a = random_state(2, 2, 1).unwrap();
        let b = random_state(2, 2, 2).unwrap();
        let h = FixedHull::new(vec![a.clone(), b.clone()]).unwrap();
        assert!(h.membership(a.mix(0.3, &b).op(), 1e-9).unwrap().is_member());
        let c = random_state(2, 1, 3).unwrap();
        assert!(!h.membership(c.op(), 1e-6).unwrap().is_member());
    }

    #[test]
    fn singleton_membership() {
        let s = random_state(3, 3, 1).unwrap();
        let set = Singleton::new(s.clone());
        assert!(set.membership(s.op(), 1e-12).unwrap().is_member());
        assert!(!set.membership(DensityMatrix::maximally_mixed(&[3]).op(), 1e-6).unwrap().is_member());
    }
}
