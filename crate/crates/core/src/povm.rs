//! Informationally complete POVMs, their canonical dual frames, linear
//! tomographic reconstruction, and sampled lower bounds on the distortion
//! constant K relating trace distances of states to ℓ₁ distances of their
//! outcome distributions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_herm_coordinates, herm_coordinates, trace_norm, CMat, HermOperator, MatrixFile};
use crate::random;
use crate::states::{random_pure, random_state, DensityMatrix};

/// Allowed deviation of Σ M_i from the identity.
pub const RESOLUTION_TOL: f64 = 1e-10;
/// Relative eigenvalue floor of the frame operator for spanning.
pub const SPAN_TOL: f64 = 1e-10;
const MAX_RETRIES: u64 = 16;

#[derive(Clone, Debug)]
pub struct Frame {
    pub elements: Vec<HermOperator>,
    pub duals: Vec<HermOperator>,
    /// λ_max/λ_min of the frame superoperator.
    pub gram_condition: f64,
}

impl Frame {
    /// Builds the canonical duals of a spanning family.
    pub fn from_elements(elements: Vec<HermOperator>) -> Result<Self> {
        let (duals, gram_condition) = dual_frame_with_condition(&elements)?;
        Ok(Self { elements, duals, gram_condition })
    }

    pub fn dims(&self) -> &[usize] {
        self.elements[0].dims()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// ‖Σ M_i − I‖_max.
    pub fn resolution_error(&self) -> f64 {
        let mut acc = HermOperator::zeros(self.dims());
        for m in &self.elements {
            acc = acc.plus(m);
        }
        (acc.mat() - &CMat::identity(self.dim())).max_abs()
    }

    /// Outcome distribution tr(M_i ρ).
    pub fn probabilities(&self, rho: &HermOperator) -> Result<Vec<f64>> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!("frame on dimension {} applied to dimension {}", self.dim(), rho.dim())));
        }
        Ok(self.elements.iter().map(|m| m.inner(rho)).collect())
    }

    /// Product frame {M_i ⊗ N_j} with duals {M_i* ⊗ N_j*}.
    pub fn tensor(&self, other: &Frame) -> Frame {
        let mut elements = Vec::with_capacity(self.len() * other.len());
        let mut duals = Vec::with_capacity(self.len() * other.len());
        for (m, ms) in self.elements.iter().zip(&self.duals) {
            for (n, ns) in other.elements.iter().zip(&other.duals) {
                elements.push(m.kron(n));
                duals.push(ms.kron(ns));
            }
        }
        Frame { elements, duals, gram_condition: self.gram_condition * other.gram_condition }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = FrameFile {
            elements: self.elements.iter().map(|m| MatrixFile::from_operator(m, Some("povm_element"))).collect(),
            duals: self.duals.iter().map(|m| MatrixFile::from_operator(m, Some("dual"))).collect(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    /// Reads the elements and recomputes the duals.
    pub fn read_json(path: &Path) -> Result<Self> {
        let file: FrameFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let elements = file.elements.iter().map(MatrixFile::to_operator).collect::<Result<Vec<_>>>()?;
        if elements.is_empty() {
            return Err(Error::InvalidArgument("frame file has no elements".into()));
        }
        Self::from_elements(elements)
    }
}

#[derive(Serialize, Deserialize)]
struct FrameFile {
    elements: Vec<MatrixFile>,
    #[serde(default)]
    duals: Vec<MatrixFile>,
}

fn dual_frame_with_condition(elements: &[HermOperator]) -> Result<(Vec<HermOperator>, f64)> {
    let Some(first) = elements.first() else {
        return Err(Error::InvalidArgument("empty frame".into()));
    };
    let dims = first.dims().to_vec();
    let d = first.dim();
    if elements.iter().any(|m| m.dim() != d) {
        return Err(Error::DimensionMismatch("frame elements of different sizes".into()));
    }
    let n = d * d;
    let coords: Vec<Vec<f64>> = elements.iter().map(herm_coordinates).collect();
    let mut f = CMat::zeros(n, n);
    for v in &coords {
        for i in 0..n {
            for j in 0..n {
                f[(i, j)] += crate::linalg::c(v[i] * v[j], 0.0);
            }
        }
    }
    let s = HermOperator::new(vec![n], f)?.eig()?;
    let (top, bottom) = (s.lambda_max(), s.lambda_min());
    if bottom <= SPAN_TOL * top {
        let rank = s.values.iter().filter(|&&v| v > SPAN_TOL * top).count();
        return Err(Error::Numerical(format!("frame spans a {rank}-dimensional subspace of the {n}-dimensional operator space")));
    }
    let inv = s.map(|v| 1.0 / v);
    let duals = coords
        .iter()
        .map(|v| {
            let x: Vec<f64> = (0..n).map(|i| (0..n).map(|j| inv[(i, j)].re * v[j]).sum()).collect();
            from_herm_coordinates(&x, &dims)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((duals, top / bottom))
}

/// Canonical duals M_i* = F^{-1}(M_i) for the frame operator F = Σ |M_i⟩⟩⟨⟨M_i|.
pub fn dual_frame(elements: &[HermOperator]) -> Result<Vec<HermOperator>> {
    Ok(dual_frame_with_condition(elements)?.0)
}

/// d² rank-one elements u_i u_i† with u_i = S^{-1/2} v_i for Gaussian v_i and
/// S = Σ v_i v_i†, so the elements resolve the identity exactly.
pub fn ic_povm(d: usize, seed: u64) -> Result<Frame> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("dimension {d} must be at least 2")));
    }
    let mut last = None;
    for attempt in 0..MAX_RETRIES {
        let mut rng = random::rng(random::child_seed(seed, attempt));
        let vs: Vec<Vec<crate::linalg::C64>> = (0..d * d).map(|_| random::unit_vector(d, &mut rng)).collect();
        let mut s = CMat::zeros(d, d);
        for v in &vs {
            s = &s + &CMat::outer(v, v);
        }
        let spec = HermOperator::new(vec![d], s)?.eig()?;
        if spec.lambda_min() <= 1e-8 * spec.lambda_max() {
            last = Some(Error::Numerical("sampled vectors do not span".into()));
            continue;
        }
        let t = spec.map(|v| v.powf(-0.5));
        let elements: Vec<HermOperator> = vs.iter().map(|v| HermOperator::projector(&t.matvec(v), &[d])).collect();
        match Frame::from_elements(elements) {
            Ok(f) => return Ok(f),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Numerical("no spanning frame found".into())))
}

/// The qubit tetrahedral frame: M_k = (I + s_k·σ)/4 for the four vertices
/// s_k of a regular tetrahedron; its duals are 3(I + s_k·σ)/2 − I.
pub fn tetrahedral_frame() -> Result<Frame> {
    let r = 1.0 / 3f64.sqrt();
    let vertices = [[r, r, r], [r, -r, -r], [-r, r, -r], [-r, -r, r]];
    let elements = vertices
        .iter()
        .map(|s| {
            let m = CMat::from_fn(2, 2, |i, j| {
                use crate::linalg::c;
                match (i, j) {
                    (0, 0) => c((1.0 + s[2]) / 4.0, 0.0),
                    (1, 1) => c((1.0 - s[2]) / 4.0, 0.0),
                    (0, 1) => c(s[0] / 4.0, -s[1] / 4.0),
                    _ => c(s[0] / 4.0, s[1] / 4.0),
                }
            });
            HermOperator::new(vec![2], m)
        })
        .collect::<Result<Vec<_>>>()?;
    Frame::from_elements(elements)
}

/// Hermitian L = Σ f_i M_i*, returned without any positivity correction.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub operator: HermOperator,
    pub trace: f64,
    pub min_eig: f64,
    /// λ_min ≥ −1e-9, so the operator is (numerically) a state.
    pub is_state: bool,
}

impl Reconstruction {
    pub fn trace_distance_to(&self, rho: &HermOperator) -> Result<f64> {
        trace_norm(&self.operator.minus(rho))
    }
}

pub fn reconstruct(frame: &Frame, frequencies: &[f64]) -> Result<Reconstruction> {
    if frequencies.len() != frame.len() {
        return Err(Error::DimensionMismatch(format!("{} frequencies for {} outcomes", frequencies.len(), frame.len())));
    }
    let mut acc = HermOperator::zeros(frame.dims());
    for (f, m) in frequencies.iter().zip(&frame.duals) {
        if *f != 0.0 {
            acc = acc.combine(1.0, m, *f);
        }
    }
    let min_eig = acc.eig()?.lambda_min();
    Ok(Reconstruction { trace: acc.trace(), min_eig, is_state: min_eig >= -1e-9, operator: acc })
}

#[derive(Clone, Debug, Serialize)]
pub struct KmEstimate {
    /// max ‖ρ − σ‖₁ / ‖p_ρ − p_σ‖₁ over the sampled pairs.
    pub estimate: f64,
    /// d⁴, the context ceiling quoted for a specific construction.
    pub reference_ceiling: f64,
    pub pairs: usize,
    /// Running maximum after each pair.
    #[serde(skip)]
    pub running_max: Vec<f64>,
}

/// Sampled lower bound on K: pure pairs, full-rank pairs, and near pairs
/// (small perturbations), which tend to realize the worst directions.
pub fn km_estimate(frame: &Frame, trials: usize, seed: u64) -> Result<KmEstimate> {
    let d = frame.dim();
    let mut best = 0.0f64;
    let mut running = Vec::with_capacity(trials);
    for t in 0..trials {
        let s = random::child_seed(seed, t as u64);
        let (a, b) = match t % 3 {
            0 => (DensityMatrix::pure(&random_pure(frame.dims(), s)), DensityMatrix::pure(&random_pure(frame.dims(), s ^ 0x9e37))),
            1 => (random_state(d, d, s)?, random_state(d, d, s ^ 0x9e37)?),
            _ => {
                let a = random_state(d, d, s)?;
                let b = random_state(d, 1, s ^ 0x9e37)?;
                let near = a.mix(0.999, &b);
                (a, near)
            }
        };
        let (a, b) = (a.with_dims(frame.dims().to_vec())?, b.with_dims(frame.dims().to_vec())?);
        let num = trace_norm(&a.op().minus(b.op()))?;
        let pa = frame.probabilities(a.op())?;
        let pb = frame.probabilities(b.op())?;
        let den: f64 = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum();
        if num > 1e-12 && den > 0.0 {
            best = best.max(num / den);
        }
        running.push(best);
    }
    Ok(KmEstimate { estimate: best, reference_ceiling: (d as f64).powi(4), pairs: trials, running_max: running })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn random_frame_resolves_identity() {
        for d in 2..=4 {
            let f = ic_povm(d, 3).unwrap();
            assert_eq!(f.len(), d * d);
            assert!(f.resolution_error() < RESOLUTION_TOL);
        }
    }

    #[test]
    fn frame_is_deterministic() {
        let a = ic_povm(3, 11).unwrap();
        let b = ic_povm(3, 11).unwrap();
        assert_eq!(a.elements, b.elements);
    }

    #[test]
    fn reconstruction_identity() {
        let f = ic_povm(3, 5).unwrap();
        let rho = random_state(3, 2, 8).unwrap();
        let p = f.probabilities(rho.op()).unwrap();
        let r = reconstruct(&f, &p).unwrap();
        assert!(r.operator.frobenius_distance(rho.op()) < 1e-9);
        let id = reconstruct(&f, &f.probabilities(&HermOperator::identity(&[3])).unwrap()).unwrap();
        assert!(id.operator.frobenius_distance(&HermOperator::identity(&[3])) < 1e-10);
    }

    #[test]
    fn orthonormal_basis_is_self_dual() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let basis = vec![
            HermOperator::new(vec![2], CMat::from_fn(2, 2, |i, j| if i == j && i == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) })).unwrap(),
            HermOperator::new(vec![2], CMat::from_fn(2, 2, |i, j| if i == j && i == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) })).unwrap(),
            HermOperator::new(vec![2], CMat::from_fn(2, 2, |i, j| if i != j { c(s, 0.0) } else { c(0.0, 0.0) })).unwrap(),
            HermOperator::new(vec![2], CMat::from_fn(2, 2, |i, j| match (i, j) { (0, 1) => c(0.0, -s), (1, 0) => c(0.0, s), _ => c(0.0, 0.0) })).unwrap(),
        ];
        let duals = dual_frame(&basis).unwrap();
        for (a, b) in basis.iter().zip(&duals) {
            assert!(a.frobenius_distance(b) < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_family_rejected() {
        let p = HermOperator::identity(&[2]).scaled(0.5);
        assert!(dual_frame(&[p.clone(), p]).is_err());
    }

    #[test]
    fn tetrahedral_duals_and_uniform_frequencies() {
        let f = tetrahedral_frame().unwrap();
        assert!(f.resolution_error() < 1e-12);
        let r = reconstruct(&f, &[0.25; 4]).unwrap();
        assert!(r.operator.frobenius_distance(&HermOperator::identity(&[2]).scaled(0.5)) < 1e-12);
        let spike = reconstruct(&f, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(!spike.is_state);
    }

    #[test]
    fn km_is_at_least_one_and_running_max_monotone() {
        let f = tetrahedral_frame().unwrap();
        let k = km_estimate(&f, 300, 1).unwrap();
        assert!(k.estimate >= 1.0 && k.estimate <= 16.0, "{k:?}");
        assert!(k.running_max.windows(2).all(|w| w[1] >= w[0]));
    }
}
