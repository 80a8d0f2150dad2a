//! Dense complex Hermitian linear algebra.
//!
//! Every operator carries its tensor-factor layout (`dims`); partial traces,
//! partial transposes and tensor powers act on that layout. Support decisions
//! (logarithms, generalized inverses, relative entropies) all use the single
//! relative clip threshold [`CLIP_REL`].

mod eig;
mod json;
mod matrix;
mod nnls;
pub mod tensor;

pub use eig::{Spectrum, JACOBI_MAX_DIM};
pub use json::{fmt12, read_operator, write_operator, MatrixFile};
pub use matrix::CMat;
pub use nnls::{from_herm_coordinates, herm_coordinates, nnls, simplex_least_squares};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Eigenvalues at or below `CLIP_REL * λ_max(|A|)` are treated as exact zeros.
pub const CLIP_REL: f64 = 1e-12;
/// Relative tolerance for accepting an operator as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;
/// Elementwise Hermiticity tolerance (scaled by max(1, max|A_ij|)).
pub const HERM_TOL: f64 = 1e-12;
/// Default cap on the dimension of dense operators built by tensor powers.
pub const DEFAULT_DIM_CAP: usize = 4096;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn check_capacity(requested: usize, limit: usize) -> Result<()> {
    if requested > limit {
        Err(Error::Capacity { requested, limit })
    } else {
        Ok(())
    }
}

/// Checked `base^n`, reporting overflow as a capacity violation.
pub fn checked_power(base: usize, n: usize, limit: usize) -> Result<usize> {
    let mut acc = 1usize;
    for _ in 0..n {
        acc = acc.checked_mul(base).ok_or(Error::Capacity { requested: usize::MAX, limit })?;
        check_capacity(acc, limit)?;
    }
    Ok(acc)
}

/// Square Hermitian matrix together with its tensor-factor dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct HermOperator {
    dims: Vec<usize>,
    mat: CMat,
}

impl HermOperator {
    /// Validates shape and Hermiticity, then removes the residual asymmetry.
    pub fn new(dims: Vec<usize>, mat: CMat) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch(format!("matrix is {}x{}", mat.rows(), mat.cols())));
        }
        check_dims(&dims, mat.rows())?;
        let asym = mat.max_asymmetry();
        if asym > HERM_TOL * mat.max_abs().max(1.0) {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        let mut mat = mat;
        mat.hermitize();
        Ok(Self { dims, mat })
    }

    /// For matrices Hermitian up to roundoff by construction.
    pub(crate) fn from_hermitian_part(dims: Vec<usize>, mut mat: CMat) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), mat.rows());
        mat.hermitize();
        Self { dims, mat }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self { dims: vec![diag.len()], mat: CMat::from_real_diag(diag) }
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        Self { dims: dims.to_vec(), mat: CMat::identity(d) }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        Self { dims: dims.to_vec(), mat: CMat::zeros(d, d) }
    }

    /// |v⟩⟨v| (not normalized).
    pub fn projector(v: &[C64], dims: &[usize]) -> Self {
        Self::from_hermitian_part(dims.to_vec(), CMat::outer(v, v))
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    /// Reinterprets the tensor layout.
    pub fn with_dims(mut self, dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims, self.dim())?;
        self.dims = dims;
        Ok(self)
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// tr(A B) for Hermitian A, B (real).
    pub fn inner(&self, other: &Self) -> f64 {
        self.mat.inner(&other.mat).re
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        (&self.mat - &other.mat).frobenius_norm()
    }

    pub fn eig(&self) -> Result<Spectrum> {
        eig::eigh(&self.mat)
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self { dims: self.dims.clone(), mat: &self.mat + &other.mat }
    }

    pub fn minus(&self, other: &Self) -> Self {
        Self { dims: self.dims.clone(), mat: &self.mat - &other.mat }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dims: self.dims.clone(), mat: self.mat.scale(s) }
    }

    /// a·self + b·other.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let data = self.mat.data().iter().zip(other.mat.data()).map(|(x, y)| x * a + y * b).collect();
        Self { dims: self.dims.clone(), mat: CMat::from_vec(self.dim(), self.dim(), data) }
    }

    pub fn kron(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, mat: self.mat.kron(&other.mat) }
    }

    /// U A U†.
    pub fn conjugate_by(&self, u: &CMat) -> Self {
        Self::from_hermitian_part(self.dims.clone(), u.matmul(&self.mat).matmul(&u.adjoint()))
    }

    /// A^T, which equals the entrywise conjugate for Hermitian A.
    pub fn transpose(&self) -> Self {
        Self { dims: self.dims.clone(), mat: self.mat.transpose() }
    }

    pub fn expectation(&self, v: &[C64]) -> f64 {
        self.mat.quadratic_form(v).re
    }

    /// Reorders tensor factors: new factor k is old factor `order[k]`.
    pub fn reorder(&self, order: &[usize]) -> Result<Self> {
        let mat = tensor::reorder_matrix(&self.mat, &self.dims, order)?;
        let dims = order.iter().map(|&k| self.dims[k]).collect();
        Ok(Self { dims, mat })
    }
}

fn check_dims(dims: &[usize], total: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidSubsystems(format!("subsystem dims must be positive: {dims:?}")));
    }
    let prod: usize = dims.iter().product();
    if prod != total {
        return Err(Error::InvalidSubsystems(format!("product of dims {dims:?} is {prod}, matrix dimension is {total}")));
    }
    Ok(())
}

fn same_dim(a: &HermOperator, b: &HermOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Full spectral decomposition (eigenvalues descending).
pub fn herm_eig(a: &HermOperator) -> Result<Spectrum> {
    a.eig()
}

/// Clip threshold for a spectrum: `CLIP_REL * λ_max(|A|)`.
pub fn clip_threshold(s: &Spectrum) -> f64 {
    CLIP_REL * s.spectral_radius()
}

fn psd_floor(s: &Spectrum) -> f64 {
    -PSD_TOL * s.spectral_radius().max(1.0)
}

/// Smallest eigenvalue reported when `a` fails the PSD acceptance test.
pub fn check_psd(a: &HermOperator, op: &'static str) -> Result<Spectrum> {
    let s = a.eig()?;
    if s.lambda_min() < psd_floor(&s) {
        return Err(Error::Domain { op, eigenvalue: s.lambda_min() });
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatrixFn {
    Log2,
    Sqrt,
    Pow(f64),
    Pinv,
}

/// Applies `f` eigenvalue-wise. Clipped eigenvalues map to zero for the
/// support-sensitive functions (log, negative powers, pseudo-inverse).
pub fn matrix_fn(a: &HermOperator, f: MatrixFn) -> Result<HermOperator> {
    let s = a.eig()?;
    matrix_fn_spectrum(&s, a.dims(), f)
}

pub fn matrix_fn_spectrum(s: &Spectrum, dims: &[usize], f: MatrixFn) -> Result<HermOperator> {
    let clip = clip_threshold(s);
    let needs_psd = !matches!(f, MatrixFn::Pinv) && !matches!(f, MatrixFn::Pow(p) if p.fract() == 0.0 && p >= 0.0);
    if needs_psd && s.lambda_min() < psd_floor(s) {
        let op = match f {
            MatrixFn::Log2 => "log2",
            MatrixFn::Sqrt => "sqrt",
            MatrixFn::Pow(_) => "pow",
            MatrixFn::Pinv => "pinv",
        };
        return Err(Error::Domain { op, eigenvalue: s.lambda_min() });
    }
    let g = |v: f64| -> f64 {
        match f {
            MatrixFn::Log2 => {
                if v > clip {
                    v.log2()
                } else {
                    0.0
                }
            }
            MatrixFn::Sqrt => v.max(0.0).sqrt(),
            MatrixFn::Pow(p) => {
                if p.fract() == 0.0 && p >= 0.0 {
                    v.powi(p as i32)
                } else if v > clip {
                    v.powf(p)
                } else if p > 0.0 {
                    v.max(0.0).powf(p)
                } else {
                    0.0
                }
            }
            MatrixFn::Pinv => {
                if v.abs() > clip {
                    1.0 / v
                } else {
                    0.0
                }
            }
        }
    };
    Ok(HermOperator::from_hermitian_part(dims.to_vec(), s.map(g)))
}

/// Projector onto the span of eigenvectors with eigenvalue above the clip.
pub fn support_projector(a: &HermOperator) -> Result<HermOperator> {
    let s = a.eig()?;
    let clip = clip_threshold(&s);
    Ok(HermOperator::from_hermitian_part(a.dims().to_vec(), s.map(|v| if v > clip { 1.0 } else { 0.0 })))
}

/// tr(A)_+: the sum of the positive eigenvalues.
pub fn positive_part_trace(a: &HermOperator) -> Result<f64> {
    Ok(a.eig()?.values.iter().filter(|&&v| v > 0.0).sum())
}

/// The operator (A)_+ together with the projector onto its support.
pub fn positive_part(a: &HermOperator) -> Result<(HermOperator, HermOperator)> {
    let s = a.eig()?;
    let part = HermOperator::from_hermitian_part(a.dims().to_vec(), s.map(|v| v.max(0.0)));
    let proj = HermOperator::from_hermitian_part(a.dims().to_vec(), s.map(|v| if v > 0.0 { 1.0 } else { 0.0 }));
    Ok((part, proj))
}

pub fn trace_norm(a: &HermOperator) -> Result<f64> {
    Ok(a.eig()?.values.iter().map(|v| v.abs()).sum())
}

/// Uhlmann fidelity tr√(√A B √A), computed as the sum of singular values of
/// √A·√B.
pub fn fidelity(a: &HermOperator, b: &HermOperator) -> Result<f64> {
    same_dim(a, b)?;
    let sa = check_psd(a, "fidelity")?;
    let sb = check_psd(b, "fidelity")?;
    let ra = sa.map(|v| v.max(0.0).sqrt());
    let rb = sb.map(|v| v.max(0.0).sqrt());
    let x = ra.matmul(&rb);
    let sv = x
        .to_faer()
        .singular_values()
        .map_err(|e| Error::Numerical(format!("svd did not converge: {e:?}")))?;
    Ok(sv.iter().sum())
}

pub fn partial_trace(x: &HermOperator, keep: &[usize]) -> Result<HermOperator> {
    let (m, dims) = tensor::partial_trace(x.mat(), x.dims(), keep)?;
    Ok(HermOperator::from_hermitian_part(dims, m))
}

pub fn partial_transpose(x: &HermOperator, subset: &[usize]) -> Result<HermOperator> {
    let m = tensor::partial_transpose(x.mat(), x.dims(), subset)?;
    Ok(HermOperator { dims: x.dims().to_vec(), mat: m })
}

/// n-fold tensor power, refused when the result would exceed `cap`.
pub fn kron_power(a: &HermOperator, n: usize, cap: usize) -> Result<HermOperator> {
    if n == 0 {
        return Err(Error::InvalidArgument("tensor power must be positive".into()));
    }
    checked_power(a.dim(), n, cap)?;
    let mut out = a.clone();
    for _ in 1..n {
        out = out.kron(a);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> HermOperator {
        HermOperator::from_real_diag(v)
    }

    #[test]
    fn eig_examples() {
        let s = herm_eig(&HermOperator::identity(&[4])).unwrap();
        assert!(s.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let s = herm_eig(&diag(&[3.0, -1.0])).unwrap();
        assert_eq!(s.values, vec![3.0, -1.0]);
    }

    #[test]
    fn non_hermitian_rejected_with_asymmetry() {
        let m = CMat::from_fn(2, 2, |i, j| if i == 0 && j == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        match HermOperator::new(vec![2], m) {
            Err(Error::NotHermitian { asymmetry }) => assert!((asymmetry - 1.0).abs() < 1e-15),
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn matrix_fn_examples() {
        let l = matrix_fn(&HermOperator::identity(&[3]), MatrixFn::Log2).unwrap();
        assert!(l.mat().max_abs() < 1e-15);
        let r = matrix_fn(&diag(&[4.0, 9.0]), MatrixFn::Sqrt).unwrap();
        assert!((&r.mat().clone() - diag(&[2.0, 3.0]).mat()).max_abs() < 1e-14);
    }

    #[test]
    fn log_of_negative_operator_is_domain_error() {
        assert!(matches!(matrix_fn(&diag(&[1.0, -0.5]), MatrixFn::Log2), Err(Error::Domain { .. })));
        assert!(matches!(matrix_fn(&diag(&[1.0, -0.5]), MatrixFn::Pow(-0.5)), Err(Error::Domain { .. })));
        // integer powers and pinv are defined everywhere
        assert!(matrix_fn(&diag(&[1.0, -0.5]), MatrixFn::Pow(2.0)).is_ok());
        assert!(matrix_fn(&diag(&[1.0, -0.5]), MatrixFn::Pinv).is_ok());
    }

    #[test]
    fn positive_part_examples() {
        assert_eq!(positive_part_trace(&diag(&[1.0, -2.0])).unwrap(), 1.0);
        assert_eq!(positive_part_trace(&diag(&[0.5, -0.5])).unwrap(), 0.5);
        assert!((positive_part_trace(&diag(&[0.2, 0.3])).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn trace_norm_examples() {
        let a = diag(&[1.0, 0.0]).minus(&diag(&[0.0, 1.0]));
        assert_eq!(trace_norm(&a).unwrap(), 2.0);
        assert_eq!(trace_norm(&HermOperator::zeros(&[3])).unwrap(), 0.0);
    }

    #[test]
    fn fidelity_classical_case() {
        let p = [0.2, 0.3, 0.5];
        let q = [0.6, 0.1, 0.3];
        let f = fidelity(&diag(&p), &diag(&q)).unwrap();
        let expect: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum();
        assert!((f - expect).abs() < 1e-12);
    }

    #[test]
    fn fidelity_rejects_negative_input() {
        assert!(fidelity(&diag(&[1.5, -0.5]), &diag(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn kron_power_small_cases() {
        let p = 0.3;
        let a = diag(&[p, 1.0 - p]);
        assert_eq!(kron_power(&a, 1, 4096).unwrap(), a);
        let a2 = kron_power(&a, 2, 4096).unwrap();
        let expect = [p * p, p * (1.0 - p), (1.0 - p) * p, (1.0 - p) * (1.0 - p)];
        for (i, e) in expect.iter().enumerate() {
            assert!((a2.mat()[(i, i)].re - e).abs() < 1e-15);
        }
        assert_eq!(a2.dims(), &[2, 2]);
    }

    #[test]
    fn kron_power_capacity_error_names_limit() {
        let a = HermOperator::identity(&[2]);
        match kron_power(&a, 13, 4096) {
            Err(Error::Capacity { limit, .. }) => assert_eq!(limit, 4096),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let r = diag(&[0.7, 0.3]);
        let s = diag(&[0.1, 0.2, 0.7]).with_dims(vec![3]).unwrap();
        let t = partial_trace(&r.kron(&s), &[0]).unwrap();
        assert!((t.mat() - r.mat()).max_abs() < 1e-15);
        assert!(partial_trace(&r.kron(&s), &[2]).is_err());
    }

    #[test]
    fn double_partial_transpose_is_exact_identity() {
        let m = CMat::from_fn(4, 4, |i, j| c((i * 4 + j) as f64, i as f64 - j as f64));
        let mut m = m;
        m.hermitize();
        let x = HermOperator::new(vec![2, 2], m).unwrap();
        let y = partial_transpose(&partial_transpose(&x, &[1]).unwrap(), &[1]).unwrap();
        assert_eq!(x, y);
    }
}
