//! JSON matrix format: `{"dims": [...], "re": [[...]], "im": [[...]]}` with
//! row-major `dim x dim` real arrays. State files add a `"kind"` tag.
//!
//! Floats go through serde_json's shortest round-trip formatting, so a
//! write/read cycle reproduces every bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CMat, HermOperator, C64};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub dims: Vec<usize>,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn from_cmat(dims: &[usize], m: &CMat, kind: Option<&str>) -> Self {
        let re = (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)].re).collect()).collect();
        let im = (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)].im).collect()).collect();
        Self { kind: kind.map(str::to_owned), dims: dims.to_vec(), re, im }
    }

    pub fn from_operator(op: &HermOperator, kind: Option<&str>) -> Self {
        Self::from_cmat(op.dims(), op.mat(), kind)
    }

    pub fn to_cmat(&self) -> Result<CMat> {
        let rows = self.re.len();
        if self.im.len() != rows {
            return Err(Error::DimensionMismatch("re and im have different row counts".into()));
        }
        let cols = self.re.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * cols);
        for (r, i) in self.re.iter().zip(&self.im) {
            if r.len() != cols || i.len() != cols {
                return Err(Error::DimensionMismatch("ragged matrix rows".into()));
            }
            data.extend(r.iter().zip(i).map(|(&a, &b)| C64::new(a, b)));
        }
        Ok(CMat::from_vec(rows, cols, data))
    }

    pub fn to_operator(&self) -> Result<HermOperator> {
        HermOperator::new(self.dims.clone(), self.to_cmat()?)
    }
}

pub fn write_operator(path: &Path, op: &HermOperator, kind: Option<&str>) -> Result<()> {
    let f = MatrixFile::from_operator(op, kind);
    std::fs::write(path, serde_json::to_string_pretty(&f)?)?;
    Ok(())
}

pub fn read_operator(path: &Path) -> Result<(HermOperator, Option<String>)> {
    let text = std::fs::read_to_string(path)?;
    let f: MatrixFile = serde_json::from_str(&text)?;
    Ok((f.to_operator()?, f.kind))
}

/// Twelve significant digits, '.' decimal separator.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.11e}");
    let v: f64 = s.parse().unwrap_or(x);
    let mag = v.abs().log10().floor() as i32;
    if (-5..15).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        let t = format!("{v:.decimals$}");
        if t.contains('.') {
            t.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            t
        }
    } else {
        s
    }
}
