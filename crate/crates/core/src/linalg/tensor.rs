//! Index arithmetic on tensor-product spaces: partial traces, partial
//! transposes and reordering of tensor factors.
//!
//! Subsystem 0 is the most significant digit of the row-major basis index.

use super::matrix::CMat;
use super::C64;
use crate::error::{Error, Result};

pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Linear offsets of every multi-index over the listed subsystems.
fn offsets(dims: &[usize], subsystems: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut out = vec![0usize];
    for &k in subsystems {
        let mut next = Vec::with_capacity(out.len() * dims[k]);
        for &base in &out {
            for digit in 0..dims[k] {
                next.push(base + digit * st[k]);
            }
        }
        out = next;
    }
    out
}

pub(crate) fn check_subset(dims: &[usize], subset: &[usize]) -> Result<()> {
    let mut seen = vec![false; dims.len()];
    for &k in subset {
        if k >= dims.len() {
            return Err(Error::InvalidSubsystems(format!("index {k} out of range for {} subsystems", dims.len())));
        }
        if seen[k] {
            return Err(Error::InvalidSubsystems(format!("index {k} repeated")));
        }
        seen[k] = true;
    }
    Ok(())
}

/// Traces out every subsystem not listed in `keep`. Kept subsystems retain
/// their relative order.
pub fn partial_trace(m: &CMat, dims: &[usize], keep: &[usize]) -> Result<(CMat, Vec<usize>)> {
    check_subset(dims, keep)?;
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let keep_off = offsets(dims, &keep);
    let trace_off = offsets(dims, &traced);
    let n = keep_off.len();
    let mut out = CMat::zeros(n, n);
    let cols = m.cols();
    let data = m.data();
    for (a, &ka) in keep_off.iter().enumerate() {
        for (b, &kb) in keep_off.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &trace_off {
                acc += data[(ka + t) * cols + kb + t];
            }
            out[(a, b)] = acc;
        }
    }
    let new_dims = keep.iter().map(|&k| dims[k]).collect();
    Ok((out, new_dims))
}

/// Transpose on the tensor factors listed in `subset`.
pub fn partial_transpose(m: &CMat, dims: &[usize], subset: &[usize]) -> Result<CMat> {
    check_subset(dims, subset)?;
    let d = m.rows();
    let st = strides(dims);
    let sub: Vec<usize> = (0..d)
        .map(|x| subset.iter().map(|&k| ((x / st[k]) % dims[k]) * st[k]).sum())
        .collect();
    let mut out = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let ni = i - sub[i] + sub[j];
            let nj = j - sub[j] + sub[i];
            out[(ni, nj)] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Index map for reordering tensor factors: new factor `k` is old factor
/// `order[k]`. Returns, for every new basis index, the old basis index.
pub(crate) fn reorder_map(dims: &[usize], order: &[usize]) -> Result<Vec<usize>> {
    check_subset(dims, order)?;
    if order.len() != dims.len() {
        return Err(Error::InvalidSubsystems("reordering must list every subsystem".into()));
    }
    let old_st = strides(dims);
    let new_dims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
    let new_st = strides(&new_dims);
    let total: usize = dims.iter().product();
    Ok((0..total)
        .map(|x| {
            (0..order.len())
                .map(|k| ((x / new_st[k]) % new_dims[k]) * old_st[order[k]])
                .sum()
        })
        .collect())
}

pub fn reorder_vector(v: &[C64], dims: &[usize], order: &[usize]) -> Result<Vec<C64>> {
    let map = reorder_map(dims, order)?;
    Ok(map.iter().map(|&o| v[o]).collect())
}

pub fn reorder_matrix(m: &CMat, dims: &[usize], order: &[usize]) -> Result<CMat> {
    let map = reorder_map(dims, order)?;
    Ok(CMat::from_fn(m.rows(), m.cols(), |i, j| m[(map[i], map[j])]))
}

pub fn kron_all<'a>(mats: impl IntoIterator<Item = &'a CMat>) -> CMat {
    let mut it = mats.into_iter();
    let first = it.next().cloned().unwrap_or_else(|| CMat::identity(1));
    it.fold(first, |acc, m| acc.kron(m))
}

pub fn kron_vectors(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// Applies `local` (a `dims[site] x dims[site]` matrix) on one tensor factor
/// of every column of `block`.
pub fn apply_local(block: &CMat, dims: &[usize], site: usize, local: &CMat) -> CMat {
    let st = strides(dims);
    let d = dims[site];
    let s = st[site];
    let total = block.rows();
    let mut out = CMat::zeros(total, block.cols());
    for x in 0..total {
        let digit = (x / s) % d;
        let base = x - digit * s;
        for e in 0..d {
            let coef = local[(e, digit)];
            if coef.re == 0.0 && coef.im == 0.0 {
                continue;
            }
            let y = base + e * s;
            for c in 0..block.cols() {
                let v = block[(x, c)];
                out[(y, c)] += coef * v;
            }
        }
    }
    out
}

/// Applies `local^{⊗n}` to the columns of `block` without forming the
/// tensor power.
pub fn apply_kron_power(block: &CMat, local: &CMat, n: usize) -> CMat {
    let dims = vec![local.rows(); n];
    let mut cur = block.clone();
    for site in 0..n {
        cur = apply_local(&cur, &dims, site, local);
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strides_are_row_major() {
        assert_eq!(strides(&[2, 3, 4]), vec![12, 4, 1]);
    }

    #[test]
    fn reorder_swaps_two_factors() {
        // |01⟩ -> |10⟩ on two qubits
        let mut v = vec![C64::new(0.0, 0.0); 4];
        v[1] = C64::new(1.0, 0.0);
        let w = reorder_vector(&v, &[2, 2], &[1, 0]).unwrap();
        assert_eq!(w[2], C64::new(1.0, 0.0));
    }

    #[test]
    fn apply_kron_power_matches_dense() {
        let a = CMat::from_fn(2, 2, |i, j| C64::new((i + 2 * j) as f64, (i as f64) - (j as f64)));
        let dense = kron_all([&a, &a, &a]);
        let block = CMat::from_fn(8, 3, |i, j| C64::new((i * j) as f64 * 0.1, (i + j) as f64 * 0.01));
        let fast = apply_kron_power(&block, &a, 3);
        assert!((&fast - &dense.matmul(&block)).max_abs() < 1e-12);
    }

    #[test]
    fn bad_subset_rejected() {
        assert!(check_subset(&[2, 2], &[2]).is_err());
        assert!(check_subset(&[2, 2], &[0, 0]).is_err());
    }
}
