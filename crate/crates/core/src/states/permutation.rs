//! Permutations of tensor copies and the symmetrization superoperator.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::tensor::{check_subset, reorder_map};
use crate::linalg::{CMat, HermOperator, C64};
use crate::random;

/// A permutation of `0..n` stored as its image list: item `i` moves to
/// position `self[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &p in &images {
            if p >= n || seen[p] {
                return Err(Error::InvalidArgument(format!("{images:?} is not a permutation of 0..{n}")));
            }
            seen[p] = true;
        }
        Ok(Self(images))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut p: Vec<usize> = (0..n).collect();
        p.swap(a, b);
        Self(p)
    }

    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        Self(random::permutation(n, rng))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Self(inv)
    }

    /// (self ∘ other)(i) = self(other(i)).
    pub fn compose(&self, other: &Self) -> Self {
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    /// Subsystem reordering realizing P_π on `blocks` (each block is the list
    /// of subsystem indices making up one copy). Position k receives the copy
    /// π⁻¹(k).
    fn subsystem_order(&self, n_subsystems: usize, blocks: &[Vec<usize>]) -> Vec<usize> {
        let inv = self.inverse();
        let mut order: Vec<usize> = (0..n_subsystems).collect();
        for (k, block) in blocks.iter().enumerate() {
            let src = &blocks[inv.0[k]];
            for (slot, &s) in block.iter().zip(src) {
                order[*slot] = s;
            }
        }
        order
    }
}

/// Subsystem indices of each copy when `dims` describes `n` identical copies:
/// consecutive groups of `dims.len() / n` factors.
pub fn copy_blocks(dims: &[usize], n: usize) -> Result<Vec<Vec<usize>>> {
    if n == 0 || !dims.len().is_multiple_of(n) {
        return Err(Error::InvalidSubsystems(format!("cannot split {dims:?} into {n} copies")));
    }
    let per = dims.len() / n;
    let blocks: Vec<Vec<usize>> = (0..n).map(|k| (k * per..(k + 1) * per).collect()).collect();
    for b in &blocks[1..] {
        if b.iter().zip(&blocks[0]).any(|(&x, &y)| dims[x] != dims[y]) {
            return Err(Error::InvalidSubsystems(format!("copies in {dims:?} have different shapes")));
        }
    }
    Ok(blocks)
}

/// Layout for an operator on n copies: reuses `dims` when it already splits
/// evenly, otherwise reinterprets the space as `[d; n]`.
pub fn copy_layout(dims: &[usize], total: usize, n: usize) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    if let Ok(b) = copy_blocks(dims, n) {
        return Ok((dims.to_vec(), b));
    }
    let d = (total as f64).powf(1.0 / n as f64).round() as usize;
    if d.checked_pow(n as u32) != Some(total) {
        return Err(Error::InvalidSubsystems(format!("dimension {total} is not an {n}-th power")));
    }
    let dims = vec![d; n];
    let blocks = copy_blocks(&dims, n)?;
    Ok((dims, blocks))
}

fn block_map(dims: &[usize], blocks: &[Vec<usize>], pi: &Permutation) -> Result<Vec<usize>> {
    reorder_map(dims, &pi.subsystem_order(dims.len(), blocks))
}

/// The unitary P_π on n copies of C^d.
pub fn permutation_operator(n: usize, d: usize, pi: &Permutation) -> Result<CMat> {
    if pi.len() != n {
        return Err(Error::InvalidArgument(format!("permutation has {} items, expected {n}", pi.len())));
    }
    let dims = vec![d; n];
    let blocks = copy_blocks(&dims, n)?;
    let map = block_map(&dims, &blocks, pi)?;
    let total = map.len();
    let mut p = CMat::zeros(total, total);
    for (new, &old) in map.iter().enumerate() {
        p[(new, old)] = C64::new(1.0, 0.0);
    }
    Ok(p)
}

/// P_π|ψ⟩ for a vector over `dims` split into copy `blocks`.
pub fn permute_vector(v: &[C64], dims: &[usize], blocks: &[Vec<usize>], pi: &Permutation) -> Result<Vec<C64>> {
    let map = block_map(dims, blocks, pi)?;
    Ok(map.iter().map(|&o| v[o]).collect())
}

/// P_π X P_π†.
pub fn permute_operator(x: &HermOperator, blocks: &[Vec<usize>], pi: &Permutation) -> Result<HermOperator> {
    let map = block_map(x.dims(), blocks, pi)?;
    let m = x.mat();
    let out = CMat::from_fn(m.rows(), m.cols(), |i, j| m[(map[i], map[j])]);
    HermOperator::new(x.dims().to_vec(), out)
}

fn transposition_maps(dims: &[usize], blocks: &[Vec<usize>], k: usize) -> Result<Vec<Vec<usize>>> {
    let n = blocks.len();
    (0..k).map(|j| block_map(dims, blocks, &Permutation::transposition(n, j, k))).collect()
}

/// Exact group average (1/n!) Σ_π P_π X P_π† over permutations of `blocks`.
///
/// Uses the coset factorization S_n = T_n ∘ … ∘ T_2 with
/// T_k(X) = (1/k) Σ_{j≤k} τ_{jk} X τ_{jk}, which costs O(n² D²) instead of
/// O(n! D²).
pub fn symmetrize_blocks(x: &HermOperator, blocks: &[Vec<usize>]) -> Result<HermOperator> {
    for b in blocks {
        check_subset(x.dims(), b)?;
    }
    let mut cur = x.mat().clone();
    let d = cur.rows();
    for k in 1..blocks.len() {
        let maps = transposition_maps(x.dims(), blocks, k)?;
        let mut acc = cur.clone();
        for map in &maps {
            let data = acc.data_mut();
            let src = cur.data();
            for i in 0..d {
                let mi = map[i] * d;
                for j in 0..d {
                    data[i * d + j] += src[mi + map[j]];
                }
            }
        }
        cur = acc.scale(1.0 / (k + 1) as f64);
    }
    Ok(HermOperator::from_hermitian_part(x.dims().to_vec(), cur))
}

/// Symmetrization over the n copies making up `x`.
pub fn symmetrize(x: &HermOperator, n: usize) -> Result<HermOperator> {
    let (dims, blocks) = copy_layout(x.dims(), x.dim(), n)?;
    let y = x.clone().with_dims(dims)?;
    let s = symmetrize_blocks(&y, &blocks)?;
    s.with_dims(x.dims().to_vec())
}

/// Monte-Carlo estimate of the symmetrization: average over `trials`
/// permutations drawn by seeded Fisher-Yates.
pub fn symmetrize_sampled(x: &HermOperator, n: usize, trials: usize, seed: u64) -> Result<HermOperator> {
    if trials == 0 {
        return Err(Error::InvalidArgument("sampled symmetrization needs at least one trial".into()));
    }
    let (dims, blocks) = copy_layout(x.dims(), x.dim(), n)?;
    let y = x.clone().with_dims(dims)?;
    let mut rng = random::rng(seed);
    let mut acc = HermOperator::zeros(y.dims());
    for _ in 0..trials {
        let pi = Permutation::random(n, &mut rng);
        acc = acc.plus(&permute_operator(&y, &blocks, &pi)?);
    }
    acc.scaled(1.0 / trials as f64).with_dims(x.dims().to_vec())
}

/// Exact average (1/n!) Σ_π P_π|ψ⟩ over copy blocks (unnormalized).
pub fn symmetrize_vector(v: &[C64], dims: &[usize], blocks: &[Vec<usize>]) -> Result<Vec<C64>> {
    let mut cur = v.to_vec();
    for k in 1..blocks.len() {
        let maps = transposition_maps(dims, blocks, k)?;
        let mut acc = cur.clone();
        for map in &maps {
            for (a, &m) in acc.iter_mut().zip(map) {
                *a += cur[m];
            }
        }
        let s = 1.0 / (k + 1) as f64;
        cur = acc.into_iter().map(|z| z * s).collect();
    }
    Ok(cur)
}

/// Largest elementwise deviation between `x` and its symmetrization.
pub fn symmetrization_residual(x: &HermOperator, n: usize) -> Result<f64> {
    let s = symmetrize(x, n)?;
    Ok((s.mat() - x.mat()).max_abs())
}
