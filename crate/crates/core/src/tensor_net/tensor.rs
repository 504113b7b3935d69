use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{dim_err, Error, Result};

/// Structured tensors above this dimension are never materialized.
pub const MATERIALIZE_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TensorStorage {
    /// Row-major values, `T[i_1..i_k]` at `Σ_ℓ i_ℓ n^{k−ℓ}`.
    Dense(Vec<f64>),
    /// `T[i, .., i] = values[i]`, zero elsewhere.
    Diagonal(Vec<f64>),
    /// `Id^k`: one iff all indices are equal.
    Identity,
    /// Alternating tensor on `vec(R^{rows×cols})`, `n = rows·cols`.
    Alternating { rows: usize, cols: usize },
}

/// An order-`k` tensor with every dimension equal to `dim`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DenseTensor {
    pub order: usize,
    pub dim: usize,
    pub storage: TensorStorage,
}

impl DenseTensor {
    pub fn dense(order: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        let len = checked_pow(dim, order).ok_or_else(|| Error::Budget(format!("{dim}^{order} entries")))?;
        if values.len() != len {
            return dim_err(format!("order-{order} tensor of dimension {dim} needs {len} values, got {}", values.len()));
        }
        Ok(Self { order, dim, storage: TensorStorage::Dense(values) })
    }

    pub fn vector(v: &DVector<f64>) -> Self {
        Self { order: 1, dim: v.len(), storage: TensorStorage::Dense(v.as_slice().to_vec()) }
    }

    /// Order-2 tensor with `T[i, j] = M[i, j]`.
    pub fn matrix(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return dim_err(format!("matrix tensor must be square, got {:?}", m.shape()));
        }
        let n = m.nrows();
        Ok(Self { order: 2, dim: n, storage: TensorStorage::Dense(m.transpose().as_slice().to_vec()) })
    }

    pub fn diagonal(order: usize, values: Vec<f64>) -> Self {
        Self { order, dim: values.len(), storage: TensorStorage::Diagonal(values) }
    }

    pub fn identity(order: usize, dim: usize) -> Self {
        Self { order, dim, storage: TensorStorage::Identity }
    }

    /// `Σ_r a_r^1 ⊗ ... ⊗ a_r^k` from `terms[r][ℓ] = a_r^ℓ`.
    pub fn from_cp(terms: &[Vec<DVector<f64>>]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::InvalidParameter("empty CP decomposition".into()))?;
        let order = first.len();
        let dim = first.first().map_or(0, |v| v.len());
        if terms.iter().any(|t| t.len() != order || t.iter().any(|v| v.len() != dim)) {
            return dim_err("CP factors disagree in order or dimension");
        }
        let len = checked_pow(dim, order).ok_or_else(|| Error::Budget(format!("{dim}^{order} entries")))?;
        let mut values = vec![0.0; len];
        let mut idx = vec![0usize; order];
        for v in values.iter_mut() {
            *v = terms.iter().map(|t| t.iter().zip(&idx).map(|(a, &i)| a[i]).product::<f64>()).sum();
            advance(&mut idx, dim);
        }
        Self::dense(order, dim, values)
    }

    pub fn entry(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.order);
        match &self.storage {
            TensorStorage::Dense(v) => v[flat_index(idx, self.dim)],
            TensorStorage::Diagonal(v) => {
                if idx.iter().all(|&i| i == idx[0]) {
                    v[idx[0]]
                } else {
                    0.0
                }
            }
            TensorStorage::Identity => {
                if idx.iter().all(|&i| i == idx[0]) {
                    1.0
                } else {
                    0.0
                }
            }
            TensorStorage::Alternating { rows, cols } => alternating_entry(idx, *rows, *cols),
        }
    }

    /// Dense copy; structured tensors above [`MATERIALIZE_LIMIT`] are refused.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        if !matches!(self.storage, TensorStorage::Dense(_)) && self.dim > MATERIALIZE_LIMIT {
            return Err(Error::Budget(format!("refusing to materialize a structured tensor of dimension {}", self.dim)));
        }
        let len = checked_pow(self.dim, self.order).ok_or_else(|| Error::Budget("tensor too large".into()))?;
        let mut idx = vec![0usize; self.order];
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(self.entry(&idx));
            advance(&mut idx, self.dim);
        }
        DenseTensor::dense(self.order, self.dim, values)
    }

    /// Tensor with slots permuted: `out[i_{p(1)}, .., i_{p(k)}] = T[i_1..i_k]`,
    /// i.e. slot `ℓ` of `self` becomes slot `perm[ℓ]` of the result.
    pub fn permuted(&self, perm: &[usize]) -> Result<DenseTensor> {
        check_perm(perm, self.order)?;
        let d = self.to_dense()?;
        let mut values = vec![0.0; checked_pow(self.dim, self.order).unwrap_or(0)];
        let mut idx = vec![0usize; self.order];
        let mut out_idx = vec![0usize; self.order];
        for _ in 0..values.len() {
            for (l, &p) in perm.iter().enumerate() {
                out_idx[p] = idx[l];
            }
            values[flat_index(&out_idx, self.dim)] = d.entry(&idx);
            advance(&mut idx, self.dim);
        }
        DenseTensor::dense(self.order, self.dim, values)
    }
}

fn check_perm(perm: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidParameter(format!("{perm:?} is not a permutation of {k} slots")));
    }
    Ok(())
}

pub(crate) fn checked_pow(n: usize, k: usize) -> Option<usize> {
    n.checked_pow(u32::try_from(k).ok()?)
}

pub(crate) fn flat_index(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

/// Odometer increment, last position fastest. Wraps to all zeros.
pub(crate) fn advance(idx: &mut [usize], n: usize) {
    for p in (0..idx.len()).rev() {
        idx[p] += 1;
        if idx[p] < n {
            return;
        }
        idx[p] = 0;
    }
}

/// `N^{1−k/2} ∏_{odd ℓ} 1{j'_ℓ = j'_{ℓ+1}} ∏_{even ℓ} 1{j_ℓ = j_{ℓ+1}}` with
/// `j_{k+1} = j_1`, where index `i = j + j'·rows`.
fn alternating_entry(idx: &[usize], rows: usize, cols: usize) -> f64 {
    let k = idx.len();
    let split = |i: usize| (i % rows, i / rows);
    for l in 0..k {
        let (j, jp) = split(idx[l]);
        let (jn, jpn) = split(idx[(l + 1) % k]);
        // 1-based ℓ = l + 1
        let ok = if l % 2 == 0 { jp == jpn } else { j == jn };
        if !ok {
            return 0.0;
        }
    }
    (cols as f64).powf(1.0 - k as f64 / 2.0)
}

/// The alternating tensor of even order `k ≥ 2` on `vec(R^{rows×cols})`.
pub fn alternating_tensor(k: usize, rows: usize, cols: usize) -> Result<DenseTensor> {
    if k < 2 || k % 2 == 1 {
        return Err(Error::InvalidParameter(format!("alternating tensors need even order ≥ 2, got {k}")));
    }
    if rows == 0 || cols == 0 {
        return dim_err("alternating tensor needs positive matrix dimensions");
    }
    Ok(DenseTensor { order: k, dim: rows * cols, storage: TensorStorage::Alternating { rows, cols } })
}
