use nalgebra::{DMatrix, DVector};

use super::{ScalarFn, VectorMap};
use crate::error::{dim_err, Result};

/// `K′ g(Kᵀ z)` with `g` separable.
#[derive(Clone, Debug, PartialEq)]
pub struct AnisoSpec {
    pub k: DMatrix<f64>,
    pub k_prime: DMatrix<f64>,
    pub inner: ScalarFn,
}

impl AnisoSpec {
    pub fn new(k: DMatrix<f64>, k_prime: DMatrix<f64>, inner: ScalarFn) -> Self {
        Self { k, k_prime, inner }
    }
}

/// General form `left · g(right · z + offset)`.
///
/// [`AnisoSpec`] corresponds to `left = K′`, `right = Kᵀ`, no offset. The
/// offset form expresses maps such as `K η(K⁻¹ y + θ*)`.
#[derive(Clone, Debug)]
pub struct Aniso {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    pub offset: Option<DVector<f64>>,
    pub inner: ScalarFn,
    /// diag(right · left), the divergence weights.
    weights: DVector<f64>,
    lipschitz: f64,
}

impl Aniso {
    pub fn new(spec: AnisoSpec) -> Result<Self> {
        Self::general(spec.k_prime, spec.k.transpose(), None, spec.inner)
    }

    pub fn general(left: DMatrix<f64>, right: DMatrix<f64>, offset: Option<DVector<f64>>, inner: ScalarFn) -> Result<Self> {
        inner.validate()?;
        if left.ncols() != right.nrows() {
            return dim_err(format!("left is {:?} but right is {:?}", left.shape(), right.shape()));
        }
        if let Some(o) = &offset {
            if o.len() != right.nrows() {
                return dim_err(format!("offset has length {}, expected {}", o.len(), right.nrows()));
            }
        }
        let weights = if right.ncols() == left.nrows() {
            DVector::from_fn(right.ncols(), |i, _| right.row(i).dot(&left.column(i).transpose()))
        } else {
            DVector::zeros(0)
        };
        let norm = |a: &DMatrix<f64>| a.singular_values().max();
        let lipschitz = norm(&left) * inner.lipschitz() * norm(&right);
        Ok(Self { left, right, offset, inner, weights, lipschitz })
    }

    fn pre(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut x = &self.right * z;
        if let Some(o) = &self.offset {
            x += o;
        }
        x
    }
}

impl VectorMap for Aniso {
    fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        let x = self.pre(z);
        &self.left * x.map(|v| self.inner.eval(v))
    }

    fn divergence(&self, z: &DVector<f64>) -> Option<f64> {
        if self.weights.is_empty() {
            return None;
        }
        // tr(left · diag(g') · right) = Σ_i g'_i (right · left)_{ii}
        let x = self.pre(z);
        Some(x.iter().zip(self.weights.iter()).map(|(&v, &w)| self.inner.derivative(v) * w).sum())
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.right.ncols())
    }

    fn name(&self) -> String {
        format!("aniso({})", self.inner.name())
    }
}

/// `K′ g(Kᵀ z_t)` on the latest column of `z`.
pub fn aniso_apply(z: &[DVector<f64>], spec: &AnisoSpec) -> Result<DVector<f64>> {
    let Some(zt) = z.last() else {
        return dim_err("need at least one input column");
    };
    let n = zt.len();
    if spec.k.shape() != (n, n) || spec.k_prime.shape() != (n, n) {
        return dim_err(format!("K is {:?}, K' is {:?}, expected {n}x{n}", spec.k.shape(), spec.k_prime.shape()));
    }
    spec.inner.validate()?;
    let x = spec.k.tr_mul(zt);
    Ok(&spec.k_prime * x.map(|v| spec.inner.eval(v)))
}
