use nalgebra::{DMatrix, DVector, SVD};

use super::{mc_divergence, DivEstimate, VectorMap};
use crate::ensembles::RngStream;
use crate::error::{dim_err, Error, Result};

/// Singular value soft thresholding at level `λ√N` on `rows × cols`
/// matrices, optionally applied to `X + shift`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSpec {
    pub rows: usize,
    pub cols: usize,
    pub lambda: f64,
    pub shift: Option<DMatrix<f64>>,
}

impl SpectralSpec {
    pub fn threshold(&self) -> f64 {
        self.lambda * (self.cols as f64).sqrt()
    }

    fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return dim_err(format!("matrix must be non-empty, got {}x{}", self.rows, self.cols));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("threshold must be nonnegative, got {}", self.lambda)));
        }
        if let Some(s) = &self.shift {
            if s.shape() != (self.rows, self.cols) {
                return dim_err(format!("shift is {:?}, expected {}x{}", s.shape(), self.rows, self.cols));
            }
        }
        Ok(())
    }
}

/// `O·diag((d_i − λ√N)₊)·Uᵀ` from the thin SVD `X = O·diag(d)·Uᵀ`.
pub fn svt_apply(x: &DMatrix<f64>, spec: &SpectralSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if x.shape() != (spec.rows, spec.cols) {
        return dim_err(format!("input is {:?}, expected {}x{}", x.shape(), spec.rows, spec.cols));
    }
    let input = match &spec.shift {
        Some(s) => x + s,
        None => x.clone(),
    };
    let svd = SVD::try_new(input, true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let (u, vt) = match (&svd.u, &svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numeric("SVD did not return singular vectors".into())),
    };
    let tau = spec.threshold();
    let mut out = DMatrix::zeros(spec.rows, spec.cols);
    for (i, &d) in svd.singular_values.iter().enumerate() {
        let g = d - tau;
        if g > 0.0 {
            out.ger(g, &u.column(i), &vt.row(i).transpose(), 1.0);
        }
    }
    Ok(out)
}

/// The spectral map on vectorized (column-major) matrices.
#[derive(Clone, Debug)]
pub struct Svt {
    pub spec: SpectralSpec,
}

impl Svt {
    pub fn new(spec: SpectralSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }
}

impl VectorMap for Svt {
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mat = DMatrix::from_column_slice(self.spec.rows, self.spec.cols, x.as_slice());
        let out = svt_apply(&mat, &self.spec).expect("SVD failure in spectral denoiser");
        DVector::from_column_slice(out.as_slice())
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.spec.rows * self.spec.cols)
    }

    fn name(&self) -> String {
        format!("svt(lambda={})", self.spec.lambda)
    }
}

/// Monte-Carlo divergence of the spectral map at `X`.
pub fn svt_divergence_mc(x: &DMatrix<f64>, spec: &SpectralSpec, eps: f64, reps: usize, stream: RngStream) -> Result<DivEstimate> {
    let svt = Svt::new(spec.clone())?;
    if x.shape() != (spec.rows, spec.cols) {
        return dim_err(format!("input is {:?}, expected {}x{}", x.shape(), spec.rows, spec.cols));
    }
    let v = DVector::from_column_slice(x.as_slice());
    mc_divergence(|y| svt.apply(y), &v, eps, reps, stream)
}
