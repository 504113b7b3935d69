use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::VectorMap;
use crate::error::{dim_err, Result};

/// Box-window mean filter on an `rows × cols` image stored column-major.
///
/// The window around `(j, j')` is `{(k, k') : |j−k| ≤ h, |j'−k'| ≤ h}`
/// truncated at the image border.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalKernelSpec {
    pub rows: usize,
    pub cols: usize,
    pub bandwidth: usize,
}

impl LocalKernelSpec {
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    fn window(len: usize, h: usize, j: usize) -> (usize, usize) {
        (j.saturating_sub(h), (j + h).min(len - 1))
    }

    /// Largest column sum of the 1-D truncated averaging matrix.
    fn max_col_sum_1d(len: usize, h: usize) -> f64 {
        let size = |j: usize| {
            let (lo, hi) = Self::window(len, h, j);
            (hi - lo + 1) as f64
        };
        (0..len)
            .map(|k| {
                let (lo, hi) = Self::window(len, h, k);
                (lo..=hi).map(|j| 1.0 / size(j)).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// The filter as a [`VectorMap`] on vectorized images.
#[derive(Clone, Debug)]
pub struct LocalAverage {
    pub spec: LocalKernelSpec,
    lipschitz: f64,
    divergence: f64,
}

impl LocalAverage {
    pub fn new(spec: LocalKernelSpec) -> Result<Self> {
        if spec.rows == 0 || spec.cols == 0 {
            return dim_err(format!("image must be non-empty, got {}x{}", spec.rows, spec.cols));
        }
        // The filter is a Kronecker product of two 1-D averaging matrices
        // with unit row sums, so ‖A‖₂ ≤ sqrt(‖A‖₁ ‖A‖∞) = sqrt(max column sum).
        let l = (LocalKernelSpec::max_col_sum_1d(spec.rows, spec.bandwidth)
            * LocalKernelSpec::max_col_sum_1d(spec.cols, spec.bandwidth))
        .sqrt();
        Ok(Self { spec, lipschitz: l, divergence: local_average_divergence(&spec) })
    }
}

impl VectorMap for LocalAverage {
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        local_average_apply(x, &self.spec).expect("image length checked by caller")
    }

    fn divergence(&self, _x: &DVector<f64>) -> Option<f64> {
        Some(self.divergence)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.spec.dim())
    }

    fn name(&self) -> String {
        format!("local_average(h={})", self.spec.bandwidth)
    }
}

/// Window means via a summed-area table.
pub fn local_average_apply(z: &DVector<f64>, spec: &LocalKernelSpec) -> Result<DVector<f64>> {
    let (m, n, h) = (spec.rows, spec.cols, spec.bandwidth);
    if z.len() != m * n || m == 0 {
        return dim_err(format!("image vector has length {}, expected {m}x{n}", z.len()));
    }
    if h == 0 {
        return Ok(z.clone());
    }
    // sat[(j+1) + (j'+1)(m+1)] = sum of z over [0..=j] x [0..=j']
    let stride = m + 1;
    let mut sat = vec![0.0; (m + 1) * (n + 1)];
    for jp in 0..n {
        for j in 0..m {
            sat[(j + 1) + (jp + 1) * stride] =
                z[j + jp * m] + sat[j + (jp + 1) * stride] + sat[(j + 1) + jp * stride] - sat[j + jp * stride];
        }
    }
    let mut out = DVector::zeros(m * n);
    for jp in 0..n {
        let (c0, c1) = LocalKernelSpec::window(n, h, jp);
        for j in 0..m {
            let (r0, r1) = LocalKernelSpec::window(m, h, j);
            let s = sat[(r1 + 1) + (c1 + 1) * stride] - sat[r0 + (c1 + 1) * stride] - sat[(r1 + 1) + c0 * stride]
                + sat[r0 + c0 * stride];
            out[j + jp * m] = s / ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64;
        }
    }
    Ok(out)
}

/// `Σ_{(j,j')} 1/|S_{j,j'}|`, independent of the input.
pub fn local_average_divergence(spec: &LocalKernelSpec) -> f64 {
    let inv_sizes = |len: usize| -> f64 {
        (0..len)
            .map(|j| {
                let (lo, hi) = LocalKernelSpec::window(len, spec.bandwidth, j);
                1.0 / (hi - lo + 1) as f64
            })
            .sum()
    };
    // window sizes factor over the two axes
    inv_sizes(spec.rows) * inv_sizes(spec.cols)
}
