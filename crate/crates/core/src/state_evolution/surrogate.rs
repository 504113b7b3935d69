use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensembles::{gaussian_vector, RngStream};
use crate::error::{Error, Result};

/// A diagonal jitter applied while factorizing a near-singular covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JitterEvent {
    /// Iteration whose covariance needed the jitter.
    pub t: usize,
    /// Schur complement before the jitter was added.
    pub pivot: f64,
    pub added: f64,
}

/// Replicated Gaussian columns `Z_1, Z_2, ...` with i.i.d. rows
/// `N(0, Σ)`, grown one column at a time from an incremental lower Cholesky
/// factor.
///
/// Column `k` of replicate `r` is `Σ_j L[k, j] ξ_{r,j}` where `ξ_{r,j}` comes
/// from `stream.substream(r).substream(j)`. Earlier columns never change, so
/// every covariance computed from the first `s` columns is the same whatever
/// is appended later.
pub(crate) struct GaussianChain {
    dim: usize,
    stream: RngStream,
    jitter: f64,
    l: Vec<Vec<f64>>,
    max_diag: f64,
    cols: Vec<Vec<DVector<f64>>>,
    pub jitter_events: Vec<JitterEvent>,
}

impl GaussianChain {
    pub fn new(dim: usize, reps: usize, stream: RngStream, jitter: f64) -> Self {
        Self {
            dim,
            stream,
            jitter,
            l: Vec::new(),
            max_diag: 0.0,
            cols: vec![Vec::new(); reps],
            jitter_events: Vec::new(),
        }
    }

    pub fn reps(&self) -> usize {
        self.cols.len()
    }

    pub fn columns(&self, r: usize) -> &[DVector<f64>] {
        &self.cols[r]
    }

    /// Appends a column whose covariances with the existing columns are
    /// `row[..k]` and whose variance is `row[k]`.
    pub fn extend(&mut self, row: &[f64], t: usize) -> Result<()> {
        let k = self.l.len();
        assert_eq!(row.len(), k + 1, "covariance row has wrong length");
        let mut lk = vec![0.0; k + 1];
        if row[k] != 0.0 {
            for j in 0..k {
                let s = row[j] - (0..j).map(|i| lk[i] * self.l[j][i]).sum::<f64>();
                lk[j] = if self.l[j][j] > 0.0 { s / self.l[j][j] } else { 0.0 };
            }
            self.max_diag = self.max_diag.max(row[k]);
            let scale = self.max_diag;
            let mut d = row[k] - lk[..k].iter().map(|x| x * x).sum::<f64>();
            if d < -1e-8 * scale {
                return Err(Error::NotPsd { t, pivot: d });
            }
            if d < self.jitter * scale {
                let added = self.jitter * scale;
                log::debug!("state evolution t={t}: pivot {d:.3e} below jitter, adding {added:.3e}");
                self.jitter_events.push(JitterEvent { t, pivot: d, added });
                d = d.max(0.0) + added;
            }
            lk[k] = d.sqrt();
        }
        let stream = self.stream;
        let dim = self.dim;
        let new_cols: Vec<DVector<f64>> = (0..self.reps())
            .into_par_iter()
            .map(|r| {
                let rs = stream.substream(r as u64);
                let mut z = DVector::zeros(dim);
                for (j, &c) in lk.iter().enumerate() {
                    if c != 0.0 {
                        let xi = gaussian_vector(&mut rs.substream(j as u64).rng(), dim);
                        z.axpy(c, &xi, 1.0);
                    }
                }
                z
            })
            .collect();
        for (cols, z) in self.cols.iter_mut().zip(new_cols) {
            cols.push(z);
        }
        self.l.push(lk);
        Ok(())
    }

    /// Evaluates `f` on every replicate in parallel; results are in replicate
    /// order.
    pub fn map<R: Send>(&self, f: impl Fn(usize, &[DVector<f64>]) -> R + Sync) -> Vec<R> {
        (0..self.reps()).into_par_iter().map(|r| f(r, &self.cols[r])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empirical_covariance_matches() {
        let mut ch = GaussianChain::new(2000, 4, RngStream::new(3, 0), 1e-8);
        ch.extend(&[2.0], 1).unwrap();
        ch.extend(&[0.5, 1.0], 2).unwrap();
        for r in 0..4 {
            let c = ch.columns(r);
            let n = 2000.0;
            assert!((c[0].norm_squared() / n - 2.0).abs() < 0.2);
            assert!((c[1].norm_squared() / n - 1.0).abs() < 0.1);
            assert!((c[0].dot(&c[1]) / n - 0.5).abs() < 0.1);
        }
    }

    #[test]
    fn duplicate_column_gets_jitter() {
        let mut ch = GaussianChain::new(10, 2, RngStream::new(3, 0), 1e-8);
        ch.extend(&[1.0], 1).unwrap();
        ch.extend(&[1.0, 1.0], 2).unwrap();
        assert_eq!(ch.jitter_events.len(), 1);
        let c = ch.columns(0);
        assert!((&c[0] - &c[1]).amax() < 1e-3);
    }

    #[test]
    fn zero_variance_gives_zero_column() {
        let mut ch = GaussianChain::new(10, 2, RngStream::new(3, 0), 1e-8);
        ch.extend(&[1.0], 1).unwrap();
        ch.extend(&[0.0, 0.0], 2).unwrap();
        assert!(ch.columns(1)[1].iter().all(|&x| x == 0.0));
        assert!(ch.jitter_events.is_empty());
    }

    #[test]
    fn indefinite_rejected() {
        let mut ch = GaussianChain::new(10, 2, RngStream::new(3, 0), 1e-8);
        ch.extend(&[1.0], 1).unwrap();
        assert!(matches!(ch.extend(&[2.0, 1.0], 2), Err(Error::NotPsd { t: 2, .. })));
    }
}
