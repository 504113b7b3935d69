//! Non-linearities used inside AMP and their divergences.
//!
//! Two layers:
//!
//! * [`VectorMap`]: a single-input map `R^n -> R^p` with an optional analytic
//!   divergence. Soft thresholding, local averaging, singular value
//!   thresholding and anisotropic compositions implement this.
//! * [`Denoiser`]: the AMP-facing map of the stacked iterates `z_1..z_t`,
//!   with per-column divergences and a declared support (the columns it
//!   actually reads).
//!
//! Side information such as `θ*`, `e` or `K` is stored inside the map.

mod aniso;
mod interpolant;
mod local;
mod separable;
mod spectral;

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

pub use aniso::{aniso_apply, Aniso, AnisoSpec};
pub use interpolant::{lipschitz_monotone_approx, marchenko_pastur_quantiles, MonotoneInterpolant};
pub use local::{local_average_apply, local_average_divergence, LocalAverage, LocalKernelSpec};
pub use separable::{soft_threshold, soft_threshold_apply, soft_threshold_divergence, ScalarFn, Separable};
pub use spectral::{svt_apply, svt_divergence_mc, Svt, SpectralSpec};

use crate::ensembles::{gaussian_vector, RngStream};
use crate::error::{Error, Result};

/// Default number of probes for Monte-Carlo divergences.
pub const DEFAULT_MC_REPS: usize = 100;
/// Default relative step for Monte-Carlo divergences.
pub const DEFAULT_MC_EPS_REL: f64 = 1e-4;

pub trait VectorMap: Send + Sync {
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Exact divergence `Σ_i ∂f_i/∂x_i` at `x`, if available in closed form.
    fn divergence(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }

    /// Declared Lipschitz constant in the Euclidean norm.
    fn lipschitz(&self) -> f64;

    /// Required input length, if the map is tied to a size.
    fn input_dim(&self) -> Option<usize> {
        None
    }

    fn name(&self) -> String;
}

impl<T: VectorMap + ?Sized> VectorMap for Arc<T> {
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).apply(x)
    }
    fn divergence(&self, x: &DVector<f64>) -> Option<f64> {
        (**self).divergence(x)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn input_dim(&self) -> Option<usize> {
        (**self).input_dim()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// An AMP non-linearity `f_t(z_1, ..., z_t)`.
///
/// Column indices are 0-based: `z[0]` is `z_1`.
pub trait Denoiser: Send + Sync {
    fn apply(&self, z: &[DVector<f64>]) -> DVector<f64>;

    /// Exact divergence with respect to column `s`, if known.
    fn divergence(&self, z: &[DVector<f64>], s: usize) -> Option<f64>;

    /// Columns the map reads when given `t` columns. Coefficients for other
    /// columns are identically zero.
    fn support(&self, t: usize) -> Vec<usize> {
        (0..t).collect()
    }

    fn lipschitz(&self) -> f64;

    fn name(&self) -> String;
}

pub type DynDenoiser = Arc<dyn Denoiser>;

/// Applies a [`VectorMap`] to the latest column only.
#[derive(Clone)]
pub struct OnLatest(pub Arc<dyn VectorMap>);

impl OnLatest {
    pub fn new(map: impl VectorMap + 'static) -> Self {
        Self(Arc::new(map))
    }

    pub fn boxed(map: impl VectorMap + 'static) -> DynDenoiser {
        Arc::new(Self::new(map))
    }
}

impl Denoiser for OnLatest {
    fn apply(&self, z: &[DVector<f64>]) -> DVector<f64> {
        self.0.apply(z.last().expect("denoiser needs at least one column"))
    }

    fn divergence(&self, z: &[DVector<f64>], s: usize) -> Option<f64> {
        if s + 1 == z.len() {
            self.0.divergence(&z[s])
        } else {
            Some(0.0)
        }
    }

    fn support(&self, t: usize) -> Vec<usize> {
        if t == 0 {
            vec![]
        } else {
            vec![t - 1]
        }
    }

    fn lipschitz(&self) -> f64 {
        self.0.lipschitz()
    }

    fn name(&self) -> String {
        self.0.name()
    }
}

/// `f(z_{1:t}) = inner(Σ_s w_s z_s)`; weights beyond `t` are ignored.
#[derive(Clone)]
pub struct Combine {
    pub weights: Vec<f64>,
    pub inner: Arc<dyn VectorMap>,
}

impl Combine {
    fn mix(&self, z: &[DVector<f64>]) -> DVector<f64> {
        let mut x = DVector::zeros(z[0].len());
        for (w, col) in self.weights.iter().zip(z) {
            if *w != 0.0 {
                x.axpy(*w, col, 1.0);
            }
        }
        x
    }
}

impl Denoiser for Combine {
    fn apply(&self, z: &[DVector<f64>]) -> DVector<f64> {
        self.inner.apply(&self.mix(z))
    }

    fn divergence(&self, z: &[DVector<f64>], s: usize) -> Option<f64> {
        let w = self.weights.get(s).copied().unwrap_or(0.0);
        if w == 0.0 {
            return Some(0.0);
        }
        self.inner.divergence(&self.mix(z)).map(|d| w * d)
    }

    fn support(&self, t: usize) -> Vec<usize> {
        (0..t.min(self.weights.len())).filter(|&s| self.weights[s] != 0.0).collect()
    }

    fn lipschitz(&self) -> f64 {
        let wn: f64 = self.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        self.inner.lipschitz() * wn
    }

    fn name(&self) -> String {
        format!("combine({})", self.inner.name())
    }
}

/// `out_shift + out_scale · inner(x + in_shift)`.
///
/// Builds the maps of the sensing change of variables, e.g.
/// `g(y) = θ* − η(y + θ*)` and `f(z) = z + e`.
#[derive(Clone)]
pub struct Shifted {
    pub inner: Arc<dyn VectorMap>,
    pub in_shift: Option<DVector<f64>>,
    pub out_shift: Option<DVector<f64>>,
    pub out_scale: f64,
}

impl Shifted {
    fn shifted_input(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.in_shift {
            Some(s) => x + s,
            None => x.clone(),
        }
    }
}

impl VectorMap for Shifted {
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = self.inner.apply(&self.shifted_input(x));
        if self.out_scale != 1.0 {
            y *= self.out_scale;
        }
        if let Some(s) = &self.out_shift {
            y += s;
        }
        y
    }

    fn divergence(&self, x: &DVector<f64>) -> Option<f64> {
        self.inner.divergence(&self.shifted_input(x)).map(|d| self.out_scale * d)
    }

    fn lipschitz(&self) -> f64 {
        self.out_scale.abs() * self.inner.lipschitz()
    }

    fn input_dim(&self) -> Option<usize> {
        self.in_shift.as_ref().map(|s| s.len()).or_else(|| self.inner.input_dim())
    }

    fn name(&self) -> String {
        format!("shifted({})", self.inner.name())
    }
}

/// Replaces the analytic divergence of a map by the Monte-Carlo probe, e.g.
/// to follow an experiment that prescribes the probe estimator.
pub struct ForceMonteCarlo(pub Arc<dyn VectorMap>);

impl VectorMap for ForceMonteCarlo {
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.0.apply(x)
    }
    fn lipschitz(&self) -> f64 {
        self.0.lipschitz()
    }
    fn input_dim(&self) -> Option<usize> {
        self.0.input_dim()
    }
    fn name(&self) -> String {
        self.0.name()
    }
}

/// Monte-Carlo divergence estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DivEstimate {
    pub value: f64,
    pub std_err: f64,
}

/// Default probe step `ε = 1e-4 · max(1, ‖x‖/√n)`.
pub fn default_eps(x: &DVector<f64>) -> f64 {
    let n = x.len().max(1) as f64;
    DEFAULT_MC_EPS_REL * (x.norm() / n.sqrt()).max(1.0)
}

/// `(1/reps) Σ_r (1/ε) ξ_rᵀ (f(x + εξ_r) − f(x))` with `ξ_r ~ N(0, I)`.
///
/// Probe `r` draws from `stream.substream(r)`; evaluation runs in parallel and
/// the reduction is in probe order, so the result does not depend on the
/// thread count.
pub fn mc_divergence<F>(f: F, x: &DVector<f64>, eps: f64, reps: usize, stream: RngStream) -> Result<DivEstimate>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Sync,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("probe step must be positive, got {eps}")));
    }
    if reps == 0 {
        return Err(Error::InvalidParameter("need at least one probe".into()));
    }
    let fx = f(x);
    let vals: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.substream(r as u64).rng();
            let xi = gaussian_vector(&mut rng, x.len());
            let mut xp = x.clone();
            xp.axpy(eps, &xi, 1.0);
            let fp = f(&xp);
            xi.dot(&(fp - &fx)) / eps
        })
        .collect();
    Ok(mean_and_se(&vals))
}

pub(crate) fn mean_and_se(vals: &[f64]) -> DivEstimate {
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    DivEstimate { value: mean, std_err: (var / k).sqrt() }
}

/// Divergence of a [`VectorMap`]: analytic when available, otherwise the
/// Monte-Carlo probe with the default step.
pub fn map_divergence(map: &dyn VectorMap, x: &DVector<f64>, reps: usize, stream: RngStream) -> Result<DivEstimate> {
    match map.divergence(x) {
        Some(d) => Ok(DivEstimate { value: d, std_err: 0.0 }),
        None => mc_divergence(|v| map.apply(v), x, default_eps(x), reps, stream),
    }
}

/// Divergence of `f` with respect to column `s`: analytic when available,
/// otherwise a probe perturbing column `s` only. The second element reports
/// whether the analytic formula was used.
pub fn column_divergence(
    f: &dyn Denoiser,
    z: &[DVector<f64>],
    s: usize,
    eps_rel: f64,
    reps: usize,
    stream: RngStream,
) -> Result<(DivEstimate, bool)> {
    if let Some(d) = f.divergence(z, s) {
        return Ok((DivEstimate { value: d, std_err: 0.0 }, true));
    }
    Ok((column_divergence_probe(f, z, s, eps_rel, reps, stream)?, false))
}

/// Probe divergence of `f` with respect to column `s`, ignoring any analytic
/// formula. The step is `eps_rel · max(1, ‖z_s‖/√n)`.
pub fn column_divergence_probe(
    f: &dyn Denoiser,
    z: &[DVector<f64>],
    s: usize,
    eps_rel: f64,
    reps: usize,
    stream: RngStream,
) -> Result<DivEstimate> {
    let n = z[s].len().max(1) as f64;
    let eps = eps_rel * (z[s].norm() / n.sqrt()).max(1.0);
    mc_divergence(
        |v| {
            let mut cols = z.to_vec();
            cols[s] = v.clone();
            f.apply(&cols)
        },
        &z[s],
        eps,
        reps,
        stream,
    )
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;

    /// Largest observed ratio ‖f(x)−f(y)‖ / ‖x−y‖ over random probe pairs,
    /// mixing nearby and distant pairs.
    pub fn lipschitz_probe(map: &dyn VectorMap, n: usize, pairs: usize, scale: f64, seed: u64) -> f64 {
        let mut rng = RngStream::new(seed, 0).rng();
        let mut worst: f64 = 0.0;
        for k in 0..pairs {
            let x = gaussian_vector(&mut rng, n) * scale;
            let step = if k % 2 == 0 { 1e-2 } else { rng.random_range(0.1..3.0) };
            let y = &x + gaussian_vector(&mut rng, n) * (step * scale);
            let num = (map.apply(&x) - map.apply(&y)).norm();
            let den = (&x - &y).norm();
            worst = worst.max(num / den);
        }
        worst
    }

    /// Stability probe: |(1/n)‖f(Z+E)‖² − (1/n)‖f(Z)‖²| against
    /// 10·L²·(‖E‖/√n)·(1 + ‖Z‖/√n).
    pub fn stability_probe(map: &dyn VectorMap, n: usize, seed: u64) -> bool {
        let mut rng = RngStream::new(seed, 1).rng();
        let l = map.lipschitz();
        let rn = (n as f64).sqrt();
        for _ in 0..20 {
            let z = gaussian_vector(&mut rng, n) * rng.random_range(0.1..3.0);
            let e = gaussian_vector(&mut rng, n);
            let e = &e * (rng.random_range(0.0..5.0) / e.norm());
            let a = map.apply(&(&z + &e)).norm_squared() / n as f64;
            let b = map.apply(&z).norm_squared() / n as f64;
            let bound = 10.0 * l * l * (e.norm() / rn) * (1.0 + z.norm() / rn);
            if (a - b).abs() > bound + 1e-12 {
                return false;
            }
        }
        true
    }

    /// Stein check: MC mean of (1/n)Zᵀf(Z)/σ² vs MC mean of (1/n)div f(Z),
    /// returns (difference, combined standard error).
    pub fn stein_gap(map: &dyn VectorMap, n: usize, sigma: f64, draws: usize, seed: u64) -> (f64, f64) {
        let mut rng = RngStream::new(seed, 2).rng();
        let mut diffs = Vec::with_capacity(draws);
        for _ in 0..draws {
            let z = gaussian_vector(&mut rng, n) * sigma;
            let lhs = z.dot(&map.apply(&z)) / (n as f64 * sigma * sigma);
            let rhs = map.divergence(&z).expect("analytic divergence") / n as f64;
            diffs.push(lhs - rhs);
        }
        let est = mean_and_se(&diffs);
        (est.value, est.std_err)
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use nalgebra::DMatrix;

    fn soft(l: f64) -> Arc<dyn VectorMap> {
        Arc::new(Separable(ScalarFn::SoftThreshold { lambda: l }))
    }

    #[test]
    fn mc_divergence_rejects_bad_step() {
        let x = DVector::zeros(3);
        assert!(mc_divergence(|v| v.clone(), &x, 0.0, 10, RngStream::new(0, 0)).is_err());
        assert!(mc_divergence(|v| v.clone(), &x, -1.0, 10, RngStream::new(0, 0)).is_err());
        assert!(mc_divergence(|v| v.clone(), &x, 1e-3, 0, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn mc_divergence_of_linear_map_is_trace() {
        let n = 50;
        let a = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
        let x = DVector::from_fn(n, |i, _| i as f64 / n as f64);
        let est = mc_divergence(|v| &a * v, &x, 1e-3, 400, RngStream::new(3, 0)).unwrap();
        assert!((est.value - a.trace()).abs() <= 3.0 * est.std_err + 1e-9, "{est:?} vs {}", a.trace());
    }

    #[test]
    fn combine_divergence_scales_with_weights() {
        let c = Combine { weights: vec![0.5, 0.0, 2.0], inner: soft(0.3) };
        let z: Vec<DVector<f64>> = (0..3).map(|k| DVector::from_fn(40, |i, _| ((i + k) as f64 * 0.37).sin())).collect();
        let base = soft(0.3).divergence(&c.mix(&z)).unwrap();
        assert_eq!(c.divergence(&z, 0), Some(0.5 * base));
        assert_eq!(c.divergence(&z, 1), Some(0.0));
        assert_eq!(c.divergence(&z, 2), Some(2.0 * base));
        assert_eq!(c.support(3), vec![0, 2]);
        assert_eq!(c.support(1), vec![0]);
    }

    #[test]
    fn column_divergence_mc_matches_analytic() {
        let c = Combine { weights: vec![1.0, -0.7], inner: Arc::new(ForceMonteCarlo(soft(0.4))) };
        let analytic = Combine { weights: vec![1.0, -0.7], inner: soft(0.4) };
        let z: Vec<DVector<f64>> = (0..2).map(|k| DVector::from_fn(2000, |i, _| ((i * (k + 3)) as f64 * 0.917).sin())).collect();
        for s in 0..2 {
            let (mc, used) = column_divergence(&c, &z, s, 1e-4, 200, RngStream::new(9, s as u64)).unwrap();
            assert!(!used);
            let exact = analytic.divergence(&z, s).unwrap();
            assert!((mc.value - exact).abs() <= 0.02 * exact.abs().max(1.0), "s={s}: {mc:?} vs {exact}");
        }
    }

    #[test]
    fn shifted_builds_sensing_maps() {
        let theta = DVector::from_vec(vec![1.0, -2.0, 0.0]);
        let g = Shifted { inner: soft(0.5), in_shift: Some(theta.clone()), out_shift: Some(theta.clone()), out_scale: -1.0 };
        let y = DVector::from_vec(vec![0.2, 0.1, -1.0]);
        let expect = &theta - soft_threshold(&(&y + &theta), 0.5);
        assert_eq!(g.apply(&y), expect);
        // divergence = -#{|y+θ| > λ}
        assert_eq!(g.divergence(&y), Some(-3.0));
        assert_eq!(g.input_dim(), Some(3));
    }

    #[test]
    fn every_denoiser_passes_lipschitz_probe() {
        let n = 36;
        let k = crate::ensembles::sample_haar_orthogonal(n, RngStream::new(1, 0)).unwrap();
        let maps: Vec<Arc<dyn VectorMap>> = vec![
            soft(0.7),
            Arc::new(Separable(ScalarFn::Identity)),
            Arc::new(Separable(ScalarFn::Mix { alpha: 0.5, lambda: 1.0 })),
            Arc::new(LocalAverage::new(LocalKernelSpec { rows: 6, cols: 6, bandwidth: 1 }).unwrap()),
            Arc::new(LocalAverage::new(LocalKernelSpec { rows: 4, cols: 9, bandwidth: 2 }).unwrap()),
            Arc::new(Svt::new(SpectralSpec { rows: 4, cols: 9, lambda: 0.1, shift: None }).unwrap()),
            Arc::new(Aniso::new(AnisoSpec::new(k.clone(), k.clone(), ScalarFn::SoftThreshold { lambda: 0.3 })).unwrap()),
        ];
        for m in &maps {
            let worst = lipschitz_probe(m.as_ref(), n, 100, 1.0, 4);
            assert!(worst <= m.lipschitz() + 1e-6, "{}: {worst} > {}", m.name(), m.lipschitz());
            assert!(m.apply(&DVector::zeros(n)).norm() <= m.lipschitz() * (n as f64).sqrt());
            assert!(stability_probe(m.as_ref(), n, 5), "{} failed stability probe", m.name());
        }
    }

    #[test]
    fn stein_consistency_for_analytic_divergences() {
        let n = 400;
        let maps: Vec<Arc<dyn VectorMap>> = vec![
            soft(0.8),
            Arc::new(Separable(ScalarFn::Mix { alpha: 0.5, lambda: 1.0 })),
            Arc::new(LocalAverage::new(LocalKernelSpec { rows: 20, cols: 20, bandwidth: 1 }).unwrap()),
        ];
        for m in &maps {
            let (d, se) = stein_gap(m.as_ref(), n, 1.3, 2000, 8);
            assert!(d.abs() <= 3.0 * se, "{}: gap {d} se {se}", m.name());
        }
    }
}
