use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::denoisers::{LocalAverage, LocalKernelSpec, ScalarFn, Separable, SpectralSpec, Svt, VectorMap};
use crate::ensembles::{EntryDist, SignalKind, SignalSpec, SvDist};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Sensing AMP with a local-averaging denoiser on a smooth image.
    Fig1Local,
    /// Sensing AMP with singular-value thresholding on a low-rank matrix.
    Fig2Spectral,
    /// Sensing AMP with a correlated design `W K`.
    Fig3Aniso,
    /// Sensing AMP over three or more entry laws.
    UniversalitySweep,
    /// State evolution only.
    SeOnly,
    /// Tensor-network batteries.
    TensorChecks,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Fig1Local => "fig1_local",
            ExperimentKind::Fig2Spectral => "fig2_spectral",
            ExperimentKind::Fig3Aniso => "fig3_aniso",
            ExperimentKind::UniversalitySweep => "universality_sweep",
            ExperimentKind::SeOnly => "se_only",
            ExperimentKind::TensorChecks => "tensor_checks",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let all = [
            ExperimentKind::Fig1Local,
            ExperimentKind::Fig2Spectral,
            ExperimentKind::Fig3Aniso,
            ExperimentKind::UniversalitySweep,
            ExperimentKind::SeOnly,
            ExperimentKind::TensorChecks,
        ];
        all.into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config { field: "experiment".into(), message: format!("unknown experiment `{s}`") })
    }
}

/// Problem sizes. `M`, `N` are the matrix shape of the signal when it is an
/// image or a matrix (`n = M·N`); `m` may also be given as `sampling_ratio·n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_ratio: Option<f64>,
}

fn default_smoothness() -> f64 {
    2.0
}

fn default_amplitude() -> EntryDist {
    EntryDist::Gaussian
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalConfig {
    Zero,
    Sparse {
        density: f64,
        #[serde(default = "default_amplitude")]
        amplitude: EntryDist,
    },
    /// Singular values uniform on `[sv_low, sv_high]`; `sv_high` defaults to `√N`.
    LowRank {
        rank: usize,
        #[serde(default)]
        sv_low: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sv_high: Option<f64>,
    },
    SmoothImage {
        #[serde(default = "default_smoothness")]
        smoothness: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DenoiserConfig {
    Identity,
    Local { bandwidth: usize },
    /// Threshold `lambda·√N` on the singular values of the `M×N` input.
    Svt { lambda: f64 },
    SoftThreshold { lambda: f64 },
    /// `alpha·x + soft(x, lambda)`.
    Mix { alpha: f64, lambda: f64 },
}

/// Spectrum range of `K` in the correlated design.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnisoConfig {
    pub lo: f64,
    pub hi: f64,
}

impl Default for AnisoConfig {
    fn default() -> Self {
        Self { lo: 0.5, hi: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnsagerMode {
    /// Analytic divergence when the denoiser has one, probes otherwise.
    #[default]
    Analytic,
    /// Probe estimator for every denoiser.
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McParams {
    /// Gaussian draws per state-evolution step.
    pub se_draws: usize,
    /// Probes per Monte-Carlo divergence.
    pub div_reps: usize,
    pub div_eps_rel: f64,
}

impl Default for McParams {
    fn default() -> Self {
        Self { se_draws: 50, div_reps: 100, div_eps_rel: 1e-4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TensorChecksConfig {
    pub seed: u64,
    pub trees: usize,
    pub cyclic: usize,
    pub max_n: usize,
    pub contraction_tol: f64,
    pub triangle_n: usize,
    pub wick_instances: usize,
    pub wick_odd: usize,
    pub wick_samples: usize,
    pub bcp_instances: usize,
    pub lemma_instances: usize,
}

impl Default for TensorChecksConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trees: 50,
            cyclic: 20,
            max_n: 6,
            contraction_tol: 1e-10,
            triangle_n: 30,
            wick_instances: 20,
            wick_odd: 5,
            wick_samples: 1_000_000,
            bcp_instances: 100,
            lemma_instances: 1000,
        }
    }
}

/// One experiment, as read from TOML. Unset sizes, signal and denoiser fall
/// back to the defaults of `experiment` (see [`ExperimentConfig::preset`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub dims: Dims,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensembles: Option<Vec<EntryDist>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    /// Seeds `θ*`, `e` and `K`, which stay fixed across ensembles and seeds.
    #[serde(default)]
    pub instance_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<SignalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denoiser: Option<DenoiserConfig>,
    #[serde(default)]
    pub aniso: AnisoConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onsager: Option<OnsagerMode>,
    #[serde(default)]
    pub mc: McParams,
    #[serde(default)]
    pub tensor: TensorChecksConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_noise_std() -> f64 {
    0.05
}

fn cfg_err<T>(field: &str, message: impl Into<String>) -> Result<T> {
    Err(Error::Config { field: field.into(), message: message.into() })
}

/// Fully resolved sensing setup.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub n: usize,
    pub m: usize,
    /// `(M, N)` when the signal is matrix-shaped.
    pub shape: Option<(usize, usize)>,
    pub iterations: usize,
    pub ensembles: Vec<EntryDist>,
    pub seeds: Vec<u64>,
    pub signal: SignalSpec,
    pub denoiser: DenoiserConfig,
    pub onsager: OnsagerMode,
}

impl ExperimentConfig {
    /// A bare config for `kind`; every unset field takes the kind's default.
    pub fn preset(kind: ExperimentKind) -> Self {
        Self {
            experiment: kind,
            dims: Dims::default(),
            iterations: None,
            ensembles: None,
            seeds: None,
            noise_std: default_noise_std(),
            instance_seed: 0,
            signal: None,
            denoiser: None,
            aniso: AnisoConfig::default(),
            onsager: None,
            mc: McParams::default(),
            tensor: TensorChecksConfig::default(),
            output: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value =
            toml::from_str(text).map_err(|e| Error::Config { field: "<document>".into(), message: e.message().to_string() })?;
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::Config { field: if path == "." { "<document>".into() } else { path }, message: e.into_inner().to_string() }
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config { field: "<document>".into(), message: e.to_string() })
    }

    fn default_shape(&self) -> (usize, usize) {
        match self.experiment {
            ExperimentKind::Fig1Local => (40, 40),
            ExperimentKind::Fig2Spectral => (20, 30),
            _ => (1, 1),
        }
    }

    /// Resolves sizes, signal and denoiser, checking every field.
    pub fn resolve(&self) -> Result<Resolved> {
        use ExperimentKind::*;
        let kind = self.experiment;
        let matrix_signal = matches!(kind, Fig1Local | Fig2Spectral)
            || matches!(self.signal, Some(SignalConfig::LowRank { .. } | SignalConfig::SmoothImage { .. }))
            || matches!(self.denoiser, Some(DenoiserConfig::Local { .. } | DenoiserConfig::Svt { .. }));
        let shape = if matrix_signal {
            let (dr, dc) = self.default_shape();
            let rows = self.dims.rows.unwrap_or(dr);
            let cols = self.dims.cols.unwrap_or(dc);
            if rows == 0 || cols == 0 {
                return cfg_err("dims", format!("M and N must be positive, got {rows}x{cols}"));
            }
            Some((rows, cols))
        } else {
            None
        };
        let n = match (shape, self.dims.n) {
            (Some((r, c)), Some(n)) if n != r * c => return cfg_err("dims.n", format!("n = {n} but M·N = {}", r * c)),
            (Some((r, c)), _) => r * c,
            (None, Some(n)) => n,
            (None, None) => match kind {
                Fig3Aniso => 800,
                _ => 1000,
            },
        };
        if n == 0 {
            return cfg_err("dims.n", "must be positive");
        }
        let m = match (self.dims.m, self.dims.sampling_ratio) {
            (Some(_), Some(_)) => return cfg_err("dims", "give either m or sampling_ratio, not both"),
            (Some(m), None) => m,
            (None, Some(r)) => {
                if !(r > 0.0 && r.is_finite()) {
                    return cfg_err("dims.sampling_ratio", format!("must be positive, got {r}"));
                }
                (r * n as f64).ceil() as usize
            }
            (None, None) => match kind {
                Fig1Local => (0.95 * n as f64).ceil() as usize,
                Fig2Spectral | Fig3Aniso => n,
                _ => n / 2,
            },
        };
        if m == 0 {
            return cfg_err("dims.m", "must be positive");
        }
        let iterations = self.iterations.unwrap_or(match kind {
            Fig2Spectral | UniversalitySweep => 6,
            _ => 4,
        });
        if iterations == 0 {
            return cfg_err("iterations", "must be at least 1");
        }
        let ensembles = self.ensembles.clone().unwrap_or_else(|| match kind {
            UniversalitySweep => vec![EntryDist::Gaussian, EntryDist::Rademacher, EntryDist::Uniform],
            _ => vec![EntryDist::Gaussian, EntryDist::Rademacher],
        });
        if ensembles.is_empty() && kind != SeOnly && kind != TensorChecks {
            return cfg_err("ensembles", "list at least one entry law");
        }
        for (i, e) in ensembles.iter().enumerate() {
            if ensembles[..i].contains(e) {
                return cfg_err(&format!("ensembles[{i}]"), format!("`{}` listed twice", e.name()));
            }
        }
        let seeds = self.seeds.clone().unwrap_or_else(|| (0..10).collect());
        if seeds.is_empty() && kind != SeOnly && kind != TensorChecks {
            return cfg_err("seeds", "list at least one seed");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return cfg_err("noise_std", format!("must be a finite non-negative number, got {}", self.noise_std));
        }
        let signal_cfg = self.signal.unwrap_or(match kind {
            Fig1Local => SignalConfig::SmoothImage { smoothness: default_smoothness() },
            Fig2Spectral => SignalConfig::LowRank { rank: 4, sv_low: 0.0, sv_high: None },
            _ => SignalConfig::Sparse { density: 0.1, amplitude: EntryDist::Gaussian },
        });
        let signal_kind = match signal_cfg {
            SignalConfig::Zero => SignalKind::Zero,
            SignalConfig::Sparse { density, amplitude } => {
                if !(0.0..=1.0).contains(&density) {
                    return cfg_err("signal.density", format!("must lie in [0, 1], got {density}"));
                }
                SignalKind::Sparse { density, amplitude }
            }
            SignalConfig::LowRank { rank, sv_low, sv_high } => {
                let (rows, cols) = shape.expect("matrix signals have a shape");
                if rank > rows.min(cols) {
                    return cfg_err("signal.rank", format!("rank {rank} exceeds min(M, N) = {}", rows.min(cols)));
                }
                let high = sv_high.unwrap_or((cols as f64).sqrt());
                if !(sv_low >= 0.0 && high >= sv_low) {
                    return cfg_err("signal.sv_high", format!("need 0 <= sv_low <= sv_high, got [{sv_low}, {high}]"));
                }
                SignalKind::LowRank { rows, cols, rank, sv: SvDist::Uniform { low: sv_low, high } }
            }
            SignalConfig::SmoothImage { smoothness } => {
                let (rows, cols) = shape.expect("matrix signals have a shape");
                if !smoothness.is_finite() {
                    return cfg_err("signal.smoothness", "must be finite");
                }
                SignalKind::SmoothImage { rows, cols, smoothness }
            }
        };
        let denoiser = self.denoiser.unwrap_or(match kind {
            Fig1Local => DenoiserConfig::Local { bandwidth: 1 },
            Fig2Spectral => DenoiserConfig::Svt { lambda: 0.05 },
            _ => DenoiserConfig::SoftThreshold { lambda: 0.3 },
        });
        match denoiser {
            DenoiserConfig::Svt { lambda } | DenoiserConfig::SoftThreshold { lambda } | DenoiserConfig::Mix { lambda, .. }
                if !(lambda >= 0.0 && lambda.is_finite()) =>
            {
                return cfg_err("denoiser.lambda", format!("must be finite and non-negative, got {lambda}"));
            }
            DenoiserConfig::Mix { alpha, .. } if !alpha.is_finite() => return cfg_err("denoiser.alpha", "must be finite"),
            _ => {}
        }
        if kind == Fig3Aniso && !(self.aniso.lo > 0.0 && self.aniso.hi >= self.aniso.lo) {
            return cfg_err("aniso", format!("need 0 < lo <= hi, got [{}, {}]", self.aniso.lo, self.aniso.hi));
        }
        if self.mc.se_draws < 2 {
            return cfg_err("mc.se_draws", "need at least 2 draws");
        }
        if self.mc.div_reps == 0 {
            return cfg_err("mc.div_reps", "must be positive");
        }
        if !(self.mc.div_eps_rel > 0.0) {
            return cfg_err("mc.div_eps_rel", "must be positive");
        }
        let onsager = self.onsager.unwrap_or(match kind {
            Fig2Spectral => OnsagerMode::MonteCarlo,
            _ => OnsagerMode::Analytic,
        });
        let signal = SignalSpec { kind: signal_kind, dim: n };
        signal.validate().map_err(|e| Error::Config { field: "signal".into(), message: e.to_string() })?;
        let r = Resolved { n, m, shape, iterations, ensembles, seeds, signal, denoiser, onsager };
        r.denoiser_map()?;
        Ok(r)
    }
}

impl Resolved {
    pub fn denoiser_map(&self) -> Result<Arc<dyn VectorMap>> {
        let need_shape = || {
            self.shape.ok_or_else(|| Error::Config {
                field: "denoiser".into(),
                message: "this denoiser needs a matrix-shaped signal; set dims.M and dims.N".into(),
            })
        };
        let wrap = |e: Error| Error::Config { field: "denoiser".into(), message: e.to_string() };
        Ok(match self.denoiser {
            DenoiserConfig::Identity => Arc::new(Separable(ScalarFn::Identity)),
            DenoiserConfig::SoftThreshold { lambda } => Arc::new(Separable(ScalarFn::SoftThreshold { lambda })),
            DenoiserConfig::Mix { alpha, lambda } => Arc::new(Separable(ScalarFn::Mix { alpha, lambda })),
            DenoiserConfig::Local { bandwidth } => {
                let (rows, cols) = need_shape()?;
                Arc::new(LocalAverage::new(LocalKernelSpec { rows, cols, bandwidth }).map_err(wrap)?)
            }
            DenoiserConfig::Svt { lambda } => {
                let (rows, cols) = need_shape()?;
                Arc::new(Svt::new(SpectralSpec { rows, cols, lambda, shift: None }).map_err(wrap)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_round_trips_through_toml() {
        let mut c = ExperimentConfig::preset(ExperimentKind::Fig2Spectral);
        c.denoiser = Some(DenoiserConfig::Svt { lambda: 0.1 });
        c.seeds = Some(vec![3, 4]);
        let text = c.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn fig1_defaults() {
        let r = ExperimentConfig::preset(ExperimentKind::Fig1Local).resolve().unwrap();
        assert_eq!((r.n, r.m, r.iterations), (1600, 1520, 4));
        assert_eq!(r.seeds.len(), 10);
    }

    #[test]
    fn errors_name_the_field() {
        let text = "experiment = \"fig2_spectral\"\n[denoiser]\nkind = \"svt\"\nlambda = \"big\"\n";
        match ExperimentConfig::from_toml_str(text).unwrap_err() {
            Error::Config { field, .. } => assert!(field.contains("denoiser"), "{field}"),
            e => panic!("{e}"),
        }
        let text = "experiment = \"fig1_local\"\n[dims]\nM = 10\nbogus = 1\n";
        match ExperimentConfig::from_toml_str(text).unwrap_err() {
            Error::Config { field, message } => assert!(field.contains("dims") || message.contains("bogus"), "{field}: {message}"),
            e => panic!("{e}"),
        }
        let mut c = ExperimentConfig::preset(ExperimentKind::Fig1Local);
        c.noise_std = -1.0;
        match c.resolve().unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "noise_std"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn svt_needs_shape() {
        let mut c = ExperimentConfig::preset(ExperimentKind::UniversalitySweep);
        c.dims.n = Some(100);
        c.denoiser = Some(DenoiserConfig::SoftThreshold { lambda: -1.0 });
        assert!(c.resolve().is_err());
    }
}
