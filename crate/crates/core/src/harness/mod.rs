//! Config-driven experiments.
//!
//! Every sensing experiment fixes `θ*`, `e` (and `K`) from `instance_seed`,
//! so the state-evolution curve is shared by all ensembles and seeds; each
//! `(ensemble, seed)` cell then draws its own design `W` and runs AMP.
//! Cells run in parallel but are collected in `(ensemble, seed)` order, so
//! records are identical for every thread count apart from `runtime_ms`,
//! which is written as 0 in serial mode.

mod config;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    AnisoConfig, DenoiserConfig, Dims, ExperimentConfig, ExperimentKind, McParams, OnsagerMode, Resolved, SignalConfig,
    TensorChecksConfig,
};

use crate::amp::{run_aniso_sensing_amp, run_sensing_amp, Empirical, SensingOnsager, SensingProblem};
use crate::denoisers::{ForceMonteCarlo, VectorMap};
use crate::ensembles::{gaussian_noise, sample_conjugated_diagonal, sample_ginibre, sample_signal, EnsembleSpec, EntryDist, RngStream};
use crate::error::{Error, Result};
use crate::state_evolution::{se_scalar_sensing, McConfig, ScalarSE};
use crate::tensor_net::battery::{
    bcp_diagonal_battery, contraction_battery, graph_lemma_battery, triangle_trace_check, wick_battery, BatteryReport,
};

pub const RECORD_CSV_HEADER: &str = "experiment,ensemble,seed,t,mse,se_predicted,gap,runtime_ms";

// stream ids under `instance_seed`
const SIGNAL_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const K_STREAM: u64 = 3;
const SE_STREAM: u64 = 4;
// stream ids under a cell seed, offset by the entry law
const W_STREAM: u64 = 100;
const DIV_STREAM: u64 = 200;

fn dist_code(d: EntryDist) -> u64 {
    match d {
        EntryDist::Gaussian => 0,
        EntryDist::Rademacher => 1,
        EntryDist::Uniform => 2,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Single-threaded and timing-free, for byte-identical output.
    pub serial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub ensemble: String,
    pub seed: u64,
    pub t: usize,
    pub mse: f64,
    pub se_predicted: f64,
    pub gap: f64,
    pub runtime_ms: f64,
}

/// Mean and standard deviation over seeds, per iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleCurve {
    pub ensemble: String,
    pub seeds: usize,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Seed-averaged count of singular values of the final estimate above
    /// `lambda·√N` (spectral denoiser only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_count: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniversalityRow {
    pub t: usize,
    pub se_predicted: f64,
    /// Seed-mean MSE per ensemble, in config order.
    pub mean: Vec<f64>,
    /// `|mean_k − mean_0| / mean_0` against the first ensemble.
    pub rel_gap_ensemble: Vec<f64>,
    /// `|mean_k − se| / se`.
    pub rel_gap_se: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniversalityReport {
    pub ensembles: Vec<String>,
    pub rows: Vec<UniversalityRow>,
    pub max_rel_gap_ensemble: f64,
    pub max_rel_gap_se: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub experiment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub se_predicted: Vec<f64>,
    pub se_std_err: Vec<f64>,
    pub curves: Vec<EnsembleCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub universality: Option<UniversalityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tensor_checks: Option<Vec<BatteryReport>>,
    /// Largest condition number of `K` seen (correlated design only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_condition: Option<f64>,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub records: Vec<ResultRecord>,
    pub se: Option<ScalarSE>,
    pub summary: Summary,
}

impl ExperimentOutput {
    pub fn records_csv(&self) -> Result<String> {
        records_to_csv(&self.records)
    }

    pub fn summary_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.summary).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Writes `records.csv`, `summary.json` and, when present, `se.csv`
    /// under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: String| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            written.push(p);
            Ok(())
        };
        if !self.records.is_empty() {
            put("records.csv", self.records_csv()?)?;
        }
        if let Some(se) = &self.se {
            put("se.csv", se.to_csv())?;
        }
        put("summary.json", self.summary_json()?)?;
        Ok(written)
    }
}

pub fn records_to_csv(records: &[ResultRecord]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let mut out = format!("{RECORD_CSV_HEADER}\n");
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.ensemble.clone(),
            r.seed.to_string(),
            r.t.to_string(),
            format!("{:.12e}", r.mse),
            format!("{:.12e}", r.se_predicted),
            format!("{:.12e}", r.gap),
            format!("{:.3}", r.runtime_ms),
        ])
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    let body = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    out.push_str(&String::from_utf8(body).map_err(|e| Error::Parse(e.to_string()))?);
    Ok(out)
}

/// `θ*`, `e` and `K` drawn once per config.
#[derive(Clone, Debug)]
pub struct Instance {
    pub theta_star: DVector<f64>,
    pub noise: DVector<f64>,
    pub k: Option<DMatrix<f64>>,
}

pub fn build_instance(cfg: &ExperimentConfig, r: &Resolved) -> Result<Instance> {
    let base = cfg.instance_seed;
    let theta_star = sample_signal(&r.signal, RngStream::new(base, SIGNAL_STREAM))?.theta;
    let noise = gaussian_noise(r.m, cfg.noise_std, RngStream::new(base, NOISE_STREAM));
    let k = if cfg.experiment == ExperimentKind::Fig3Aniso {
        Some(sample_conjugated_diagonal(r.n, cfg.aniso.lo, cfg.aniso.hi, RngStream::new(base, K_STREAM))?.k)
    } else {
        None
    };
    Ok(Instance { theta_star, noise, k })
}

fn eta_sequence(r: &Resolved) -> Result<Vec<Arc<dyn VectorMap>>> {
    let eta = r.denoiser_map()?;
    let eta: Arc<dyn VectorMap> = match r.onsager {
        OnsagerMode::Analytic => eta,
        OnsagerMode::MonteCarlo => Arc::new(ForceMonteCarlo(eta)),
    };
    Ok(vec![eta; r.iterations])
}

/// State evolution for the instance, with `cfg.mc.se_draws` draws per step.
pub fn state_evolution_for(cfg: &ExperimentConfig, r: &Resolved, inst: &Instance) -> Result<ScalarSE> {
    let eta = eta_sequence(r)?;
    let mc = McConfig {
        samples: cfg.mc.se_draws,
        div_reps: cfg.mc.div_reps,
        div_eps_rel: cfg.mc.div_eps_rel,
        ..McConfig::new(RngStream::new(cfg.instance_seed, SE_STREAM))
    };
    se_scalar_sensing(&inst.theta_star, &inst.noise, &eta, r.iterations, inst.k.as_ref(), &mc)
}

struct Cell {
    mse: Vec<f64>,
    runtime_ms: f64,
    rank_count: Option<usize>,
    cond: Option<f64>,
}

fn run_cell(cfg: &ExperimentConfig, r: &Resolved, inst: &Instance, dist: EntryDist, seed: u64) -> Result<Cell> {
    let code = dist_code(dist);
    let w = sample_ginibre(&EnsembleSpec::ginibre(r.m, r.n, dist), RngStream::new(seed, W_STREAM + code))?;
    let eta = eta_sequence(r)?;
    let emp = Empirical { reps: cfg.mc.div_reps, eps_rel: cfg.mc.div_eps_rel, stream: RngStream::new(seed, DIV_STREAM + code) };
    let onsager = SensingOnsager::Divergence(emp);
    let (trace, cond) = match &inst.k {
        Some(k) => {
            let p = SensingProblem::anisotropic(w, k.clone(), inst.theta_star.clone(), inst.noise.clone(), eta)?;
            let (tr, cond) = run_aniso_sensing_amp(&p, &onsager, r.iterations)?;
            (tr, Some(cond))
        }
        None => {
            let p = SensingProblem::new(w, inst.theta_star.clone(), inst.noise.clone(), eta)?;
            (run_sensing_amp(&p, &onsager, r.iterations)?, None)
        }
    };
    let rank_count = match (r.denoiser, r.shape) {
        (DenoiserConfig::Svt { lambda }, Some((rows, cols))) => {
            let last = trace.u.last().expect("at least one iterate");
            let mat = DMatrix::from_column_slice(rows, cols, last.as_slice());
            let thr = lambda * (cols as f64).sqrt();
            Some(mat.singular_values().iter().filter(|&&s| s > thr).count())
        }
        _ => None,
    };
    Ok(Cell { mse: trace.mse, runtime_ms: trace.runtime_ms, rank_count, cond })
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

fn in_pool<T: Send>(serial: bool, f: impl FnOnce() -> T + Send) -> Result<T> {
    if serial {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(pool.install(f))
    } else {
        Ok(f())
    }
}

/// Runs the experiment named by `cfg.experiment`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentOutput> {
    in_pool(opts.serial, || run_inner(cfg, opts))?
}

fn run_inner(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentOutput> {
    let kind = cfg.experiment;
    if kind == ExperimentKind::TensorChecks {
        let reports = tensor_checks(&cfg.tensor)?;
        let summary = Summary {
            experiment: kind.name().into(),
            n: None,
            m: None,
            se_predicted: Vec::new(),
            se_std_err: Vec::new(),
            curves: Vec::new(),
            universality: None,
            tensor_checks: Some(reports),
            k_condition: None,
            config: cfg.clone(),
        };
        return Ok(ExperimentOutput { records: Vec::new(), se: None, summary });
    }
    let r = cfg.resolve()?;
    let inst = build_instance(cfg, &r)?;
    let se = state_evolution_for(cfg, &r, &inst)?;
    log::info!("{}: n = {}, m = {}, state evolution {:?}", kind.name(), r.n, r.m, se.predicted_mse);
    let mut summary = Summary {
        experiment: kind.name().into(),
        n: Some(r.n),
        m: Some(r.m),
        se_predicted: se.predicted_mse.clone(),
        se_std_err: se.predicted_mse_se.clone(),
        curves: Vec::new(),
        universality: None,
        tensor_checks: None,
        k_condition: None,
        config: cfg.clone(),
    };
    if kind == ExperimentKind::SeOnly {
        return Ok(ExperimentOutput { records: Vec::new(), se: Some(se), summary });
    }
    let jobs: Vec<(EntryDist, u64)> = r.ensembles.iter().flat_map(|&d| r.seeds.iter().map(move |&s| (d, s))).collect();
    let cells: Vec<Result<Cell>> = jobs.par_iter().map(|&(d, s)| run_cell(cfg, &r, &inst, d, s)).collect();
    let mut records = Vec::with_capacity(jobs.len() * r.iterations);
    let mut per_ens: Vec<Vec<Cell>> = r.ensembles.iter().map(|_| Vec::new()).collect();
    for (&(dist, seed), cell) in jobs.iter().zip(cells) {
        let cell = cell?;
        for (i, &mse) in cell.mse.iter().enumerate() {
            let pred = se.predicted_mse[i];
            records.push(ResultRecord {
                experiment: kind.name().into(),
                ensemble: dist.name().into(),
                seed,
                t: i + 1,
                mse,
                se_predicted: pred,
                gap: (mse - pred).abs(),
                runtime_ms: if opts.serial { 0.0 } else { cell.runtime_ms },
            });
        }
        let idx = r.ensembles.iter().position(|&e| e == dist).expect("job ensemble is listed");
        per_ens[idx].push(cell);
    }
    for (dist, cells) in r.ensembles.iter().zip(&per_ens) {
        let (mut mean, mut sd) = (Vec::new(), Vec::new());
        for t in 0..r.iterations {
            let xs: Vec<f64> = cells.iter().map(|c| c.mse[t]).collect();
            let (m, s) = mean_sd(&xs);
            mean.push(m);
            sd.push(s);
        }
        let counts: Vec<f64> = cells.iter().filter_map(|c| c.rank_count.map(|k| k as f64)).collect();
        let rank_count = (!counts.is_empty()).then(|| mean_sd(&counts).0);
        summary.curves.push(EnsembleCurve { ensemble: dist.name().into(), seeds: cells.len(), mean, sd, rank_count });
    }
    summary.k_condition = per_ens.iter().flatten().filter_map(|c| c.cond).reduce(f64::max);
    if r.ensembles.len() >= 2 {
        summary.universality = Some(compare_curves(&summary)?);
    }
    Ok(ExperimentOutput { records, se: Some(se), summary })
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Relative gaps between ensembles and against state evolution.
pub fn compare_curves(summary: &Summary) -> Result<UniversalityReport> {
    if summary.curves.len() < 2 {
        return Err(Error::Config {
            field: "ensembles".into(),
            message: format!("universality needs at least two ensembles, got {}", summary.curves.len()),
        });
    }
    let mut rows = Vec::new();
    let (mut worst_e, mut worst_se) = (0.0f64, 0.0f64);
    for (t, &se) in summary.se_predicted.iter().enumerate() {
        let mean: Vec<f64> = summary.curves.iter().map(|c| c.mean[t]).collect();
        let rel_gap_ensemble: Vec<f64> = mean.iter().map(|&x| rel(x, mean[0])).collect();
        let rel_gap_se: Vec<f64> = mean.iter().map(|&x| rel(x, se)).collect();
        worst_e = rel_gap_ensemble.iter().copied().fold(worst_e, f64::max);
        worst_se = rel_gap_se.iter().copied().fold(worst_se, f64::max);
        rows.push(UniversalityRow { t: t + 1, se_predicted: se, mean, rel_gap_ensemble, rel_gap_se });
    }
    Ok(UniversalityReport {
        ensembles: summary.curves.iter().map(|c| c.ensemble.clone()).collect(),
        rows,
        max_rel_gap_ensemble: worst_e,
        max_rel_gap_se: worst_se,
    })
}

/// Runs the experiment and compares ensembles; needs at least two.
pub fn universality_compare(cfg: &ExperimentConfig, opts: RunOptions) -> Result<(ExperimentOutput, UniversalityReport)> {
    let r = cfg.resolve()?;
    if r.ensembles.len() < 2 {
        return Err(Error::Config {
            field: "ensembles".into(),
            message: format!("universality needs at least two ensembles, got {}", r.ensembles.len()),
        });
    }
    let out = run_experiment(cfg, opts)?;
    let report = out.summary.universality.clone().expect("two or more ensembles yield a report");
    Ok((out, report))
}

/// The tensor-network batteries: contraction vs brute force, the triangle
/// trace, Wick's rule vs Monte Carlo, BCP ratios and the cycle bound.
pub fn tensor_checks(tc: &TensorChecksConfig) -> Result<Vec<BatteryReport>> {
    let base = RngStream::new(tc.seed, 0);
    let mut out = Vec::new();
    if tc.trees + tc.cyclic > 0 {
        out.push(contraction_battery(tc.trees, tc.cyclic, tc.max_n, tc.contraction_tol, base.substream(0))?);
    }
    if tc.triangle_n > 0 {
        let tri = triangle_trace_check(tc.triangle_n, base.substream(1))?;
        out.push(BatteryReport {
            name: "triangle_trace".into(),
            instances: 1,
            passed: usize::from(tri <= 1e-12),
            worst: tri,
            detail: format!("n = {}, relative error {tri:.3e}", tc.triangle_n),
        });
    }
    if tc.wick_instances + tc.wick_odd > 0 {
        out.push(wick_battery(tc.wick_instances, tc.wick_odd, tc.wick_samples, base.substream(2))?);
    }
    if tc.bcp_instances > 0 {
        out.push(bcp_diagonal_battery(tc.bcp_instances, base.substream(3))?);
    }
    if tc.lemma_instances > 0 {
        out.push(graph_lemma_battery(tc.lemma_instances, base.substream(4))?);
    }
    for r in &out {
        log::info!("{}: {}/{} passed, worst {:.3e}", r.name, r.passed, r.instances, r.worst);
    }
    Ok(out)
}
