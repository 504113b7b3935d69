//! AMP recursions.
//!
//! * [`run_symmetric_amp`]: `z_t = W u_t − Σ_{s<t} b_{ts} u_s`, `u_{t+1} = f_t(z_{1:t})`.
//! * [`run_asymmetric_amp`]: the rectangular recursion with `f_t` on the
//!   `m` side and `g_t` on the `n` side.
//! * [`run_sensing_amp`] / [`run_aniso_sensing_amp`]: compressed-sensing form
//!   with residual `r_t` and estimate `θ_t`.
//! * [`change_of_variables_check`], [`embed_symmetric`],
//!   [`run_perturbed_symmetric_amp`].
//!
//! Corrections are summed in ascending `s`, so serial runs are bitwise
//! reproducible.

mod embed;
mod rect;
mod sensing;

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use embed::{embed_schedule, embed_symmetric, EmbeddedEven, EmbeddedOdd, EmbeddedProblem};
pub use rect::{run_asymmetric_amp, RectAmpProblem};
pub use sensing::{
    change_of_variables_check, run_aniso_sensing_amp, run_sensing_amp, SensingOnsager, SensingOutputMap, SensingProblem,
};

use crate::denoisers::{column_divergence, DynDenoiser, DEFAULT_MC_EPS_REL, DEFAULT_MC_REPS};
use crate::ensembles::{gaussian_vector, RngStream};
use crate::error::{dim_err, Error, Result};
use crate::state_evolution::OnsagerSchedule;

/// How an Onsager coefficient was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefSource {
    None,
    Schedule,
    Analytic,
    MonteCarlo,
    Fixed,
}

impl CoefSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoefSource::None => "none",
            CoefSource::Schedule => "schedule",
            CoefSource::Analytic => "analytic",
            CoefSource::MonteCarlo => "monte_carlo",
            CoefSource::Fixed => "fixed",
        }
    }
}

/// Divergences at the realized iterates: analytic when the denoiser provides
/// them, otherwise the probe estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Empirical {
    pub reps: usize,
    pub eps_rel: f64,
    pub stream: RngStream,
}

impl Empirical {
    pub fn new(stream: RngStream) -> Self {
        Self { reps: DEFAULT_MC_REPS, eps_rel: DEFAULT_MC_EPS_REL, stream }
    }
}

pub enum Onsager<'a> {
    Schedule(&'a OnsagerSchedule),
    Empirical(Empirical),
}

/// Iterates and applied coefficients of one AMP run. Vectors are stored in
/// iteration order, `z[0] = z_1`.
///
/// For sensing runs `z` holds the residuals `r_1..r_T`, `u` holds
/// `θ_1..θ_{T+1}` and `mse[t−1] = (1/n)‖θ_{t+1} − θ*‖²`.
#[derive(Clone, Debug, Default)]
pub struct AmpTrace {
    pub z: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    /// `b[t−1]` lists the `(s, b_ts)` applied in iteration `t`.
    pub b: Vec<Vec<(usize, f64)>>,
    pub a: Vec<Vec<(usize, f64)>>,
    pub source: Vec<CoefSource>,
    pub mse: Vec<f64>,
    pub runtime_ms: f64,
}

impl AmpTrace {
    pub fn iterations(&self) -> usize {
        self.z.len()
    }

    /// The coefficient applied to the previous iterate in iteration `t`.
    pub fn b_last(&self, t: usize) -> f64 {
        self.b[t - 1].iter().find(|(s, _)| *s + 1 == t).map(|&(_, v)| v).unwrap_or(0.0)
    }

    /// CSV with columns `t,norm_z_sq_over_n,mse,b_applied`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,norm_z_sq_over_n,mse,b_applied\n");
        for t in 1..=self.iterations() {
            let z = &self.z[t - 1];
            let nz = z.norm_squared() / z.len().max(1) as f64;
            let mse = self.mse.get(t - 1).copied().unwrap_or(f64::NAN);
            let _ = writeln!(out, "{t},{nz:.12e},{mse:.12e},{:.12e}", self.b_last(t));
        }
        out
    }
}

pub struct SymmetricAmpProblem {
    pub w: DMatrix<f64>,
    pub u1: DVector<f64>,
    /// `f_seq[t−1]` is `f_t`.
    pub f_seq: Vec<DynDenoiser>,
}

impl SymmetricAmpProblem {
    fn validate(&self, iterations: usize) -> Result<()> {
        let n = self.u1.len();
        if self.w.shape() != (n, n) {
            return dim_err(format!("W is {:?} but u_1 has length {n}", self.w.shape()));
        }
        if iterations == 0 {
            return Err(Error::InvalidParameter("need at least one iteration".into()));
        }
        if self.f_seq.len() + 1 < iterations {
            return Err(Error::InvalidParameter(format!(
                "{} iterations need f_1..f_{}, got {} denoisers",
                iterations,
                iterations - 1,
                self.f_seq.len()
            )));
        }
        Ok(())
    }
}

/// Coefficients `b_{ts}` for the columns in the support of `f`, evaluated
/// from the schedule or at the realized iterates `cols = z_{1:t−1}`.
pub(crate) fn correction_coefs(
    f: &DynDenoiser,
    cols: &[DVector<f64>],
    t: usize,
    norm: f64,
    onsager: &Onsager<'_>,
    from_schedule: impl Fn(&OnsagerSchedule, usize) -> Option<f64>,
) -> Result<(Vec<(usize, f64)>, CoefSource)> {
    let mut coefs = Vec::new();
    let mut source = CoefSource::None;
    for s0 in f.support(cols.len()) {
        let s = s0 + 1;
        let (val, src) = match onsager {
            Onsager::Schedule(sched) => {
                (from_schedule(sched, s).ok_or(Error::MissingCoefficient { t, s })?, CoefSource::Schedule)
            }
            Onsager::Empirical(emp) => {
                let stream = emp.stream.substream(t as u64).substream(s as u64);
                let (d, analytic) = column_divergence(f.as_ref(), cols, s0, emp.eps_rel, emp.reps, stream)?;
                (d.value / norm, if analytic { CoefSource::Analytic } else { CoefSource::MonteCarlo })
            }
        };
        if source == CoefSource::None || src == CoefSource::MonteCarlo {
            source = src;
        }
        coefs.push((s, val));
    }
    Ok((coefs, source))
}

fn apply_checked(f: &DynDenoiser, cols: &[DVector<f64>], len: usize) -> Result<DVector<f64>> {
    let out = f.apply(cols);
    if out.len() != len {
        return dim_err(format!("denoiser {} returned length {}, expected {len}", f.name(), out.len()));
    }
    Ok(out)
}

pub fn run_symmetric_amp(p: &SymmetricAmpProblem, onsager: &Onsager<'_>, iterations: usize) -> Result<AmpTrace> {
    run_symmetric_inner(p, onsager, iterations, None)
}

/// Symmetric AMP with `u_{t+1} = f_t(z_{1:t}) + δ ξ_{t+1}` and
/// `u_1 = u_1 + δ ξ_1`, `ξ_t ~ N(0, I_n)` drawn from `stream.substream(t)`.
/// With `δ = 0` no noise is added and the run equals the unperturbed one.
pub fn run_perturbed_symmetric_amp(
    p: &SymmetricAmpProblem,
    delta: f64,
    stream: RngStream,
    onsager: &Onsager<'_>,
    iterations: usize,
) -> Result<AmpTrace> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("perturbation size must be nonnegative, got {delta}")));
    }
    if delta == 0.0 {
        return run_symmetric_inner(p, onsager, iterations, None);
    }
    run_symmetric_inner(p, onsager, iterations, Some((delta, stream)))
}

fn run_symmetric_inner(
    p: &SymmetricAmpProblem,
    onsager: &Onsager<'_>,
    iterations: usize,
    perturb: Option<(f64, RngStream)>,
) -> Result<AmpTrace> {
    p.validate(iterations)?;
    let start = std::time::Instant::now();
    let n = p.u1.len();
    let noise = |t: usize| -> Option<DVector<f64>> {
        perturb.map(|(delta, stream)| gaussian_vector(&mut stream.substream(t as u64).rng(), n) * delta)
    };
    let mut trace = AmpTrace::default();
    let mut u1 = p.u1.clone();
    if let Some(xi) = noise(1) {
        u1 += xi;
    }
    trace.u.push(u1);
    for t in 1..=iterations {
        let mut z = &p.w * &trace.u[t - 1];
        let (coefs, source) = if t == 1 {
            (Vec::new(), CoefSource::None)
        } else {
            let f = &p.f_seq[t - 2];
            correction_coefs(f, &trace.z, t, n as f64, onsager, |sch, s| sch.b(t, s))?
        };
        for &(s, b) in &coefs {
            if b != 0.0 {
                z.axpy(-b, &trace.u[s - 1], 1.0);
            }
        }
        trace.z.push(z);
        trace.b.push(coefs);
        trace.source.push(source);
        if let Some(f) = p.f_seq.get(t - 1) {
            let mut u = apply_checked(f, &trace.z, n)?;
            if let Some(xi) = noise(t + 1) {
                u += xi;
            }
            trace.u.push(u);
        }
    }
    trace.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(trace)
}

/// Wraps a vector map on the latest column as an AMP denoiser.
pub fn latest(map: impl crate::denoisers::VectorMap + 'static) -> DynDenoiser {
    Arc::new(crate::denoisers::OnLatest::new(map))
}
