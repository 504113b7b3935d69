//! State evolution by Monte Carlo over Gaussian surrogates.
//!
//! * [`se_symmetric`]: `Σ_1 = ‖u_1‖²/n`, `Σ_{t+1}[r+1, s+1] = (1/n) E f_rᵀ f_s`
//!   with `f_0 = u_1` and `Z_{1:t}` having i.i.d. rows `N(0, Σ_t)`, and
//!   `b_{ts} = (1/n) E div_s f_{t−1}`.
//! * [`se_asymmetric`]: the rectangular pair `(Ω_t, Σ_t)` with every
//!   expectation normalised by `1/m`.
//! * [`se_scalar_sensing`]: the scalar recursion `(ω_t², σ_t²)` for sensing AMP.
//! * [`test_function_gap`] and [`estimate_onsager_from_data`].

mod schedule;
mod surrogate;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use schedule::{CoefEntry, OnsagerSchedule, Provenance};
pub use surrogate::JitterEvent;
use surrogate::GaussianChain;

use crate::amp::{AmpTrace, SensingOutputMap};
use crate::denoisers::{
    column_divergence, column_divergence_probe, map_divergence, Denoiser, DivEstimate, DynDenoiser, VectorMap,
    DEFAULT_MC_EPS_REL, DEFAULT_MC_REPS,
};
use crate::ensembles::{gaussian_vector, RngStream};
use crate::error::{dim_err, Error, Result};

pub const DEFAULT_SE_SAMPLES: usize = 200;
pub const DEFAULT_JITTER: f64 = 1e-8;

// Substream labels.
const Z_CHAIN: u64 = 0;
const Y_CHAIN: u64 = 1;
const DIV: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McConfig {
    /// Surrogate replicates `Z ∈ R^{n×t}`.
    pub samples: usize,
    /// Probes per divergence when no analytic formula exists.
    pub div_reps: usize,
    pub div_eps_rel: f64,
    pub stream: RngStream,
    /// Relative diagonal jitter for near-singular covariances.
    pub jitter: f64,
}

impl McConfig {
    pub fn new(stream: RngStream) -> Self {
        Self {
            samples: DEFAULT_SE_SAMPLES,
            div_reps: DEFAULT_MC_REPS,
            div_eps_rel: DEFAULT_MC_EPS_REL,
            stream,
            jitter: DEFAULT_JITTER,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter("need at least one surrogate sample".into()));
        }
        if self.div_reps == 0 || !(self.div_eps_rel > 0.0) {
            return Err(Error::InvalidParameter("divergence probes need reps ≥ 1 and a positive step".into()));
        }
        Ok(())
    }
}

/// Covariances of the Gaussian surrogates.
///
/// Symmetric runs fill `sigma` with `Σ_1..Σ_T` (`Σ_t` is `t×t`) and leave
/// `omega` empty. Rectangular runs fill both, `Ω_t` for the `m`-side inputs
/// `z_{1:t}` and `Σ_t` for the `n`-side inputs `y_{1:t}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SECovarianceSequence {
    pub sigma: Vec<DMatrix<f64>>,
    pub omega: Vec<DMatrix<f64>>,
    /// Standard errors of the Monte-Carlo entries, same shapes.
    pub sigma_se: Vec<DMatrix<f64>>,
    pub omega_se: Vec<DMatrix<f64>>,
    pub mc_samples: usize,
    /// Surrogate row count (`n` symmetric, `m` for the rectangular `z` side).
    pub n: usize,
    pub jitter_events: Vec<JitterEvent>,
}

impl SECovarianceSequence {
    /// Largest deviation of `Σ_s` from the leading block of `Σ_T` over all
    /// `s` (and likewise for `Ω`).
    pub fn nesting_error(&self) -> f64 {
        let dev = |seq: &[DMatrix<f64>]| {
            let Some(last) = seq.last() else { return 0.0 };
            seq.iter()
                .map(|s| {
                    let k = s.nrows();
                    (s - last.view((0, 0), (k, k))).amax()
                })
                .fold(0.0, f64::max)
        };
        dev(&self.sigma).max(dev(&self.omega))
    }

    /// `min λ(Σ_t) / max λ(Σ_t)` minimised over `t` (zero matrices give 0).
    pub fn min_relative_eigenvalue(&self) -> f64 {
        self.sigma
            .iter()
            .chain(&self.omega)
            .map(|s| {
                let ev = s.clone().symmetric_eigenvalues();
                let top = ev.amax();
                if top == 0.0 {
                    0.0
                } else {
                    ev.min() / top
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// CSV `t,sigma_tt,omega_tt,b_{t,t-1},a_{tt},predicted_mse`. Missing
    /// values are written as `nan`.
    pub fn to_csv(&self, schedule: &OnsagerSchedule, predicted_mse: Option<&[f64]>) -> String {
        let mut out = String::from(SE_CSV_HEADER);
        for t in 1..=self.sigma.len() {
            let sig = self.sigma[t - 1][(t - 1, t - 1)];
            let om = self.omega.get(t - 1).map_or(f64::NAN, |o| o[(t - 1, t - 1)]);
            let b = if t == 1 { 0.0 } else { schedule.b(t, t - 1).unwrap_or(0.0) };
            let a = schedule.a(t, t).unwrap_or(f64::NAN);
            let mse = predicted_mse.and_then(|p| p.get(t - 1)).copied().unwrap_or(f64::NAN);
            write_se_row(&mut out, t, sig, om, b, a, mse);
        }
        out
    }
}

pub const SE_CSV_HEADER: &str = "t,sigma_tt,omega_tt,b_{t,t-1},a_{tt},predicted_mse\n";

fn write_se_row(out: &mut String, t: usize, sig: f64, om: f64, b: f64, a: f64, mse: f64) {
    let _ = writeln!(out, "{t},{sig:.12e},{om:.12e},{b:.12e},{a:.12e},{mse:.12e}");
}

/// One Stein identity check `(1/n) E Z_sᵀ f_t(Z_{1:t}) = Σ_r b_{t+1,r} Σ_t[s, r]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SteinCheck {
    pub t: usize,
    pub s: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// Combined standard error of `lhs − rhs`.
    pub std_err: f64,
}

impl SteinCheck {
    pub fn z_score(&self) -> f64 {
        let d = (self.lhs - self.rhs).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_err
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeOutput {
    pub seq: SECovarianceSequence,
    pub schedule: OnsagerSchedule,
    /// Symmetric runs only.
    pub stein: Vec<SteinCheck>,
}

fn mean_se(vals: &[f64]) -> DivEstimate {
    let k = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / k;
    let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
    DivEstimate { value: mean, std_err: (var / k).sqrt() }
}

fn check_len(f: &dyn Denoiser, out: &DVector<f64>, len: usize) -> Result<()> {
    if out.len() != len {
        return dim_err(format!("denoiser {} returned length {}, expected {len}", f.name(), out.len()));
    }
    Ok(())
}

fn apply_all(chain: &GaussianChain, f: &DynDenoiser, len: usize) -> Result<Vec<DVector<f64>>> {
    let outs = chain.map(|_, cols| f.apply(cols));
    for o in &outs {
        check_len(f.as_ref(), o, len)?;
    }
    Ok(outs)
}

/// `(1/norm) E div_s f` over the chain replicates for `s` in the support of
/// `f`. Returns `(s, estimate)` with 1-based `s` and whether every
/// evaluation was analytic.
fn expected_divergences(
    chain: &GaussianChain,
    f: &DynDenoiser,
    t: usize,
    norm: f64,
    mc: &McConfig,
    label: u64,
) -> Result<(Vec<(usize, DivEstimate)>, bool)> {
    let mut out = Vec::new();
    let mut analytic = true;
    for s0 in f.support(t) {
        let stream = mc.stream.substream(DIV).substream(label).substream(t as u64).substream(s0 as u64);
        let results = chain.map(|r, cols| {
            column_divergence(f.as_ref(), cols, s0, mc.div_eps_rel, mc.div_reps, stream.substream(r as u64))
        });
        let mut vals = Vec::with_capacity(results.len());
        for res in results {
            let (d, an) = res?;
            analytic &= an;
            vals.push(d.value / norm);
        }
        out.push((s0 + 1, mean_se(&vals)));
    }
    Ok((out, analytic))
}

/// `(1/norm) E aᵀb` over replicates.
fn mean_inner(a: &[DVector<f64>], b: &[DVector<f64>], norm: f64) -> DivEstimate {
    let vals: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.dot(y) / norm).collect();
    mean_se(&vals)
}

fn grow(prev: Option<&DMatrix<f64>>, row: &[f64]) -> DMatrix<f64> {
    let k = row.len();
    let mut m = DMatrix::zeros(k, k);
    if let Some(p) = prev {
        m.view_mut((0, 0), (k - 1, k - 1)).copy_from(p);
    }
    for (j, &v) in row.iter().enumerate() {
        m[(k - 1, j)] = v;
        m[(j, k - 1)] = v;
    }
    m
}

/// Symmetric state evolution for `iterations` steps. Needs `f_1..f_{T−1}`;
/// when `f_T` is also given, `b_{T+1,·}` and the Stein checks for `t = T`
/// are produced as well.
pub fn se_symmetric(f_seq: &[DynDenoiser], u1: &DVector<f64>, iterations: usize, mc: &McConfig) -> Result<SeOutput> {
    mc.validate()?;
    if iterations == 0 || f_seq.len() + 1 < iterations {
        return Err(Error::InvalidParameter(format!(
            "{iterations} iterations need f_1..f_{}, got {}",
            iterations.saturating_sub(1),
            f_seq.len()
        )));
    }
    let n = u1.len();
    let nf = n as f64;
    let mut chain = GaussianChain::new(n, mc.samples, mc.stream.substream(Z_CHAIN), mc.jitter);
    let s11 = u1.norm_squared() / nf;
    chain.extend(&[s11], 1)?;
    let mut sigma = vec![DMatrix::from_element(1, 1, s11)];
    let mut sigma_se = vec![DMatrix::zeros(1, 1)];
    // outputs[k][r] = f_k at replicate r, with f_0 = u_1.
    let mut outputs: Vec<Vec<DVector<f64>>> = vec![vec![u1.clone(); mc.samples]];
    let mut schedule = OnsagerSchedule::new(Provenance::Analytic);
    let mut all_analytic = true;
    let mut stein = Vec::new();

    for t in 1..=iterations.min(f_seq.len()) {
        let f = &f_seq[t - 1];
        let ft = apply_all(&chain, f, n)?;
        let (divs, analytic) = expected_divergences(&chain, f, t, nf, mc, 0)?;
        all_analytic &= analytic;
        for &(s, d) in &divs {
            schedule.set_b(t + 1, s, d.value, d.std_err);
        }

        let sig = &sigma[t - 1];
        for s in 1..=t {
            let zs: Vec<DVector<f64>> = (0..mc.samples).map(|r| chain.columns(r)[s - 1].clone()).collect();
            let lhs = mean_inner(&zs, &ft, nf);
            let mut rhs = 0.0;
            let mut var = lhs.std_err.powi(2);
            for &(r, d) in &divs {
                rhs += d.value * sig[(s - 1, r - 1)];
                var += (d.std_err * sig[(s - 1, r - 1)]).powi(2);
            }
            stein.push(SteinCheck { t, s, lhs: lhs.value, rhs, std_err: var.sqrt() });
        }

        outputs.push(ft);
        if t < iterations {
            let mut row = Vec::with_capacity(t + 1);
            let mut row_se = Vec::with_capacity(t + 1);
            for s in 0..=t {
                let e = mean_inner(&outputs[t], &outputs[s], nf);
                row.push(e.value);
                row_se.push(e.std_err);
            }
            chain.extend(&row, t + 1)?;
            sigma.push(grow(Some(&sigma[t - 1]), &row));
            sigma_se.push(grow(Some(&sigma_se[t - 1]), &row_se));
        }
    }
    if !all_analytic {
        schedule.provenance = Provenance::MonteCarlo;
    }
    let seq = SECovarianceSequence {
        sigma,
        omega: Vec::new(),
        sigma_se,
        omega_se: Vec::new(),
        mc_samples: mc.samples,
        n,
        jitter_events: chain.jitter_events,
    };
    Ok(SeOutput { seq, schedule, stein })
}

/// Rectangular state evolution. `f_t: R^{m×t} → R^m`, `g_t: R^{n×t} → R^n`;
/// needs `f_1..f_T` and `g_1..g_{T−1}`. `Ω_1 = ‖u_1‖²/m`.
pub fn se_asymmetric(
    f_seq: &[DynDenoiser],
    g_seq: &[DynDenoiser],
    u1: &DVector<f64>,
    m: usize,
    iterations: usize,
    mc: &McConfig,
) -> Result<SeOutput> {
    mc.validate()?;
    if iterations == 0 || f_seq.len() < iterations || g_seq.len() + 1 < iterations {
        return Err(Error::InvalidParameter(format!(
            "{iterations} iterations need f_1..f_{iterations} and g_1..g_{}, got {} and {}",
            iterations.saturating_sub(1),
            f_seq.len(),
            g_seq.len()
        )));
    }
    if m == 0 {
        return dim_err("m must be positive");
    }
    let n = u1.len();
    let mf = m as f64;
    let mut zc = GaussianChain::new(m, mc.samples, mc.stream.substream(Z_CHAIN), mc.jitter);
    let mut yc = GaussianChain::new(n, mc.samples, mc.stream.substream(Y_CHAIN), mc.jitter);
    let o11 = u1.norm_squared() / mf;
    zc.extend(&[o11], 1)?;
    let mut omega = vec![DMatrix::from_element(1, 1, o11)];
    let mut omega_se = vec![DMatrix::zeros(1, 1)];
    let mut sigma: Vec<DMatrix<f64>> = Vec::new();
    let mut sigma_se: Vec<DMatrix<f64>> = Vec::new();
    let mut f_out: Vec<Vec<DVector<f64>>> = Vec::new();
    let mut g_out: Vec<Vec<DVector<f64>>> = vec![vec![u1.clone(); mc.samples]];
    let mut schedule = OnsagerSchedule::new(Provenance::Analytic);
    let mut all_analytic = true;

    for t in 1..=iterations {
        let f = &f_seq[t - 1];
        let ft = apply_all(&zc, f, m)?;
        let (divs, an) = expected_divergences(&zc, f, t, mf, mc, 1)?;
        all_analytic &= an;
        for (s, d) in divs {
            schedule.set_a(t, s, d.value, d.std_err);
        }
        f_out.push(ft);
        let (row, row_se): (Vec<f64>, Vec<f64>) = (0..t)
            .map(|s| {
                let e = mean_inner(&f_out[t - 1], &f_out[s], mf);
                (e.value, e.std_err)
            })
            .unzip();
        yc.extend(&row, t)?;
        sigma.push(grow(sigma.last(), &row));
        sigma_se.push(grow(sigma_se.last(), &row_se));

        let Some(g) = g_seq.get(t - 1) else { break };
        let gt = apply_all(&yc, g, n)?;
        let (divs, an) = expected_divergences(&yc, g, t, mf, mc, 2)?;
        all_analytic &= an;
        for (s, d) in divs {
            schedule.set_b(t + 1, s, d.value, d.std_err);
        }
        g_out.push(gt);
        if t < iterations {
            let (row, row_se): (Vec<f64>, Vec<f64>) = (0..=t)
                .map(|s| {
                    let e = mean_inner(&g_out[t], &g_out[s], mf);
                    (e.value, e.std_err)
                })
                .unzip();
            zc.extend(&row, t + 1)?;
            omega.push(grow(omega.last(), &row));
            omega_se.push(grow(omega_se.last(), &row_se));
        }
    }
    if !all_analytic {
        schedule.provenance = Provenance::MonteCarlo;
    }
    let mut jitter_events = zc.jitter_events;
    jitter_events.extend(yc.jitter_events);
    let seq = SECovarianceSequence { sigma, omega, sigma_se, omega_se, mc_samples: mc.samples, n: m, jitter_events };
    Ok(SeOutput { seq, schedule, stein: Vec::new() })
}

/// Scalar state evolution of sensing AMP.
///
/// `omega_sq[t−1] = ω_t²` for `t = 1..T+1`, `sigma_sq[t−1] = σ_t²`,
/// `predicted_mse[t−1]` predicts `(1/n)‖θ_{t+1} − θ*‖²` and
/// `onsager[t−1]` predicts the coefficient `b_t` (zero for `t = 1`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarSE {
    pub omega_sq: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub omega_sq_se: Vec<f64>,
    pub predicted_mse: Vec<f64>,
    pub predicted_mse_se: Vec<f64>,
    pub onsager: Vec<f64>,
}

impl ScalarSE {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SE_CSV_HEADER);
        for t in 1..=self.sigma_sq.len() {
            write_se_row(&mut out, t, self.sigma_sq[t - 1], self.omega_sq[t - 1], self.onsager[t - 1], 1.0, self.predicted_mse[t - 1]);
        }
        out
    }
}

/// Scalar recursion for sensing AMP with measurement noise `e ∈ R^m`:
///
/// ```text
/// ω_1² = ‖Kθ*‖²/m,   σ_t² = ω_t² + ‖e‖²/m,
/// ω_{t+1}² = (1/m) E‖K[θ* − η_t(K⁻¹Y + θ*)]‖²,   Y ~ N(0, σ_t² I_n),
/// ```
///
/// with `K = I` when absent. Each step uses `mc.samples` fresh draws from
/// `mc.stream.substream(t)`.
pub fn se_scalar_sensing(
    theta_star: &DVector<f64>,
    noise: &DVector<f64>,
    eta_seq: &[std::sync::Arc<dyn VectorMap>],
    iterations: usize,
    k: Option<&DMatrix<f64>>,
    mc: &McConfig,
) -> Result<ScalarSE> {
    mc.validate()?;
    if eta_seq.len() < iterations {
        return Err(Error::InvalidParameter(format!("{iterations} iterations need {iterations} denoisers, got {}", eta_seq.len())));
    }
    let n = theta_star.len();
    let m = noise.len();
    if m == 0 || n == 0 {
        return dim_err("empty signal or measurement vector");
    }
    let (mf, nf) = (m as f64, n as f64);
    let kinv = match k {
        Some(k) => {
            if k.shape() != (n, n) {
                return dim_err(format!("K is {:?}, expected {n}x{n}", k.shape()));
            }
            let sv = k.singular_values();
            let inv = k.clone().try_inverse().ok_or_else(|| Error::Numeric("K is singular".into()))?;
            Some((k.clone(), inv, sv.max() / sv.min()))
        }
        None => None,
    };
    let noise_sq = noise.norm_squared() / mf;
    let w1 = match k {
        Some(k) => (k * theta_star).norm_squared(),
        None => theta_star.norm_squared(),
    } / mf;
    let mut out = ScalarSE {
        omega_sq: vec![w1],
        sigma_sq: Vec::new(),
        omega_sq_se: vec![0.0],
        predicted_mse: Vec::new(),
        predicted_mse_se: Vec::new(),
        onsager: vec![0.0],
    };
    for t in 1..=iterations {
        let sig2 = out.omega_sq[t - 1] + noise_sq;
        out.sigma_sq.push(sig2);
        let eta = eta_seq[t - 1].clone();
        let map = match &kinv {
            Some((k, ki, cond)) => SensingOutputMap::with_inverse(theta_star.clone(), eta.clone(), k.clone(), ki.clone(), *cond),
            None => SensingOutputMap::new(theta_star.clone(), eta.clone(), None)?,
        };
        let sd = sig2.sqrt();
        let stream = mc.stream.substream(t as u64);
        let rows: Vec<Result<(f64, f64, f64)>> = {
            use rayon::prelude::*;
            (0..mc.samples)
                .into_par_iter()
                .map(|r| {
                    let rs = stream.substream(r as u64);
                    let y = gaussian_vector(&mut rs.rng(), n) * sd;
                    let err = map.error_vector(&y);
                    let mse = err.norm_squared() / nf;
                    let w = match &kinv {
                        Some((k, _, _)) => (k * &err).norm_squared(),
                        None => err.norm_squared(),
                    } / mf;
                    let input = map.eta_input(&y);
                    let div = map_divergence(eta.as_ref(), &input, mc.div_reps, rs.substream(DIV))?;
                    Ok((w, mse, div.value / mf))
                })
                .collect()
        };
        let mut ws = Vec::with_capacity(mc.samples);
        let mut mses = Vec::with_capacity(mc.samples);
        let mut divs = Vec::with_capacity(mc.samples);
        for row in rows {
            let (w, e, d) = row?;
            ws.push(w);
            mses.push(e);
            divs.push(d);
        }
        let w = mean_se(&ws);
        let e = mean_se(&mses);
        out.omega_sq.push(w.value);
        out.omega_sq_se.push(w.std_err);
        out.predicted_mse.push(e.value);
        out.predicted_mse_se.push(e.std_err);
        if t < iterations {
            out.onsager.push(mean_se(&divs).value);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapReport {
    /// `(1/n) φ1(z)ᵀ φ2(z)` at the realized iterates.
    pub empirical: f64,
    /// Monte-Carlo `E (1/n) φ1(Z)ᵀ φ2(Z)` with `Z ~ N(0, Σ_T ⊗ I_n)`.
    pub expected: f64,
    pub std_err: f64,
    pub gap: f64,
}

/// Test-function gap between realized iterates `z_{1:T}` and Gaussian
/// surrogates with covariance `Σ_T`.
pub fn test_function_gap(
    z: &[DVector<f64>],
    phi1: &dyn Denoiser,
    phi2: &dyn Denoiser,
    sigma_t: &DMatrix<f64>,
    draws: usize,
    stream: RngStream,
) -> Result<GapReport> {
    let t = z.len();
    if t == 0 || sigma_t.shape() != (t, t) {
        return dim_err(format!("{t} iterates but Σ is {:?}", sigma_t.shape()));
    }
    if draws == 0 {
        return Err(Error::InvalidParameter("need at least one draw".into()));
    }
    let n = z[0].len();
    let nf = n as f64;
    let p1 = phi1.apply(z);
    let p2 = phi2.apply(z);
    check_len(phi1, &p1, n)?;
    check_len(phi2, &p2, n)?;
    let empirical = p1.dot(&p2) / nf;
    let mut chain = GaussianChain::new(n, draws, stream, DEFAULT_JITTER);
    for k in 0..t {
        let row: Vec<f64> = (0..=k).map(|j| sigma_t[(k, j)]).collect();
        chain.extend(&row, k + 1)?;
    }
    let vals = chain.map(|_, cols| phi1.apply(cols).dot(&phi2.apply(cols)) / nf);
    let e = mean_se(&vals);
    Ok(GapReport { empirical, expected: e.value, std_err: e.std_err, gap: (empirical - e.value).abs() })
}

/// Denoisers that produced a trace, for [`estimate_onsager_from_data`].
pub enum TraceDenoisers<'a> {
    /// `f_1, f_2, ...` of a symmetric run; coefficients are scaled by `1/n`.
    Symmetric(&'a [DynDenoiser]),
    /// `f_t` (on `z`) and `g_t` (on `y`) of a rectangular run; coefficients
    /// are scaled by `1/m`.
    Rectangular { f: &'a [DynDenoiser], g: &'a [DynDenoiser] },
}

/// Onsager coefficients from probe divergences at the realized iterates of
/// `trace`. Analytic formulas are deliberately ignored so the estimate is
/// purely data-driven.
pub fn estimate_onsager_from_data(
    trace: &AmpTrace,
    denoisers: TraceDenoisers<'_>,
    eps_rel: f64,
    reps: usize,
    stream: RngStream,
) -> Result<OnsagerSchedule> {
    if !(eps_rel > 0.0) {
        return Err(Error::InvalidParameter(format!("probe step must be positive, got {eps_rel}")));
    }
    let mut sch = OnsagerSchedule::new(Provenance::EstimatedFromData);
    let iters = trace.iterations();
    let mut fill = |f: &DynDenoiser, cols: &[DVector<f64>], t: usize, norm: f64, label: u64, a: bool| -> Result<()> {
        for s0 in f.support(cols.len()) {
            let st = stream.substream(label).substream(t as u64).substream(s0 as u64);
            let d = column_divergence_probe(f.as_ref(), cols, s0, eps_rel, reps, st)?;
            if a {
                sch.set_a(t, s0 + 1, d.value / norm, d.std_err / norm);
            } else {
                sch.set_b(t, s0 + 1, d.value / norm, d.std_err / norm);
            }
        }
        Ok(())
    };
    match denoisers {
        TraceDenoisers::Symmetric(f_seq) => {
            let n = trace.z.first().map_or(1, |z| z.len()) as f64;
            for t in 2..=(iters + 1).min(f_seq.len() + 1) {
                fill(&f_seq[t - 2], &trace.z[..t - 1], t, n, 0, false)?;
            }
        }
        TraceDenoisers::Rectangular { f, g } => {
            let m = trace.z.first().map_or(1, |z| z.len()) as f64;
            for t in 1..=iters.min(f.len()) {
                fill(&f[t - 1], &trace.z[..t], t, m, 1, true)?;
            }
            for t in 2..=(trace.y.len() + 1).min(g.len() + 1) {
                fill(&g[t - 2], &trace.y[..t - 1], t, m, 2, false)?;
            }
        }
    }
    Ok(sch)
}
