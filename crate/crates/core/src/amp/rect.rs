use nalgebra::{DMatrix, DVector};

use super::{apply_checked, correction_coefs, AmpTrace, CoefSource, Onsager};
use crate::denoisers::DynDenoiser;
use crate::error::{dim_err, Error, Result};

/// Rectangular AMP with `W ∈ R^{m×n}`:
///
/// ```text
/// z_t = W u_t − Σ_{s<t} b_ts v_s        v_t = f_t(z_{1:t})
/// y_t = Wᵀ v_t − Σ_{s≤t} a_ts u_s       u_{t+1} = g_t(y_{1:t})
/// ```
pub struct RectAmpProblem {
    pub w: DMatrix<f64>,
    pub u1: DVector<f64>,
    /// `f_seq[t−1]` is `f_t`, mapping `R^{m×t} → R^m`.
    pub f_seq: Vec<DynDenoiser>,
    /// `g_seq[t−1]` is `g_t`, mapping `R^{n×t} → R^n`.
    pub g_seq: Vec<DynDenoiser>,
}

impl RectAmpProblem {
    pub fn dims(&self) -> (usize, usize) {
        self.w.shape()
    }

    fn validate(&self, iterations: usize) -> Result<()> {
        let (_, n) = self.w.shape();
        if self.u1.len() != n {
            return dim_err(format!("W is {:?} but u_1 has length {}", self.w.shape(), self.u1.len()));
        }
        if iterations == 0 {
            return Err(Error::InvalidParameter("need at least one iteration".into()));
        }
        if self.f_seq.len() < iterations || self.g_seq.len() + 1 < iterations {
            return Err(Error::InvalidParameter(format!(
                "{iterations} iterations need f_1..f_{iterations} and g_1..g_{}, got {} and {}",
                iterations - 1,
                self.f_seq.len(),
                self.g_seq.len()
            )));
        }
        Ok(())
    }
}

/// Runs `iterations` rounds. When `g_T` is supplied the final `u_{T+1}` is
/// also produced. Both coefficient families are normalised by `1/m`.
pub fn run_asymmetric_amp(p: &RectAmpProblem, onsager: &Onsager<'_>, iterations: usize) -> Result<AmpTrace> {
    p.validate(iterations)?;
    let start = std::time::Instant::now();
    let (m, n) = p.w.shape();
    let mf = m as f64;
    let mut tr = AmpTrace::default();
    tr.u.push(p.u1.clone());
    for t in 1..=iterations {
        let mut z = &p.w * &tr.u[t - 1];
        let (b, b_src) = if t == 1 {
            (Vec::new(), CoefSource::None)
        } else {
            correction_coefs(&p.g_seq[t - 2], &tr.y, t, mf, onsager, |sch, s| sch.b(t, s))?
        };
        for &(s, c) in &b {
            if c != 0.0 {
                z.axpy(-c, &tr.v[s - 1], 1.0);
            }
        }
        tr.z.push(z);
        tr.b.push(b);

        let f = &p.f_seq[t - 1];
        let v = apply_checked(f, &tr.z, m)?;
        tr.v.push(v);

        let (a, a_src) = correction_coefs(f, &tr.z, t, mf, onsager, |sch, s| sch.a(t, s))?;
        let mut y = p.w.tr_mul(&tr.v[t - 1]);
        for &(s, c) in &a {
            if c != 0.0 {
                y.axpy(-c, &tr.u[s - 1], 1.0);
            }
        }
        tr.y.push(y);
        tr.a.push(a);
        tr.source.push(if b_src == CoefSource::MonteCarlo || a_src == CoefSource::MonteCarlo {
            CoefSource::MonteCarlo
        } else if b_src == CoefSource::None {
            a_src
        } else {
            b_src
        });

        if let Some(g) = p.g_seq.get(t - 1) {
            let u = apply_checked(g, &tr.y, n)?;
            tr.u.push(u);
        }
    }
    tr.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(tr)
}
