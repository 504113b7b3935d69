use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{latest, run_asymmetric_amp, AmpTrace, CoefSource, Empirical, Onsager, RectAmpProblem};
use crate::denoisers::{mc_divergence, ScalarFn, Separable, Shifted, VectorMap};
use crate::error::{dim_err, Error, Result};
use crate::state_evolution::{OnsagerSchedule, Provenance};

/// Condition numbers above this are treated as singular.
const MAX_CONDITION: f64 = 1e12;

/// Measurements `x = W̃ θ* + e` with `W̃ = W` or `W̃ = W K`.
pub struct SensingProblem {
    pub w: DMatrix<f64>,
    pub k: Option<DMatrix<f64>>,
    pub theta_star: DVector<f64>,
    pub noise: DVector<f64>,
    pub x: DVector<f64>,
    /// `eta[t−1]` is `η_t`.
    pub eta: Vec<Arc<dyn VectorMap>>,
}

impl SensingProblem {
    pub fn new(w: DMatrix<f64>, theta_star: DVector<f64>, noise: DVector<f64>, eta: Vec<Arc<dyn VectorMap>>) -> Result<Self> {
        Self::build(w, None, theta_star, noise, eta)
    }

    pub fn anisotropic(
        w: DMatrix<f64>,
        k: DMatrix<f64>,
        theta_star: DVector<f64>,
        noise: DVector<f64>,
        eta: Vec<Arc<dyn VectorMap>>,
    ) -> Result<Self> {
        Self::build(w, Some(k), theta_star, noise, eta)
    }

    fn build(
        w: DMatrix<f64>,
        k: Option<DMatrix<f64>>,
        theta_star: DVector<f64>,
        noise: DVector<f64>,
        eta: Vec<Arc<dyn VectorMap>>,
    ) -> Result<Self> {
        let (m, n) = w.shape();
        if theta_star.len() != n || noise.len() != m {
            return dim_err(format!("W is {m}x{n}, θ* has length {}, e has length {}", theta_star.len(), noise.len()));
        }
        if let Some(k) = &k {
            if k.shape() != (n, n) {
                return dim_err(format!("K is {:?}, expected {n}x{n}", k.shape()));
            }
        }
        if let Some(bad) = eta.iter().find(|e| e.input_dim().is_some_and(|d| d != n)) {
            return dim_err(format!("denoiser {} expects length {:?}, signal has {n}", bad.name(), bad.input_dim()));
        }
        let x = match &k {
            Some(k) => &w * (k * &theta_star) + &noise,
            None => &w * &theta_star + &noise,
        };
        Ok(Self { w, k, theta_star, noise, x, eta })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.w.shape()
    }

    /// Relative residual of `x − (W̃θ* + e)`.
    pub fn measurement_residual(&self) -> f64 {
        let rebuilt = match &self.k {
            Some(k) => &self.w * (k * &self.theta_star) + &self.noise,
            None => &self.w * &self.theta_star + &self.noise,
        };
        (&self.x - rebuilt).norm() / self.x.norm().max(f64::MIN_POSITIVE)
    }
}

/// Source of the scalar `b_t` in sensing AMP.
#[derive(Clone, Debug, PartialEq)]
pub enum SensingOnsager {
    /// `(1/m) div η_{t−1}` at its realized input: analytic when available,
    /// otherwise the probe estimator.
    Divergence(Empirical),
    /// Prescribed `b_1..b_T`.
    Fixed(Vec<f64>),
}

/// The preconditioner `(KᵀK)⁻¹` and the condition number of `K`.
fn preconditioner(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let sv = k.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Numeric(format!("K is singular to working precision (condition number {cond:.3e})")));
    }
    let gram = k.tr_mul(k);
    let chol = gram.cholesky().ok_or_else(|| Error::Numeric("KᵀK is not positive definite".into()))?;
    Ok((chol.inverse(), cond))
}

/// Runs `r_t = x − W̃θ_t + b_t r_{t−1}`,
/// `θ_{t+1} = η_t(θ_t + (KᵀK)⁻¹W̃ᵀ r_t)` from `θ_1 = r_0 = 0`
/// (`K = I` when the problem has no `K`).
pub fn run_sensing_amp(p: &SensingProblem, onsager: &SensingOnsager, iterations: usize) -> Result<AmpTrace> {
    let pre = match &p.k {
        Some(k) => Some(preconditioner(k)?.0),
        None => None,
    };
    run_sensing_inner(p, pre.as_ref(), onsager, iterations)
}

/// Sensing AMP with correlated design `W̃ = W K`. Also returns the condition
/// number of `K`.
pub fn run_aniso_sensing_amp(p: &SensingProblem, onsager: &SensingOnsager, iterations: usize) -> Result<(AmpTrace, f64)> {
    let k = p.k.as_ref().ok_or_else(|| Error::InvalidSpec("anisotropic sensing needs K".into()))?;
    let (pre, cond) = preconditioner(k)?;
    Ok((run_sensing_inner(p, Some(&pre), onsager, iterations)?, cond))
}

fn run_sensing_inner(
    p: &SensingProblem,
    pre: Option<&DMatrix<f64>>,
    onsager: &SensingOnsager,
    iterations: usize,
) -> Result<AmpTrace> {
    let (m, n) = p.dims();
    if iterations == 0 {
        return Err(Error::InvalidParameter("need at least one iteration".into()));
    }
    if p.eta.len() < iterations {
        return Err(Error::InvalidParameter(format!("{iterations} iterations need η_1..η_{iterations}, got {}", p.eta.len())));
    }
    if let SensingOnsager::Fixed(b) = onsager {
        if b.len() < iterations {
            return Err(Error::MissingCoefficient { t: b.len() + 1, s: b.len() });
        }
    }
    let start = std::time::Instant::now();
    let w_eff = match &p.k {
        Some(k) => &p.w * k,
        None => p.w.clone(),
    };
    let mut tr = AmpTrace::default();
    tr.u.push(DVector::zeros(n));
    let mut r_prev = DVector::zeros(m);
    let mut prev_input: Option<DVector<f64>> = None;
    for t in 1..=iterations {
        let (b, src) = match onsager {
            SensingOnsager::Fixed(b) => (b[t - 1], CoefSource::Fixed),
            SensingOnsager::Divergence(emp) => match &prev_input {
                None => (0.0, CoefSource::None),
                Some(inp) => {
                    let eta = &p.eta[t - 2];
                    match eta.divergence(inp) {
                        Some(d) => (d / m as f64, CoefSource::Analytic),
                        None => {
                            let eps = emp.eps_rel * (inp.norm() / (n as f64).sqrt()).max(1.0);
                            let est = mc_divergence(|v| eta.apply(v), inp, eps, emp.reps, emp.stream.substream(t as u64))?;
                            (est.value / m as f64, CoefSource::MonteCarlo)
                        }
                    }
                }
            },
        };
        let theta = &tr.u[t - 1];
        let mut r = &p.x - &w_eff * theta;
        if b != 0.0 {
            r.axpy(b, &r_prev, 1.0);
        }
        let back = w_eff.tr_mul(&r);
        let input = match pre {
            Some(pre) => theta + pre * back,
            None => theta + back,
        };
        let next = p.eta[t - 1].apply(&input);
        if next.len() != n {
            return dim_err(format!("denoiser returned length {}, expected {n}", next.len()));
        }
        tr.mse.push((&next - &p.theta_star).norm_squared() / n as f64);
        tr.b.push(vec![(t - 1, b)]);
        tr.source.push(src);
        tr.z.push(r.clone());
        tr.u.push(next);
        r_prev = r;
        prev_input = Some(input);
    }
    tr.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(tr)
}

/// `g(y) = K[θ* − η(K⁻¹y + θ*)]`, the `n`-side map of the sensing change of
/// variables (`K = I` when absent).
///
/// Its divergence is `−div η` at the shifted input since the Jacobian is
/// similar to `−∇η`.
pub struct SensingOutputMap {
    pub theta_star: DVector<f64>,
    pub eta: Arc<dyn VectorMap>,
    pub k: Option<DMatrix<f64>>,
    pub k_inv: Option<DMatrix<f64>>,
    lipschitz: f64,
}

impl SensingOutputMap {
    pub fn new(theta_star: DVector<f64>, eta: Arc<dyn VectorMap>, k: Option<DMatrix<f64>>) -> Result<Self> {
        let n = theta_star.len();
        let (k_inv, scale) = match &k {
            Some(k) => {
                if k.shape() != (n, n) {
                    return dim_err(format!("K is {:?}, expected {n}x{n}", k.shape()));
                }
                let sv = k.singular_values();
                let inv = k.clone().try_inverse().ok_or_else(|| Error::Numeric("K is singular".into()))?;
                (Some(inv), sv.max() / sv.min())
            }
            None => (None, 1.0),
        };
        let lipschitz = scale * eta.lipschitz();
        Ok(Self { theta_star, eta, k, k_inv, lipschitz })
    }

    /// Reuses a precomputed inverse and condition number of `K`.
    pub fn with_inverse(theta_star: DVector<f64>, eta: Arc<dyn VectorMap>, k: DMatrix<f64>, k_inv: DMatrix<f64>, cond: f64) -> Self {
        let lipschitz = cond * eta.lipschitz();
        Self { theta_star, eta, k: Some(k), k_inv: Some(k_inv), lipschitz }
    }

    /// `η(K⁻¹y + θ*)`'s argument.
    pub fn eta_input(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.k_inv {
            Some(ki) => ki * y + &self.theta_star,
            None => y + &self.theta_star,
        }
    }

    /// `θ* − η(K⁻¹y + θ*)`, the estimation error read off from `y`.
    pub fn error_vector(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.theta_star - self.eta.apply(&self.eta_input(y))
    }
}

impl VectorMap for SensingOutputMap {
    fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        let e = self.error_vector(y);
        match &self.k {
            Some(k) => k * e,
            None => e,
        }
    }

    fn divergence(&self, y: &DVector<f64>) -> Option<f64> {
        self.eta.divergence(&self.eta_input(y)).map(|d| -d)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn input_dim(&self) -> Option<usize> {
        Some(self.theta_star.len())
    }

    fn name(&self) -> String {
        format!("sensing_output({})", self.eta.name())
    }
}

/// Runs the sensing recursion directly and through the rectangular AMP of
/// the change of variables `u_t = K(θ* − θ_t)`, `z_t = r_t − e`,
/// `f_t(z) = z + e`, `g_t` as in [`SensingOutputMap`], and returns
/// `max_t ‖θ_{t+1} − θ'_{t+1}‖ / max(‖θ_{t+1}‖, ‖θ*‖)`.
///
/// The rectangular run computes its own coefficients when every `η_t` has an
/// analytic divergence; otherwise it is fed `b_{t,t−1} = −b_t`, `a_tt = 1`
/// from the direct run.
pub fn change_of_variables_check(p: &SensingProblem, onsager: &SensingOnsager, iterations: usize) -> Result<f64> {
    let direct = run_sensing_amp(p, onsager, iterations)?;
    let n = p.dims().1;
    let f = latest(Shifted {
        inner: Arc::new(Separable(ScalarFn::Identity)),
        in_shift: None,
        out_shift: Some(p.noise.clone()),
        out_scale: 1.0,
    });
    let mut g_seq = Vec::with_capacity(iterations);
    for eta in &p.eta[..iterations] {
        g_seq.push(latest(SensingOutputMap::new(p.theta_star.clone(), eta.clone(), p.k.clone())?));
    }
    let u1 = match &p.k {
        Some(k) => k * &p.theta_star,
        None => p.theta_star.clone(),
    };
    let rect = RectAmpProblem { w: p.w.clone(), u1, f_seq: vec![f; iterations], g_seq };

    let probe = DVector::zeros(n);
    let analytic = p.eta[..iterations].iter().all(|e| e.divergence(&probe).is_some()) && !matches!(onsager, SensingOnsager::Fixed(_));
    let mapped = if analytic {
        let emp = match onsager {
            SensingOnsager::Divergence(e) => *e,
            SensingOnsager::Fixed(_) => unreachable!(),
        };
        run_asymmetric_amp(&rect, &Onsager::Empirical(emp), iterations)?
    } else {
        let mut sch = OnsagerSchedule::new(Provenance::EstimatedFromData);
        for t in 1..=iterations {
            sch.set_a(t, t, 1.0, 0.0);
            if t > 1 {
                sch.set_b(t, t - 1, -direct.b_last(t), 0.0);
            }
        }
        run_asymmetric_amp(&rect, &Onsager::Schedule(&sch), iterations)?
    };
    let k_inv = match &p.k {
        Some(k) => Some(k.clone().try_inverse().ok_or_else(|| Error::Numeric("K is singular".into()))?),
        None => None,
    };
    let scale_star = p.theta_star.norm();
    let mut worst: f64 = 0.0;
    for t in 1..=iterations {
        let u = &mapped.u[t];
        let theta_mapped = match &k_inv {
            Some(ki) => &p.theta_star - ki * u,
            None => &p.theta_star - u,
        };
        let theta = &direct.u[t];
        let diff = (theta - &theta_mapped).norm();
        if diff > 0.0 {
            worst = worst.max(diff / theta.norm().max(scale_star).max(f64::MIN_POSITIVE));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoisers::{soft_threshold, ForceMonteCarlo};
    use crate::ensembles::{gaussian_noise, sample_conjugated_diagonal, sample_ginibre, EnsembleSpec, EntryDist, RngStream};

    fn soft(l: f64) -> Arc<dyn VectorMap> {
        Arc::new(Separable(ScalarFn::SoftThreshold { lambda: l }))
    }

    fn instance(m: usize, n: usize, seed: u64, lambda: f64, t: usize) -> SensingProblem {
        let w = sample_ginibre(&EnsembleSpec::ginibre(m, n, EntryDist::Gaussian), RngStream::new(seed, 0)).unwrap();
        let theta = DVector::from_fn(n, |i, _| if i % 5 == 0 { ((i + 1) as f64).sin() * 2.0 } else { 0.0 });
        let e = gaussian_noise(m, 0.05, RngStream::new(seed, 1));
        SensingProblem::new(w, theta, e, vec![soft(lambda); t]).unwrap()
    }

    fn div() -> SensingOnsager {
        SensingOnsager::Divergence(Empirical::new(RngStream::new(5, 5)))
    }

    #[test]
    fn measurements_are_consistent() {
        let p = instance(40, 60, 1, 0.5, 3);
        assert!(p.measurement_residual() <= 1e-12);
    }

    #[test]
    fn zero_problem_zero_iterates() {
        let mut p = instance(20, 30, 2, 0.5, 3);
        p.theta_star = DVector::zeros(30);
        p.noise = DVector::zeros(20);
        p.x = DVector::zeros(20);
        let tr = run_sensing_amp(&p, &div(), 3).unwrap();
        assert!(tr.z.iter().chain(&tr.u).all(|v| v.iter().all(|&x| x == 0.0)));
        assert!(tr.mse.iter().all(|&v| v == 0.0));
        assert_eq!(change_of_variables_check(&p, &div(), 3).unwrap(), 0.0);
    }

    #[test]
    fn first_iteration() {
        let p = instance(20, 30, 3, 0.3, 1);
        let tr = run_sensing_amp(&p, &div(), 1).unwrap();
        assert_eq!(tr.z[0], p.x);
        assert_eq!(tr.u[1], soft_threshold(&p.w.tr_mul(&p.x), 0.3));
    }

    #[test]
    fn dead_zone_keeps_estimate_at_zero() {
        let p = instance(20, 30, 4, 1e6, 4);
        let tr = run_sensing_amp(&p, &div(), 4).unwrap();
        for t in 0..4 {
            assert!(tr.u[t + 1].iter().all(|&v| v == 0.0));
            assert_eq!(tr.b_last(t + 1), 0.0);
            assert_eq!(tr.z[t], p.x);
        }
    }

    #[test]
    fn b_source_is_recorded() {
        let p = instance(40, 60, 5, 0.3, 3);
        let tr = run_sensing_amp(&p, &div(), 3).unwrap();
        assert_eq!(tr.source, vec![CoefSource::None, CoefSource::Analytic, CoefSource::Analytic]);
        let mut q = instance(40, 60, 5, 0.3, 3);
        q.eta = vec![Arc::new(ForceMonteCarlo(soft(0.3))); 3];
        let tr2 = run_sensing_amp(&q, &div(), 3).unwrap();
        assert_eq!(tr2.source[2], CoefSource::MonteCarlo);
        assert!((tr2.b_last(2) - tr.b_last(2)).abs() <= 0.05 * tr.b_last(2).abs().max(0.01));
    }

    #[test]
    fn change_of_variables_identity() {
        for seed in 0..3 {
            let p = instance(50, 70, seed, 0.4, 3);
            let dev = change_of_variables_check(&p, &div(), 3).unwrap();
            assert!(dev <= 1e-8, "seed {seed}: {dev}");
        }
    }

    #[test]
    fn change_of_variables_with_probe_divergence() {
        let mut p = instance(50, 70, 9, 0.4, 3);
        p.eta = vec![Arc::new(ForceMonteCarlo(soft(0.4))); 3];
        let dev = change_of_variables_check(&p, &div(), 3).unwrap();
        assert!(dev <= 1e-8, "{dev}");
    }

    #[test]
    fn identity_k_matches_plain_run() {
        let p = instance(40, 30, 6, 0.2, 3);
        let q = SensingProblem::anisotropic(p.w.clone(), DMatrix::identity(30, 30), p.theta_star.clone(), p.noise.clone(), p.eta.clone()).unwrap();
        let a = run_sensing_amp(&p, &div(), 3).unwrap();
        let (b, cond) = run_aniso_sensing_amp(&q, &div(), 3).unwrap();
        assert!((cond - 1.0).abs() < 1e-12);
        for t in 0..4 {
            assert!((&a.u[t] - &b.u[t]).amax() <= 1e-12);
        }
        assert!(change_of_variables_check(&q, &div(), 3).unwrap() <= 1e-8);
    }

    #[test]
    fn diagonal_k_halves_the_back_projection() {
        let p0 = instance(30, 20, 7, 0.1, 1);
        let k = DMatrix::identity(20, 20) * 2.0;
        let q = SensingProblem::anisotropic(p0.w.clone(), k, p0.theta_star.clone(), p0.noise.clone(), p0.eta.clone()).unwrap();
        let (tr, _) = run_aniso_sensing_amp(&q, &div(), 1).unwrap();
        // x = 2Wθ* + e and θ_2 = η((1/4)(2W)ᵀx) = η((1/2)Wᵀx)
        assert!((&q.x - (&p0.w * &p0.theta_star * 2.0 + &p0.noise)).amax() < 1e-12);
        let expect = soft_threshold(&(p0.w.tr_mul(&q.x) * 0.5), 0.1);
        assert!((&tr.u[1] - &expect).amax() <= 1e-12);
    }

    #[test]
    fn aniso_change_of_variables() {
        let (m, n) = (60, 40);
        let p0 = instance(m, n, 8, 0.3, 3);
        let k = sample_conjugated_diagonal(n, 0.5, 2.0, RngStream::new(8, 9)).unwrap().k;
        let q = SensingProblem::anisotropic(p0.w, k, p0.theta_star, p0.noise, p0.eta).unwrap();
        assert!(q.measurement_residual() <= 1e-12);
        let dev = change_of_variables_check(&q, &div(), 3).unwrap();
        assert!(dev <= 1e-8, "{dev}");
    }

    #[test]
    fn singular_k_is_rejected() {
        let p0 = instance(10, 6, 1, 0.3, 1);
        let mut k = DMatrix::identity(6, 6);
        k[(5, 5)] = 0.0;
        let q = SensingProblem::anisotropic(p0.w, k, p0.theta_star, p0.noise, p0.eta).unwrap();
        assert!(matches!(run_aniso_sensing_amp(&q, &div(), 1), Err(Error::Numeric(_))));
    }
}
