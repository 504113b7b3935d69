use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{AmpTrace, RectAmpProblem, SymmetricAmpProblem};
use crate::denoisers::{Denoiser, DynDenoiser};
use crate::ensembles::{sample_wigner, EnsembleSpec, RngStream};
use crate::error::Result;
use crate::state_evolution::OnsagerSchedule;

/// `√((m+n)/m) · [f(z^sym_{1,3,…}[0..m]); 0]`: the `m`-side map placed in
/// odd symmetric iterations.
pub struct EmbeddedOdd {
    pub f: DynDenoiser,
    pub m: usize,
    pub n: usize,
}

/// `√((m+n)/m) · [0; g(z^sym_{2,4,…}[m..m+n])]`: the `n`-side map placed in
/// even symmetric iterations.
pub struct EmbeddedEven {
    pub g: DynDenoiser,
    pub m: usize,
    pub n: usize,
}

fn scale(m: usize, n: usize) -> f64 {
    ((m + n) as f64 / m as f64).sqrt()
}

/// Picks every other column starting at `first` and restricts it to rows
/// `rows.0 .. rows.0 + rows.1`.
fn pick(z: &[DVector<f64>], first: usize, rows: (usize, usize)) -> Vec<DVector<f64>> {
    z.iter().skip(first).step_by(2).map(|c| c.rows(rows.0, rows.1).into_owned()).collect()
}

impl Denoiser for EmbeddedOdd {
    fn apply(&self, z: &[DVector<f64>]) -> DVector<f64> {
        let top = self.f.apply(&pick(z, 0, (0, self.m)));
        let mut out = DVector::zeros(self.m + self.n);
        out.rows_mut(0, self.m).copy_from(&(top * scale(self.m, self.n)));
        out
    }

    fn divergence(&self, z: &[DVector<f64>], s: usize) -> Option<f64> {
        if s % 2 == 1 {
            return Some(0.0);
        }
        self.f.divergence(&pick(z, 0, (0, self.m)), s / 2).map(|d| d * scale(self.m, self.n))
    }

    fn support(&self, t: usize) -> Vec<usize> {
        self.f.support(t.div_ceil(2)).into_iter().map(|j| 2 * j).collect()
    }

    fn lipschitz(&self) -> f64 {
        scale(self.m, self.n) * self.f.lipschitz()
    }

    fn name(&self) -> String {
        format!("embedded_odd({})", self.f.name())
    }
}

impl Denoiser for EmbeddedEven {
    fn apply(&self, z: &[DVector<f64>]) -> DVector<f64> {
        let bottom = self.g.apply(&pick(z, 1, (self.m, self.n)));
        let mut out = DVector::zeros(self.m + self.n);
        out.rows_mut(self.m, self.n).copy_from(&(bottom * scale(self.m, self.n)));
        out
    }

    fn divergence(&self, z: &[DVector<f64>], s: usize) -> Option<f64> {
        if s.is_multiple_of(2) {
            return Some(0.0);
        }
        self.g.divergence(&pick(z, 1, (self.m, self.n)), s / 2).map(|d| d * scale(self.m, self.n))
    }

    fn support(&self, t: usize) -> Vec<usize> {
        self.g.support(t / 2).into_iter().map(|j| 2 * j + 1).collect()
    }

    fn lipschitz(&self) -> f64 {
        scale(self.m, self.n) * self.g.lipschitz()
    }

    fn name(&self) -> String {
        format!("embedded_even({})", self.g.name())
    }
}

/// A rectangular AMP instance rewritten as symmetric AMP of size `m + n`.
pub struct EmbeddedProblem {
    pub sym: SymmetricAmpProblem,
    pub m: usize,
    pub n: usize,
}

impl EmbeddedProblem {
    /// `z_t = z^sym_{2t−1}[0..m]`.
    pub fn z(&self, sym: &AmpTrace, t: usize) -> DVector<f64> {
        sym.z[2 * t - 2].rows(0, self.m).into_owned()
    }

    /// `y_t = z^sym_{2t}[m..m+n]`.
    pub fn y(&self, sym: &AmpTrace, t: usize) -> DVector<f64> {
        sym.z[2 * t - 1].rows(self.m, self.n).into_owned()
    }

    /// `u_t = √(m/(m+n)) · u^sym_{2t−1}[m..m+n]`.
    pub fn u(&self, sym: &AmpTrace, t: usize) -> DVector<f64> {
        sym.u[2 * t - 2].rows(self.m, self.n) / scale(self.m, self.n)
    }

    /// `v_t = √(m/(m+n)) · u^sym_{2t}[0..m]`.
    pub fn v(&self, sym: &AmpTrace, t: usize) -> DVector<f64> {
        sym.u[2 * t - 1].rows(0, self.m) / scale(self.m, self.n)
    }

    /// Symmetric iterations needed to reproduce `iterations` rectangular ones.
    pub fn sym_iterations(iterations: usize) -> usize {
        2 * iterations
    }
}

/// Builds `W^sym = √(m/(m+n)) [[A, W], [Wᵀ, B]]` with symmetric Gaussian
/// `A`, `B` (entry variance `1/m` off the diagonal), the initialization
/// `u^sym_1 = √((m+n)/m) [0; u_1]` and the interleaved maps
/// `f_1, g_1, f_2, g_2, …`.
pub fn embed_symmetric(p: &RectAmpProblem, stream: RngStream) -> Result<EmbeddedProblem> {
    let (m, n) = p.w.shape();
    let a = sample_wigner(&EnsembleSpec::goe(m), stream.substream(0))?;
    let b = sample_wigner(&EnsembleSpec::goe(n), stream.substream(1))? * (n as f64 / m as f64).sqrt();
    let mut w = DMatrix::zeros(m + n, m + n);
    w.view_mut((0, 0), (m, m)).copy_from(&a);
    w.view_mut((0, m), (m, n)).copy_from(&p.w);
    w.view_mut((m, 0), (n, m)).copy_from(&p.w.transpose());
    w.view_mut((m, m), (n, n)).copy_from(&b);
    w /= scale(m, n);

    let mut u1 = DVector::zeros(m + n);
    u1.rows_mut(m, n).copy_from(&(&p.u1 * scale(m, n)));

    let mut f_seq: Vec<DynDenoiser> = Vec::new();
    for (t, f) in p.f_seq.iter().enumerate() {
        f_seq.push(Arc::new(EmbeddedOdd { f: f.clone(), m, n }));
        match p.g_seq.get(t) {
            Some(g) => f_seq.push(Arc::new(EmbeddedEven { g: g.clone(), m, n })),
            None => break,
        }
    }
    Ok(EmbeddedProblem { sym: SymmetricAmpProblem { w, u1, f_seq }, m, n })
}

/// Maps rectangular coefficients to the embedded ones:
/// `b^sym_{2t−1,2s} = √(m/(m+n)) b_ts` and `b^sym_{2t,2s−1} = √(m/(m+n)) a_ts`.
pub fn embed_schedule(rect: &OnsagerSchedule, m: usize, n: usize) -> OnsagerSchedule {
    let c = 1.0 / scale(m, n);
    let mut out = OnsagerSchedule::new(rect.provenance);
    for (&(t, s), &v) in &rect.b {
        out.set_b(2 * t - 1, 2 * s, c * v, c * rect.b_se[&(t, s)]);
    }
    for (&(t, s), &v) in &rect.a {
        out.set_b(2 * t, 2 * s - 1, c * v, c * rect.a_se[&(t, s)]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{latest, run_asymmetric_amp, run_symmetric_amp, Empirical, Onsager};
    use super::*;
    use crate::denoisers::{ScalarFn, Separable};
    use crate::ensembles::{sample_ginibre, EntryDist};
    use crate::state_evolution::Provenance;

    fn rect(m: usize, n: usize, dist: EntryDist, seed: u64) -> RectAmpProblem {
        let w = sample_ginibre(&EnsembleSpec::ginibre(m, n, dist), RngStream::new(seed, 0)).unwrap();
        let u1 = DVector::from_fn(n, |i, _| 1.0 + ((i * 3) as f64).sin());
        RectAmpProblem {
            w,
            u1,
            f_seq: vec![latest(Separable(ScalarFn::Mix { alpha: 0.3, lambda: 0.5 })); 3],
            g_seq: vec![latest(Separable(ScalarFn::SoftThreshold { lambda: 0.2 })); 3],
        }
    }

    fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).norm() / a.norm().max(1e-300)
    }

    #[test]
    fn embedding_reproduces_rectangular_iterates() {
        for dist in [EntryDist::Gaussian, EntryDist::Rademacher] {
            let p = rect(60, 40, dist, 1);
            let emp = Onsager::Empirical(Empirical::new(RngStream::new(0, 0)));
            let rt = run_asymmetric_amp(&p, &emp, 3).unwrap();
            let e = embed_symmetric(&p, RngStream::new(2, 0)).unwrap();
            let st = run_symmetric_amp(&e.sym, &emp, EmbeddedProblem::sym_iterations(3)).unwrap();
            for t in 1..=3 {
                assert!(rel(&rt.z[t - 1], &e.z(&st, t)) <= 1e-8);
                assert!(rel(&rt.y[t - 1], &e.y(&st, t)) <= 1e-8);
                assert!(rel(&rt.u[t - 1], &e.u(&st, t)) <= 1e-12);
                assert!(rel(&rt.v[t - 1], &e.v(&st, t)) <= 1e-8);
            }
        }
    }

    #[test]
    fn coefficient_relation() {
        let (m, n) = (60, 40);
        let p = rect(m, n, EntryDist::Gaussian, 3);
        let emp = Onsager::Empirical(Empirical::new(RngStream::new(0, 0)));
        let rt = run_asymmetric_amp(&p, &emp, 3).unwrap();
        let e = embed_symmetric(&p, RngStream::new(4, 0)).unwrap();
        let st = run_symmetric_amp(&e.sym, &emp, 6).unwrap();
        let c = (m as f64 / (m + n) as f64).sqrt();
        for t in 2..=3 {
            let b_rect = rt.b[t - 1].iter().find(|x| x.0 == t - 1).unwrap().1;
            let b_sym = st.b[2 * t - 2].iter().find(|x| x.0 == 2 * (t - 1)).unwrap().1;
            assert!((b_sym - c * b_rect).abs() <= 1e-12 * b_rect.abs().max(1.0), "{b_sym} vs {b_rect}");
        }
        for t in 1..=3 {
            let a_rect = rt.a[t - 1].iter().find(|x| x.0 == t).unwrap().1;
            let a_sym = st.b[2 * t - 1].iter().find(|x| x.0 == 2 * t - 1).unwrap().1;
            assert!((a_sym - c * a_rect).abs() <= 1e-12 * a_rect.abs().max(1.0));
        }
    }

    #[test]
    fn mapped_schedule_drives_embedded_run() {
        let (m, n) = (30, 50);
        let p = rect(m, n, EntryDist::Uniform, 5);
        let emp = Onsager::Empirical(Empirical::new(RngStream::new(0, 0)));
        let rt = run_asymmetric_amp(&p, &emp, 3).unwrap();
        let mut sch = OnsagerSchedule::new(Provenance::EstimatedFromData);
        for t in 1..=3 {
            for &(s, v) in &rt.b[t - 1] {
                sch.set_b(t, s, v, 0.0);
            }
            for &(s, v) in &rt.a[t - 1] {
                sch.set_a(t, s, v, 0.0);
            }
        }
        let e = embed_symmetric(&p, RngStream::new(6, 0)).unwrap();
        let st = run_symmetric_amp(&e.sym, &Onsager::Schedule(&embed_schedule(&sch, m, n)), 6).unwrap();
        for t in 1..=3 {
            assert!(rel(&rt.z[t - 1], &e.z(&st, t)) <= 1e-8);
            assert!(rel(&rt.y[t - 1], &e.y(&st, t)) <= 1e-8);
        }
    }

    #[test]
    fn initialization_block() {
        let (m, n) = (10, 7);
        let p = rect(m, n, EntryDist::Gaussian, 7);
        let e = embed_symmetric(&p, RngStream::new(8, 0)).unwrap();
        let c = ((m + n) as f64 / m as f64).sqrt();
        assert!(e.sym.u1.rows(0, m).iter().all(|&v| v == 0.0));
        assert!((e.sym.u1.rows(m, n) - &p.u1 * c).amax() < 1e-15);
        let w = &e.sym.w;
        assert!((w - w.transpose()).amax() == 0.0);
    }
}
