use std::sync::Arc;

use amp_lab::amp::{change_of_variables_check, run_sensing_amp, Empirical, SensingOnsager, SensingProblem};
use amp_lab::denoisers::{ScalarFn, Separable, SpectralSpec, Svt, VectorMap};
use amp_lab::ensembles::{gaussian_noise, sample_ginibre, sample_signal, EnsembleSpec, EntryDist, RngStream, SignalKind, SignalSpec, SvDist};
use amp_lab::state_evolution::{se_scalar_sensing, McConfig};

fn sparse(n: usize, seed: u64) -> nalgebra::DVector<f64> {
    let spec = SignalSpec { kind: SignalKind::Sparse { density: 0.1, amplitude: EntryDist::Gaussian }, dim: n };
    sample_signal(&spec, RngStream::new(seed, 1)).unwrap().theta
}

#[test]
fn soft_threshold_sensing_tracks_state_evolution() {
    let (m, n, t) = (1000, 2000, 5);
    let theta = sparse(n, 0);
    let e = gaussian_noise(m, 0.05, RngStream::new(0, 2));
    let eta: Vec<Arc<dyn VectorMap>> = vec![Arc::new(Separable(ScalarFn::SoftThreshold { lambda: 0.3 })); t];
    let se = se_scalar_sensing(&theta, &e, &eta, t, None, &McConfig::new(RngStream::new(0, 3)).with_samples(100)).unwrap();
    let mut mean = vec![0.0; t];
    let seeds = 6;
    for s in 0..seeds {
        let w = sample_ginibre(&EnsembleSpec::ginibre(m, n, EntryDist::Rademacher), RngStream::new(s, 4)).unwrap();
        let p = SensingProblem::new(w, theta.clone(), e.clone(), eta.clone()).unwrap();
        let tr = run_sensing_amp(&p, &SensingOnsager::Divergence(Empirical::new(RngStream::new(s, 5))), t).unwrap();
        for i in 0..t {
            mean[i] += tr.mse[i] / seeds as f64;
        }
    }
    for i in 0..t {
        let rel = (mean[i] - se.predicted_mse[i]).abs() / se.predicted_mse[i];
        assert!(rel < 0.1, "t = {}: {} vs {}", i + 1, mean[i], se.predicted_mse[i]);
    }
}

#[test]
fn change_of_variables_with_probe_divergence() {
    let (rows, cols) = (6, 8);
    let n = rows * cols;
    let m = 40;
    let spec = SignalSpec { kind: SignalKind::LowRank { rows, cols, rank: 2, sv: SvDist::Uniform { low: 1.0, high: 3.0 } }, dim: n };
    let theta = sample_signal(&spec, RngStream::new(1, 1)).unwrap().theta;
    let w = sample_ginibre(&EnsembleSpec::ginibre(m, n, EntryDist::Uniform), RngStream::new(1, 2)).unwrap();
    let e = gaussian_noise(m, 0.05, RngStream::new(1, 3));
    let svt: Arc<dyn VectorMap> = Arc::new(Svt::new(SpectralSpec { rows, cols, lambda: 0.1, shift: None }).unwrap());
    let p = SensingProblem::new(w, theta, e, vec![svt; 3]).unwrap();
    let dev = change_of_variables_check(&p, &SensingOnsager::Divergence(Empirical::new(RngStream::new(1, 4))), 3).unwrap();
    assert!(dev <= 1e-8, "{dev}");
}

#[test]
fn fixed_onsager_schedule_is_used_verbatim() {
    let (m, n) = (30, 50);
    let theta = sparse(n, 2);
    let w = sample_ginibre(&EnsembleSpec::ginibre(m, n, EntryDist::Gaussian), RngStream::new(2, 2)).unwrap();
    let e = gaussian_noise(m, 0.05, RngStream::new(2, 3));
    let eta: Vec<Arc<dyn VectorMap>> = vec![Arc::new(Separable(ScalarFn::SoftThreshold { lambda: 0.2 })); 3];
    let p = SensingProblem::new(w, theta, e, eta).unwrap();
    let tr = run_sensing_amp(&p, &SensingOnsager::Fixed(vec![0.0, 0.25, 0.5]), 3).unwrap();
    let bs: Vec<f64> = tr.b.iter().map(|v| v[0].1).collect();
    assert_eq!(bs, vec![0.0, 0.25, 0.5]);
    assert!(run_sensing_amp(&p, &SensingOnsager::Fixed(vec![0.0]), 3).is_err());
}
