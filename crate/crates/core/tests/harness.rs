use amp_lab::harness::{
    records_to_csv, run_experiment, tensor_checks, universality_compare, DenoiserConfig, ExperimentConfig, ExperimentKind,
    RunOptions, SignalConfig, TensorChecksConfig, RECORD_CSV_HEADER,
};
use amp_lab::Error;

fn small_fig1() -> ExperimentConfig {
    let mut c = ExperimentConfig::preset(ExperimentKind::Fig1Local);
    c.dims.rows = Some(10);
    c.dims.cols = Some(12);
    c.seeds = Some(vec![3, 5, 8]);
    c.iterations = Some(3);
    c.mc.se_draws = 8;
    c
}

#[test]
fn serial_csv_is_byte_identical() {
    let c = small_fig1();
    let a = run_experiment(&c, RunOptions { serial: true }).unwrap().records_csv().unwrap();
    let b = run_experiment(&c, RunOptions { serial: true }).unwrap().records_csv().unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with(RECORD_CSV_HEADER));
}

#[test]
fn records_are_ordered_and_self_consistent() {
    let out = run_experiment(&small_fig1(), RunOptions::default()).unwrap();
    let keys: Vec<(String, u64, usize)> = out.records.iter().map(|r| (r.ensemble.clone(), r.seed, r.t)).collect();
    let mut want = Vec::new();
    for e in ["gaussian", "rademacher"] {
        for s in [3, 5, 8] {
            for t in 1..=3 {
                want.push((e.to_string(), s, t));
            }
        }
    }
    assert_eq!(keys, want);
    for r in &out.records {
        assert!(r.mse >= 0.0);
        assert_eq!(r.gap, (r.mse - r.se_predicted).abs());
    }
}

#[test]
fn zero_signal_and_noise_give_zero_error() {
    let mut c = small_fig1();
    c.signal = Some(SignalConfig::Zero);
    c.noise_std = 0.0;
    let out = run_experiment(&c, RunOptions::default()).unwrap();
    assert!(out.records.iter().all(|r| r.mse == 0.0 && r.se_predicted == 0.0));
}

#[test]
fn same_ensemble_twice_is_rejected_and_single_ensemble_cannot_compare() {
    let mut c = small_fig1();
    c.ensembles = Some(vec![amp_lab::ensembles::EntryDist::Gaussian; 2]);
    assert!(matches!(c.resolve(), Err(Error::Config { .. })));
    c.ensembles = Some(vec![amp_lab::ensembles::EntryDist::Gaussian]);
    assert!(matches!(universality_compare(&c, RunOptions::default()), Err(Error::Config { .. })));
}

#[test]
fn identical_runs_have_zero_gap() {
    let c = small_fig1();
    let a = run_experiment(&c, RunOptions::default()).unwrap();
    let b = run_experiment(&c, RunOptions::default()).unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.mse - y.mse).abs(), 0.0);
    }
}

#[test]
fn config_errors_carry_the_field_path() {
    let text = "experiment = \"fig1_local\"\niterations = 4\n[mc]\nse_draws = -3\n";
    match ExperimentConfig::from_toml_str(text).unwrap_err() {
        Error::Config { field, .. } => assert_eq!(field, "mc.se_draws"),
        e => panic!("unexpected {e}"),
    }
    let text = "experiment = \"fig9\"\n";
    assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config { .. })));
    let mut c = small_fig1();
    c.denoiser = Some(DenoiserConfig::Svt { lambda: f64::NAN });
    match c.resolve().unwrap_err() {
        Error::Config { field, .. } => assert_eq!(field, "denoiser.lambda"),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let c = ExperimentConfig::from_file(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            c.resolve().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            count += 1;
        }
    }
    assert!(count >= 6);
}

#[test]
fn empty_tensor_battery_request() {
    let tc = TensorChecksConfig {
        trees: 0,
        cyclic: 0,
        triangle_n: 0,
        wick_instances: 0,
        wick_odd: 0,
        bcp_instances: 0,
        lemma_instances: 0,
        ..TensorChecksConfig::default()
    };
    assert!(tensor_checks(&tc).unwrap().is_empty());
}

#[test]
fn oversized_battery_is_a_budget_error() {
    let tc = TensorChecksConfig { max_n: 1 << 20, trees: 1, ..TensorChecksConfig::default() };
    match tensor_checks(&tc) {
        Err(Error::Budget(_)) => {}
        other => panic!("expected a budget error, got {other:?}"),
    }
}

#[test]
fn empty_record_list_is_header_only() {
    assert_eq!(records_to_csv(&[]).unwrap(), format!("{RECORD_CSV_HEADER}\n"));
}
