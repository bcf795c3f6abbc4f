use goursat_lab::fields::{catalog, MetricField};
use goursat_lab::goursat::{roundtrip_error, solve_goursat, trace_on_surface, GoursatConfig};
use goursat_lab::grid::{GridFunction, PeriodicGrid};
use goursat_lab::norms::hk_norm;
use goursat_lab::harness::{run_experiment, ExperimentConfig, RateFlag};
use goursat_lab::surface::CharacteristicSurface;

#[test]
fn config_text_drives_a_convergence_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default();
    c.apply_text("experiment = convergence\ncatalog = smooth1d\ngrid = 32, 64, 128\nT = 0.5\n").unwrap();
    c.output_dir = dir.path().to_path_buf();
    let out = run_experiment(&c).unwrap();
    assert!(out.passed(), "{:?}", out.assertions);
    let rates: Vec<serde_json::Value> = out.manifest["rates"].as_array().unwrap().clone();
    assert!(rates.iter().filter(|r| r["quantity"] == "u_l2").all(|r| r["flag"] == serde_json::json!(RateFlag::Ok)));
    let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
    assert!(energy.starts_with("# goursat-lab energy v1\n"));
}

#[test]
fn spacelike_roundtrip_is_first_order_in_lambda() {
    // on a spacelike surface the error shrinks with 1 − λ
    let entry = catalog("flat1d").unwrap();
    let grid = PeriodicGrid::new_1d(128);
    let surface = CharacteristicSurface::halfsine(&grid, &entry.metric);
    let v = GridFunction::from_fn(&grid, |x| (2.0 * x[0]).sin());
    let cfg = GoursatConfig { lambda_schedule: vec![0.5, 0.75, 0.875], ..GoursatConfig::default() };
    let r = solve_goursat(&v, &surface, &entry.metric, &entry.op, &cfg).unwrap();
    let errs: Vec<f64> = r.stages.iter().map(|s| s.roundtrip_l2).collect();
    assert!(errs.windows(2).all(|w| w[1] < 0.6 * w[0]), "{errs:?}");
    let e = roundtrip_error(&v, &r, &surface, &MetricField::flat(1)).unwrap();
    assert!((e.l2 - errs[2]).abs() < 1e-12);
    let trace = trace_on_surface(&r.trajectory, &surface).unwrap();
    assert!(hk_norm(&(&trace - &v), 0).unwrap() <= 1.0001 * e.l2 * hk_norm(&v, 0).unwrap());
}
