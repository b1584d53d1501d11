use std::path::Path;

use drgpb::config::Config;
use drgpb::experiment::{run_experiment, Window};

fn scenario_config() -> Config {
    Config::load(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/paper_sec4.json")).unwrap()
}

#[test]
fn matched_model_identifies_modes() {
    let cfg = scenario_config();
    let mut spec = cfg.experiment_spec(Some(100), Some(vec![0.0]), None).unwrap();
    spec.nominal_schedule = spec.true_schedule.clone();
    let batch = run_experiment(&spec, false).unwrap();
    let all = Window { name: "all".into(), start: 1, end: spec.horizon };
    let rate = batch.runs.iter().map(|r| r.metrics[0].window(&all).mode_rate_mu).sum::<f64>() / batch.runs.len() as f64;
    assert!(rate > 0.5, "argmax mu rate {rate}");
}

#[test]
fn batch_is_reproducible() {
    let cfg = scenario_config();
    let spec = cfg.experiment_spec(Some(8), Some(vec![0.0, 0.2]), Some(99)).unwrap();
    let a = run_experiment(&spec, false).unwrap();
    let b = run_experiment(&spec, false).unwrap();
    for (ra, rb) in a.runs.iter().zip(&b.runs) {
        assert_eq!(ra.trajectory, rb.trajectory);
        for (ma, mb) in ra.metrics.iter().zip(&rb.metrics) {
            assert_eq!(ma.sq_errors, mb.sq_errors);
        }
    }
}
