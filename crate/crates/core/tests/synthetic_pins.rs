//! Regression pins for the synthetic 4-cluster bundle. Values were
//! observed once from this implementation (seeds 0..3) and are held to
//! the stated slack.

use stackgcn::data::SyntheticSpec;
use stackgcn::experiment::{depth_sweep, run_experiment, DatasetConfig, ExperimentConfig, Method};

fn config(runs: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(DatasetConfig::synthetic(SyntheticSpec::four_clusters(0)));
    c.n_runs = runs;
    c.jobs = 4;
    c
}

#[test]
fn plain_gcn_accuracy_and_stacking_gap() {
    let (r, _) = run_experiment(&config(3)).unwrap();
    let raw = r.summary(Method::GcnRaw).unwrap().accuracy.mean;
    let stack = r.summary(Method::StackGcn).unwrap().accuracy.mean;
    assert!(raw >= 0.85, "gcn-raw {raw}");
    assert!((raw - 0.9000).abs() <= 0.05, "gcn-raw {raw}");
    // Observed: stacking trails the raw-feature GCN on this bundle.
    assert!((stack - raw - (-0.1313)).abs() <= 0.03, "gap {}", stack - raw);
}

#[test]
fn stacked_gcn_loses_less_accuracy_with_depth() {
    let d = depth_sweep(&config(3), &[2, 7], None).unwrap();
    let raw = d.drop_for(Method::GcnRaw).unwrap();
    let stack = d.drop_for(Method::StackGcn).unwrap();
    assert!(stack < raw, "drops: gcn-raw {raw}, sstagcn {stack}");
    assert!((raw - 0.075).abs() <= 0.03, "gcn-raw drop {raw}");
    assert!((stack - 0.025).abs() <= 0.03, "sstagcn drop {stack}");
}
