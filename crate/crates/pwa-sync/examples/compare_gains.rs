//! Runs the two published gains through the identical scenario and compares
//! settling time, error variance, and final error.

use pwa_sync::analysis::{
    compare_gains, published_gain_alternative, published_gain_primary,
};
use pwa_sync::io::RunConfig;

fn main() {
    let cfg = RunConfig::default();
    let sys = cfg.build_system().unwrap();
    let base = cfg.simulation.with_gain(vec![0.0; sys.n]);
    let report = compare_gains(
        &sys,
        &base,
        &published_gain_primary(),
        &published_gain_alternative(),
        None,
    )
    .unwrap();

    for (name, m) in [("gain A", &report.metrics_a), ("gain B", &report.metrics_b)] {
        println!(
            "{name}: settling {:?} s, variance {:.4e}, final |e| {:.4e}",
            m.settling_time, m.variance, m.final_error_norm
        );
    }
    println!("larger error variance: gain {}", report.larger_variance);
}
