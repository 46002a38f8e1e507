//! Simulates the closed loop with the published synchronization gain and
//! writes the trajectory CSV plus a gnuplot script.

use pwa_sync::analysis::{published_gain_primary, settling_metrics};
use pwa_sync::io::{plot_script, trajectory_csv, write_atomic, RunConfig};
use pwa_sync::sim::simulate;

fn main() {
    let cfg = RunConfig::default();
    let sys = cfg.build_system().unwrap();
    let sim_cfg = cfg.simulation.with_gain(published_gain_primary());
    let traj = simulate(&sys, &sim_cfg).unwrap();

    let e0 = traj.errors[0].norm();
    let metrics = settling_metrics(&traj, 0.01 * e0).unwrap();
    println!("initial error norm: {e0:.4}");
    println!("final error norm:   {:.4e}", metrics.final_error_norm);
    println!("settling time (1%): {:?} s", metrics.settling_time);

    let out = std::path::Path::new("trajectory.csv");
    write_atomic(out, &trajectory_csv(&traj)).unwrap();
    write_atomic(std::path::Path::new("trajectory.gp"), &plot_script("trajectory.csv")).unwrap();
    println!("wrote trajectory.csv and trajectory.gp (run: gnuplot trajectory.gp)");
}
