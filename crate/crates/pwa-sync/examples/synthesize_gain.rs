//! Runs the full LMI synthesis on the reference scenario and prints the
//! resulting gain with its certificate margins.

use pwa_sync::lmi::{synthesize, SynthesisConfig};
use pwa_sync::model::{build_coupled_system, Convention, MassSpringParams};
use pwa_sync::sdp::SolveStatus;

fn main() {
    let sys = build_coupled_system(&MassSpringParams::reference(), Convention::Physical).unwrap();
    let cfg = SynthesisConfig::default();

    let start = std::time::Instant::now();
    let result = synthesize(&sys, &cfg).unwrap();
    println!("status: {:?} ({:.2?})", result.status, start.elapsed());
    println!("multiplier used: {:?}", result.multiplier_used);
    println!("solver iterations: {}", result.iterations);
    println!("worst block margin: {:.3e}", result.worst_margin);

    if result.status == SolveStatus::Feasible {
        let k = result.gain.as_ref().unwrap();
        println!("gain K = {}", k);
        println!("S = {}", result.vars.s);
        for (label, margin) in &result.margins {
            println!("  {label}: max eigenvalue {margin:.3e}");
        }
        let report = pwa_sync::analysis::closed_loop_eigenvalues(&sys, k).unwrap();
        println!("closed-loop max real part: {:.6e}", report.max_real_part);
    }
}
