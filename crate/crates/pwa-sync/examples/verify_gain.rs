//! Checks the closed-loop spectra of both published gains under both
//! printed-value conventions.

use nalgebra::RowDVector;
use pwa_sync::analysis::{
    closed_loop_eigenvalues, published_gain_alternative, published_gain_primary,
};
use pwa_sync::model::{build_coupled_system, Convention, MassSpringParams};

fn main() {
    let params = MassSpringParams::reference();
    for convention in [Convention::Physical, Convention::Paper] {
        let sys = build_coupled_system(&params, convention).unwrap();
        for (name, gain) in [
            ("published", published_gain_primary()),
            ("alternative", published_gain_alternative()),
        ] {
            let k = RowDVector::from_row_slice(&gain);
            let report = closed_loop_eigenvalues(&sys, &k).unwrap();
            println!(
                "{convention:?} convention, {name} gain: hurwitz = {}, max Re = {:.4e}",
                report.hurwitz, report.max_real_part
            );
            for (mode, eigs) in report.mode_eigenvalues.iter().enumerate() {
                let fmt: Vec<String> = eigs
                    .iter()
                    .map(|e| format!("{:.4}{:+.4}i", e.re, e.im))
                    .collect();
                println!("  mode {}: {}", mode + 1, fmt.join(", "));
            }
        }
    }
}
