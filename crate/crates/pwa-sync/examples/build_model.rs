//! Builds the two-mode coupled system and prints its matrices, cells, and
//! the vector field at a few states.

use nalgebra::DVector;
use pwa_sync::model::{
    build_coupled_system, mode_of, vector_field, Convention, MassSpringParams,
};

fn main() {
    let params = MassSpringParams::reference();
    let sys = build_coupled_system(&params, Convention::Physical).unwrap();

    println!("state dimension: {}", sys.n);
    println!("input column B^T = {}", sys.input.transpose());
    for (mode, cell) in sys.modes.iter().zip(&sys.cells) {
        println!("mode {}:", mode.index);
        println!("  A = {}", mode.a);
        println!("  b^T = {}", mode.b.transpose());
        println!(
            "  cell: H^T = {} h^T = {}",
            cell.h_mat.transpose(),
            cell.h_vec.transpose()
        );
    }

    for x3 in [0.0, 0.005, 0.01, 0.02] {
        let x = DVector::from_vec(vec![0.0, 0.0, x3, 0.0]);
        println!(
            "x3 = {x3}: mode {} | dx/dt = {}",
            mode_of(&sys, &x),
            vector_field(&sys, &x, 0.0).transpose()
        );
    }
}
