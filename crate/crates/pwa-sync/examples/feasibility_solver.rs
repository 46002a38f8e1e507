//! Uses the feasibility solver directly on a small hand-built strict LMI
//! system, then checks the certificate independently.

use nalgebra::DMatrix;
use pwa_sync::sdp::{
    check_certificate, solve, AffineMatrixExpr, FeasibilityProblem, SolveOptions, VarSpec,
};

fn main() {
    // find v, w with:  [[v, 1], [1, w]] < 0  and  v + w >= -3
    let block1 = AffineMatrixExpr::new(
        "indefinite-corner",
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        vec![
            (0, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])),
            (1, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])),
        ],
    )
    .unwrap();
    // -(v + w) - 3 <= -margin
    let block2 = AffineMatrixExpr::new(
        "sum-floor",
        DMatrix::from_element(1, 1, -3.0),
        vec![
            (0, DMatrix::from_element(1, 1, -1.0)),
            (1, DMatrix::from_element(1, 1, -1.0)),
        ],
    )
    .unwrap();

    let prob = FeasibilityProblem {
        vars: vec![VarSpec::free("v", 0.0), VarSpec::free("w", 0.0)],
        blocks: vec![block1, block2],
        margin: 1e-6,
    };

    let outcome = solve(&prob, &SolveOptions::default()).unwrap();
    println!("status: {:?}", outcome.status);
    println!("assignment: v = {:.4}, w = {:.4}", outcome.assignment[0], outcome.assignment[1]);
    println!("worst margin: {:.4e} after {} iterations", outcome.worst_margin, outcome.iterations);

    let report = check_certificate(&prob, &outcome.assignment, prob.margin).unwrap();
    println!("independent certificate check: pass = {}", report.pass);
    for (label, margin) in &report.block_margins {
        println!("  {label}: max eigenvalue {margin:.4e}");
    }
}
