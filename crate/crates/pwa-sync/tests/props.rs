//! Property tests over the model partition, expression affinity, gain
//! extraction, and settling metrics.

use nalgebra::{DMatrix, DVector, RowDVector};
use proptest::prelude::*;
use pwa_sync::lmi::{build_problem, extract_gain, SynthesisConfig};
use pwa_sync::model::{build_coupled_system, mode_of, Convention, MassSpringParams};
use pwa_sync::sdp::eval_expr;

fn finite_state() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 4)
}

proptest! {
    #[test]
    fn partition_is_total_and_consistent(xs in finite_state()) {
        let sys = build_coupled_system(&MassSpringParams::reference(), Convention::Physical).unwrap();
        let x = DVector::from_row_slice(&xs);
        let m = mode_of(&sys, &x);
        prop_assert!(m == 1 || m == 2);
        prop_assert_eq!(m == 1, xs[2] < sys.d2);
        // deterministic
        prop_assert_eq!(m, mode_of(&sys, &x));
    }

    #[test]
    fn assembled_blocks_are_affine(
        seed_a in prop::collection::vec(-5.0f64..5.0, 30),
        seed_b in prop::collection::vec(-5.0f64..5.0, 30),
        theta in 0.0f64..1.0,
    ) {
        let sys = build_coupled_system(&MassSpringParams::reference(), Convention::Physical).unwrap();
        let (prob, _) = build_problem(
            &sys,
            &SynthesisConfig::default(),
            pwa_sync::lmi::MultiplierChoice::Identity,
        ).unwrap();
        let mix: Vec<f64> = seed_a.iter().zip(&seed_b)
            .map(|(a, b)| theta * a + (1.0 - theta) * b)
            .collect();
        for block in &prob.blocks {
            let ea = eval_expr(block, &seed_a).unwrap();
            let eb = eval_expr(block, &seed_b).unwrap();
            let em = eval_expr(block, &mix).unwrap();
            let lin = ea.scale(theta) + eb.scale(1.0 - theta);
            let scale = 1.0 + ea.norm() + eb.norm();
            prop_assert!((em - lin).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn gain_solve_residual_is_tiny(
        entries in prop::collection::vec(-2.0f64..2.0, 16),
        r_entries in prop::collection::vec(-100.0f64..100.0, 4),
    ) {
        let raw = DMatrix::from_row_slice(4, 4, &entries);
        let s = &raw * raw.transpose() + DMatrix::identity(4, 4);
        let r = RowDVector::from_row_slice(&r_entries);
        let k = extract_gain(&s, &r, 1e-9).unwrap();
        prop_assert!((&k * &s - &r).norm() <= 1e-10 * r.norm().max(1.0));
    }

    #[test]
    fn settling_time_monotone_in_tolerance(
        decay in 0.2f64..3.0,
        tol_lo in 1e-4f64..1e-2,
        factor in 1.5f64..100.0,
    ) {
        use pwa_sync::analysis::settling_metrics;
        use pwa_sync::sim::Trajectory;
        let n = 400;
        let dt = 0.02;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let errors: Vec<DVector<f64>> = times.iter()
            .map(|t| DVector::from_vec(vec![(-decay * t).exp(), 0.0, 0.0, 0.0]))
            .collect();
        let traj = Trajectory {
            times,
            master: vec![DVector::zeros(4); n],
            slave: vec![DVector::zeros(4); n],
            errors,
            drive: vec![0.0; n],
            control: vec![0.0; n],
            master_modes: vec![1; n],
            slave_modes: vec![1; n],
            diverged: false,
        };
        let lo = settling_metrics(&traj, tol_lo).unwrap();
        let hi = settling_metrics(&traj, tol_lo * factor).unwrap();
        match (lo.settling_time, hi.settling_time) {
            (Some(a), Some(b)) => prop_assert!(b <= a),
            (None, _) => {}
            (Some(_), None) => prop_assert!(false, "larger tolerance failed to settle"),
        }
    }
}
