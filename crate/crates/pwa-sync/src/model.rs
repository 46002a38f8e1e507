//! Two-mode piecewise-affine model of two robots handling one object.
//!
//! The plant is a pair of masses joined by a spring-damper, with a one-sided
//! contact spring between the second mass and the environment. Contact makes
//! the dynamics piecewise affine: mode 1 is contact-free, mode 2 is in
//! contact. The vector field is continuous across the switching surface.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// State layout for the constructed 4-state system:
/// `[position of m1, velocity of m1, position of m2, velocity of m2]`.
pub type StateVector = DVector<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{name} must be positive (got {value})")]
    NonPositiveParam { name: &'static str, value: f64 },
    #[error("{name} must be finite")]
    NonFiniteParam { name: &'static str },
}

/// Physical constants of the two-robot mass-spring-damper analogue.
/// Defaults to the reference parameter set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MassSpringParams {
    /// Mass of the driven robot (kg).
    pub m1: f64,
    /// Mass of the carried object (kg).
    pub m2: f64,
    /// Damping between robot and object (N*s/m).
    pub c: f64,
    /// Damping between robot and ground (N*s/m).
    pub c1: f64,
    /// Stiffness between robot and object (N/m).
    pub k: f64,
    /// Contact stiffness between object and second robot (N/m).
    pub k2: f64,
    /// Contact offset: the object touches the second robot at position d2 (m).
    pub d2: f64,
}

impl Default for MassSpringParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl MassSpringParams {
    /// Reference parameter set used throughout the test scenarios:
    /// m1 = 100, m2 = 1, c = c1 = 2, k = k2 = 10, d2 = 0.01.
    pub fn reference() -> Self {
        Self {
            m1: 100.0,
            m2: 1.0,
            c: 2.0,
            c1: 2.0,
            k: 10.0,
            k2: 10.0,
            d2: 0.01,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positives = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("c", self.c),
            ("c1", self.c1),
            ("k", self.k),
            ("k2", self.k2),
        ];
        for (name, value) in positives {
            if !value.is_finite() {
                return Err(ModelError::NonFiniteParam { name });
            }
            if value <= 0.0 {
                return Err(ModelError::NonPositiveParam { name, value });
            }
        }
        if !self.d2.is_finite() {
            return Err(ModelError::NonFiniteParam { name: "d2" });
        }
        Ok(())
    }
}

/// Which printed convention to follow where the source material is
/// internally inconsistent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Physics-consistent choice: B = [0, 1/m1, 0, 0]^T and cells paired so
    /// mode 1 (no contact) owns {x3 < d2}.
    #[default]
    Physical,
    /// Literal printed values: B = [0, 1, 0, 0]^T and the printed H/h cell
    /// data paired with the printed mode indices.
    Paper,
}

/// One affine dynamics mode `x' = A x + B u + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    /// 1-based mode index.
    pub index: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Polyhedral cell `{x | H^T x + h < 0}` (componentwise).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralCell {
    /// n x r matrix; each column is one face normal.
    pub h_mat: DMatrix<f64>,
    /// r-vector of offsets.
    pub h_vec: DVector<f64>,
}

impl PolyhedralCell {
    pub fn num_faces(&self) -> usize {
        self.h_vec.len()
    }

    /// Componentwise membership test `H^T x + h < 0`.
    pub fn contains(&self, x: &StateVector) -> bool {
        let v = self.h_mat.transpose() * x + &self.h_vec;
        v.iter().all(|&c| c < 0.0)
    }
}

/// A piecewise-affine system: index-paired modes and cells sharing one
/// input column.
#[derive(Debug, Clone, PartialEq)]
pub struct PwaSystem {
    pub n: usize,
    pub modes: Vec<Mode>,
    pub cells: Vec<PolyhedralCell>,
    pub input: DVector<f64>,
    /// Index of the state coordinate the switch tests (2 for the
    /// constructed system, i.e. the position of m2).
    pub switch_coord: usize,
    /// Switching threshold: states with `x[switch_coord] < d2` are in
    /// mode 1, everything else in mode 2.
    pub d2: f64,
}

/// Builds the 4-state, 2-mode coupled system from physical parameters.
///
/// Mode 1 is contact-free (b1 = 0); mode 2 adds the contact spring k2 acting
/// on m2, shifting entry (4,3) by -k2/m2 and giving b2 = [0,0,0,k2*d2/m2].
/// Under [`Convention::Physical`] the input column is [0, 1/m1, 0, 0]^T;
/// under [`Convention::Paper`] it is the printed [0, 1, 0, 0]^T.
pub fn build_coupled_system(
    params: &MassSpringParams,
    convention: Convention,
) -> Result<PwaSystem, ModelError> {
    params.validate()?;
    let &MassSpringParams {
        m1,
        m2,
        c,
        c1,
        k,
        k2,
        d2,
    } = params;

    #[rustfmt::skip]
    let a1 = DMatrix::from_row_slice(4, 4, &[
        0.0,        1.0,              0.0,       0.0,
        -k / m1,    -(c + c1) / m1,   k / m1,    c / m1,
        0.0,        0.0,              0.0,       1.0,
        k / m2,     c / m2,           -k / m2,   -c / m2,
    ]);
    let mut a2 = a1.clone();
    a2[(3, 2)] = -(k + k2) / m2;

    let b1 = DVector::zeros(4);
    let b2 = DVector::from_vec(vec![0.0, 0.0, 0.0, k2 * d2 / m2]);

    let input = match convention {
        Convention::Physical => DVector::from_vec(vec![0.0, 1.0 / m1, 0.0, 0.0]),
        Convention::Paper => DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]),
    };

    let e3 = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, 0.0]);
    let (cell1, cell2) = match convention {
        // Mode 1 (no contact) owns {x3 < d2}: H1 = e3, h1 = -d2.
        // Mode 2 (contact) owns {x3 > d2}: H2 = -e3, h2 = d2.
        Convention::Physical => (
            PolyhedralCell {
                h_mat: e3.clone(),
                h_vec: DVector::from_vec(vec![-d2]),
            },
            PolyhedralCell {
                h_mat: -e3,
                h_vec: DVector::from_vec(vec![d2]),
            },
        ),
        // Printed values: H1 = e3 with h1 = d2, H2 = -e3 with h2 = -d2.
        Convention::Paper => (
            PolyhedralCell {
                h_mat: e3.clone(),
                h_vec: DVector::from_vec(vec![d2]),
            },
            PolyhedralCell {
                h_mat: -e3,
                h_vec: DVector::from_vec(vec![-d2]),
            },
        ),
    };

    Ok(PwaSystem {
        n: 4,
        modes: vec![
            Mode {
                index: 1,
                a: a1,
                b: b1,
            },
            Mode {
                index: 2,
                a: a2,
                b: b2,
            },
        ],
        cells: vec![cell1, cell2],
        input,
        switch_coord: 2,
        d2,
    })
}

/// Returns the 1-based index of the active mode at `x`.
///
/// Boundary states (x3 exactly d2) go to mode 2; the two vector fields agree
/// there, so the tie-break only affects the reported label. Mode selection is
/// always done on the physical partition of the x3 axis, regardless of which
/// H/h convention the system carries for synthesis.
pub fn mode_of(sys: &PwaSystem, x: &StateVector) -> usize {
    debug_assert!(x.iter().all(|v| v.is_finite()));
    if sys.modes.len() < 2 || x[sys.switch_coord] < sys.d2 {
        1
    } else {
        2
    }
}

/// Evaluates `A_m x + B u + b_m` with m the active mode at `x`.
pub fn vector_field(sys: &PwaSystem, x: &StateVector, u: f64) -> StateVector {
    let m = &sys.modes[mode_of(sys, x) - 1];
    &m.a * x + &sys.input * u + &m.b
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sys() -> PwaSystem {
        build_coupled_system(&MassSpringParams::reference(), Convention::Physical).unwrap()
    }

    #[test]
    fn reference_matrix_entries() {
        let s = sys();
        let a1 = &s.modes[0].a;
        let a2 = &s.modes[1].a;
        assert_eq!(a1[(1, 0)], -0.1); // -k/m1
        assert_eq!(a1[(1, 1)], -0.04); // -(c+c1)/m1
        assert_eq!(a1[(3, 0)], 10.0); // k/m2
        assert_eq!(a2[(3, 2)], -20.0); // -(k+k2)/m2
        assert_eq!(s.modes[1].b[3], 0.1); // k2*d2/m2
        assert_eq!(s.modes[0].b, DVector::zeros(4));
        assert_eq!(s.input[1], 0.01); // 1/m1
        let paper =
            build_coupled_system(&MassSpringParams::reference(), Convention::Paper).unwrap();
        assert_eq!(paper.input[1], 1.0);
    }

    #[test]
    fn integrator_rows_and_mode_difference() {
        let s = sys();
        for mode in &s.modes {
            assert_eq!(mode.a.row(0).clone_owned(), DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 0.0, 0.0]));
            assert_eq!(mode.a.row(2).clone_owned(), DMatrix::from_row_slice(1, 4, &[0.0, 0.0, 0.0, 1.0]));
        }
        let diff = &s.modes[1].a - &s.modes[0].a;
        let mut nonzero = 0;
        for i in 0..4 {
            for j in 0..4 {
                if diff[(i, j)] != 0.0 {
                    nonzero += 1;
                    assert_eq!((i, j), (3, 2));
                    assert_eq!(diff[(i, j)], -10.0); // -k2/m2
                }
            }
        }
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = MassSpringParams::reference();
        p.m1 = -1.0;
        assert!(matches!(
            build_coupled_system(&p, Convention::Physical),
            Err(ModelError::NonPositiveParam { name: "m1", .. })
        ));
        let mut p = MassSpringParams::reference();
        p.k = 0.0;
        assert!(build_coupled_system(&p, Convention::Physical).is_err());
        let mut p = MassSpringParams::reference();
        p.d2 = f64::NAN;
        assert!(build_coupled_system(&p, Convention::Physical).is_err());
    }

    #[test]
    fn mode_selection() {
        let s = sys();
        assert_eq!(mode_of(&s, &DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0])), 1);
        assert_eq!(mode_of(&s, &DVector::from_vec(vec![0.0, 0.0, 0.02, 0.0])), 2);
        // exact boundary goes to the contact mode
        assert_eq!(mode_of(&s, &DVector::from_vec(vec![0.0, 0.0, 0.01, 0.0])), 2);
    }

    #[test]
    fn membership_matches_cells() {
        let s = sys();
        for &x3 in &[-1.0, 0.0, 0.0099, 0.0101, 0.5] {
            let x = DVector::from_vec(vec![0.3, -0.2, x3, 0.7]);
            let m = mode_of(&s, &x);
            assert_eq!(m == 1, x3 < s.d2);
            assert!(s.cells[m - 1].contains(&x));
            assert!(!s.cells[2 - m].contains(&x));
        }
    }

    #[test]
    fn vector_field_examples() {
        let s = sys();
        let zero = DVector::zeros(4);
        assert_eq!(vector_field(&s, &zero, 0.0), zero);

        let d = vector_field(&s, &DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]), 0.0);
        assert_abs_diff_eq!(d, DVector::from_vec(vec![0.0, -0.1, 0.0, 10.0]), epsilon = 1e-15);

        let d = vector_field(&s, &DVector::from_vec(vec![0.0, 0.0, 0.02, 0.0]), 0.0);
        assert_abs_diff_eq!(d, DVector::from_vec(vec![0.0, 0.002, 0.0, -0.3]), epsilon = 1e-15);
    }

    #[test]
    fn boundary_continuity_randomized() {
        use rand::{Rng, SeedableRng};
        let s = sys();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let mut x = DVector::from_fn(4, |_, _| rng.gen_range(-10.0..10.0));
            x[2] = s.d2;
            let u: f64 = rng.gen_range(-5.0..5.0);
            let f1 = &s.modes[0].a * &x + &s.input * u + &s.modes[0].b;
            let f2 = &s.modes[1].a * &x + &s.input * u + &s.modes[1].b;
            assert_abs_diff_eq!(f1, f2, epsilon = 1e-12);
        }
    }
}
