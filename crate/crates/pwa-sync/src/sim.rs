//! Closed-loop master-slave simulation with fixed-step RK4.
//!
//! Master and slave integrate as one stacked 8-dimensional system. The
//! active mode is re-evaluated at every RK4 stage point; the vector field is
//! continuous across the switching surface, so no event localization is
//! needed.

use nalgebra::{DVector, RowDVector};
use thiserror::Error;

use crate::model::{mode_of, vector_field, PwaSystem, StateVector};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Horizon (s).
    pub t_final: f64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    /// Drive amplitude A_d (N).
    pub amplitude: f64,
    /// Drive frequency (rad/s).
    pub omega: f64,
    /// Synchronization gain row.
    pub gain: Vec<f64>,
}

impl SimConfig {
    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        if !(self.dt > 0.0) {
            return Err(SimError::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.t_final <= self.dt {
            return Err(SimError::InvalidConfig(format!(
                "t_final must exceed dt, got {}",
                self.t_final
            )));
        }
        for (name, v) in [("x0", &self.x0), ("y0", &self.y0), ("gain", &self.gain)] {
            if v.len() != n {
                return Err(SimError::InvalidConfig(format!(
                    "{name} must have length {n}, got {}",
                    v.len()
                )));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(SimError::InvalidConfig(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }
}

/// Sampled closed-loop run. All series share one length and
/// `errors[k] = slave[k] - master[k]` exactly.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub master: Vec<StateVector>,
    pub slave: Vec<StateVector>,
    pub errors: Vec<StateVector>,
    pub drive: Vec<f64>,
    pub control: Vec<f64>,
    pub master_modes: Vec<usize>,
    pub slave_modes: Vec<usize>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn error_norms(&self) -> Vec<f64> {
        self.errors.iter().map(|e| e.norm()).collect()
    }
}

/// Sinusoidal master drive `u(t) = A_d sin(omega t)`.
pub fn drive_input(t: f64, amplitude: f64, omega: f64) -> f64 {
    amplitude * (omega * t).sin()
}

/// Slave input `v = u + K (y - x)`, the feedforward-plus-error-feedback form
/// that yields the synchronization error dynamics.
pub fn control_input(gain: &RowDVector<f64>, x: &StateVector, y: &StateVector, u: f64) -> f64 {
    u + (gain * (y - x))[0]
}

fn stacked_field(
    sys: &PwaSystem,
    gain: &RowDVector<f64>,
    t: f64,
    x: &StateVector,
    y: &StateVector,
    amplitude: f64,
    omega: f64,
) -> (StateVector, StateVector) {
    let u = drive_input(t, amplitude, omega);
    let v = control_input(gain, x, y, u);
    (vector_field(sys, x, u), vector_field(sys, y, v))
}

/// One classical 4-stage Runge-Kutta step on the stacked master/slave state.
pub fn rk4_step(
    sys: &PwaSystem,
    gain: &RowDVector<f64>,
    t: f64,
    dt: f64,
    x: &StateVector,
    y: &StateVector,
    amplitude: f64,
    omega: f64,
) -> Result<(StateVector, StateVector), SimError> {
    let (k1x, k1y) = stacked_field(sys, gain, t, x, y, amplitude, omega);
    let (k2x, k2y) = stacked_field(
        sys,
        gain,
        t + 0.5 * dt,
        &(x + k1x.scale(0.5 * dt)),
        &(y + k1y.scale(0.5 * dt)),
        amplitude,
        omega,
    );
    let (k3x, k3y) = stacked_field(
        sys,
        gain,
        t + 0.5 * dt,
        &(x + k2x.scale(0.5 * dt)),
        &(y + k2y.scale(0.5 * dt)),
        amplitude,
        omega,
    );
    let (k4x, k4y) = stacked_field(
        sys,
        gain,
        t + dt,
        &(x + k3x.scale(dt)),
        &(y + k3y.scale(dt)),
        amplitude,
        omega,
    );
    let next_x = x + (k1x + k2x.scale(2.0) + k3x.scale(2.0) + k4x).scale(dt / 6.0);
    let next_y = y + (k1y + k2y.scale(2.0) + k3y.scale(2.0) + k4y).scale(dt / 6.0);
    if next_x.iter().chain(next_y.iter()).any(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteState { t: t + dt });
    }
    Ok((next_x, next_y))
}

const DIVERGENCE_NORM: f64 = 1e9;

/// Integrates the closed loop over `[0, t_final]`, recording every step.
///
/// A state norm above 1e9 truncates the run and flags it as diverged.
pub fn simulate(sys: &PwaSystem, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    cfg.validate(sys.n)?;
    let gain = RowDVector::from_row_slice(&cfg.gain);
    let steps = (cfg.t_final / cfg.dt).round() as usize;

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        master: Vec::with_capacity(steps + 1),
        slave: Vec::with_capacity(steps + 1),
        errors: Vec::with_capacity(steps + 1),
        drive: Vec::with_capacity(steps + 1),
        control: Vec::with_capacity(steps + 1),
        master_modes: Vec::with_capacity(steps + 1),
        slave_modes: Vec::with_capacity(steps + 1),
        diverged: false,
    };

    let mut x = DVector::from_row_slice(&cfg.x0);
    let mut y = DVector::from_row_slice(&cfg.y0);

    for step in 0..=steps {
        let t = step as f64 * cfg.dt;
        let u = drive_input(t, cfg.amplitude, cfg.omega);
        let v = control_input(&gain, &x, &y, u);
        traj.times.push(t);
        traj.errors.push(&y - &x);
        traj.drive.push(u);
        traj.control.push(v);
        traj.master_modes.push(mode_of(sys, &x));
        traj.slave_modes.push(mode_of(sys, &y));
        traj.master.push(x.clone());
        traj.slave.push(y.clone());

        if x.norm() > DIVERGENCE_NORM || y.norm() > DIVERGENCE_NORM {
            traj.diverged = true;
            break;
        }
        if step < steps {
            let (nx, ny) = rk4_step(sys, &gain, t, cfg.dt, &x, &y, cfg.amplitude, cfg.omega)?;
            x = nx;
            y = ny;
        }
    }
    Ok(traj)
}
