//! Stability verification of a gain and comparison of two gains.

use nalgebra::{Complex, DMatrix, RowDVector};
use thiserror::Error;

use crate::model::PwaSystem;
use crate::sim::{simulate, SimConfig, SimError, Trajectory};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("gain must have length {expected}, got {got}")]
    GainLength { expected: usize, got: usize },
    #[error("S is not positive definite")]
    NotPositiveDefinite,
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Spectra of the per-mode error dynamics matrices `A_i + B K`.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    /// One eigenvalue list per mode, sorted by real part ascending.
    pub mode_eigenvalues: Vec<Vec<Complex<f64>>>,
    pub max_real_part: f64,
    pub hurwitz: bool,
}

impl StabilityReport {
    /// Margin against the prescribed decay: positive when every eigenvalue's
    /// real part is below -alpha1/2.
    pub fn decay_margin(&self, alpha1: f64) -> f64 {
        -0.5 * alpha1 - self.max_real_part
    }
}

/// Closed-loop matrix `A_i + B K` for mode index i (1-based).
pub fn closed_loop_matrix(sys: &PwaSystem, gain: &RowDVector<f64>, mode: usize) -> DMatrix<f64> {
    &sys.modes[mode - 1].a + &sys.input * gain
}

/// Eigenvalues of `A_i + B K` for every mode.
pub fn closed_loop_eigenvalues(
    sys: &PwaSystem,
    gain: &RowDVector<f64>,
) -> Result<StabilityReport, AnalysisError> {
    if gain.len() != sys.n {
        return Err(AnalysisError::GainLength {
            expected: sys.n,
            got: gain.len(),
        });
    }
    let mut mode_eigenvalues = Vec::with_capacity(sys.modes.len());
    let mut max_real_part = f64::NEG_INFINITY;
    for mode in &sys.modes {
        let m = closed_loop_matrix(sys, gain, mode.index);
        let mut eigs: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
        eigs.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        max_real_part = max_real_part.max(eigs.last().map(|e| e.re).unwrap_or(f64::NEG_INFINITY));
        mode_eigenvalues.push(eigs);
    }
    Ok(StabilityReport {
        mode_eigenvalues,
        max_real_part,
        hurwitz: max_real_part < 0.0,
    })
}

/// Quadratic certificate trace `V(t) = e(t)^T S^-1 e(t)` along a trajectory.
#[derive(Debug, Clone)]
pub struct LyapunovTrace {
    pub values: Vec<f64>,
    /// Largest increase between consecutive samples (0 if monotone).
    pub max_increase: f64,
}

pub fn lyapunov_trace(traj: &Trajectory, s: &DMatrix<f64>) -> Result<LyapunovTrace, AnalysisError> {
    let chol = s
        .clone()
        .cholesky()
        .ok_or(AnalysisError::NotPositiveDefinite)?;
    let values: Vec<f64> = traj
        .errors
        .iter()
        .map(|e| {
            let sinv_e = chol.solve(e);
            e.dot(&sinv_e)
        })
        .collect();
    let max_increase = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    Ok(LyapunovTrace {
        values,
        max_increase,
    })
}

/// Settling and error-size metrics of one run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SettlingMetrics {
    /// First time after which the error norm stays below the tolerance;
    /// `None` when the horizon is exceeded without settling.
    pub settling_time: Option<f64>,
    /// Mean of the squared error norm over the horizon.
    pub variance: f64,
    pub final_error_norm: f64,
    pub tolerance: f64,
}

pub fn settling_metrics(traj: &Trajectory, tolerance: f64) -> Result<SettlingMetrics, AnalysisError> {
    if !(tolerance > 0.0) {
        return Err(AnalysisError::BadTolerance(tolerance));
    }
    let norms = traj.error_norms();
    let variance = norms.iter().map(|n| n * n).sum::<f64>() / norms.len().max(1) as f64;
    let final_error_norm = *norms.last().unwrap_or(&0.0);
    let last_violation = norms.iter().rposition(|&n| n >= tolerance);
    let settling_time = match last_violation {
        None => Some(0.0),
        Some(idx) if idx + 1 < norms.len() => Some(traj.times[idx + 1]),
        Some(_) => None,
    };
    Ok(SettlingMetrics {
        settling_time,
        variance,
        final_error_norm,
        tolerance,
    })
}

/// Side-by-side metrics of two gains on the identical scenario.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CompareReport {
    pub gain_a: Vec<f64>,
    pub gain_b: Vec<f64>,
    pub metrics_a: SettlingMetrics,
    pub metrics_b: SettlingMetrics,
    /// Which gain produced the larger error variance ("a", "b", or "tie");
    /// recorded as an observation.
    pub larger_variance: String,
}

/// Runs both gains through the same scenario (same initial conditions,
/// drive, step, horizon) and reports settling metrics for each.
///
/// The default tolerance is 1% of the initial error norm.
pub fn compare_gains(
    sys: &PwaSystem,
    base: &SimConfig,
    gain_a: &[f64],
    gain_b: &[f64],
    tolerance: Option<f64>,
) -> Result<CompareReport, AnalysisError> {
    let mut cfg_a = base.clone();
    cfg_a.gain = gain_a.to_vec();
    let mut cfg_b = base.clone();
    cfg_b.gain = gain_b.to_vec();
    let traj_a = simulate(sys, &cfg_a)?;
    let traj_b = simulate(sys, &cfg_b)?;
    let e0 = traj_a.errors.first().map(|e| e.norm()).unwrap_or(0.0);
    let tol = tolerance.unwrap_or(0.01 * e0.max(f64::MIN_POSITIVE));
    let metrics_a = settling_metrics(&traj_a, tol)?;
    let metrics_b = settling_metrics(&traj_b, tol)?;
    let larger_variance = if metrics_a.variance > metrics_b.variance {
        "a"
    } else if metrics_b.variance > metrics_a.variance {
        "b"
    } else {
        "tie"
    };
    Ok(CompareReport {
        gain_a: gain_a.to_vec(),
        gain_b: gain_b.to_vec(),
        metrics_a,
        metrics_b,
        larger_variance: larger_variance.to_string(),
    })
}

/// The two published gains used by the comparison scenarios.
pub fn published_gain_primary() -> Vec<f64> {
    vec![-1700.3, -400.2, 783.0, -238.9]
}

pub fn published_gain_alternative() -> Vec<f64> {
    vec![-35.2260, -6.5654, -12.1954, -9.8635]
}
