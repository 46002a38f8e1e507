//! Strict-LMI feasibility for blocks affine in scalar decision variables.
//!
//! A problem is a list of symmetric matrix expressions, each affine in a
//! shared set of scalar variables with optional box bounds. Feasibility means
//! every block has maximum eigenvalue at most `-margin` and every bound
//! holds. The solver minimizes the worst eigenvalue margin by descent on a
//! log-sum-exp smoothing of the max eigenvalue, with a decreasing
//! temperature schedule; certificates are re-checked by an independent
//! eigenvalue pass.

mod jacobi;

pub use jacobi::{max_eigenvalue, sym_eig, SymEig};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("assignment is missing variable id {0}")]
    MissingVariable(usize),
    #[error("coefficient for variable {var} in block '{block}' is not symmetric")]
    AsymmetricCoefficient { block: String, var: usize },
    #[error("block '{block}': coefficient for variable {var} has size {got}, expected {expected}")]
    SizeMismatch {
        block: String,
        var: usize,
        got: usize,
        expected: usize,
    },
    #[error("block '{block}' references undeclared variable id {var}")]
    UndeclaredVariable { block: String, var: usize },
    #[error("malformed problem: {0}")]
    Malformed(String),
}

/// One scalar decision variable with optional box bounds.
#[derive(Debug, Clone)]
pub struct VarSpec {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Deterministic starting value (clamped to the box).
    pub init: f64,
    /// Restarts rescale the initial value of flagged variables.
    pub scale_on_restart: bool,
}

impl VarSpec {
    pub fn free(name: impl Into<String>, init: f64) -> Self {
        Self {
            name: name.into(),
            lower: None,
            upper: None,
            init,
            scale_on_restart: false,
        }
    }

    pub fn upper_bounded(name: impl Into<String>, upper: f64, init: f64) -> Self {
        Self {
            name: name.into(),
            lower: None,
            upper: Some(upper),
            init,
            scale_on_restart: false,
        }
    }

    fn clamp(&self, v: f64) -> f64 {
        let mut v = v;
        if let Some(lo) = self.lower {
            v = v.max(lo);
        }
        if let Some(hi) = self.upper {
            v = v.min(hi);
        }
        v
    }
}

/// Symmetric matrix expression `constant + sum_i value_i * coeff_i`.
#[derive(Debug, Clone)]
pub struct AffineMatrixExpr {
    pub label: String,
    pub size: usize,
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

const SYM_TOL: f64 = 1e-9;

impl AffineMatrixExpr {
    /// Validates sizes and symmetry; coefficients are stored symmetrized.
    pub fn new(
        label: impl Into<String>,
        constant: DMatrix<f64>,
        terms: Vec<(usize, DMatrix<f64>)>,
    ) -> Result<Self, SdpError> {
        let label = label.into();
        let size = constant.nrows();
        if constant.ncols() != size {
            return Err(SdpError::NotSquare {
                rows: size,
                cols: constant.ncols(),
            });
        }
        let check_sym = |m: &DMatrix<f64>, var: usize| -> Result<(), SdpError> {
            if m.nrows() != size || m.ncols() != size {
                return Err(SdpError::SizeMismatch {
                    block: label.clone(),
                    var,
                    got: m.nrows(),
                    expected: size,
                });
            }
            let scale = m.norm().max(1.0);
            if (m - m.transpose()).norm() > SYM_TOL * scale {
                return Err(SdpError::AsymmetricCoefficient {
                    block: label.clone(),
                    var,
                });
            }
            Ok(())
        };
        check_sym(&constant, usize::MAX)?;
        for (var, coeff) in &terms {
            check_sym(coeff, *var)?;
        }
        let symmetrize = |m: DMatrix<f64>| {
            let t = m.transpose();
            (m + t).scale(0.5)
        };
        Ok(Self {
            label,
            size,
            constant: symmetrize(constant),
            terms: terms
                .into_iter()
                .map(|(v, c)| (v, symmetrize(c)))
                .collect(),
        })
    }
}

/// Evaluates an affine expression at an assignment (one value per variable
/// id). Exactly symmetric by construction.
pub fn eval_expr(expr: &AffineMatrixExpr, assignment: &[f64]) -> Result<DMatrix<f64>, SdpError> {
    let mut out = expr.constant.clone();
    for (var, coeff) in &expr.terms {
        let v = *assignment
            .get(*var)
            .ok_or(SdpError::MissingVariable(*var))?;
        out += coeff.scale(v);
    }
    Ok(out)
}

/// A strict-LMI feasibility instance.
#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    pub vars: Vec<VarSpec>,
    pub blocks: Vec<AffineMatrixExpr>,
    /// Strictness margin: feasible means all block max eigenvalues <= -margin.
    pub margin: f64,
}

impl FeasibilityProblem {
    pub fn validate(&self) -> Result<(), SdpError> {
        if self.blocks.is_empty() {
            return Err(SdpError::Malformed("no blocks".into()));
        }
        if !(self.margin > 0.0) {
            return Err(SdpError::Malformed("margin must be positive".into()));
        }
        for block in &self.blocks {
            for (var, _) in &block.terms {
                if *var >= self.vars.len() {
                    return Err(SdpError::UndeclaredVariable {
                        block: block.label.clone(),
                        var: *var,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub assignment: Vec<f64>,
    /// max over blocks of the max eigenvalue at `assignment`.
    pub worst_margin: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub temperatures: Vec<f64>,
    pub max_iters_per_temperature: usize,
    /// Initial values of `scale_on_restart` variables are multiplied by each
    /// scale in turn before declaring infeasibility.
    pub restart_scales: Vec<f64>,
    pub min_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            temperatures: vec![1.0, 0.1, 0.01, 0.001],
            max_iters_per_temperature: 50_000,
            restart_scales: vec![1.0, 10.0, 0.1],
            min_step: 1e-14,
        }
    }
}

/// True objective: worst (largest) block eigenvalue at `x`.
pub fn worst_margin(blocks: &[AffineMatrixExpr], x: &[f64]) -> Result<f64, SdpError> {
    let mut worst = f64::NEG_INFINITY;
    for block in blocks {
        worst = worst.max(max_eigenvalue(&eval_expr(block, x)?)?);
    }
    Ok(worst)
}

/// Log-sum-exp smoothing of the worst block eigenvalue at temperature `tau`.
/// Upper-bounds the true objective and converges to it as `tau -> 0`.
pub fn smoothed_objective(
    prob: &FeasibilityProblem,
    x: &[f64],
    tau: f64,
) -> Result<f64, SdpError> {
    let eigs: Vec<DVector<f64>> = prob
        .blocks
        .iter()
        .map(|b| Ok(sym_eig(&eval_expr(b, x)?)?.values))
        .collect::<Result<_, SdpError>>()?;
    Ok(lse(&eigs, tau))
}

fn lse(eigs: &[DVector<f64>], tau: f64) -> f64 {
    let top = eigs
        .iter()
        .flat_map(|v| v.iter())
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let z: f64 = eigs
        .iter()
        .flat_map(|v| v.iter())
        .map(|&l| ((l - top) / tau).exp())
        .sum();
    top + tau * z.ln()
}

struct Point {
    eigs: Vec<SymEig>,
    true_obj: f64,
}

fn evaluate(blocks: &[AffineMatrixExpr], x: &[f64]) -> Result<Point, SdpError> {
    let eigs: Vec<SymEig> = blocks
        .iter()
        .map(|b| sym_eig(&eval_expr(b, x)?))
        .collect::<Result<_, _>>()?;
    let true_obj = eigs
        .iter()
        .map(|e| e.values[e.values.len() - 1])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Point { eigs, true_obj })
}

fn smoothed_value(point: &Point, tau: f64) -> f64 {
    let vals: Vec<DVector<f64>> = point.eigs.iter().map(|e| e.values.clone()).collect();
    lse(&vals, tau)
}

/// Gradient of the smoothed objective via eigenvector outer products:
/// d lambda_k / d v_i = q_k^T C_i q_k.
fn smoothed_gradient(
    prob: &FeasibilityProblem,
    point: &Point,
    tau: f64,
) -> Vec<f64> {
    let top = point.true_obj;
    let mut z = 0.0;
    for eig in &point.eigs {
        for &l in eig.values.iter() {
            z += ((l - top) / tau).exp();
        }
    }
    let mut grad = vec![0.0; prob.vars.len()];
    for (block, eig) in prob.blocks.iter().zip(&point.eigs) {
        let n = block.size;
        for k in 0..n {
            let w = ((eig.values[k] - top) / tau).exp() / z;
            if w < 1e-16 {
                continue;
            }
            let q = eig.vectors.column(k);
            for (var, coeff) in &block.terms {
                let mut quad = 0.0;
                for i in 0..n {
                    let qi = q[i];
                    for j in 0..n {
                        quad += qi * coeff[(i, j)] * q[j];
                    }
                }
                grad[*var] += w * quad;
            }
        }
    }
    grad
}

fn project(vars: &[VarSpec], x: &mut [f64]) {
    for (spec, v) in vars.iter().zip(x.iter_mut()) {
        *v = spec.clamp(*v);
    }
}

/// Minimizes the worst block eigenvalue subject to the box bounds.
///
/// Deterministic: fixed initialization, fixed restart and temperature
/// schedules, no randomness. Declares feasibility as soon as the true
/// objective reaches `-margin`; otherwise reports the best margin found.
pub fn solve(prob: &FeasibilityProblem, opts: &SolveOptions) -> Result<SolveOutcome, SdpError> {
    prob.validate()?;
    let eps = prob.margin;

    let mut best_x: Vec<f64> = Vec::new();
    let mut best_obj = f64::INFINITY;
    let mut iterations = 0usize;

    for &restart_scale in &opts.restart_scales {
        let mut x: Vec<f64> = prob
            .vars
            .iter()
            .map(|v| {
                let init = if v.scale_on_restart {
                    v.init * restart_scale
                } else {
                    v.init
                };
                v.clamp(init)
            })
            .collect();

        let mut point = evaluate(&prob.blocks, &x)?;
        if point.true_obj < best_obj {
            best_obj = point.true_obj;
            best_x = x.clone();
        }
        if point.true_obj <= -eps {
            return Ok(SolveOutcome {
                status: SolveStatus::Feasible,
                assignment: x,
                worst_margin: point.true_obj,
                iterations,
            });
        }

        for &tau in &opts.temperatures {
            let mut step = 1.0;
            for _ in 0..opts.max_iters_per_temperature {
                iterations += 1;
                let grad = smoothed_gradient(prob, &point, tau);
                let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if gnorm == 0.0 {
                    break;
                }
                let f0 = smoothed_value(&point, tau);

                let mut accepted = false;
                while step * gnorm >= opts.min_step {
                    let mut trial: Vec<f64> = x
                        .iter()
                        .zip(&grad)
                        .map(|(xi, gi)| xi - step * gi)
                        .collect();
                    project(&prob.vars, &mut trial);
                    let moved: f64 = trial
                        .iter()
                        .zip(&x)
                        .zip(&grad)
                        .map(|((t, xi), gi)| gi * (xi - t))
                        .sum();
                    if moved <= 0.0 {
                        // projection cancelled the descent direction
                        break;
                    }
                    let trial_point = evaluate(&prob.blocks, &trial)?;
                    let f1 = smoothed_value(&trial_point, tau);
                    if f1 <= f0 - 1e-4 * moved {
                        x = trial;
                        point = trial_point;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }

                if point.true_obj < best_obj {
                    best_obj = point.true_obj;
                    best_x = x.clone();
                }
                if point.true_obj <= -eps {
                    return Ok(SolveOutcome {
                        status: SolveStatus::Feasible,
                        assignment: x,
                        worst_margin: point.true_obj,
                        iterations,
                    });
                }
                if !accepted {
                    break; // stalled at this temperature
                }
                step = (step * 2.0).min(1e6);
            }
        }
    }

    Ok(SolveOutcome {
        status: SolveStatus::Infeasible,
        assignment: best_x,
        worst_margin: best_obj,
        iterations,
    })
}

/// Per-block margins and bound checks, recomputed from scratch.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CertificateReport {
    pub block_margins: Vec<(String, f64)>,
    pub bound_violations: Vec<String>,
    pub pass: bool,
}

/// Recomputes every block's max eigenvalue and every box bound at an
/// assignment. Shares no state with [`solve`].
pub fn check_certificate(
    prob: &FeasibilityProblem,
    assignment: &[f64],
    margin: f64,
) -> Result<CertificateReport, SdpError> {
    let mut block_margins = Vec::with_capacity(prob.blocks.len());
    let mut pass = true;
    for block in &prob.blocks {
        let lam = max_eigenvalue(&eval_expr(block, assignment)?)?;
        if lam > -margin {
            pass = false;
        }
        block_margins.push((block.label.clone(), lam));
    }
    let mut bound_violations = Vec::new();
    for (spec, &v) in prob.vars.iter().zip(assignment) {
        if let Some(lo) = spec.lower {
            if v < lo {
                bound_violations.push(format!("{} = {v} below lower bound {lo}", spec.name));
            }
        }
        if let Some(hi) = spec.upper {
            if v > hi {
                bound_violations.push(format!("{} = {v} above upper bound {hi}", spec.name));
            }
        }
    }
    if !bound_violations.is_empty() {
        pass = false;
    }
    Ok(CertificateReport {
        block_margins,
        bound_violations,
        pass,
    })
}
