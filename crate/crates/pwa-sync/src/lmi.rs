//! Assembly of the synchronization LMIs and gain extraction.
//!
//! For every ordered mode pair (i, j) two strict LMI blocks are built, both
//! affine in the shared decision variables S (symmetric), R (row), and the
//! per-pair multipliers E, F (diagonal negative), beta, xi (negative
//! scalars). A feasible assignment certifies exponential decay of the
//! master-slave error at rate alpha1, and the gain is recovered as
//! K = R S^-1.

use nalgebra::{DMatrix, DVector, RowDVector};
use thiserror::Error;

use crate::model::{PolyhedralCell, PwaSystem};
use crate::sdp::{
    check_certificate, solve, AffineMatrixExpr, FeasibilityProblem, SdpError, SolveOptions,
    SolveStatus, VarSpec,
};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("system must have at least one mode")]
    NoModes,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("S is not positive definite (min eigenvalue {min_eig} < {floor})")]
    NotPositiveDefinite { min_eig: f64, floor: f64 },
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// Per-pair constant data entering the LMIs.
#[derive(Debug, Clone)]
pub struct PairData {
    /// 1-based mode indices (slave mode i, master mode j).
    pub i: usize,
    pub j: usize,
    /// A_i - A_j.
    pub a_diff: DMatrix<f64>,
    /// b_i - b_j.
    pub b_diff: DVector<f64>,
    pub cell_i: PolyhedralCell,
    pub cell_j: PolyhedralCell,
}

/// All ordered pairs (i, j), including i = j.
pub fn pair_deltas(sys: &PwaSystem) -> Result<Vec<PairData>, SynthesisError> {
    if sys.modes.is_empty() {
        return Err(SynthesisError::NoModes);
    }
    let q = sys.modes.len();
    let mut pairs = Vec::with_capacity(q * q);
    for i in 1..=q {
        for j in 1..=q {
            pairs.push(PairData {
                i,
                j,
                a_diff: &sys.modes[i - 1].a - &sys.modes[j - 1].a,
                b_diff: &sys.modes[i - 1].b - &sys.modes[j - 1].b,
                cell_i: sys.cells[i - 1].clone(),
                cell_j: sys.cells[j - 1].clone(),
            });
        }
    }
    Ok(pairs)
}

/// Choice of the constant cell multiplier matrix M.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierChoice {
    #[default]
    Identity,
    Zero,
    /// diag(|h|) of the cell's offset vector.
    AbsOffsetDiag,
}

impl MultiplierChoice {
    pub fn matrix(&self, cell: &PolyhedralCell) -> DMatrix<f64> {
        let r = cell.num_faces();
        match self {
            MultiplierChoice::Identity => DMatrix::identity(r, r),
            MultiplierChoice::Zero => DMatrix::zeros(r, r),
            MultiplierChoice::AbsOffsetDiag => {
                DMatrix::from_diagonal(&cell.h_vec.map(f64::abs))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Prescribed exponential decay rate of the Lyapunov certificate (1/s).
    pub alpha1: f64,
    /// Strictness margin: "< 0" is realized as "<= -epsilon I".
    pub epsilon: f64,
    /// Positive-definiteness floor for S.
    pub delta: f64,
    pub multiplier: MultiplierChoice,
    pub solver: SolveOptions,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            alpha1: 1e-4,
            epsilon: 1e-6,
            delta: 1e-6,
            multiplier: MultiplierChoice::default(),
            solver: SolveOptions::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("epsilon", self.epsilon),
            ("delta", self.delta),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SynthesisError::InvalidConfig(format!(
                    "{name} must be positive and finite (got {v})"
                )));
            }
        }
        Ok(())
    }
}

/// Numeric values of all decision variables.
#[derive(Debug, Clone)]
pub struct DecisionVars {
    pub s: DMatrix<f64>,
    pub r: RowDVector<f64>,
    /// One entry per pair, in `pair_deltas` order.
    pub multipliers: Vec<PairVars>,
}

#[derive(Debug, Clone)]
pub struct PairVars {
    pub e: DVector<f64>,
    pub f: DVector<f64>,
    pub beta: f64,
    pub xi: f64,
}

/// Maps the structured decision variables to the solver's flat scalar ids.
///
/// Layout: S upper triangle (row-major, p <= q), then R entries, then per
/// pair (E diag, F diag, beta, xi).
#[derive(Debug, Clone)]
pub struct VarLayout {
    pub n: usize,
    faces: Vec<(usize, usize)>, // (r_i, r_j) per pair
    pair_base: Vec<usize>,
    total: usize,
}

impl VarLayout {
    pub fn new(n: usize, pairs: &[PairData]) -> Self {
        let s_count = n * (n + 1) / 2;
        let mut base = s_count + n;
        let mut faces = Vec::with_capacity(pairs.len());
        let mut pair_base = Vec::with_capacity(pairs.len());
        for p in pairs {
            let ri = p.cell_i.num_faces();
            let rj = p.cell_j.num_faces();
            faces.push((ri, rj));
            pair_base.push(base);
            base += ri + rj + 2;
        }
        Self {
            n,
            faces,
            pair_base,
            total: base,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Id of S[p][q] for p <= q.
    pub fn s_var(&self, p: usize, q: usize) -> usize {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        // offset of row p in the packed upper triangle
        p * self.n - p * (p + 1) / 2 + q
    }

    pub fn r_var(&self, col: usize) -> usize {
        self.n * (self.n + 1) / 2 + col
    }

    pub fn e_var(&self, pair: usize, idx: usize) -> usize {
        self.pair_base[pair] + idx
    }

    pub fn f_var(&self, pair: usize, idx: usize) -> usize {
        self.pair_base[pair] + self.faces[pair].0 + idx
    }

    pub fn beta_var(&self, pair: usize) -> usize {
        self.pair_base[pair] + self.faces[pair].0 + self.faces[pair].1
    }

    pub fn xi_var(&self, pair: usize) -> usize {
        self.beta_var(pair) + 1
    }

    pub fn unpack(&self, assignment: &[f64]) -> DecisionVars {
        let n = self.n;
        let s = DMatrix::from_fn(n, n, |p, q| assignment[self.s_var(p, q)]);
        let r = RowDVector::from_fn(n, |_, q| assignment[self.r_var(q)]);
        let multipliers = (0..self.faces.len())
            .map(|p| {
                let (ri, rj) = self.faces[p];
                PairVars {
                    e: DVector::from_fn(ri, |k, _| assignment[self.e_var(p, k)]),
                    f: DVector::from_fn(rj, |k, _| assignment[self.f_var(p, k)]),
                    beta: assignment[self.beta_var(p)],
                    xi: assignment[self.xi_var(p)],
                }
            })
            .collect();
        DecisionVars { s, r, multipliers }
    }
}

/// Numeric value of the small coupling LMI for one pair:
/// [[xi, xi|h_i|^T, xi|h_j|^T], [*, E/2, 0], [*, *, F/2]].
pub fn lmi11_matrix(pair: &PairData, e: &DVector<f64>, f: &DVector<f64>, xi: f64) -> DMatrix<f64> {
    let ri = pair.cell_i.num_faces();
    let rj = pair.cell_j.num_faces();
    let hi_abs = pair.cell_i.h_vec.map(f64::abs);
    let hj_abs = pair.cell_j.h_vec.map(f64::abs);
    let mut m = DMatrix::zeros(1 + ri + rj, 1 + ri + rj);
    m[(0, 0)] = xi;
    for a in 0..ri {
        m[(0, 1 + a)] = xi * hi_abs[a];
        m[(1 + a, 0)] = xi * hi_abs[a];
        m[(1 + a, 1 + a)] = 0.5 * e[a];
    }
    for b in 0..rj {
        m[(0, 1 + ri + b)] = xi * hj_abs[b];
        m[(1 + ri + b, 0)] = xi * hj_abs[b];
        m[(1 + ri + b, 1 + ri + b)] = 0.5 * f[b];
    }
    m
}

/// Numeric value of the main synchronization LMI for one pair.
///
/// Block rows/cols are sized [n, n, r_i, r_j, r_i, r_j]; the top-left block
/// is `A_i S + S A_i^T + B R + R^T B^T + alpha1 S - xi b_ij b_ij^T`.
#[allow(clippy::too_many_arguments)]
pub fn lmi12_matrix(
    input: &DVector<f64>,
    a_i: &DMatrix<f64>,
    pair: &PairData,
    alpha1: f64,
    m_i: &DMatrix<f64>,
    m_j: &DMatrix<f64>,
    vars: &PairVars,
    s: &DMatrix<f64>,
    r: &RowDVector<f64>,
) -> DMatrix<f64> {
    let n = a_i.nrows();
    let ri = pair.cell_i.num_faces();
    let rj = pair.cell_j.num_faces();
    let hi = &pair.cell_i.h_mat;
    let hj = &pair.cell_j.h_mat;
    let hi_abs = pair.cell_i.h_vec.map(f64::abs);
    let hj_abs = pair.cell_j.h_vec.map(f64::abs);
    let xi = vars.xi;
    let b_ij = &pair.b_diff;

    let br = input * r;
    let delta1 = a_i * s
        + s * a_i.transpose()
        + &br
        + br.transpose()
        + s.scale(alpha1)
        - (b_ij * b_ij.transpose()).scale(xi);

    let size = 2 * n + 2 * ri + 2 * rj;
    let mut m = DMatrix::zeros(size, size);
    let offs = [0, n, 2 * n, 2 * n + ri, 2 * n + ri + rj, 2 * n + 2 * ri + rj];

    let mut put = |bi: usize, bj: usize, block: &DMatrix<f64>| {
        let (ro, co) = (offs[bi], offs[bj]);
        for p in 0..block.nrows() {
            for q in 0..block.ncols() {
                m[(ro + p, co + q)] = block[(p, q)];
                m[(co + q, ro + p)] = block[(p, q)];
            }
        }
    };

    put(0, 0, &delta1);
    put(0, 1, &pair.a_diff);
    put(0, 2, &(s * hi));
    // block (1,4) is zero
    put(0, 4, &((b_ij * hi_abs.transpose()).scale(xi) - (s * hi * m_i).scale(0.5)));
    put(0, 5, &(b_ij * hj_abs.transpose()).scale(xi));
    put(1, 1, &DMatrix::from_diagonal_element(n, n, vars.beta));
    put(1, 2, hi);
    put(1, 3, hj);
    put(1, 4, &(hi * m_i).scale(-0.5));
    put(1, 5, &(hj * m_j).scale(-0.5));
    put(2, 2, &DMatrix::from_diagonal(&vars.e.scale(2.0)));
    put(3, 3, &DMatrix::from_diagonal(&vars.f.scale(2.0)));
    put(
        4,
        4,
        &(DMatrix::from_diagonal(&vars.e.scale(0.5)) - (&hi_abs * hi_abs.transpose()).scale(xi)),
    );
    put(4, 5, &(&hi_abs * hj_abs.transpose()).scale(-xi));
    put(
        5,
        5,
        &(DMatrix::from_diagonal(&vars.f.scale(0.5)) - (&hj_abs * hj_abs.transpose()).scale(xi)),
    );
    m
}

/// Turns an exactly-affine numeric block builder into an [`AffineMatrixExpr`]
/// by probing the constant and each unit direction.
fn affinize(
    label: String,
    layout: &VarLayout,
    relevant: &[usize],
    build: impl Fn(&[f64]) -> DMatrix<f64>,
) -> Result<AffineMatrixExpr, SdpError> {
    let zeros = vec![0.0; layout.len()];
    let constant = build(&zeros);
    let mut terms = Vec::with_capacity(relevant.len());
    for &var in relevant {
        let mut unit = zeros.clone();
        unit[var] = 1.0;
        let coeff = build(&unit) - &constant;
        if coeff.iter().any(|&c| c != 0.0) {
            terms.push((var, coeff));
        }
    }
    AffineMatrixExpr::new(label, constant, terms)
}

fn pair_vars_of(layout: &VarLayout, pair_idx: usize) -> Vec<usize> {
    let (ri, rj) = layout.faces[pair_idx];
    let mut v: Vec<usize> = (0..ri).map(|k| layout.e_var(pair_idx, k)).collect();
    v.extend((0..rj).map(|k| layout.f_var(pair_idx, k)));
    v.push(layout.beta_var(pair_idx));
    v.push(layout.xi_var(pair_idx));
    v
}

/// The coupling LMI (size 1 + r_i + r_j) as an affine expression.
pub fn assemble_lmi11(
    pair: &PairData,
    layout: &VarLayout,
    pair_idx: usize,
) -> Result<AffineMatrixExpr, SdpError> {
    if pair.cell_i.h_mat.ncols() != pair.cell_i.h_vec.len()
        || pair.cell_j.h_mat.ncols() != pair.cell_j.h_vec.len()
    {
        return Err(SdpError::Malformed(
            "cell H matrix and h vector disagree on face count".into(),
        ));
    }
    let relevant = pair_vars_of(layout, pair_idx);
    let pair = pair.clone();
    let layout_c = layout.clone();
    affinize(
        format!("lmi11({},{})", pair.i, pair.j),
        layout,
        &relevant,
        move |x| {
            let vars = layout_c.unpack(x);
            let pv = &vars.multipliers[pair_idx];
            lmi11_matrix(&pair, &pv.e, &pv.f, pv.xi)
        },
    )
}

/// The main LMI (size 2n + 2r_i + 2r_j) as an affine expression.
///
/// The multiplier matrices must be constants so the block stays affine in
/// the decision variables.
pub fn assemble_lmi12(
    sys: &PwaSystem,
    pair: &PairData,
    alpha1: f64,
    m_i: &DMatrix<f64>,
    m_j: &DMatrix<f64>,
    layout: &VarLayout,
    pair_idx: usize,
) -> Result<AffineMatrixExpr, SdpError> {
    let n = layout.n;
    let ri = pair.cell_i.num_faces();
    let rj = pair.cell_j.num_faces();
    if m_i.nrows() != ri || m_i.ncols() != ri || m_j.nrows() != rj || m_j.ncols() != rj {
        return Err(SdpError::Malformed(format!(
            "multiplier matrix size mismatch for pair ({},{})",
            pair.i, pair.j
        )));
    }
    let mut relevant: Vec<usize> = (0..n)
        .flat_map(|p| (p..n).map(move |q| (p, q)))
        .map(|(p, q)| layout.s_var(p, q))
        .collect();
    relevant.extend((0..n).map(|q| layout.r_var(q)));
    relevant.extend(pair_vars_of(layout, pair_idx));

    let input = sys.input.clone();
    let a_i = sys.modes[pair.i - 1].a.clone();
    let pair_c = pair.clone();
    let m_i = m_i.clone();
    let m_j = m_j.clone();
    let layout_c = layout.clone();
    affinize(
        format!("lmi12({},{})", pair.i, pair.j),
        layout,
        &relevant,
        move |x| {
            let vars = layout_c.unpack(x);
            lmi12_matrix(
                &input,
                &a_i,
                &pair_c,
                alpha1,
                &m_i,
                &m_j,
                &vars.multipliers[pair_idx],
                &vars.s,
                &vars.r,
            )
        },
    )
}

/// Builds the full feasibility problem for a system: both LMIs per pair plus
/// the `S >= delta I` floor, with sign bounds on the scalar multipliers.
pub fn build_problem(
    sys: &PwaSystem,
    cfg: &SynthesisConfig,
    multiplier: MultiplierChoice,
) -> Result<(FeasibilityProblem, VarLayout), SynthesisError> {
    let pairs = pair_deltas(sys)?;
    let n = sys.n;
    let layout = VarLayout::new(n, &pairs);

    let mut vars = Vec::with_capacity(layout.len());
    for p in 0..n {
        for q in p..n {
            let mut v = VarSpec::free(format!("S[{p}][{q}]"), if p == q { 1.0 } else { 0.0 });
            v.scale_on_restart = true;
            vars.push(v);
        }
    }
    for q in 0..n {
        vars.push(VarSpec::free(format!("R[{q}]"), 0.0));
    }
    for (idx, pair) in pairs.iter().enumerate() {
        let (i, j) = (pair.i, pair.j);
        for k in 0..pair.cell_i.num_faces() {
            vars.push(VarSpec::upper_bounded(
                format!("E[{i},{j}][{k}]"),
                -cfg.epsilon,
                -1.0,
            ));
        }
        for k in 0..pair.cell_j.num_faces() {
            vars.push(VarSpec::upper_bounded(
                format!("F[{i},{j}][{k}]"),
                -cfg.epsilon,
                -1.0,
            ));
        }
        vars.push(VarSpec::upper_bounded(
            format!("beta[{i},{j}]"),
            -cfg.epsilon,
            -1.0,
        ));
        vars.push(VarSpec::upper_bounded(
            format!("xi[{i},{j}]"),
            -cfg.epsilon,
            -1.0,
        ));
        debug_assert_eq!(vars.len(), layout.xi_var(idx) + 1);
    }

    let mut blocks = Vec::with_capacity(2 * pairs.len() + 1);
    // S floor: delta I - S <= -eps I, i.e. S >= (delta + eps) I
    let s_floor = affinize(
        "s_floor".into(),
        &layout,
        &(0..n)
            .flat_map(|p| (p..n).map(move |q| (p, q)))
            .map(|(p, q)| layout.s_var(p, q))
            .collect::<Vec<_>>(),
        {
            let layout_c = layout.clone();
            let delta = cfg.delta;
            move |x| {
                let s = layout_c.unpack(x).s;
                DMatrix::from_diagonal_element(n, n, delta) - s
            }
        },
    )?;
    blocks.push(s_floor);

    for (idx, pair) in pairs.iter().enumerate() {
        blocks.push(assemble_lmi11(pair, &layout, idx)?);
        let m_i = multiplier.matrix(&pair.cell_i);
        let m_j = multiplier.matrix(&pair.cell_j);
        blocks.push(assemble_lmi12(
            sys, pair, cfg.alpha1, &m_i, &m_j, &layout, idx,
        )?);
    }

    Ok((
        FeasibilityProblem {
            vars,
            blocks,
            margin: cfg.epsilon,
        },
        layout,
    ))
}

/// Recovers `K` from `K S = R` via a symmetric positive definite solve.
///
/// Refuses if the smallest eigenvalue of S is below `floor`.
pub fn extract_gain(
    s: &DMatrix<f64>,
    r: &RowDVector<f64>,
    floor: f64,
) -> Result<RowDVector<f64>, SynthesisError> {
    let eig = crate::sdp::sym_eig(s)?;
    let min_eig = eig.values[0];
    if min_eig < floor {
        return Err(SynthesisError::NotPositiveDefinite { min_eig, floor });
    }
    let chol = s
        .clone()
        .cholesky()
        .ok_or(SynthesisError::NotPositiveDefinite { min_eig, floor })?;
    let kt = chol.solve(&r.transpose());
    Ok(kt.transpose())
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub status: SolveStatus,
    pub vars: DecisionVars,
    pub gain: Option<RowDVector<f64>>,
    /// Per-block max eigenvalues, recomputed by an independent eigenvalue
    /// pass over freshly assembled blocks.
    pub margins: Vec<(String, f64)>,
    pub worst_margin: f64,
    pub multiplier_used: MultiplierChoice,
    pub iterations: usize,
}

/// Full synthesis: assemble, solve, verify the certificate, extract the gain.
///
/// On infeasibility with the configured multiplier choice the candidate set
/// {zero, identity, diag|h|} is retried in that order; the choice that
/// succeeded (or the last one tried) is reported.
pub fn synthesize(sys: &PwaSystem, cfg: &SynthesisConfig) -> Result<SynthesisResult, SynthesisError> {
    cfg.validate()?;
    if sys.modes.is_empty() {
        return Err(SynthesisError::NoModes);
    }

    let mut candidates = vec![cfg.multiplier];
    for c in [
        MultiplierChoice::Zero,
        MultiplierChoice::Identity,
        MultiplierChoice::AbsOffsetDiag,
    ] {
        if !candidates.contains(&c) {
            candidates.push(c);
        }
    }

    let mut last: Option<SynthesisResult> = None;
    for multiplier in candidates {
        let (prob, layout) = build_problem(sys, cfg, multiplier)?;
        let outcome = solve(&prob, &cfg.solver)?;
        let report = check_certificate(&prob, &outcome.assignment, cfg.epsilon)?;
        let vars = layout.unpack(&outcome.assignment);
        let feasible = outcome.status == SolveStatus::Feasible && report.pass;
        let gain = if feasible {
            Some(extract_gain(&vars.s, &vars.r, cfg.delta)?)
        } else {
            None
        };
        let result = SynthesisResult {
            status: if feasible {
                SolveStatus::Feasible
            } else {
                SolveStatus::Infeasible
            },
            vars,
            gain,
            margins: report.block_margins,
            worst_margin: outcome.worst_margin,
            multiplier_used: multiplier,
            iterations: outcome.iterations,
        };
        if feasible {
            return Ok(result);
        }
        last = Some(result);
    }
    Ok(last.expect("at least one candidate attempted"))
}
