//! The block-l1 cone program and its solver.
//!
//! Every convex program in the pipeline is an instance of one parameterized
//! problem: minimize a sum of weighted Euclidean norms over (possibly
//! overlapping) coordinate groups, subject to linear data constraints (exact
//! or within an l2 ball), coordinate sign and zero constraints, sparse linear
//! inequalities and extra linear equalities. Complex programs are posed on
//! the stacked real variable `[Re(v); Im(v)]`, with the real and imaginary
//! parts of lifted coordinate `k` (0-based) living at positions `k` and
//! `M + k`; this bijection is fixed everywhere in the crate.

mod admm;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lifting::GroupStructure;
use crate::measure::{LinearOperator, MeasurementSet, Variant, WeightSet};

pub use admm::solve_with_init;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("equality system is infeasible: best residual {residual:.3e}")]
    Infeasible { residual: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("noise bound must be nonnegative, got {0}")]
    BadEpsilon(f64),
    #[error("coordinate {coord} appears in {count} objective groups (at most 2 allowed)")]
    TooManyGroups { coord: usize, count: usize },
    #[error("coordinate {coord} has inconsistent per-coordinate weights across groups")]
    InconsistentWeights { coord: usize },
    #[error("weights must be positive and finite (coordinate {coord})")]
    BadWeight { coord: usize },
}

/// One objective term `multiplier * ‖diag(weights) v[coords]‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGroup {
    /// 0-based coordinates of the solver variable.
    pub coords: Vec<usize>,
    /// Per-coordinate precompensating weights, same length as `coords`.
    pub weights: Vec<f64>,
    pub multiplier: f64,
}

/// A sparse inequality row `sum coeff * v[coord] <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataConstraint {
    /// `data v = y`.
    Equality,
    /// `‖y - data v‖₂ <= radius`.
    Ball(f64),
}

/// A fully assembled cone program over a real variable vector.
#[derive(Debug, Clone)]
pub struct ConeProblem {
    pub dim: usize,
    pub data: DMatrix<f64>,
    pub y: DVector<f64>,
    pub constraint: DataConstraint,
    pub groups: Vec<ObjectiveGroup>,
    /// Coordinates forced nonnegative.
    pub nonneg: Vec<usize>,
    /// Coordinates forced to zero.
    pub zeros: Vec<usize>,
    pub inequalities: Vec<LinearRow>,
    /// Extra hard equalities `rows v = rhs` (autocorrelation constraints).
    pub extra_equalities: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl ConeProblem {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.data.ncols() != self.dim {
            return Err(SolverError::Dimension(format!(
                "data has {} columns, variable has dimension {}",
                self.data.ncols(),
                self.dim
            )));
        }
        if self.data.nrows() != self.y.len() {
            return Err(SolverError::Dimension(format!(
                "data has {} rows, y has length {}",
                self.data.nrows(),
                self.y.len()
            )));
        }
        if let DataConstraint::Ball(radius) = self.constraint {
            if radius < 0.0 {
                return Err(SolverError::BadEpsilon(radius));
            }
        }
        if let Some((rows, rhs)) = &self.extra_equalities {
            if rows.ncols() != self.dim || rows.nrows() != rhs.len() {
                return Err(SolverError::Dimension("extra equality shape".into()));
            }
        }
        let mut weight_of: Vec<Option<f64>> = vec![None; self.dim];
        let mut count = vec![0usize; self.dim];
        for g in &self.groups {
            if g.coords.len() != g.weights.len() {
                return Err(SolverError::Dimension("group weights length".into()));
            }
            for (&c, &w) in g.coords.iter().zip(&g.weights) {
                if c >= self.dim {
                    return Err(SolverError::Dimension(format!("group coordinate {c} out of range")));
                }
                if !(w > 0.0 && w.is_finite()) {
                    return Err(SolverError::BadWeight { coord: c });
                }
                count[c] += 1;
                if count[c] > 2 {
                    return Err(SolverError::TooManyGroups { coord: c, count: count[c] });
                }
                match weight_of[c] {
                    None => weight_of[c] = Some(w),
                    Some(prev) if (prev - w).abs() <= 1e-12 * prev.max(1.0) => {}
                    Some(_) => return Err(SolverError::InconsistentWeights { coord: c }),
                }
            }
        }
        for &c in self.nonneg.iter().chain(&self.zeros) {
            if c >= self.dim {
                return Err(SolverError::Dimension(format!("constraint coordinate {c} out of range")));
            }
        }
        for row in &self.inequalities {
            for &(c, _) in &row.coeffs {
                if c >= self.dim {
                    return Err(SolverError::Dimension(format!("inequality coordinate {c} out of range")));
                }
            }
        }
        Ok(())
    }

    /// The block-l1 objective at a candidate point.
    pub fn objective_of(&self, v: &DVector<f64>) -> f64 {
        self.groups
            .iter()
            .map(|g| {
                let sq: f64 = g
                    .coords
                    .iter()
                    .zip(&g.weights)
                    .map(|(&c, &w)| (w * v[c]).powi(2))
                    .sum();
                g.multiplier * sq.sqrt()
            })
            .sum()
    }

    /// Residual of the data constraint: `‖data v - y‖` for an equality, the
    /// excess over the radius for a ball.
    pub fn data_residual(&self, v: &DVector<f64>) -> f64 {
        let r = (&self.data * v - &self.y).norm();
        match self.constraint {
            DataConstraint::Equality => r,
            DataConstraint::Ball(radius) => (r - radius).max(0.0),
        }
    }

    /// Largest violation over all constraint families.
    pub fn max_violation(&self, v: &DVector<f64>) -> f64 {
        let mut worst = self.data_residual(v);
        for &c in &self.nonneg {
            worst = worst.max(-v[c]);
        }
        for &c in &self.zeros {
            worst = worst.max(v[c].abs());
        }
        for row in &self.inequalities {
            let val: f64 = row.coeffs.iter().map(|&(c, a)| a * v[c]).sum();
            worst = worst.max(val);
        }
        if let Some((rows, rhs)) = &self.extra_equalities {
            worst = worst.max((rows * v - rhs).norm());
        }
        worst
    }
}

/// Options of the operator-splitting solver. Mirrors the CLI's JSON solver
/// config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Stopping and feasibility tolerance (absolute, on residual norms).
    pub tol: f64,
    /// Initial penalty parameter; adapted by residual balancing.
    pub rho: f64,
    pub reweight_rounds: usize,
    /// The reweighting offset is this factor times the largest group norm of
    /// the first solve.
    pub eps_rw_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iter: 20_000, tol: 1e-8, rho: 1.0, reweight_rounds: 5, eps_rw_factor: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective_value: f64,
    pub converged: bool,
    pub reweight_rounds: usize,
    /// Objective value after each reweighting round.
    pub reweight_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Solution in the problem's natural variable (stacked real form for
    /// complex programs).
    pub v: DVector<f64>,
    pub diagnostics: SolveDiagnostics,
}

/// Single solve with the problem's own group multipliers.
pub fn solve(problem: &ConeProblem, opts: &SolverOptions) -> Result<SolveOutput, SolverError> {
    admm::solve_with_init(problem, opts, None)
}

/// Iteratively reweighted solve: after each round the multiplier of group `j`
/// becomes `base_j / (‖group j‖ + eps_rw)`, with `eps_rw` fixed from the
/// first round's largest group norm. Rounds are warm-started and stop early
/// once the iterate stops moving.
pub fn solve_reweighted(problem: &ConeProblem, opts: &SolverOptions) -> Result<SolveOutput, SolverError> {
    let rounds = opts.reweight_rounds.max(1);
    let mut engine = admm::Engine::new(problem, opts, None)?;
    let base: Vec<f64> = problem.groups.iter().map(|g| g.multiplier).collect();
    let mut trace = Vec::with_capacity(rounds);
    let mut last_v: Option<DVector<f64>> = None;
    let mut result = engine.run(opts);
    let mut rounds_run = 1;
    let mut eps_rw = 0.0;
    for round in 1..rounds {
        let norms = engine.scaled_group_norms();
        if round == 1 {
            let max_norm = norms.iter().cloned().fold(0.0_f64, f64::max);
            eps_rw = opts.eps_rw_factor * max_norm;
            if eps_rw <= 0.0 {
                // All groups vanished; reweighting has nothing to sharpen.
                break;
            }
        }
        let mults: Vec<f64> =
            base.iter().zip(&norms).map(|(b, nrm)| b / (nrm + eps_rw)).collect();
        engine.set_multipliers(&mults);
        trace.push(engine.objective_with_base(&base));
        let v = engine.solution();
        if let Some(prev) = &last_v {
            if (&v - prev).norm() <= 1e-12 * (1.0 + v.norm()) {
                break;
            }
        }
        last_v = Some(v);
        result = engine.run(opts);
        rounds_run += 1;
    }
    trace.push(engine.objective_with_base(&base));
    let v = engine.solution();
    let objective = problem.objective_of(&v);
    Ok(SolveOutput {
        v,
        diagnostics: SolveDiagnostics {
            iterations: result.iterations,
            primal_residual: result.primal,
            dual_residual: result.dual,
            objective_value: objective,
            converged: result.converged,
            reweight_rounds: rounds_run,
            reweight_trace: trace,
        },
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AssembleOptions {
    /// Noise bound; zero selects the hard equality constraint.
    pub epsilon: f64,
}

/// Builds the variant's convex program from a measurement set.
///
/// Real and real-signal variants use `M` variables with groups
/// `‖W_j W v‖₂`; the complex variant stacks real and imaginary parts into
/// `2M` variables, realizes each group as a 2n-coordinate Euclidean norm with
/// the part-wise weights, keeps the diagonal real parts nonnegative and pins
/// the diagonal imaginary parts to zero.
pub fn assemble_program(
    ms: &MeasurementSet,
    weights: &WeightSet,
    groups: &GroupStructure,
    options: &AssembleOptions,
) -> Result<ConeProblem, SolverError> {
    if options.epsilon < 0.0 {
        return Err(SolverError::BadEpsilon(options.epsilon));
    }
    if groups.n() != ms.n {
        return Err(SolverError::Dimension(format!(
            "group structure has n = {}, measurements have n = {}",
            groups.n(),
            ms.n
        )));
    }
    let m = ms.lifted_dim();
    let n = ms.n;
    let constraint =
        if options.epsilon == 0.0 { DataConstraint::Equality } else { DataConstraint::Ball(options.epsilon) };
    let diag_flats: Vec<usize> = (1..=n)
        .map(|j| crate::lifting::pair_to_flat(j, j, n).expect("diag flat"))
        .collect();

    let problem = match (ms.variant, &ms.a) {
        (Variant::Real, LinearOperator::Real(a)) => {
            let obj = (1..=n)
                .map(|j| {
                    let coords: Vec<usize> = groups.group(j).iter().map(|&f| f - 1).collect();
                    let w: Vec<f64> = coords.iter().map(|&c| weights.w[c]).collect();
                    ObjectiveGroup { coords, weights: w, multiplier: 1.0 }
                })
                .collect();
            ConeProblem {
                dim: m,
                data: a.clone(),
                y: ms.y.clone(),
                constraint,
                groups: obj,
                nonneg: diag_flats.iter().map(|&f| f - 1).collect(),
                zeros: vec![],
                inequalities: vec![],
                extra_equalities: None,
            }
        }
        (Variant::Complex, LinearOperator::Complex(a)) => {
            let obj = (1..=n)
                .map(|j| {
                    let flats = groups.group(j);
                    let mut coords = Vec::with_capacity(2 * flats.len());
                    let mut w = Vec::with_capacity(2 * flats.len());
                    for &f in flats {
                        coords.push(f - 1);
                        w.push(weights.w_re[f - 1]);
                    }
                    for &f in flats {
                        coords.push(m + f - 1);
                        w.push(weights.w_im[f - 1]);
                    }
                    ObjectiveGroup { coords, weights: w, multiplier: 1.0 }
                })
                .collect();
            ConeProblem {
                dim: 2 * m,
                data: crate::measure::build_a_tilde(a),
                y: ms.y.clone(),
                constraint,
                groups: obj,
                nonneg: diag_flats.iter().map(|&f| f - 1).collect(),
                zeros: diag_flats.iter().map(|&f| m + f - 1).collect(),
                inequalities: vec![],
                extra_equalities: None,
            }
        }
        (Variant::ComplexReal | Variant::Fourier, LinearOperator::Complex(a)) => {
            let obj = (1..=n)
                .map(|j| {
                    let coords: Vec<usize> = groups.group(j).iter().map(|&f| f - 1).collect();
                    let w: Vec<f64> = coords.iter().map(|&c| weights.w_re[c]).collect();
                    ObjectiveGroup { coords, weights: w, multiplier: 1.0 }
                })
                .collect();
            ConeProblem {
                dim: m,
                data: a.map(|e| e.re),
                y: ms.y.clone(),
                constraint,
                groups: obj,
                nonneg: diag_flats.iter().map(|&f| f - 1).collect(),
                zeros: vec![],
                inequalities: vec![],
                extra_equalities: None,
            }
        }
        _ => {
            return Err(SolverError::Dimension("operator kind does not match variant".into()));
        }
    };
    problem.validate()?;
    Ok(problem)
}

/// Reads a stacked-real solution back into a complex lifted vector.
pub fn unstack_complex(v: &DVector<f64>, m: usize) -> DVector<Complex64> {
    DVector::from_fn(m, |k, _| Complex64::new(v[k], v[m + k]))
}
