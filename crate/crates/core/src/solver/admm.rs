//! Consensus operator-splitting engine for the block-l1 cone program.
//!
//! The variable is rescaled by the per-coordinate weights so every objective
//! term becomes a plain Euclidean norm of a coordinate subset, then each
//! constraint family gets its own local copy of the coordinates it touches:
//! one full copy held to the affine data (and extra-equality) rows, one copy
//! per objective group, one for the sign/zero box, one per inequality
//! halfspace and one for the noise ball on the residual variable. The
//! consensus step averages copies; the affine copy is projected with a
//! Cholesky factorization of `G Gᵀ` computed once per problem; group copies
//! are block soft-thresholded. The penalty parameter starts at the
//! configured value and is halved or doubled whenever the primal/dual
//! residual ratio exceeds 10.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{ConeProblem, DataConstraint, SolveDiagnostics, SolveOutput, SolverError, SolverOptions};
use crate::linalg::independent_rows;

/// Tolerance of the rank-revealing row pruning.
const ROW_PRUNE_TOL: f64 = 1e-10;

/// Iterations between penalty-parameter adjustments.
const RHO_ADAPT_PERIOD: usize = 25;

/// Residual threshold declaring an equality system inconsistent.
const INFEASIBLE_TOL: f64 = 1e-8;

enum Prox {
    Group { multiplier: f64 },
    Box { rules: Vec<Rule> },
    Halfspace { coeffs: DVector<f64>, norm_sq: f64 },
    Ball { radius: f64 },
}

#[derive(Clone, Copy)]
enum Rule {
    Nonneg,
    Zero,
}

struct Block {
    coords: Vec<usize>,
    prox: Prox,
    z: DVector<f64>,
    d: DVector<f64>,
}

pub(crate) struct RunStats {
    pub iterations: usize,
    pub primal: f64,
    pub dual: f64,
    pub converged: bool,
}

pub(crate) struct Engine<'a> {
    problem: &'a ConeProblem,
    /// Natural variable dimension (before ball augmentation).
    dim_v: usize,
    /// Augmented, scaled dimension.
    dim: usize,
    scale: DVector<f64>,
    g: DMatrix<f64>,
    rhs: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    blocks: Vec<Block>,
    /// Block index of each objective group, in problem order.
    group_blocks: Vec<usize>,
    inv_counts: DVector<f64>,
    rho: f64,
    u: DVector<f64>,
    z0: DVector<f64>,
    d0: DVector<f64>,
    prev_u: DVector<f64>,
    acc: DVector<f64>,
    proj_buf: DVector<f64>,
    row_buf: DVector<f64>,
}

impl<'a> Engine<'a> {
    pub fn new(
        problem: &'a ConeProblem,
        opts: &SolverOptions,
        init: Option<&DVector<f64>>,
    ) -> Result<Self, SolverError> {
        problem.validate()?;
        let dim_v = problem.dim;
        let nrows = problem.data.nrows();
        let ball_radius = match problem.constraint {
            DataConstraint::Ball(r) if r > 0.0 => Some(r),
            _ => None,
        };
        let dim = dim_v + if ball_radius.is_some() { nrows } else { 0 };

        // Per-coordinate scale from the group weights; coordinates outside
        // every group (and residual coordinates) stay unscaled.
        let mut scale = DVector::from_element(dim, 1.0);
        for g in &problem.groups {
            for (&c, &w) in g.coords.iter().zip(&g.weights) {
                scale[c] = w;
            }
        }

        // Equality rows in the scaled, augmented variable.
        let extra_rows = problem.extra_equalities.as_ref().map_or(0, |(rows, _)| rows.nrows());
        let mut g_full = DMatrix::zeros(nrows + extra_rows, dim);
        let mut rhs_full = DVector::zeros(nrows + extra_rows);
        for r in 0..nrows {
            for c in 0..dim_v {
                g_full[(r, c)] = problem.data[(r, c)] / scale[c];
            }
            if ball_radius.is_some() {
                g_full[(r, dim_v + r)] = 1.0;
            }
            rhs_full[r] = problem.y[r];
        }
        if let Some((rows, rhs)) = &problem.extra_equalities {
            for r in 0..rows.nrows() {
                for c in 0..dim_v {
                    g_full[(nrows + r, c)] = rows[(r, c)] / scale[c];
                }
                rhs_full[nrows + r] = rhs[r];
            }
        }
        // Normalize rows so the projection is well conditioned; empty rows
        // are either redundant or witness infeasibility outright.
        let mut keep_candidates: Vec<usize> = Vec::with_capacity(g_full.nrows());
        for r in 0..g_full.nrows() {
            let nrm = g_full.row(r).norm();
            if nrm < 1e-14 {
                if rhs_full[r].abs() > INFEASIBLE_TOL {
                    return Err(SolverError::Infeasible { residual: rhs_full[r].abs() });
                }
                continue;
            }
            let mut row = g_full.row_mut(r);
            row /= nrm;
            rhs_full[r] /= nrm;
            keep_candidates.push(r);
        }
        let candidate_matrix = g_full.select_rows(keep_candidates.iter());
        let kept_local = independent_rows(&candidate_matrix, ROW_PRUNE_TOL);
        let kept: Vec<usize> = kept_local.iter().map(|&k| keep_candidates[k]).collect();
        let g = g_full.select_rows(kept.iter());
        let rhs = DVector::from_iterator(kept.len(), kept.iter().map(|&r| rhs_full[r]));

        let gram = &g * g.transpose();
        let chol = cholesky_with_jitter(gram)?;

        // Least-norm solution of the kept rows; the dropped rows must agree
        // with it or the equality system has no solution at all.
        if !kept.is_empty() {
            let mut lam = rhs.clone();
            chol.solve_mut(&mut lam);
            let u_star = g.transpose() * lam;
            let full_residual = (candidate_matrix
                .select_rows((0..candidate_matrix.nrows()).collect::<Vec<_>>().iter())
                * &u_star
                - DVector::from_iterator(
                    keep_candidates.len(),
                    keep_candidates.iter().map(|&r| rhs_full[r]),
                ))
            .norm();
            let rhs_scale = 1.0 + rhs_full.norm();
            if full_residual > INFEASIBLE_TOL * rhs_scale {
                return Err(SolverError::Infeasible { residual: full_residual });
            }
        }

        // Local copies.
        let mut blocks = Vec::new();
        let mut group_blocks = Vec::new();
        for grp in &problem.groups {
            group_blocks.push(blocks.len());
            blocks.push(Block {
                coords: grp.coords.clone(),
                prox: Prox::Group { multiplier: grp.multiplier },
                z: DVector::zeros(grp.coords.len()),
                d: DVector::zeros(grp.coords.len()),
            });
        }
        if !problem.nonneg.is_empty() || !problem.zeros.is_empty() {
            let mut coords = Vec::new();
            let mut rules = Vec::new();
            for &c in &problem.nonneg {
                coords.push(c);
                rules.push(Rule::Nonneg);
            }
            for &c in &problem.zeros {
                coords.push(c);
                rules.push(Rule::Zero);
            }
            let len = coords.len();
            blocks.push(Block {
                coords,
                prox: Prox::Box { rules },
                z: DVector::zeros(len),
                d: DVector::zeros(len),
            });
        }
        for row in &problem.inequalities {
            let coords: Vec<usize> = row.coeffs.iter().map(|&(c, _)| c).collect();
            let coeffs =
                DVector::from_iterator(coords.len(), row.coeffs.iter().map(|&(c, a)| a / scale[c]));
            let norm_sq = coeffs.norm_squared();
            if norm_sq == 0.0 {
                continue;
            }
            let len = coords.len();
            blocks.push(Block {
                coords,
                prox: Prox::Halfspace { coeffs, norm_sq },
                z: DVector::zeros(len),
                d: DVector::zeros(len),
            });
        }
        if let Some(radius) = ball_radius {
            let coords: Vec<usize> = (dim_v..dim).collect();
            blocks.push(Block {
                coords,
                prox: Prox::Ball { radius },
                z: DVector::zeros(nrows),
                d: DVector::zeros(nrows),
            });
        }

        let mut counts = DVector::from_element(dim, 1.0);
        for b in &blocks {
            for &c in &b.coords {
                counts[c] += 1.0;
            }
        }
        let inv_counts = counts.map(|c| 1.0 / c);

        let mut u = DVector::zeros(dim);
        if let Some(v0) = init {
            for c in 0..dim_v.min(v0.len()) {
                u[c] = v0[c] * scale[c];
            }
        }
        for b in &mut blocks {
            for (idx, &c) in b.coords.iter().enumerate() {
                b.z[idx] = u[c];
            }
        }
        let z0 = u.clone();
        let nkept = kept.len();

        Ok(Self {
            problem,
            dim_v,
            dim,
            scale,
            g,
            rhs,
            chol,
            blocks,
            group_blocks,
            inv_counts,
            rho: opts.rho,
            u,
            z0,
            d0: DVector::zeros(dim),
            prev_u: DVector::zeros(dim),
            acc: DVector::zeros(dim),
            proj_buf: DVector::zeros(dim),
            row_buf: DVector::zeros(nkept),
        })
    }

    fn project_affine(&mut self) {
        // z0 = w - Gᵀ (G Gᵀ)⁻¹ (G w - rhs), with w in proj_buf.
        if self.rhs.is_empty() {
            self.z0.copy_from(&self.proj_buf);
            return;
        }
        self.row_buf.copy_from(&self.rhs);
        self.row_buf.gemv(1.0, &self.g, &self.proj_buf, -1.0);
        self.chol.solve_mut(&mut self.row_buf);
        self.z0.copy_from(&self.proj_buf);
        self.z0.gemv_tr(-1.0, &self.g, &self.row_buf, 1.0);
    }

    pub fn run(&mut self, opts: &SolverOptions) -> RunStats {
        let tol = opts.tol;
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;
        for iter in 1..=opts.max_iter {
            iterations = iter;
            self.prev_u.copy_from(&self.u);

            // Local copies against the current consensus point.
            self.proj_buf.copy_from(&self.u);
            self.proj_buf -= &self.d0;
            self.project_affine();
            for b in &mut self.blocks {
                for (idx, &c) in b.coords.iter().enumerate() {
                    b.z[idx] = self.u[c] - b.d[idx];
                }
                match &b.prox {
                    Prox::Group { multiplier } => {
                        let nrm = b.z.norm();
                        let threshold = multiplier / self.rho;
                        if nrm <= threshold {
                            b.z.fill(0.0);
                        } else {
                            b.z *= 1.0 - threshold / nrm;
                        }
                    }
                    Prox::Box { rules } => {
                        for (idx, rule) in rules.iter().enumerate() {
                            b.z[idx] = match rule {
                                Rule::Nonneg => b.z[idx].max(0.0),
                                Rule::Zero => 0.0,
                            };
                        }
                    }
                    Prox::Halfspace { coeffs, norm_sq } => {
                        let val = coeffs.dot(&b.z);
                        if val > 0.0 {
                            b.z.axpy(-val / norm_sq, coeffs, 1.0);
                        }
                    }
                    Prox::Ball { radius } => {
                        let nrm = b.z.norm();
                        if nrm > *radius {
                            if *radius == 0.0 {
                                b.z.fill(0.0);
                            } else {
                                b.z *= *radius / nrm;
                            }
                        }
                    }
                }
            }

            // Consensus average.
            self.acc.copy_from(&self.z0);
            self.acc += &self.d0;
            for b in &self.blocks {
                for (idx, &c) in b.coords.iter().enumerate() {
                    self.acc[c] += b.z[idx] + b.d[idx];
                }
            }
            for i in 0..self.dim {
                self.u[i] = self.acc[i] * self.inv_counts[i];
            }

            // Dual ascent and residuals.
            let mut r_sq = 0.0;
            for i in 0..self.dim {
                let diff = self.z0[i] - self.u[i];
                self.d0[i] += diff;
                r_sq += diff * diff;
            }
            for b in &mut self.blocks {
                for (idx, &c) in b.coords.iter().enumerate() {
                    let diff = b.z[idx] - self.u[c];
                    b.d[idx] += diff;
                    r_sq += diff * diff;
                }
            }
            let mut s_sq = 0.0;
            for i in 0..self.dim {
                let du = self.u[i] - self.prev_u[i];
                s_sq += du * du / self.inv_counts[i];
            }
            primal = r_sq.sqrt();
            dual = self.rho * s_sq.sqrt();

            if primal <= tol && dual <= tol {
                let v = self.solution();
                if self.problem.max_violation(&v) <= tol {
                    converged = true;
                    break;
                }
            }

            // Residual balancing. Adapting on every iteration makes the
            // residuals trade places indefinitely; a fixed cadence lets the
            // iteration settle between adjustments.
            if iter % RHO_ADAPT_PERIOD == 0 {
                if primal > 10.0 * dual && self.rho < 1e6 {
                    self.rho *= 2.0;
                    self.d0 /= 2.0;
                    for b in &mut self.blocks {
                        b.d /= 2.0;
                    }
                } else if dual > 10.0 * primal && self.rho > 1e-6 {
                    self.rho /= 2.0;
                    self.d0 *= 2.0;
                    for b in &mut self.blocks {
                        b.d *= 2.0;
                    }
                }
            }
        }
        RunStats { iterations, primal, dual, converged }
    }

    /// Consensus point mapped back to the natural variable.
    pub fn solution(&self) -> DVector<f64> {
        DVector::from_fn(self.dim_v, |c, _| self.u[c] / self.scale[c])
    }

    /// Euclidean norms of the scaled group sub-vectors at the current point.
    pub fn scaled_group_norms(&self) -> Vec<f64> {
        self.problem
            .groups
            .iter()
            .map(|g| g.coords.iter().map(|&c| self.u[c] * self.u[c]).sum::<f64>().sqrt())
            .collect()
    }

    /// Objective under the given base multipliers at the current point.
    pub fn objective_with_base(&self, base: &[f64]) -> f64 {
        self.problem
            .groups
            .iter()
            .zip(base)
            .map(|(g, m)| {
                m * g.coords.iter().map(|&c| self.u[c] * self.u[c]).sum::<f64>().sqrt()
            })
            .sum()
    }

    /// Replaces the group multipliers, keeping all solver state for a warm
    /// start. Multipliers are normalized by their maximum; a common positive
    /// factor does not change the minimizer.
    pub fn set_multipliers(&mut self, mults: &[f64]) {
        let max = mults.iter().cloned().fold(0.0_f64, f64::max);
        let norm = if max > 0.0 { max } else { 1.0 };
        for (&bi, &m) in self.group_blocks.iter().zip(mults) {
            if let Prox::Group { multiplier } = &mut self.blocks[bi].prox {
                *multiplier = m / norm;
            }
        }
    }
}

fn cholesky_with_jitter(mut gram: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, SolverError> {
    let n = gram.nrows();
    if n == 0 {
        return Ok(Cholesky::new(DMatrix::zeros(0, 0)).expect("empty cholesky"));
    }
    let base = gram.diagonal().amax().max(1.0);
    let mut jitter = 0.0;
    for _ in 0..6 {
        let attempt = gram.clone();
        if let Some(c) = Cholesky::new(attempt) {
            return Ok(c);
        }
        jitter = if jitter == 0.0 { base * 1e-14 } else { jitter * 100.0 };
        for i in 0..n {
            gram[(i, i)] += jitter;
        }
    }
    Err(SolverError::Dimension("equality Gram matrix is not positive definite".into()))
}

/// Single solve, optionally warm-started from a natural-variable point.
pub fn solve_with_init(
    problem: &ConeProblem,
    opts: &SolverOptions,
    init: Option<&DVector<f64>>,
) -> Result<SolveOutput, SolverError> {
    let mut engine = Engine::new(problem, opts, init)?;
    let stats = engine.run(opts);
    let v = engine.solution();
    let objective = problem.objective_of(&v);
    Ok(SolveOutput {
        v,
        diagnostics: SolveDiagnostics {
            iterations: stats.iterations,
            primal_residual: stats.primal,
            dual_residual: stats.dual,
            objective_value: objective,
            converged: stats.converged,
            reweight_rounds: 1,
            reweight_trace: vec![objective],
        },
    })
}
