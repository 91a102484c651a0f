//! Brute-force references for tiny instances.
//!
//! The support-enumeration oracle answers "what is the sparsest signal
//! consistent with these measurements" by solving restricted linear systems
//! on the lift and testing monomial consistency through the inverse map; it
//! shares no code with the cone solver. The grid oracle independently
//! minimizes a cone program's objective by eliminating the equality
//! constraints and refining a feasible-box grid, and is used to certify the
//! solver's objective values at desk scale.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::lifting::{
    inverse_veronese_complex, inverse_veronese_real, lifted_len, pair_to_flat, ComplexLifted,
    RealLifted,
};
use crate::linalg::{min_norm_least_squares, nullspace};
use crate::measure::{clean_measurements, MeasurementSet, Signal, Variant};
use crate::solver::{ConeProblem, DataConstraint};

/// Largest base dimension the support enumeration accepts.
const MAX_ORACLE_N: usize = 6;

/// Largest free dimension the grid oracle searches over.
const MAX_FREE_DIM: usize = 3;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("brute force oracle is limited to n <= {max}, got {got}")]
    NTooLarge { got: usize, max: usize },
    #[error("k_max = {k_max} exceeds n = {n}")]
    KMaxTooLarge { k_max: usize, n: usize },
    #[error("free dimension {got} after equality elimination exceeds {max}")]
    FreeDimTooLarge { got: usize, max: usize },
    #[error("grid oracle handles equality-constrained problems only")]
    BallUnsupported,
    #[error("equality system infeasible (residual {0:.3e})")]
    InfeasibleEqualities(f64),
    #[error("sign or inequality constraints are infeasible")]
    InfeasibleSigns,
    #[error("feasible region escaped the search box")]
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_sparsity: usize,
    /// Canonicalized solutions achieving the best sparsity (one per
    /// sign/phase class).
    pub solutions: Vec<Signal>,
    /// False when some underdetermined restricted system failed the
    /// consistency test; a sparser solution could then hide in the unsearched
    /// part of its solution set.
    pub exhaustive: bool,
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (1..=k).collect();
    if k == 0 || k > n {
        return out;
    }
    loop {
        out.push(current.clone());
        // Advance the lexicographically smallest position that can move.
        let mut i = k;
        while i > 0 && current[i - 1] == n - (k - i) {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        current[i - 1] += 1;
        for j in i..k {
            current[j] = current[j - 1] + 1;
        }
    }
    out
}

/// Sparsest signals consistent with the measurements, by exhaustive support
/// enumeration up to `k_max`.
///
/// For each candidate support the lifted system is restricted to monomials
/// with both indices inside the support, solved by least squares, and the
/// solution kept when it reproduces the observations and passes the inverse
/// map's consistency test.
pub fn brute_force_l0(ms: &MeasurementSet, k_max: usize) -> Result<OracleResult, OracleError> {
    let n = ms.n;
    if n > MAX_ORACLE_N {
        return Err(OracleError::NTooLarge { got: n, max: MAX_ORACLE_N });
    }
    if k_max > n {
        return Err(OracleError::KMaxTooLarge { k_max, n });
    }
    let m = lifted_len(n);
    let complex = ms.variant == Variant::Complex;
    let e = ms.real_operator();
    let fit_tol = (1e-8 * (1.0 + ms.y.norm())).max(ms.noise_bound);

    let zero = if complex {
        Signal::Complex(DVector::zeros(n))
    } else {
        Signal::Real(DVector::zeros(n))
    };
    if ms.y.norm() <= fit_tol {
        return Ok(OracleResult { best_sparsity: 0, solutions: vec![zero], exhaustive: true });
    }

    let mut exhaustive = true;
    for size in 1..=k_max {
        let mut found: Vec<Signal> = Vec::new();
        for support in combinations(n, size) {
            // Lifted coordinates with both base indices in the support.
            let mut flats: Vec<usize> = Vec::new();
            for (ai, &i) in support.iter().enumerate() {
                for &j in &support[ai..] {
                    flats.push(pair_to_flat(i, j, n).expect("flat") - 1);
                }
            }
            let coords: Vec<usize> = if complex {
                // Real parts of all pair coordinates plus imaginary parts of
                // the off-diagonal ones; diagonal imaginaries are zero.
                let mut c: Vec<usize> = flats.clone();
                for (ai, &i) in support.iter().enumerate() {
                    for &j in &support[ai + 1..] {
                        c.push(m + pair_to_flat(i, j, n).expect("flat") - 1);
                    }
                }
                c
            } else {
                flats.clone()
            };
            let cols = e.select_columns(coords.iter());
            let (w, rank, residual) = min_norm_least_squares(&cols, &ms.y);
            if residual > fit_tol {
                continue;
            }
            let underdetermined = rank < coords.len();
            let candidate = if complex {
                let mut v = DVector::from_element(m, Complex64::new(0.0, 0.0));
                for (idx, &c) in coords.iter().enumerate() {
                    if c < m {
                        v[c] += Complex64::new(w[idx], 0.0);
                    } else {
                        v[c - m] += Complex64::new(0.0, w[idx]);
                    }
                }
                let lift = ComplexLifted::from_vector(n, v).expect("lift length");
                let x = inverse_veronese_complex(&lift);
                (x.iter().any(|e| e.norm() > 0.0)).then_some(Signal::Complex(x))
            } else {
                let mut v = DVector::zeros(m);
                for (idx, &c) in coords.iter().enumerate() {
                    v[c] = w[idx];
                }
                let lift = RealLifted::from_vector(n, v).expect("lift length");
                let x = inverse_veronese_real(&lift);
                (x.iter().any(|e| e.abs() > 0.0)).then_some(Signal::Real(x))
            };
            match candidate {
                Some(x) => {
                    // Verify against the quadratic equations directly.
                    let direct = clean_measurements(&ms.q, &x);
                    if (direct - &ms.y).norm() > fit_tol {
                        if underdetermined {
                            exhaustive = false;
                        }
                        continue;
                    }
                    let duplicate = found.iter().any(|s| match (s, &x) {
                        (Signal::Real(a), Signal::Real(b)) => (a - b).norm() < 1e-8 * (1.0 + a.norm()),
                        (Signal::Complex(a), Signal::Complex(b)) => {
                            (a - b).norm() < 1e-8 * (1.0 + a.norm())
                        }
                        _ => false,
                    });
                    if !duplicate {
                        found.push(x);
                    }
                }
                None => {
                    if underdetermined {
                        exhaustive = false;
                    }
                }
            }
        }
        if !found.is_empty() {
            return Ok(OracleResult { best_sparsity: size, solutions: found, exhaustive });
        }
    }
    Ok(OracleResult { best_sparsity: usize::MAX, solutions: vec![], exhaustive })
}

/// Independent minimizer of an equality-constrained cone program.
///
/// Eliminates the equality constraints (data, extra rows and pinned zeros),
/// then minimizes the objective over the remaining free coordinates by
/// iterative grid refinement: a coarse pass at resolution ~1e-3 of the box
/// followed by local refinement down to 1e-6. Requires at most
/// [`MAX_FREE_DIM`] free dimensions; the objective is convex so refinement
/// around the incumbent converges to the global minimum.
pub fn grid_objective_oracle(problem: &ConeProblem) -> Result<f64, OracleError> {
    if !matches!(problem.constraint, DataConstraint::Equality) {
        return Err(OracleError::BallUnsupported);
    }
    let dim = problem.dim;
    let extra = problem.extra_equalities.as_ref().map_or(0, |(r, _)| r.nrows());
    let rows = problem.data.nrows() + extra + problem.zeros.len();
    let mut eq = DMatrix::zeros(rows, dim);
    let mut rhs = DVector::zeros(rows);
    eq.rows_mut(0, problem.data.nrows()).copy_from(&problem.data);
    rhs.rows_mut(0, problem.data.nrows()).copy_from(&problem.y);
    if let Some((r, h)) = &problem.extra_equalities {
        eq.rows_mut(problem.data.nrows(), r.nrows()).copy_from(r);
        rhs.rows_mut(problem.data.nrows(), h.len()).copy_from(h);
    }
    for (k, &c) in problem.zeros.iter().enumerate() {
        eq[(problem.data.nrows() + extra + k, c)] = 1.0;
    }

    let (u_p, _, residual) = min_norm_least_squares(&eq, &rhs);
    if residual > 1e-8 * (1.0 + rhs.norm()) {
        return Err(OracleError::InfeasibleEqualities(residual));
    }
    let z = nullspace(&eq, 1e-12);
    let free = z.ncols();
    if free > MAX_FREE_DIM {
        return Err(OracleError::FreeDimTooLarge { got: free, max: MAX_FREE_DIM });
    }

    let feasible = |u: &DVector<f64>, slack: f64| -> bool {
        problem.nonneg.iter().all(|&c| u[c] >= -slack)
            && problem.inequalities.iter().all(|row| {
                row.coeffs.iter().map(|&(c, a)| a * u[c]).sum::<f64>() <= slack
            })
    };

    if free == 0 {
        if !feasible(&u_p, 1e-9) {
            return Err(OracleError::InfeasibleSigns);
        }
        return Ok(problem.objective_of(&u_p));
    }

    let mut box_radius = 10.0 * (1.0 + u_p.amax());
    'expand: for _expand in 0..4 {
        let mut center = DVector::zeros(free);
        let mut halfwidth = box_radius;
        let points_per_axis = 21usize;
        let mut spacing = f64::INFINITY;
        let mut level = 0;
        // The answer is always the best point of the final (tightest-slack)
        // level; coarse levels only steer the box, since their feasibility
        // slack admits points outside the feasible set.
        let mut last: Option<f64> = None;
        while spacing > 1e-6 {
            level += 1;
            spacing = 2.0 * halfwidth / (points_per_axis - 1) as f64;
            let slack = 1e-9 + 0.51 * spacing;
            let mut level_best: Option<(f64, DVector<f64>)> = None;
            let mut t = DVector::zeros(free);
            let total = points_per_axis.pow(free as u32);
            for idx in 0..total {
                let mut rem = idx;
                for a in 0..free {
                    let step = rem % points_per_axis;
                    rem /= points_per_axis;
                    t[a] = center[a] - halfwidth + step as f64 * spacing;
                }
                let u = &u_p + &z * &t;
                if !feasible(&u, slack) {
                    continue;
                }
                let obj = problem.objective_of(&u);
                if level_best.as_ref().is_none_or(|(b, _)| obj < *b) {
                    level_best = Some((obj, t.clone()));
                }
            }
            let Some((obj, t_best)) = level_best else {
                box_radius *= 4.0;
                continue 'expand;
            };
            if level == 1 && t_best.amax() >= box_radius - spacing {
                // The optimum may sit outside the search box.
                box_radius *= 4.0;
                continue 'expand;
            }
            last = Some(obj);
            center = t_best;
            halfwidth = 2.0 * spacing;
            if level > 60 {
                break;
            }
        }
        match last {
            Some(obj) => return Ok(obj),
            None => {
                box_radius *= 4.0;
            }
        }
    }
    Err(OracleError::InfeasibleSigns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::GroupStructure;
    use crate::measure::{gaussian_design, make_fourier_design, MeasurementSet};
    use crate::solver::{assemble_program, solve, AssembleOptions, SolverOptions};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn combinations_enumerate_supports() {
        assert_eq!(combinations(4, 1), vec![vec![1], vec![2], vec![3], vec![4]]);
        assert_eq!(combinations(3, 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(3, 3), vec![vec![1, 2, 3]]);
    }

    #[test]
    fn finds_planted_pair_and_its_sign_class() {
        let mut rng = ChaCha12Rng::seed_from_u64(61);
        let x = DVector::from_row_slice(&[1.0, 1.0, 0.0, 0.0]);
        let q = gaussian_design(Variant::Real, 4, 10, &mut rng);
        let ms = MeasurementSet::from_signal(Variant::Real, q, &Signal::Real(x.clone()), 0.0, 0).unwrap();
        let out = brute_force_l0(&ms, 4).unwrap();
        assert_eq!(out.best_sparsity, 2);
        assert!(out.exhaustive);
        assert_eq!(out.solutions.len(), 1);
        match &out.solutions[0] {
            Signal::Real(s) => {
                let err = (s - &x).norm().min((s + &x).norm());
                assert!(err < 1e-8);
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn zero_observations_are_the_zero_signal() {
        let mut rng = ChaCha12Rng::seed_from_u64(63);
        let q = gaussian_design(Variant::Complex, 3, 8, &mut rng);
        let ms = MeasurementSet::new(Variant::Complex, q, DVector::zeros(8), 0.0, None).unwrap();
        let out = brute_force_l0(&ms, 3).unwrap();
        assert_eq!(out.best_sparsity, 0);
        assert_eq!(out.solutions.len(), 1);
        assert_eq!(out.solutions[0].l0(0.0), 0);
    }

    #[test]
    fn fourier_impulse_reports_all_shifts() {
        let q = make_fourier_design(4, 4).unwrap();
        let x = Signal::Real(DVector::from_row_slice(&[1.0, 0.0, 0.0, 0.0]));
        let ms = MeasurementSet::from_signal(Variant::Fourier, q, &x, 0.0, 0).unwrap();
        let out = brute_force_l0(&ms, 2).unwrap();
        assert_eq!(out.best_sparsity, 1);
        // Every standard basis vector has the same flat power spectrum.
        assert_eq!(out.solutions.len(), 4);
    }

    #[test]
    fn rejects_oversized_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(65);
        let q = gaussian_design(Variant::Real, 7, 10, &mut rng);
        let x = Signal::Real(DVector::zeros(7));
        let ms = MeasurementSet::from_signal(Variant::Real, q, &x, 0.0, 0).unwrap();
        assert!(matches!(brute_force_l0(&ms, 3), Err(OracleError::NTooLarge { .. })));
    }

    fn tiny_problem(seed: u64, n: usize, count: usize, k: usize) -> crate::solver::ConeProblem {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut x = DVector::zeros(n);
        for j in 0..k {
            x[j] = rng.sample::<f64, _>(StandardNormal);
        }
        let q = gaussian_design(Variant::Real, n, count, &mut rng);
        let ms = MeasurementSet::from_signal(Variant::Real, q, &Signal::Real(x), 0.0, seed).unwrap();
        let weights = ms.weights();
        let groups = GroupStructure::new(n);
        assemble_program(&ms, &weights, &groups, &AssembleOptions::default()).unwrap()
    }

    #[test]
    fn fully_determined_system_reads_off_the_objective() {
        // n = 2, 3 generic measurements: the equality system pins all of v.
        let p = tiny_problem(67, 2, 3, 2);
        let expected = {
            let (u, _, res) = min_norm_least_squares(&p.data, &p.y);
            assert!(res < 1e-10);
            p.objective_of(&u)
        };
        let got = grid_objective_oracle(&p).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn grid_matches_solver_objective_on_underdetermined_instances() {
        // n = 2 with two measurements leaves one free dimension.
        for seed in [70u64, 71, 72, 73, 74] {
            let p = tiny_problem(seed, 2, 2, 2);
            let oracle_obj = grid_objective_oracle(&p).unwrap();
            let solved = solve(&p, &SolverOptions::default()).unwrap();
            assert!(
                (oracle_obj - solved.diagnostics.objective_value).abs() <= 1e-5,
                "seed {seed}: oracle {oracle_obj} vs solver {}",
                solved.diagnostics.objective_value
            );
            assert!(oracle_obj <= solved.diagnostics.objective_value + 1e-5);
        }
    }

    #[test]
    fn infeasible_signs_are_detected() {
        // Fully determined equalities force v = (-1, 1), violating v0 >= 0.
        let p = ConeProblem {
            dim: 2,
            data: DMatrix::identity(2, 2),
            y: DVector::from_row_slice(&[-1.0, 1.0]),
            constraint: DataConstraint::Equality,
            groups: vec![
                crate::solver::ObjectiveGroup { coords: vec![0], weights: vec![1.0], multiplier: 1.0 },
                crate::solver::ObjectiveGroup { coords: vec![1], weights: vec![1.0], multiplier: 1.0 },
            ],
            nonneg: vec![0],
            zeros: vec![],
            inequalities: vec![],
            extra_equalities: None,
        };
        assert!(matches!(grid_objective_oracle(&p), Err(OracleError::InfeasibleSigns)));

        // Contradictory equalities are reported as such.
        let mut p2 = p.clone();
        p2.extra_equalities = Some((
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_row_slice(&[2.0]),
        ));
        assert!(matches!(grid_objective_oracle(&p2), Err(OracleError::InfeasibleEqualities(_))));
    }
}
