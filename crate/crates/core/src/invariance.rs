//! Shift- and reflection-invariant formulations for real signals measured
//! through complex vectors, and the autocorrelation machinery for Fourier
//! designs.
//!
//! Power-spectrum measurements cannot distinguish a signal from its circular
//! shifts and reflection, and the shifted signals lift to shuffled vectors
//! whose convex combinations defeat a plain block-l1 solve. Canonicalizing
//! the signal (largest-magnitude entry first, heavier half leading) makes
//! the lift of an equivalence class unique, and the same conditions turn
//! into linear constraints on the lifted estimate.

use nalgebra::DVector;
use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::lifting::{pair_to_flat, veronese_real, GroupStructure, RealLifted};
use crate::measure::{LinearOperator, MeasurementSet, WeightSet};
use crate::solver::{ConeProblem, DataConstraint, LinearRow, ObjectiveGroup, SolverError};

/// Relative tolerance declaring autocorrelation lags zero.
const AUTOCORR_ZERO_RTOL: f64 = 1e-9;

/// Tolerance for tied half-sums and tied argmax magnitudes.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum InvarianceError {
    #[error("reflection-aware canonicalization needs even n, got {0}")]
    OddDimension(usize),
    #[error("autocorrelation needs at least 2n - 1 = {needed} measurements, got {got}")]
    TooFewMeasurements { needed: usize, got: usize },
    #[error("program assembly failed: {0}")]
    Solver(#[from] SolverError),
}

/// Circular shift moving every entry `s` positions forward (negative `s`
/// shifts backward).
pub fn shift(x: &DVector<f64>, s: i64) -> DVector<f64> {
    let n = x.len() as i64;
    if n == 0 {
        return x.clone();
    }
    DVector::from_fn(x.len(), |i, _| {
        let src = (i as i64 - s).rem_euclid(n) as usize;
        x[src]
    })
}

/// Reflection `[x_n, x_{n-1}, ..., x_1]`.
pub fn reflection(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(n, |i, _| x[n - 1 - i])
}

/// Flags raised when a canonicalization precondition fails; invariance is
/// not guaranteed for flagged inputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvarianceFlags {
    /// The magnitude argmax was not unique; the smallest index was used.
    pub nonunique_argmax: bool,
    /// The two half-energy sums were equal; no reflection was applied.
    pub equal_half_sums: bool,
}

/// A canonicalized signal together with the transform that produced it:
/// `x2 = shift(reflection^applied_reflection(x), applied_shift)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub x2: DVector<f64>,
    pub applied_shift: i64,
    pub applied_reflection: bool,
    pub phi: RealLifted,
    pub flags: InvarianceFlags,
}

fn argmax_magnitude(x: &DVector<f64>) -> (usize, bool) {
    let mut best = 0usize;
    for i in 1..x.len() {
        if x[i].abs() > x[best].abs() {
            best = i;
        }
    }
    let ties = x.iter().filter(|v| v.abs() == x[best].abs()).count();
    (best, ties > 1)
}

/// Shift-only canonicalization: rotate the largest-magnitude entry to the
/// front. Returns the canonical signal, the applied shift and the tie flag.
pub fn canonicalize_shift(x: &DVector<f64>) -> (DVector<f64>, i64, bool) {
    let (k0, tied) = argmax_magnitude(x);
    let s = -(k0 as i64); // 1 - k in 1-based terms
    (shift(x, s), s, tied)
}

/// Lift of the shift-canonicalized signal.
pub fn phi_shift(x: &DVector<f64>) -> (RealLifted, bool) {
    let (x1, _, tied) = canonicalize_shift(x);
    (veronese_real(&x1), tied)
}

/// Shift- and reflection-aware canonicalization for even `n`: after moving
/// the largest entry first, reflect (and re-shift) when the leading half
/// carries strictly less energy than the trailing half.
pub fn varphi(x: &DVector<f64>) -> Result<CanonicalForm, InvarianceError> {
    let n = x.len();
    if n % 2 != 0 {
        return Err(InvarianceError::OddDimension(n));
    }
    let (k0, tied) = argmax_magnitude(x);
    let s = -(k0 as i64);
    let x1 = shift(x, s);
    let half = n / 2;
    let first: f64 = (1..half).map(|i| x1[i] * x1[i]).sum();
    let second: f64 = (half + 1..n).map(|i| x1[i] * x1[i]).sum();
    let scale = (first + second).max(1.0);
    let equal = (first - second).abs() <= TIE_TOL * scale;
    let (x2, applied_shift, applied_reflection) = if !equal && first < second {
        // shift(reflection(x1), 1) equals shift(reflection(x), k0 + 1).
        (shift(&reflection(&x1), 1), (k0 as i64 + 1).rem_euclid(n as i64), true)
    } else {
        (x1, s.rem_euclid(n as i64), false)
    };
    let phi = veronese_real(&x2);
    Ok(CanonicalForm {
        x2,
        applied_shift,
        applied_reflection,
        phi,
        flags: InvarianceFlags { nonunique_argmax: tied, equal_half_sums: equal },
    })
}

/// Reflection-aware lift of a canonicalized signal.
pub fn phi_reflect(x: &DVector<f64>) -> Result<CanonicalForm, InvarianceError> {
    varphi(x)
}

/// Autocorrelation lags `r_k = sum_i x_i x_{i+k}`, `k = 0..n-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrSequence {
    pub r: DVector<f64>,
}

impl AutocorrSequence {
    pub fn from_signal(x: &DVector<f64>) -> Self {
        let n = x.len();
        let r = DVector::from_fn(n, |k, _| (0..n - k).map(|i| x[i] * x[i + k]).sum());
        Self { r }
    }

    pub fn lags(&self) -> usize {
        self.r.len()
    }
}

/// Recovers the autocorrelation from an oversampled power spectrum: the
/// inverse DFT of `y`, real part, first `n` lags.
pub fn autocorrelation_from_spectrum(y: &DVector<f64>, n: usize) -> Result<AutocorrSequence, InvarianceError> {
    let count = y.len();
    if count < 2 * n - 1 {
        return Err(InvarianceError::TooFewMeasurements { needed: 2 * n - 1, got: count });
    }
    let r = DVector::from_fn(n, |k, _| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, &ym) in y.iter().enumerate() {
            acc += Complex64::from_polar(ym, TAU * (m * k) as f64 / count as f64);
        }
        acc.re / count as f64
    });
    Ok(AutocorrSequence { r })
}

/// Support restriction from a vanishing autocorrelation tail: `j_m` is the
/// smallest base index whose tail `r_{j-1}, ..., r_{n-1}` is all zero
/// (`n + 1` if none), and every base index from `j_m` on is forced to zero.
pub fn restrict_support(r: &AutocorrSequence) -> (Vec<usize>, usize) {
    let n = r.lags();
    let tol = AUTOCORR_ZERO_RTOL * r.r[0].abs().max(1e-300);
    let mut j_m = n + 1;
    for j in (1..=n).rev() {
        if r.r.rows(j - 1, n - (j - 1)).iter().all(|v| v.abs() <= tol) {
            j_m = j;
        } else {
            break;
        }
    }
    ((j_m..=n).collect(), j_m)
}

fn real_part_and_weights(ms: &MeasurementSet, weights: &WeightSet) -> Result<nalgebra::DMatrix<f64>, SolverError> {
    match &ms.a {
        LinearOperator::Complex(a) => Ok(a.map(|e| e.re)),
        LinearOperator::Real(_) => {
            let _ = weights;
            Err(SolverError::Dimension("invariance programs need complex measurement vectors".into()))
        }
    }
}

fn dominance_rows(n: usize) -> Vec<LinearRow> {
    let f11 = pair_to_flat(1, 1, n).expect("flat") - 1;
    (2..=n)
        .map(|j| {
            let fjj = pair_to_flat(j, j, n).expect("flat") - 1;
            LinearRow { coeffs: vec![(fjj, 1.0), (f11, -1.0)] }
        })
        .collect()
}

fn reflection_balance_row(n: usize) -> LinearRow {
    // sum_{i=2+n/2}^{n} phi_ii - sum_{i=2}^{n/2} phi_ii <= 0
    let half = n / 2;
    let mut coeffs = Vec::new();
    for i in 2..=half {
        coeffs.push((pair_to_flat(i, i, n).expect("flat") - 1, -1.0));
    }
    for i in half + 2..=n {
        coeffs.push((pair_to_flat(i, i, n).expect("flat") - 1, 1.0));
    }
    LinearRow { coeffs }
}

fn restricted_groups(
    groups: &GroupStructure,
    weights: &WeightSet,
    from: usize,
    to_inclusive: usize,
) -> Vec<ObjectiveGroup> {
    (from..=to_inclusive.min(groups.n()))
        .map(|j| {
            let coords: Vec<usize> = groups.group(j).iter().map(|&f| f - 1).collect();
            let w: Vec<f64> = coords.iter().map(|&c| weights.w_re[c]).collect();
            ObjectiveGroup { coords, weights: w, multiplier: 1.0 }
        })
        .collect()
}

/// Shift-invariant program: minimize the block norms of groups 2..n subject
/// to the data equalities and the dominance constraints
/// `phi_11 >= phi_jj >= 0`. The first group is left out of the objective
/// because the canonical signal has a nonzero first entry.
pub fn assemble_shift_invariant_program(
    ms: &MeasurementSet,
    weights: &WeightSet,
    groups: &GroupStructure,
) -> Result<ConeProblem, InvarianceError> {
    let n = ms.n;
    let data = real_part_and_weights(ms, weights)?;
    let problem = ConeProblem {
        dim: ms.lifted_dim(),
        data,
        y: ms.y.clone(),
        constraint: DataConstraint::Equality,
        groups: restricted_groups(groups, weights, 2, n),
        nonneg: (1..=n).map(|j| pair_to_flat(j, j, n).expect("flat") - 1).collect(),
        zeros: vec![],
        inequalities: dominance_rows(n),
        extra_equalities: None,
    };
    problem.validate()?;
    Ok(problem)
}

/// Options of the reflection-aware program.
#[derive(Debug, Clone, Default)]
pub struct ReflectionProgramOptions {
    /// Noise bound on the data constraint; zero keeps the hard equality.
    pub epsilon: f64,
    /// Overrides the support restriction index derived from `r`.
    pub j_m: Option<usize>,
}

/// Reflection-aware program. Without an autocorrelation sequence this is
/// the shift-invariant program plus the reflection-balance inequality on
/// the diagonal energies. With one, the objective keeps groups
/// `2..=j_m - 2`, sign constraints cover `1..j_m`, the autocorrelation
/// lags become hard equalities and the groups from `j_m` on are zeroed;
/// the dominance constraints are dropped because oversampled measurements
/// are not invariant to plain circular shifts.
pub fn assemble_reflection_program(
    ms: &MeasurementSet,
    weights: &WeightSet,
    groups: &GroupStructure,
    r: Option<&AutocorrSequence>,
    options: &ReflectionProgramOptions,
) -> Result<ConeProblem, InvarianceError> {
    let n = ms.n;
    if n % 2 != 0 {
        return Err(InvarianceError::OddDimension(n));
    }
    let m = ms.lifted_dim();
    let data = real_part_and_weights(ms, weights)?;
    let constraint = if options.epsilon > 0.0 {
        DataConstraint::Ball(options.epsilon)
    } else {
        DataConstraint::Equality
    };
    let problem = match r {
        None => {
            let mut p = ConeProblem {
                dim: m,
                data,
                y: ms.y.clone(),
                constraint,
                groups: restricted_groups(groups, weights, 2, n),
                nonneg: (1..=n).map(|j| pair_to_flat(j, j, n).expect("flat") - 1).collect(),
                zeros: vec![],
                inequalities: dominance_rows(n),
                extra_equalities: None,
            };
            p.inequalities.push(reflection_balance_row(n));
            p
        }
        Some(r) => {
            if ms.count() < 2 * n - 1 {
                return Err(InvarianceError::TooFewMeasurements {
                    needed: 2 * n - 1,
                    got: ms.count(),
                });
            }
            let (zeroed, derived_jm) = restrict_support(r);
            let j_m = options.j_m.unwrap_or(derived_jm);
            let zeroed: Vec<usize> = if options.j_m.is_some() {
                (j_m..=n).collect()
            } else {
                zeroed
            };
            // Autocorrelation rows: sum_i phi_{i,i+k} = r_k.
            let mut rows = nalgebra::DMatrix::zeros(n, m);
            let mut rhs = DVector::zeros(n);
            for k in 0..n {
                for i in 1..=n - k {
                    rows[(k, pair_to_flat(i, i + k, n).expect("flat") - 1)] += 1.0;
                }
                rhs[k] = r.r[k];
            }
            let mut zeros = Vec::new();
            for &j in &zeroed {
                for &f in groups.group(j) {
                    if !zeros.contains(&(f - 1)) {
                        zeros.push(f - 1);
                    }
                }
            }
            let objective_to = j_m.saturating_sub(2);
            ConeProblem {
                dim: m,
                data,
                y: ms.y.clone(),
                constraint,
                groups: if objective_to >= 2 {
                    restricted_groups(groups, weights, 2, objective_to)
                } else {
                    vec![]
                },
                nonneg: (1..j_m.min(n + 1))
                    .map(|j| pair_to_flat(j, j, n).expect("flat") - 1)
                    .collect(),
                zeros,
                inequalities: vec![reflection_balance_row(n)],
                extra_equalities: Some((rows, rhs)),
            }
        }
    };
    problem.validate().map_err(InvarianceError::Solver)?;
    Ok(problem)
}

/// All circular shifts of the unlifted estimate (and their reflections when
/// asked). Returns `None` when the inverse map degenerates to zero.
pub fn unlift_shift_set(
    phi_hat: &RealLifted,
    include_reflections: bool,
) -> Option<Vec<DVector<f64>>> {
    let base = crate::lifting::inverse_veronese_real(phi_hat);
    if base.iter().all(|v| *v == 0.0) {
        return None;
    }
    let n = base.len();
    let mut out = Vec::with_capacity(if include_reflections { 2 * n } else { n });
    for s in 0..n {
        out.push(shift(&base, s as i64));
    }
    if include_reflections {
        let r = reflection(&base);
        for s in 0..n {
            out.push(shift(&r, s as i64));
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_fourier_design, MeasurementSet, Signal, Variant};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn dv(data: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(data)
    }

    #[test]
    fn shift_and_reflection_conventions() {
        let x = dv(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(shift(&x, 1), dv(&[4.0, 1.0, 2.0, 3.0]));
        assert_eq!(shift(&x, -1), dv(&[2.0, 3.0, 4.0, 1.0]));
        assert_eq!(shift(&x, 4), x);
        assert_eq!(reflection(&x), dv(&[4.0, 3.0, 2.0, 1.0]));
    }

    #[test]
    fn phi_shift_reference_cases() {
        // Max already first: the lift is unchanged.
        let x = dv(&[5.0, 1.0, 0.0, -2.0]);
        let (phi, tied) = phi_shift(&x);
        assert!(!tied);
        assert_eq!(phi, veronese_real(&x));

        // All shifts of a vector with a unique max give the same output.
        let x = dv(&[1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
        let (reference, _) = phi_shift(&x);
        for s in 0..6 {
            let (phi, _) = phi_shift(&shift(&x, s));
            assert_eq!(phi, reference);
        }
        assert_eq!(reference, veronese_real(&dv(&[4.0, 0.0, 0.0, 1.0, 2.0, 3.0])));
    }

    #[test]
    fn reflection_canonicalization_merges_the_example_family() {
        let family = [
            dv(&[1.0, 2.0, 3.0, 4.0, 0.0, 0.0]),
            dv(&[4.0, 0.0, 0.0, 1.0, 2.0, 3.0]),
            dv(&[0.0, 0.0, 4.0, 3.0, 2.0, 1.0]),
            dv(&[2.0, 1.0, 0.0, 0.0, 4.0, 3.0]),
            dv(&[4.0, 3.0, 2.0, 1.0, 0.0, 0.0]),
        ];
        let expected = veronese_real(&family[4]);
        for x in &family {
            let form = varphi(x).unwrap();
            assert_eq!(form.phi, expected, "family member {x:?}");
            assert_eq!(form.x2, family[4]);
            assert!(!form.flags.nonunique_argmax);
            assert!(!form.flags.equal_half_sums);
            // The recorded transform reproduces x2.
            let base = if form.applied_reflection { reflection(x) } else { x.clone() };
            assert_eq!(shift(&base, form.applied_shift), form.x2);
        }

        // Already canonical: identity transform.
        let form = varphi(&family[4]).unwrap();
        assert_eq!(form.applied_shift, 0);
        assert!(!form.applied_reflection);

        // Reflecting a canonical vector lands on the same form.
        let form_r = varphi(&reflection(&family[4])).unwrap();
        assert_eq!(form_r.phi, expected);
    }

    #[test]
    fn varphi_invariance_properties() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let mut checked = 0;
        while checked < 300 {
            let n = [4usize, 6, 8, 10][rng.gen_range(0..4)];
            let x = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let form = varphi(&x).unwrap();
            if form.flags.nonunique_argmax || form.flags.equal_half_sums {
                continue;
            }
            checked += 1;
            // Idempotence.
            let again = varphi(&form.x2).unwrap();
            assert_eq!(again.x2, form.x2);
            // Shift invariance.
            for s in 0..n as i64 {
                assert_eq!(varphi(&shift(&x, s)).unwrap().x2, form.x2);
            }
            // Reflection invariance.
            assert_eq!(varphi(&reflection(&x)).unwrap().x2, form.x2);
        }
    }

    #[test]
    fn autocorrelation_reference_and_oracle() {
        let x = dv(&[1.0, 1.0, 0.0, 0.0]);
        let q = make_fourier_design(4, 8).unwrap();
        let ms = MeasurementSet::from_signal(Variant::Fourier, q, &Signal::Real(x.clone()), 0.0, 0).unwrap();
        let r = autocorrelation_from_spectrum(&ms.y, 4).unwrap();
        assert!((r.r.clone() - dv(&[2.0, 1.0, 0.0, 0.0])).norm() < 1e-9);

        let e1 = dv(&[1.0, 0.0, 0.0, 0.0]);
        let q = make_fourier_design(4, 8).unwrap();
        let ms = MeasurementSet::from_signal(Variant::Fourier, q, &Signal::Real(e1), 0.0, 0).unwrap();
        let r = autocorrelation_from_spectrum(&ms.y, 4).unwrap();
        assert!((r.r.clone() - dv(&[1.0, 0.0, 0.0, 0.0])).norm() < 1e-9);

        // Spectrum route matches the direct-summation oracle.
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        for _ in 0..100 {
            let n = 2 + rng.gen_range(0..5);
            let x = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let q = make_fourier_design(n, 2 * n).unwrap();
            let ms =
                MeasurementSet::from_signal(Variant::Fourier, q, &Signal::Real(x.clone()), 0.0, 0)
                    .unwrap();
            let from_spectrum = autocorrelation_from_spectrum(&ms.y, n).unwrap();
            let direct = AutocorrSequence::from_signal(&x);
            assert!((from_spectrum.r - direct.r).norm() < 1e-9);
        }

        assert!(matches!(
            autocorrelation_from_spectrum(&dv(&[1.0, 2.0]), 4),
            Err(InvarianceError::TooFewMeasurements { .. })
        ));
    }

    #[test]
    fn support_restriction_reference_cases() {
        let (zeroed, j_m) = restrict_support(&AutocorrSequence { r: dv(&[2.0, 1.0, 0.0, 0.0]) });
        assert_eq!(j_m, 3);
        assert_eq!(zeroed, vec![3, 4]);

        let (zeroed, j_m) = restrict_support(&AutocorrSequence { r: dv(&[2.0, 1.0, 0.0, 0.5]) });
        assert_eq!(j_m, 5);
        assert!(zeroed.is_empty());

        let (zeroed, j_m) = restrict_support(&AutocorrSequence { r: dv(&[3.0, 0.0, 0.0, 0.0]) });
        assert_eq!(j_m, 2);
        assert_eq!(zeroed, vec![2, 3, 4]);
    }

    fn fourier_case(x: &DVector<f64>, count: usize) -> (MeasurementSet, WeightSet, GroupStructure) {
        let n = x.len();
        let q = make_fourier_design(n, count).unwrap();
        let ms = MeasurementSet::from_signal(Variant::Fourier, q, &Signal::Real(x.clone()), 0.0, 0).unwrap();
        let w = ms.weights();
        let g = GroupStructure::new(n);
        (ms, w, g)
    }

    #[test]
    fn shift_program_structure_and_feasibility() {
        let x = dv(&[0.0, 3.0, 1.0, 0.0]);
        let (ms, w, g) = fourier_case(&x, 4);
        let p = assemble_shift_invariant_program(&ms, &w, &g).unwrap();
        assert_eq!(p.groups.len(), 3);
        assert_eq!(p.inequalities.len(), 3);
        assert_eq!(p.nonneg.len(), 4);

        // The canonical lift satisfies every constraint; a non-canonical
        // shift violates the dominance rows.
        let (canon, _, _) = canonicalize_shift(&x);
        assert!(p.max_violation(&veronese_real(&canon).into_vector()) < 1e-8);
        let shifted = shift(&canon, 1);
        assert!(p.max_violation(&veronese_real(&shifted).into_vector()) > 1e-3);
    }

    #[test]
    fn reflection_program_with_autocorrelation() {
        let x = dv(&[2.0, -1.0, 0.0, 0.0]);
        let (ms, w, g) = fourier_case(&x, 8);
        let r = autocorrelation_from_spectrum(&ms.y, 4).unwrap();

        // r_0 pins the diagonal sum to the signal energy.
        assert!((r.r[0] - x.norm_squared()).abs() < 1e-9);

        let p = assemble_reflection_program(&ms, &w, &g, Some(&r), &ReflectionProgramOptions::default())
            .unwrap();
        // Support {1, 2} leaves j_m = 3: zeroed groups 3 and 4, sign
        // constraints on diagonals 1 and 2, objective empty (2..=1).
        assert!(p.groups.is_empty());
        assert_eq!(p.nonneg.len(), 2);
        let canonical = varphi(&x).unwrap();
        assert!(p.max_violation(&canonical.phi.as_vector().clone()) < 1e-8);

        // Without r: shift program plus the reflection balance row.
        let p20 = assemble_reflection_program(&ms, &w, &g, None, &ReflectionProgramOptions::default())
            .unwrap();
        assert_eq!(p20.inequalities.len(), 4);
        assert_eq!(p20.groups.len(), 3);

        // j_m = n + 1 override keeps every group free.
        let opts = ReflectionProgramOptions { epsilon: 0.0, j_m: Some(5) };
        let pfree = assemble_reflection_program(&ms, &w, &g, Some(&r), &opts).unwrap();
        assert!(pfree.zeros.is_empty());
        assert_eq!(pfree.groups.len(), 2); // groups 2..=3
    }

    #[test]
    fn unlift_shift_set_enumerates_candidates() {
        let x = dv(&[4.0, 3.0, 2.0, 1.0, 0.0, 0.0]);
        let phi = veronese_real(&x);
        let set = unlift_shift_set(&phi, false).unwrap();
        assert_eq!(set.len(), 6);
        assert!(set.iter().any(|c| (c - dv(&[0.0, 4.0, 3.0, 2.0, 1.0, 0.0])).norm() < 1e-9));
        // Closed under shifting.
        for c in &set {
            assert!(set.iter().any(|d| (d - shift(c, 1)).norm() < 1e-12));
        }
        // The reversed-order member of the example family is a reflected
        // shift, so it appears once reflections are included.
        let with_r = unlift_shift_set(&phi, true).unwrap();
        assert_eq!(with_r.len(), 12);
        assert!(with_r.iter().any(|c| (c - dv(&[1.0, 2.0, 3.0, 4.0, 0.0, 0.0])).norm() < 1e-9));
        assert!(!set.iter().any(|c| (c - dv(&[1.0, 2.0, 3.0, 4.0, 0.0, 0.0])).norm() < 1e-9));

        let zero = RealLifted::from_vector(3, DVector::zeros(6)).unwrap();
        assert!(unlift_shift_set(&zero, false).is_none());
    }

    #[test]
    fn exactly_one_family_member_is_feasible_for_the_reflection_program() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let n = 6;
        let mut done = 0;
        while done < 25 {
            let mut x = DVector::zeros(n);
            for k in 0..3 {
                x[k] = rng.sample::<f64, _>(StandardNormal);
            }
            let form = varphi(&x).unwrap();
            if form.flags.nonunique_argmax || form.flags.equal_half_sums {
                continue;
            }
            done += 1;
            let (ms, w, g) = fourier_case(&x, n);
            let p = assemble_reflection_program(&ms, &w, &g, None, &ReflectionProgramOptions::default())
                .unwrap();
            let mut family = Vec::new();
            for s in 0..n as i64 {
                family.push(shift(&x, s));
            }
            let refl = reflection(&x);
            for s in 0..n as i64 {
                family.push(shift(&refl, s));
            }
            // Deduplicate identical vectors before counting.
            let mut unique: Vec<DVector<f64>> = Vec::new();
            for c in family {
                if !unique.iter().any(|u| (u - &c).norm() < 1e-12) {
                    unique.push(c);
                }
            }
            let feasible = unique
                .iter()
                .filter(|c| p.max_violation(&veronese_real(c).into_vector()) < 1e-7)
                .count();
            assert_eq!(feasible, 1, "signal {x:?}");
        }
    }
}
