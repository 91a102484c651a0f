//! End-to-end recovery: program assembly, solve, unlifting and metrics.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{self, CertificateReport, CertifyError};
use crate::greedy::{greedy_solve, refine_lift, GreedyError};
use crate::invariance::{
    assemble_reflection_program, assemble_shift_invariant_program, autocorrelation_from_spectrum,
    unlift_shift_set, InvarianceError, ReflectionProgramOptions,
};
use crate::lifting::{GroupStructure, RealLifted};
use crate::measure::{MeasurementSet, Signal, Variant};
use crate::oracle::{brute_force_l0, OracleError};
use crate::solver::{
    assemble_program, solve_reweighted, AssembleOptions, SolveDiagnostics, SolverError,
    SolverOptions,
};

/// Relative entries below `1e-6 * max magnitude` do not count as support.
const SUPPORT_RTOL: f64 = 1e-6;

/// Exact recovery means a relative error below this threshold.
pub const EXACT_RECOVERY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("reference signal is zero")]
    ZeroReference,
    #[error("signals have mismatched kinds or lengths")]
    SignalMismatch,
    #[error("invariance mode {mode:?} is not available for variant {variant:?}")]
    UnsupportedInvariance { mode: InvarianceMode, variant: Variant },
    #[error("the shift-invariant program has no noise-tolerant form; epsilon must be 0")]
    NoisyShiftProgram,
    #[error("greedy search does not take invariance constraints")]
    GreedyWithInvariance,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Invariance(#[from] InvarianceError),
    #[error(transparent)]
    Greedy(#[from] GreedyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Convex,
    Greedy,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvarianceMode {
    None,
    Shift,
    Reflect,
}

#[derive(Debug, Clone)]
pub struct RecoverOptions {
    pub method: Method,
    pub invariance: InvarianceMode,
    /// Adds the autocorrelation equalities to the reflection program
    /// (requires an oversampled Fourier design).
    pub autocorr: bool,
    pub solver: SolverOptions,
    /// Cap on greedy/oracle support size; defaults to `n`.
    pub k_max: Option<usize>,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        Self {
            method: Method::Convex,
            invariance: InvarianceMode::None,
            autocorr: false,
            solver: SolverOptions::default(),
            k_max: None,
        }
    }
}

/// Outcome of one recovery run.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub estimate: Signal,
    /// Lifted estimate in the solved program's natural variable.
    pub lifted: DVector<f64>,
    pub diagnostics: Option<SolveDiagnostics>,
    pub certificate: CertificateReport,
    /// `‖y - E v̂‖` under the variant's real-linearized operator.
    pub data_residual: f64,
    /// Whether the strict inverse map accepted the lift.
    pub strict_lift: bool,
    /// Greedy support, when that method ran.
    pub support: Option<Vec<usize>>,
    /// Shift (and reflection) candidates for invariance-mode solves.
    pub shift_candidates: Option<Vec<DVector<f64>>>,
}

/// Runs the configured method on a measurement set.
pub fn recover(ms: &MeasurementSet, opts: &RecoverOptions) -> Result<Recovery, PipelineError> {
    let groups = GroupStructure::new(ms.n);
    let weights = ms.weights();
    let mu = certify::variant_coherence(&ms.a, ms.variant)?;
    let certificate = certify::exact_certificate(ms.n, mu, ms.variant)?;

    if opts.invariance != InvarianceMode::None {
        if !matches!(ms.variant, Variant::ComplexReal | Variant::Fourier) {
            return Err(PipelineError::UnsupportedInvariance {
                mode: opts.invariance,
                variant: ms.variant,
            });
        }
        if opts.method == Method::Greedy {
            return Err(PipelineError::GreedyWithInvariance);
        }
    }

    match opts.method {
        Method::Convex => {
            let problem = match opts.invariance {
                InvarianceMode::None => assemble_program(
                    ms,
                    &weights,
                    &groups,
                    &AssembleOptions { epsilon: ms.noise_bound },
                )?,
                InvarianceMode::Shift => {
                    if ms.noise_bound > 0.0 {
                        return Err(PipelineError::NoisyShiftProgram);
                    }
                    assemble_shift_invariant_program(ms, &weights, &groups)?
                }
                InvarianceMode::Reflect => {
                    let r = if opts.autocorr {
                        Some(autocorrelation_from_spectrum(&ms.y, ms.n)?)
                    } else {
                        None
                    };
                    assemble_reflection_program(
                        ms,
                        &weights,
                        &groups,
                        r.as_ref(),
                        &ReflectionProgramOptions { epsilon: ms.noise_bound, j_m: None },
                    )?
                }
            };
            let out = solve_reweighted(&problem, &opts.solver)?;
            let estimate = refine_lift(&out.v, ms.variant, ms.n);
            let strict_lift = strict_inverse_succeeds(&out.v, ms.variant, ms.n);
            let shift_candidates = if opts.invariance != InvarianceMode::None {
                let lift = RealLifted::from_vector(ms.n, out.v.clone()).expect("lift length");
                unlift_shift_set(&lift, opts.invariance == InvarianceMode::Reflect)
            } else {
                None
            };
            let data_residual = (&problem.data * &out.v - &problem.y).norm();
            Ok(Recovery {
                estimate,
                lifted: out.v,
                diagnostics: Some(out.diagnostics),
                certificate,
                data_residual,
                strict_lift,
                support: None,
                shift_candidates,
            })
        }
        Method::Greedy => {
            let k_max = opts.k_max.unwrap_or(ms.n);
            let out = greedy_solve(ms, &weights, &groups, k_max, ms.noise_bound, &opts.solver)?;
            let estimate = refine_lift(&out.lifted, ms.variant, ms.n);
            let strict_lift = strict_inverse_succeeds(&out.lifted, ms.variant, ms.n);
            Ok(Recovery {
                estimate,
                data_residual: out.final_residual,
                diagnostics: out.restricted_solve.clone(),
                certificate,
                strict_lift,
                support: Some(out.support),
                lifted: out.lifted,
                shift_candidates: None,
            })
        }
        Method::Oracle => {
            let k_max = opts.k_max.unwrap_or(ms.n);
            let result = brute_force_l0(ms, k_max)?;
            let estimate = result.solutions.first().cloned().unwrap_or(if ms.variant == Variant::Complex {
                Signal::Complex(DVector::zeros(ms.n))
            } else {
                Signal::Real(DVector::zeros(ms.n))
            });
            let data_residual = ms.lift_residual(&estimate);
            Ok(Recovery {
                lifted: DVector::zeros(0),
                diagnostics: None,
                certificate,
                data_residual,
                strict_lift: true,
                support: None,
                shift_candidates: None,
                estimate,
            })
        }
    }
}

fn strict_inverse_succeeds(lifted: &DVector<f64>, variant: Variant, n: usize) -> bool {
    let m = crate::lifting::lifted_len(n);
    if variant == Variant::Complex {
        let v = crate::solver::unstack_complex(lifted, m);
        let lift = crate::lifting::ComplexLifted::from_vector(n, v).expect("lift length");
        let strict = crate::lifting::inverse_veronese_complex(&lift);
        strict.iter().any(|e| e.norm() > 0.0)
    } else {
        let lift = RealLifted::from_vector(n, lifted.rows(0, m).into_owned()).expect("lift length");
        let strict = crate::lifting::inverse_veronese_real(&lift);
        strict.iter().any(|e| e.abs() > 0.0)
    }
}

/// Normalized distance to the reference's ambiguity class: over global phase
/// for complex signals (closed form through the inner product), over sign
/// for real ones.
pub fn relative_error(x_hat: &Signal, x0: &Signal) -> Result<f64, PipelineError> {
    if x0.norm() == 0.0 {
        return Err(PipelineError::ZeroReference);
    }
    if x_hat.len() != x0.len() {
        return Err(PipelineError::SignalMismatch);
    }
    match (x_hat, x0) {
        (Signal::Real(a), Signal::Real(b)) => {
            Ok((a - b).norm().min((a + b).norm()) / b.norm())
        }
        (a, b) => {
            let a = a.as_complex();
            let b = b.as_complex();
            let inner: Complex64 = b.dotc(&a);
            let z = if inner.norm() > 0.0 { inner / inner.norm() } else { Complex64::new(1.0, 0.0) };
            let diff = DVector::from_fn(a.len(), |k, _| a[k] - z * b[k]);
            Ok(diff.norm() / b.norm())
        }
    }
}

/// Relative error minimized over the requested invariance orbit of the
/// reference (circular shifts, optionally with reflection).
pub fn relative_error_invariant(
    x_hat: &Signal,
    x0: &Signal,
    mode: InvarianceMode,
) -> Result<f64, PipelineError> {
    if mode == InvarianceMode::None {
        return relative_error(x_hat, x0);
    }
    let (Signal::Real(reference), Signal::Real(_)) = (x0, x_hat) else {
        return Err(PipelineError::SignalMismatch);
    };
    let n = reference.len();
    let mut best = f64::INFINITY;
    for s in 0..n as i64 {
        let cand = Signal::Real(crate::invariance::shift(reference, s));
        best = best.min(relative_error(x_hat, &cand)?);
        if mode == InvarianceMode::Reflect {
            let cand = Signal::Real(crate::invariance::shift(
                &crate::invariance::reflection(reference),
                s,
            ));
            best = best.min(relative_error(x_hat, &cand)?);
        }
    }
    Ok(best)
}

fn support_mask(x: &Signal) -> Vec<bool> {
    let n = x.len();
    let max = (0..n).map(|k| x.magnitude(k)).fold(0.0_f64, f64::max);
    let tol = SUPPORT_RTOL * max;
    (0..n).map(|k| x.magnitude(k) > tol).collect()
}

/// Whether the recovered support matches the planted one, exactly or up to
/// the requested invariance orbit.
pub fn support_success(x_hat: &Signal, x0: &Signal, mode: InvarianceMode) -> bool {
    if x_hat.len() != x0.len() {
        return false;
    }
    let got = support_mask(x_hat);
    let want = support_mask(x0);
    let n = got.len();
    match mode {
        InvarianceMode::None => got == want,
        InvarianceMode::Shift | InvarianceMode::Reflect => {
            let rotations = |mask: &[bool]| -> Vec<Vec<bool>> {
                (0..n).map(|s| (0..n).map(|i| mask[(i + n - s) % n]).collect()).collect()
            };
            let mut orbit = rotations(&want);
            if mode == InvarianceMode::Reflect {
                let reflected: Vec<bool> = want.iter().rev().cloned().collect();
                orbit.extend(rotations(&reflected));
            }
            orbit.iter().any(|cand| cand == &got)
        }
    }
}

/// Everything recorded about one benchmark trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub planted_support: Vec<usize>,
    pub relative_error: f64,
    pub exact_success: bool,
    pub support_success: bool,
    pub mu: f64,
    pub cert_bound: f64,
    pub cert_holds_for: usize,
    pub cert_fires: bool,
    pub iterations: usize,
    pub converged: bool,
    pub data_residual: f64,
    pub eps_feasible: bool,
    pub strict_lift: bool,
    pub wall_seconds: f64,
}

/// Metrics of a recovery against the planted signal.
pub fn score_trial(
    ms: &MeasurementSet,
    recovery: &Recovery,
    x0: &Signal,
    mode: InvarianceMode,
    seed: u64,
    wall_seconds: f64,
) -> Result<TrialRecord, PipelineError> {
    let rel = relative_error_invariant(&recovery.estimate, x0, mode)?;
    let exact = rel < EXACT_RECOVERY_TOL;
    let support = support_success(&recovery.estimate, x0, mode);
    let planted: Vec<usize> = (0..x0.len()).filter(|&k| x0.magnitude(k) > 0.0).map(|k| k + 1).collect();
    let (iterations, converged) = recovery
        .diagnostics
        .as_ref()
        .map_or((0, true), |d| (d.iterations, d.converged));
    Ok(TrialRecord {
        seed,
        relative_error: rel,
        exact_success: exact,
        support_success: exact || support,
        mu: recovery.certificate.mu,
        cert_bound: recovery.certificate.bound,
        cert_holds_for: recovery.certificate.holds_for,
        cert_fires: recovery.certificate.fires_for(planted.len()),
        planted_support: planted,
        iterations,
        converged,
        data_residual: recovery.data_residual,
        eps_feasible: recovery.data_residual <= ms.noise_bound + 1e-8,
        strict_lift: recovery.strict_lift,
        wall_seconds,
    })
}

/// JSON report of a standalone `solve` run (no planted truth available).
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub variant: Variant,
    pub n: usize,
    pub method: Method,
    pub invariance: InvarianceMode,
    pub estimate_re: Vec<f64>,
    pub estimate_im: Option<Vec<f64>>,
    pub lifted: Vec<f64>,
    pub data_residual: f64,
    pub strict_lift: bool,
    pub certificate: CertificateReport,
    pub diagnostics: Option<SolveDiagnostics>,
    pub support: Option<Vec<usize>>,
}

impl SolveReport {
    pub fn new(ms: &MeasurementSet, opts: &RecoverOptions, recovery: &Recovery) -> Self {
        let (re, im) = match &recovery.estimate {
            Signal::Real(x) => (x.iter().cloned().collect(), None),
            Signal::Complex(x) => (
                x.iter().map(|e| e.re).collect(),
                Some(x.iter().map(|e| e.im).collect()),
            ),
        };
        Self {
            variant: ms.variant,
            n: ms.n,
            method: opts.method,
            invariance: opts.invariance,
            estimate_re: re,
            estimate_im: im,
            lifted: recovery.lifted.iter().cloned().collect(),
            data_residual: recovery.data_residual,
            strict_lift: recovery.strict_lift,
            certificate: recovery.certificate.clone(),
            diagnostics: recovery.diagnostics.clone(),
            support: recovery.support.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::gaussian_design;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::TAU;

    #[test]
    fn relative_error_reference_cases() {
        let x0 = Signal::Complex(DVector::from_row_slice(&[
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.3, 0.2),
        ]));
        // A global phase rotation is a perfect recovery.
        let rotated = match &x0 {
            Signal::Complex(x) => Signal::Complex(x.map(|e| e * Complex64::new(0.0, 1.0))),
            _ => unreachable!(),
        };
        assert!(relative_error(&rotated, &x0).unwrap() < 1e-15);

        let xr = Signal::Real(DVector::from_row_slice(&[2.0, -1.0, 0.0]));
        let flipped = Signal::Real(DVector::from_row_slice(&[-2.0, 1.0, 0.0]));
        assert!(relative_error(&flipped, &xr).unwrap() < 1e-15);

        assert!(matches!(
            relative_error(&xr, &Signal::Real(DVector::zeros(3))),
            Err(PipelineError::ZeroReference)
        ));
    }

    #[test]
    fn closed_form_phase_matches_grid_search() {
        let mut rng = ChaCha12Rng::seed_from_u64(81);
        for _ in 0..50 {
            let n = 4;
            let x0 = DVector::from_fn(n, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let x_hat = DVector::from_fn(n, |k, _| {
                x0[k] + 0.1 * Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let closed =
                relative_error(&Signal::Complex(x_hat.clone()), &Signal::Complex(x0.clone())).unwrap();
            // Two-stage phase grid as the independent oracle.
            let eval = |theta: f64| {
                let z = Complex64::from_polar(1.0, theta);
                (0..n).map(|k| (x_hat[k] - z * x0[k]).norm_sqr()).sum::<f64>().sqrt() / x0.norm()
            };
            let steps = 20_000;
            let mut best = (f64::INFINITY, 0.0);
            for s in 0..steps {
                let theta = TAU * s as f64 / steps as f64;
                let err = eval(theta);
                if err < best.0 {
                    best = (err, theta);
                }
            }
            let coarse = TAU / steps as f64;
            for s in 0..steps {
                let theta = best.1 - coarse + 2.0 * coarse * s as f64 / steps as f64;
                let err = eval(theta);
                if err < best.0 {
                    best = (err, theta);
                }
            }
            assert!((closed - best.0).abs() < 1e-9, "closed {closed} vs grid {}", best.0);
            assert!(closed <= best.0 + 1e-12);
        }

        // Perturbation along an orthogonal coordinate: error is |delta|/‖x0‖.
        let x0 = DVector::from_row_slice(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        let mut x_hat = x0.clone();
        x_hat[0] = Complex64::new(3e-3, 0.0);
        let err = relative_error(&Signal::Complex(x_hat), &Signal::Complex(x0)).unwrap();
        assert!((err - 3e-3).abs() < 1e-12);
    }

    #[test]
    fn support_metrics_respect_invariance_modes() {
        let x0 = Signal::Real(DVector::from_row_slice(&[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]));
        let shifted = Signal::Real(DVector::from_row_slice(&[0.0, 0.0, 0.0, 1.0, 2.0, 0.0]));
        assert!(!support_success(&shifted, &x0, InvarianceMode::None));
        assert!(support_success(&shifted, &x0, InvarianceMode::Shift));

        // A permuted-but-not-shifted support stays a failure in shift mode.
        let permuted = Signal::Real(DVector::from_row_slice(&[1.0, 0.0, 2.0, 0.0, 0.0, 0.0]));
        assert!(!support_success(&permuted, &x0, InvarianceMode::Shift));

        let reflected = Signal::Real(DVector::from_row_slice(&[0.0, 0.0, 0.0, 0.0, 2.0, 1.0]));
        assert!(support_success(&reflected, &x0, InvarianceMode::Reflect));

        // Exact recovery implies support success.
        assert!(support_success(&x0, &x0, InvarianceMode::None));
    }

    #[test]
    fn recover_single_spike_end_to_end() {
        let mut rng = ChaCha12Rng::seed_from_u64(83);
        let n = 5;
        let mut x = DVector::from_element(n, Complex64::new(0.0, 0.0));
        x[2] = Complex64::new(0.9, -1.1);
        let x0 = Signal::Complex(x);
        let q = gaussian_design(Variant::Complex, n, 20, &mut rng);
        let ms = MeasurementSet::from_signal(Variant::Complex, q, &x0, 0.0, 9).unwrap();
        let rec = recover(&ms, &RecoverOptions::default()).unwrap();
        let record = score_trial(&ms, &rec, &x0, InvarianceMode::None, 9, 0.0).unwrap();
        assert!(record.exact_success, "relative error {:.3e}", record.relative_error);
        assert!(record.support_success);
        assert!(record.eps_feasible);

        // Same seed, same record.
        let rec2 = recover(&ms, &RecoverOptions::default()).unwrap();
        let record2 = score_trial(&ms, &rec2, &x0, InvarianceMode::None, 9, 0.0).unwrap();
        assert_eq!(record.relative_error, record2.relative_error);
        assert_eq!(record.iterations, record2.iterations);
    }

    #[test]
    fn noisy_recovery_is_ball_feasible() {
        let mut rng = ChaCha12Rng::seed_from_u64(85);
        let n = 5;
        let mut x = DVector::from_element(n, Complex64::new(0.0, 0.0));
        x[0] = Complex64::new(2.0, 0.3);
        let x0 = Signal::Complex(x);
        let q = gaussian_design(Variant::Complex, n, 20, &mut rng);
        let ms = MeasurementSet::from_signal(Variant::Complex, q, &x0, 0.5, 11).unwrap();
        let rec = recover(&ms, &RecoverOptions::default()).unwrap();
        assert!(rec.data_residual <= 0.5 + 1e-8);
    }

    #[test]
    fn invariance_mode_rejections() {
        let mut rng = ChaCha12Rng::seed_from_u64(87);
        let q = gaussian_design(Variant::Complex, 4, 10, &mut rng);
        let x0 = Signal::Complex(DVector::from_fn(4, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        }));
        let ms = MeasurementSet::from_signal(Variant::Complex, q, &x0, 0.0, 1).unwrap();
        let opts = RecoverOptions {
            invariance: InvarianceMode::Shift,
            ..RecoverOptions::default()
        };
        assert!(matches!(
            recover(&ms, &opts),
            Err(PipelineError::UnsupportedInvariance { .. })
        ));
    }
}
