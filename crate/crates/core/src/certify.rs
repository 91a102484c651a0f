//! Mutual coherence and the recovery certificates built from it.
//!
//! Every certificate is a sparsity threshold: when the planted signal has
//! strictly fewer nonzeros than the bound, the block-l1 relaxation is
//! guaranteed to return the exact lift (noiseless case) or a lift within a
//! coherence-controlled distance of it (noisy case). The kernel bounds the
//! proofs rest on are exposed as property checkers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{LinearOperator, Variant};

/// Columns with norm below this are excluded from coherence computations;
/// they carry no direction information and would divide by zero.
pub const COHERENCE_ZERO_COL_TOL: f64 = 1e-12;

/// Guard band against floating-point ties when flooring a strict inequality.
const TIE_GUARD: f64 = 1e-12;

/// Numerical kernel membership threshold for the lemma checkers.
const KERNEL_TOL: f64 = 1e-8;

/// Slack granted to the kernel-bound inequalities.
const LEMMA_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("coherence needs at least two nonzero columns, found {0}")]
    TooFewColumns(usize),
    #[error("coherence argument mu must lie in (0, 1], got {0}")]
    MuOutOfRange(f64),
    #[error("vector is not in the numerical kernel: |A d| = {residual:.3e} > {threshold:.3e}")]
    NotInKernel { residual: f64, threshold: f64 },
    #[error("flat index {index} out of range 1..={m}")]
    IndexOutOfRange { index: usize, m: usize },
}

/// Which statement produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    ExactReal,
    ExactComplex,
    ExactComplexReal,
    StabilityReal,
    StabilityComplex,
}

/// A coherence value together with the sparsity threshold it certifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// Mutual coherence of the relevant operator, in [0, 1].
    pub mu: f64,
    /// Real-valued sparsity threshold; recovery is certified for signals with
    /// strictly fewer nonzeros.
    pub bound: f64,
    /// Largest integer sparsity the strict inequality certifies.
    pub holds_for: usize,
    pub theorem: TheoremId,
    /// Error bound of the stability statements when a noise budget applies.
    pub stability_rhs: Option<f64>,
}

impl CertificateReport {
    /// Whether the certificate covers a planted sparsity level.
    pub fn fires_for(&self, sparsity: usize) -> bool {
        (sparsity as f64) < self.bound - TIE_GUARD
    }
}

/// Mutual coherence: the largest normalized inner product between distinct
/// columns. Numerically zero columns are skipped and reported through
/// [`coherence_details`].
pub fn mutual_coherence(a: &DMatrix<f64>) -> Result<f64, CertifyError> {
    coherence_details(a).map(|d| d.mu)
}

pub struct CoherenceDetails {
    pub mu: f64,
    /// 1-based indices of columns excluded for having ~zero norm.
    pub excluded: Vec<usize>,
}

pub fn coherence_details(a: &DMatrix<f64>) -> Result<CoherenceDetails, CertifyError> {
    let mut cols: Vec<usize> = Vec::new();
    let mut excluded = Vec::new();
    let mut norms = DVector::zeros(a.ncols());
    for c in 0..a.ncols() {
        let nrm = a.column(c).norm();
        if nrm < COHERENCE_ZERO_COL_TOL {
            excluded.push(c + 1);
        } else {
            norms[c] = nrm;
            cols.push(c);
        }
    }
    if cols.len() < 2 {
        return Err(CertifyError::TooFewColumns(cols.len()));
    }
    let mut mu = 0.0_f64;
    for (pos, &i) in cols.iter().enumerate() {
        for &j in &cols[pos + 1..] {
            let c = a.column(i).dot(&a.column(j)).abs() / (norms[i] * norms[j]);
            mu = mu.max(c);
        }
    }
    Ok(CoherenceDetails { mu: mu.min(1.0), excluded })
}

/// Coherence of the operator the relevant theorem is stated with: `A` in the
/// real case, the stacked `[Re(A), -Im(A)]` for complex signals, `Re(A)` for
/// real signals with complex measurements.
pub fn variant_coherence(a: &LinearOperator, variant: Variant) -> Result<f64, CertifyError> {
    let real = match (a, variant) {
        (LinearOperator::Real(a), _) => a.clone(),
        (LinearOperator::Complex(a), Variant::Complex) => crate::measure::build_a_tilde(a),
        (LinearOperator::Complex(a), _) => a.map(|e| e.re),
    };
    mutual_coherence(&real)
}

fn exact_bound(dim_factor: f64, mu: f64) -> Result<f64, CertifyError> {
    if mu == 0.0 {
        return Ok(f64::INFINITY);
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(CertifyError::MuOutOfRange(mu));
    }
    Ok((1.0 / (2.0 * dim_factor.sqrt())) * (1.0 + mu.powi(-2)).sqrt())
}

/// Largest sparsity strictly below `bound`, capped at `n`.
pub fn holds_for(bound: f64, n: usize) -> usize {
    if bound.is_infinite() {
        return n;
    }
    let s = (bound - TIE_GUARD).floor();
    if s <= 0.0 { 0 } else { (s as usize).min(n) }
}

/// Noiseless certificate for the real case:
/// `‖x0‖₀ < (1 / 2√n) √(1 + 1/μ²(A))`.
pub fn exact_bound_real(n: usize, mu: f64) -> Result<f64, CertifyError> {
    exact_bound(n as f64, mu)
}

/// Noiseless certificate for the complex case, with `2n` replacing `n` and
/// the coherence taken on the stacked operator.
pub fn exact_bound_complex(n: usize, mu_tilde: f64) -> Result<f64, CertifyError> {
    exact_bound(2.0 * n as f64, mu_tilde)
}

/// Real signals with complex measurements: the real-case form evaluated at
/// `μ(Re(A))`, which gains a factor √2 over the complex bound.
pub fn exact_bound_complex_real(n: usize, mu_re: f64) -> Result<f64, CertifyError> {
    exact_bound(n as f64, mu_re)
}

pub fn exact_certificate(n: usize, mu: f64, variant: Variant) -> Result<CertificateReport, CertifyError> {
    let (bound, theorem) = match variant {
        Variant::Real => (exact_bound_real(n, mu)?, TheoremId::ExactReal),
        Variant::Complex => (exact_bound_complex(n, mu)?, TheoremId::ExactComplex),
        Variant::ComplexReal | Variant::Fourier => {
            (exact_bound_complex_real(n, mu)?, TheoremId::ExactComplexReal)
        }
    };
    Ok(CertificateReport { mu, bound, holds_for: holds_for(bound, n), theorem, stability_rhs: None })
}

/// Stability hypothesis and error bound under noise of norm at most `eps`.
///
/// The hypothesis is `‖x0‖₀ < (1 / 2n²(n+1)) (1 + 1/μ)`; when it holds the
/// weighted lifted error obeys
/// `‖W(v̂ - nu(x0))‖² ≤ 4 n ε² / (1 - μ [2n²(n+1)‖x0‖₀ - 1])`.
/// The same form serves the real and complex statements, with `μ` taken on
/// `A` or on the stacked operator respectively.
pub fn stability_bound(
    n: usize,
    mu: f64,
    sparsity: usize,
    eps: f64,
    variant: Variant,
) -> Result<(bool, f64), CertifyError> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(CertifyError::MuOutOfRange(mu));
    }
    let _ = variant; // identical algebraic form in both stability statements
    let nf = n as f64;
    let s = sparsity as f64;
    let factor = 2.0 * nf * nf * (nf + 1.0);
    let condition = s < (1.0 / factor) * (1.0 + 1.0 / mu) - TIE_GUARD;
    let denom = 1.0 - mu * (factor * s - 1.0);
    let rhs = if condition { 4.0 * nf * eps * eps / denom } else { f64::NAN };
    Ok((condition, rhs))
}

pub fn stability_certificate(
    n: usize,
    mu: f64,
    sparsity: usize,
    eps: f64,
    variant: Variant,
) -> Result<CertificateReport, CertifyError> {
    let (holds, rhs) = stability_bound(n, mu, sparsity, eps, variant)?;
    let factor = 2.0 * (n as f64).powi(2) * (n as f64 + 1.0);
    let bound = (1.0 / factor) * (1.0 + 1.0 / mu);
    let theorem = if variant == Variant::Real { TheoremId::StabilityReal } else { TheoremId::StabilityComplex };
    Ok(CertificateReport {
        mu,
        bound,
        holds_for: holds_for(bound, n),
        theorem,
        stability_rhs: holds.then_some(rhs),
    })
}

/// Kernel bound for a real operator: for `d` in the kernel of `a`,
/// `w_i² d_i² ≤ μ²/(1+μ²) ‖W d‖²`.
///
/// `flat_i` is 1-based. Also covers the real-signal/complex-data analog when
/// called with `Re(A)` and its weights.
pub fn kernel_bound_check_real(
    a: &DMatrix<f64>,
    w: &DVector<f64>,
    delta: &DVector<f64>,
    flat_i: usize,
) -> Result<bool, CertifyError> {
    if flat_i == 0 || flat_i > delta.len() {
        return Err(CertifyError::IndexOutOfRange { index: flat_i, m: delta.len() });
    }
    let residual = (a * delta).norm();
    let threshold = KERNEL_TOL * delta.norm();
    if residual > threshold {
        return Err(CertifyError::NotInKernel { residual, threshold });
    }
    if delta.norm() == 0.0 {
        return Ok(true);
    }
    let mu = mutual_coherence(a)?;
    // The lemma is stated with the true column norms; zero columns (whose
    // weight was replaced by 1 for invertibility elsewhere) contribute
    // nothing here.
    let w_eff = |i: usize| {
        if a.column(i).norm() < COHERENCE_ZERO_COL_TOL { 0.0 } else { w[i] }
    };
    let lhs = (w_eff(flat_i - 1) * delta[flat_i - 1]).powi(2);
    let weighted_sq: f64 = (0..delta.len()).map(|i| (w_eff(i) * delta[i]).powi(2)).sum();
    let rhs = mu * mu / (1.0 + mu * mu) * weighted_sq;
    Ok(lhs <= rhs + LEMMA_SLACK * rhs.max(1.0))
}

/// Kernel bound for complex perturbations with `Re(A d) = 0`:
/// `(w_i^R)² Re(d_i)² + (w_i^I)² Im(d_i)² ≤ 2μ²(Ã)/(1+μ²(Ã)) ‖W^R Re(d) + i W^I Im(d)‖²`.
pub fn kernel_bound_check_complex(
    a: &DMatrix<Complex64>,
    w_re: &DVector<f64>,
    w_im: &DVector<f64>,
    delta: &DVector<Complex64>,
    flat_i: usize,
) -> Result<bool, CertifyError> {
    if flat_i == 0 || flat_i > delta.len() {
        return Err(CertifyError::IndexOutOfRange { index: flat_i, m: delta.len() });
    }
    let re_ad = DVector::from_fn(a.nrows(), |r, _| {
        (0..a.ncols()).map(|c| a[(r, c)] * delta[c]).sum::<Complex64>().re
    });
    let residual = re_ad.norm();
    let dnorm = delta.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
    let threshold = KERNEL_TOL * dnorm;
    if residual > threshold {
        return Err(CertifyError::NotInKernel { residual, threshold });
    }
    if dnorm == 0.0 {
        return Ok(true);
    }
    let mu = mutual_coherence(&crate::measure::build_a_tilde(a))?;
    // Use the true part-wise column norms; replaced unit weights on zero
    // columns would overstate the left-hand side.
    let re_norm = |c: usize| a.column(c).iter().map(|e| e.re * e.re).sum::<f64>().sqrt();
    let im_norm = |c: usize| a.column(c).iter().map(|e| e.im * e.im).sum::<f64>().sqrt();
    let wr_eff = |c: usize| if re_norm(c) < COHERENCE_ZERO_COL_TOL { 0.0 } else { w_re[c] };
    let wi_eff = |c: usize| if im_norm(c) < COHERENCE_ZERO_COL_TOL { 0.0 } else { w_im[c] };
    let i = flat_i - 1;
    let lhs = (wr_eff(i) * delta[i].re).powi(2) + (wi_eff(i) * delta[i].im).powi(2);
    let weighted_sq: f64 = (0..delta.len())
        .map(|k| (wr_eff(k) * delta[k].re).powi(2) + (wi_eff(k) * delta[k].im).powi(2))
        .sum();
    let rhs = 2.0 * mu * mu / (1.0 + mu * mu) * weighted_sq;
    Ok(lhs <= rhs + LEMMA_SLACK * rhs.max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::nullspace;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn coherence_reference_values() {
        assert_eq!(mutual_coherence(&DMatrix::identity(5, 5)).unwrap(), 0.0);

        let mut two = DMatrix::zeros(3, 2);
        two.set_column(0, &DVector::from_row_slice(&[1.0, 2.0, -1.0]));
        two.set_column(1, &DVector::from_row_slice(&[2.0, 4.0, -2.0]));
        assert!((mutual_coherence(&two).unwrap() - 1.0).abs() < 1e-14);

        assert!(matches!(
            mutual_coherence(&DMatrix::zeros(3, 4)),
            Err(CertifyError::TooFewColumns(0))
        ));
    }

    #[test]
    fn coherence_matches_pairwise_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let a = random_matrix(6, 10, &mut rng);
        // Independent route: normalize the columns and take the largest
        // off-diagonal entry of the Gram matrix.
        let mut b = a.clone();
        for c in 0..b.ncols() {
            let nrm = b.column(c).norm();
            let mut col = b.column_mut(c);
            col /= nrm;
        }
        let gram = b.transpose() * &b;
        let mut expected = 0.0_f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                if i != j {
                    expected = expected.max(gram[(i, j)].abs());
                }
            }
        }
        assert!((mutual_coherence(&a).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn coherence_is_permutation_and_scaling_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let a = random_matrix(5, 8, &mut rng);
        let mu = mutual_coherence(&a).unwrap();

        let mut permuted = DMatrix::zeros(5, 8);
        let order = [3usize, 0, 7, 1, 5, 2, 6, 4];
        for (dst, &src) in order.iter().enumerate() {
            permuted.set_column(dst, &a.column(src));
        }
        assert!((mutual_coherence(&permuted).unwrap() - mu).abs() < 1e-12);

        let mut scaled = a.clone();
        for c in 0..8 {
            let s = 0.1 + c as f64;
            let mut col = scaled.column_mut(c);
            col *= s;
        }
        assert!((mutual_coherence(&scaled).unwrap() - mu).abs() < 1e-12);
    }

    #[test]
    fn exact_bounds_reference_values() {
        let b = exact_bound_real(4, 1.0).unwrap();
        assert!((b - 2.0_f64.sqrt() / 4.0).abs() < 1e-12);
        assert_eq!(holds_for(b, 4), 0);

        let b = exact_bound_real(4, 0.1).unwrap();
        assert!((b - 101.0_f64.sqrt() / 4.0).abs() < 1e-12);
        assert_eq!(holds_for(b, 4), 2);

        assert!(exact_bound_real(4, 0.0).unwrap().is_infinite());
        assert_eq!(holds_for(f64::INFINITY, 4), 4);

        let b = exact_bound_complex(4, 0.1).unwrap();
        assert!((b - 101.0_f64.sqrt() / (2.0 * 8.0_f64.sqrt())).abs() < 1e-12);
        assert_eq!(holds_for(b, 4), 1);
        let b = exact_bound_complex(2, 1.0).unwrap();
        assert!((b - 2.0_f64.sqrt() / 4.0).abs() < 1e-12);
        // Identical to the real bound at dimension 2n.
        assert_eq!(exact_bound_complex(4, 0.37).unwrap(), exact_bound_real(8, 0.37).unwrap());

        let b = exact_bound_complex_real(9, 0.2).unwrap();
        assert!((b - 26.0_f64.sqrt() / 6.0).abs() < 1e-12);
        assert_eq!(holds_for(b, 9), 0);
    }

    #[test]
    fn stability_reference_values() {
        // n = 2, sparsity 1, mu = 0.01: hypothesis 1 < 101/24 holds and the
        // rhs is 8 eps^2 / 0.77.
        let (holds, rhs) = stability_bound(2, 0.01, 1, 0.5, Variant::Real).unwrap();
        assert!(holds);
        assert!((rhs - 8.0 * 0.25 / 0.77).abs() < 1e-12);

        let (holds, rhs) = stability_bound(2, 0.01, 1, 0.0, Variant::Real).unwrap();
        assert!(holds);
        assert_eq!(rhs, 0.0);

        let (holds, _) = stability_bound(2, 0.5, 1, 0.1, Variant::Complex).unwrap();
        assert!(!holds);
    }

    #[test]
    fn kernel_bound_checker_reference_cases() {
        // Zero vector is trivially inside the bound.
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let a = random_matrix(4, 10, &mut rng);
        let w = DVector::from_fn(10, |c, _| a.column(c).norm());
        assert!(kernel_bound_check_real(&a, &w, &DVector::zeros(10), 1).unwrap());

        // A vector outside the kernel violates the precondition.
        let outside = DVector::from_fn(10, |_, _| rng.sample::<f64, _>(StandardNormal));
        assert!(matches!(
            kernel_bound_check_real(&a, &w, &outside, 1),
            Err(CertifyError::NotInKernel { .. })
        ));

        // Two-column case: the kernel of a rank-one [b, b] is spanned by
        // (1, -1) and the bound is met with equality.
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
        let w = DVector::from_fn(2, |c, _| a.column(c).norm());
        let d = DVector::from_row_slice(&[1.0, -1.0]);
        for i in 1..=2 {
            assert!(kernel_bound_check_real(&a, &w, &d, i).unwrap());
        }

        // The checker reports genuine violations of the inequality: for the
        // single measurement q = (1, 1) the lifted row is [1, 2, 1] and the
        // kernel vector (1, -1, 1) concentrates two thirds of its weighted
        // energy on one coordinate while mu^2/(1+mu^2) = 1/2.
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 1.0]);
        let w = DVector::from_row_slice(&[1.0, 2.0, 1.0]);
        let d = DVector::from_row_slice(&[1.0, -1.0, 1.0]);
        assert!(!kernel_bound_check_real(&a, &w, &d, 2).unwrap());
    }

    #[test]
    fn kernel_bound_complex_checker_runs_on_sampled_kernels() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 3;
        let q = crate::measure::gaussian_design(Variant::Complex, n, 4, &mut rng);
        let a = crate::measure::build_a_complex(&q).unwrap();
        let weights = crate::measure::compute_weights(&crate::measure::LinearOperator::Complex(a.clone()));
        let tilde = crate::measure::build_a_tilde(&a);
        let z = nullspace(&tilde, 1e-12);
        assert!(z.ncols() > 0);
        let m = a.ncols();
        // The factor-2 complex bound held on every draw of this seeded
        // sample; the checker must accept them and reject non-kernel input.
        for _ in 0..200 {
            let coeffs = DVector::from_fn(z.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let stacked = &z * coeffs;
            let d = DVector::from_fn(m, |k, _| Complex64::new(stacked[k], stacked[m + k]));
            for i in 1..=m {
                assert!(kernel_bound_check_complex(&a, &weights.w_re, &weights.w_im, &d, i).unwrap());
            }
        }
        let outside = DVector::from_fn(m, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        assert!(kernel_bound_check_complex(&a, &weights.w_re, &weights.w_im, &outside, 1).is_err());
    }

    #[test]
    fn real_part_coherence_never_exceeds_stacked_coherence() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let n = 2 + rng.gen_range(0..3);
            let rows = n + 2 + rng.gen_range(0..4);
            let q = crate::measure::gaussian_design(Variant::Complex, n, rows, &mut rng);
            let a = crate::measure::build_a_complex(&q).unwrap();
            let mu_re = mutual_coherence(&a.map(|e| e.re)).unwrap();
            let mu_tilde = mutual_coherence(&crate::measure::build_a_tilde(&a)).unwrap();
            assert!(
                mu_re <= mu_tilde + 1e-12,
                "observed mu(Re A) = {mu_re} > mu(A~) = {mu_tilde}"
            );
        }
    }
}
