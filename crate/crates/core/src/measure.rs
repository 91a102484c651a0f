//! Measurement ensembles and their linearized operators.
//!
//! Four problem variants share one container: real signals with real
//! measurement vectors, complex signals with complex vectors, real signals
//! measured through complex vectors, and the Fourier special case of the
//! latter. Each quadratic measurement `y_i = |q_i^H x|^2` becomes one linear
//! equation on the lifted vector; the rows of the operator built here satisfy
//! that identity for every `x`, not just the generating signal.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::lifting::{self, lifted_len, veronese_complex, veronese_real};

/// Column norms below this are treated as zero when building weights.
const ZERO_COLUMN_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("measurement vector {index} has length {got}, expected {expected}")]
    BadVectorLength { index: usize, got: usize, expected: usize },
    #[error("observation vector has length {got}, expected {expected}")]
    BadObservationLength { got: usize, expected: usize },
    #[error("unsupported Fourier measurement count {requested} for n = {n} (use n or 2n)")]
    UnsupportedFourierCount { requested: usize, n: usize },
    #[error("noise bound must be nonnegative, got {0}")]
    NegativeNoiseBound(f64),
    #[error("no measurement vectors supplied")]
    Empty,
    #[error("invalid measurement JSON: {0}")]
    Json(String),
}

/// Problem variant: which field the signal and the measurement vectors live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Real signal, real measurement vectors, `y_i = (q_i^T x)^2`.
    Real,
    /// Complex signal and vectors, `y_i = |q_i^H x|^2`.
    Complex,
    /// Real signal measured through complex vectors.
    ComplexReal,
    /// Real signal, rows of a DFT matrix; measurements are a power spectrum.
    Fourier,
}

impl Variant {
    /// Whether the unknown signal is real-valued.
    pub fn signal_is_real(self) -> bool {
        !matches!(self, Variant::Complex)
    }
}

/// A real or complex signal, depending on the variant.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Real(DVector<f64>),
    Complex(DVector<Complex64>),
}

impl Signal {
    pub fn len(&self) -> usize {
        match self {
            Signal::Real(x) => x.len(),
            Signal::Complex(x) => x.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn norm(&self) -> f64 {
        match self {
            Signal::Real(x) => x.norm(),
            Signal::Complex(x) => x.norm(),
        }
    }

    pub fn magnitude(&self, k: usize) -> f64 {
        match self {
            Signal::Real(x) => x[k].abs(),
            Signal::Complex(x) => x[k].norm(),
        }
    }

    pub fn as_complex(&self) -> DVector<Complex64> {
        match self {
            Signal::Real(x) => x.map(|e| Complex64::new(e, 0.0)),
            Signal::Complex(x) => x.clone(),
        }
    }

    pub fn l0(&self, tol: f64) -> usize {
        match self {
            Signal::Real(x) => lifting::l0_norm_real(x, tol),
            Signal::Complex(x) => lifting::l0_norm_complex(x, tol),
        }
    }
}

/// The linearized measurement operator `A`, real or complex per variant.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearOperator {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl LinearOperator {
    pub fn nrows(&self) -> usize {
        match self {
            LinearOperator::Real(a) => a.nrows(),
            LinearOperator::Complex(a) => a.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            LinearOperator::Real(a) => a.ncols(),
            LinearOperator::Complex(a) => a.ncols(),
        }
    }
}

/// Row construction for real measurement vectors: `q_j^2` on the diagonal
/// positions and `2 q_j q_k` on the mixed ones, so the row paired with the
/// lift of `x` reproduces `(q^T x)^2`.
pub fn build_a_real(q: &[DVector<f64>]) -> Result<DMatrix<f64>, MeasureError> {
    let n = expect_common_length(q.iter().map(|v| v.len()))?;
    let m = lifted_len(n);
    let mut a = DMatrix::zeros(q.len(), m);
    for (r, qi) in q.iter().enumerate() {
        let mut flat = 0;
        for i in 0..n {
            for j in i..n {
                a[(r, flat)] = if i == j { qi[i] * qi[i] } else { 2.0 * qi[i] * qi[j] };
                flat += 1;
            }
        }
    }
    Ok(a)
}

/// Row construction for complex measurement vectors. Row `i` holds the
/// conjugate of the vector `a_i` with `(a_i)_{jk} = 2 (nu(q_i))_{jk}` off the
/// diagonal and `(a_i)_{jj} = (nu(q_i))_{jj}`, so that
/// `Re(a_i^H nu(x)) = |q_i^H x|^2` for every `x`.
pub fn build_a_complex(q: &[DVector<Complex64>]) -> Result<DMatrix<Complex64>, MeasureError> {
    let n = expect_common_length(q.iter().map(|v| v.len()))?;
    let m = lifted_len(n);
    let mut a = DMatrix::zeros(q.len(), m);
    for (r, qi) in q.iter().enumerate() {
        let nu_q = veronese_complex(qi);
        let mut flat = 0;
        for i in 0..n {
            for j in i..n {
                let coeff = if i == j { 1.0 } else { 2.0 };
                a[(r, flat)] = (nu_q.as_vector()[flat] * coeff).conj();
                flat += 1;
            }
        }
    }
    Ok(a)
}

/// Stacked real form `[Re(A), -Im(A)]`, the operator acting on the
/// concatenation of real and imaginary lifted parts.
pub fn build_a_tilde(a: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    let mut t = DMatrix::zeros(rows, 2 * cols);
    for r in 0..rows {
        for c in 0..cols {
            t[(r, c)] = a[(r, c)].re;
            t[(r, cols + c)] = -a[(r, c)].im;
        }
    }
    t
}

/// Measurement vectors for a Fourier design: conjugated DFT rows of unit
/// modulus. With `count == 2n` the vectors are the first `n` entries of the
/// `2n`-point DFT rows, so the observations form the power spectrum of the
/// zero-padded signal.
pub fn make_fourier_design(n: usize, count: usize) -> Result<Vec<DVector<Complex64>>, MeasureError> {
    if count != n && count != 2 * n {
        return Err(MeasureError::UnsupportedFourierCount { requested: count, n });
    }
    let len = count as f64;
    Ok((0..count)
        .map(|i| {
            DVector::from_fn(n, |j, _| Complex64::from_polar(1.0, TAU * (i * j) as f64 / len))
        })
        .collect())
}

/// Independent standard normal measurement vectors; complex variants draw
/// real and imaginary parts independently.
pub fn gaussian_design(variant: Variant, n: usize, count: usize, rng: &mut ChaCha12Rng) -> Vec<DVector<Complex64>> {
    (0..count)
        .map(|_| {
            DVector::from_fn(n, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = if variant == Variant::Real { 0.0 } else { rng.sample(StandardNormal) };
                Complex64::new(re, im)
            })
        })
        .collect()
}

/// Clean quadratic measurements of `x`, evaluated directly from the
/// measurement vectors (no lifting involved).
pub fn clean_measurements(q: &[DVector<Complex64>], x: &Signal) -> DVector<f64> {
    let xc = x.as_complex();
    DVector::from_fn(q.len(), |i, _| q[i].dotc(&xc).norm_sqr())
}

/// Adds noise of exact Euclidean norm `t` with `t` uniform on `[0, eps]`:
/// an isotropic Gaussian draw rescaled to that norm. Deterministic in the
/// seed. Returns the noisy observations and the realized noise vector.
pub fn add_noise(
    y: &DVector<f64>,
    eps: f64,
    seed: u64,
) -> Result<(DVector<f64>, DVector<f64>), MeasureError> {
    if eps < 0.0 {
        return Err(MeasureError::NegativeNoiseBound(eps));
    }
    if eps == 0.0 {
        return Ok((y.clone(), DVector::zeros(y.len())));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let g = DVector::from_fn(y.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let target: f64 = rng.gen_range(0.0..=eps);
    let nrm = g.norm();
    let e = if nrm > 0.0 { g * (target / nrm) } else { g };
    Ok((y + &e, e))
}

/// Per-column precompensating weights. Columns of numerically zero norm get
/// weight 1 and are reported in the corresponding flag list (1-based flats).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    /// Full column norms `‖A_i‖₂` (modulus norms for a complex operator).
    pub w: DVector<f64>,
    /// `‖Re(A_i)‖₂`.
    pub w_re: DVector<f64>,
    /// `‖Im(A_i)‖₂`.
    pub w_im: DVector<f64>,
    pub zero_w: Vec<usize>,
    pub zero_re: Vec<usize>,
    pub zero_im: Vec<usize>,
}

pub fn compute_weights(a: &LinearOperator) -> WeightSet {
    let m = a.ncols();
    let mut w = DVector::zeros(m);
    let mut w_re = DVector::zeros(m);
    let mut w_im = DVector::zeros(m);
    for c in 0..m {
        match a {
            LinearOperator::Real(a) => {
                let nrm = a.column(c).norm();
                w[c] = nrm;
                w_re[c] = nrm;
                w_im[c] = 0.0;
            }
            LinearOperator::Complex(a) => {
                let col = a.column(c);
                w[c] = col.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt();
                w_re[c] = col.iter().map(|e| e.re * e.re).sum::<f64>().sqrt();
                w_im[c] = col.iter().map(|e| e.im * e.im).sum::<f64>().sqrt();
            }
        }
    }
    let flag = |v: &mut DVector<f64>| -> Vec<usize> {
        let mut zeros = Vec::new();
        for c in 0..m {
            if v[c] < ZERO_COLUMN_TOL {
                v[c] = 1.0;
                zeros.push(c + 1);
            }
        }
        zeros
    };
    let zero_w = flag(&mut w);
    let zero_re = flag(&mut w_re);
    let zero_im = flag(&mut w_im);
    WeightSet { w, w_re, w_im, zero_w, zero_re, zero_im }
}

/// One measurement ensemble: the vectors, the observations, the linearized
/// operator and the noise budget. Immutable after construction.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub variant: Variant,
    pub n: usize,
    pub q: Vec<DVector<Complex64>>,
    pub y: DVector<f64>,
    pub a: LinearOperator,
    pub noise_bound: f64,
    pub seed: Option<u64>,
}

impl MeasurementSet {
    /// Assembles the operator from the measurement vectors and validates
    /// dimensions. `y` must already include any noise.
    pub fn new(
        variant: Variant,
        q: Vec<DVector<Complex64>>,
        y: DVector<f64>,
        noise_bound: f64,
        seed: Option<u64>,
    ) -> Result<Self, MeasureError> {
        if noise_bound < 0.0 {
            return Err(MeasureError::NegativeNoiseBound(noise_bound));
        }
        let n = expect_common_length(q.iter().map(|v| v.len()))?;
        if y.len() != q.len() {
            return Err(MeasureError::BadObservationLength { got: y.len(), expected: q.len() });
        }
        let a = match variant {
            Variant::Real => {
                let q_real: Vec<DVector<f64>> = q.iter().map(|v| v.map(|e| e.re)).collect();
                LinearOperator::Real(build_a_real(&q_real)?)
            }
            _ => LinearOperator::Complex(build_a_complex(&q)?),
        };
        Ok(Self { variant, n, q, y, a, noise_bound, seed })
    }

    /// Measures a planted signal: clean quadratics plus noise of norm at most
    /// `eps`, drawn deterministically from `noise_seed`.
    pub fn from_signal(
        variant: Variant,
        q: Vec<DVector<Complex64>>,
        x0: &Signal,
        eps: f64,
        noise_seed: u64,
    ) -> Result<Self, MeasureError> {
        let clean = clean_measurements(&q, x0);
        let (y, _e) = add_noise(&clean, eps, noise_seed)?;
        Self::new(variant, q, y, eps, Some(noise_seed))
    }

    pub fn count(&self) -> usize {
        self.q.len()
    }

    pub fn lifted_dim(&self) -> usize {
        lifted_len(self.n)
    }

    /// The real matrix the data constraint is written with: `A` itself in the
    /// real variant, the stacked `[Re(A), -Im(A)]` for complex signals, and
    /// `Re(A)` when the signal is real but the vectors are complex.
    pub fn real_operator(&self) -> DMatrix<f64> {
        match (&self.a, self.variant) {
            (LinearOperator::Real(a), _) => a.clone(),
            (LinearOperator::Complex(a), Variant::Complex) => build_a_tilde(a),
            (LinearOperator::Complex(a), _) => a.map(|e| e.re),
        }
    }

    pub fn weights(&self) -> WeightSet {
        compute_weights(&self.a)
    }

    /// Residual `‖y - A nu(x)‖` of a candidate signal under the linearized
    /// equations.
    pub fn lift_residual(&self, x: &Signal) -> f64 {
        let e = self.real_operator();
        let v = match x {
            Signal::Real(x) => {
                let lift = veronese_real(x).into_vector();
                match self.variant {
                    Variant::Complex => {
                        let m = lift.len();
                        let mut stacked = DVector::zeros(2 * m);
                        stacked.rows_mut(0, m).copy_from(&lift);
                        stacked
                    }
                    _ => lift,
                }
            }
            Signal::Complex(x) => {
                let lift = veronese_complex(x).into_vector();
                let m = lift.len();
                let mut stacked = DVector::zeros(2 * m);
                for k in 0..m {
                    stacked[k] = lift[k].re;
                    stacked[m + k] = lift[k].im;
                }
                stacked
            }
        };
        (&e * v - &self.y).norm()
    }

    pub fn to_json(&self) -> String {
        let doc = MeasurementSetJson {
            variant: self.variant,
            n: self.n,
            count: self.count(),
            q: self.q.iter().map(|v| v.iter().map(|e| [e.re, e.im]).collect()).collect(),
            y: self.y.iter().cloned().collect(),
            epsilon: self.noise_bound,
            seed: self.seed,
        };
        serde_json::to_string_pretty(&doc).expect("measurement serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, MeasureError> {
        let doc: MeasurementSetJson =
            serde_json::from_str(text).map_err(|e| MeasureError::Json(e.to_string()))?;
        if doc.q.len() != doc.count {
            return Err(MeasureError::Json(format!(
                "q has {} rows but N = {}",
                doc.q.len(),
                doc.count
            )));
        }
        let q: Vec<DVector<Complex64>> = doc
            .q
            .iter()
            .map(|row| DVector::from_iterator(row.len(), row.iter().map(|p| Complex64::new(p[0], p[1]))))
            .collect();
        for (idx, v) in q.iter().enumerate() {
            if v.len() != doc.n {
                return Err(MeasureError::BadVectorLength { index: idx, got: v.len(), expected: doc.n });
            }
        }
        let y = DVector::from_vec(doc.y);
        Self::new(doc.variant, q, y, doc.epsilon, doc.seed)
    }
}

/// On-disk form: the operator is rebuilt from the vectors on load.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementSetJson {
    variant: Variant,
    n: usize,
    #[serde(rename = "N")]
    count: usize,
    q: Vec<Vec<[f64; 2]>>,
    y: Vec<f64>,
    epsilon: f64,
    seed: Option<u64>,
}

fn expect_common_length(mut lens: impl Iterator<Item = usize>) -> Result<usize, MeasureError> {
    let Some(first) = lens.next() else {
        return Err(MeasureError::Empty);
    };
    for (idx, len) in lens.enumerate() {
        if len != first {
            return Err(MeasureError::BadVectorLength { index: idx + 1, got: len, expected: first });
        }
    }
    Ok(first)
}
