//! Degree-2 Veronese lifting: pair-index arithmetic, the real and complex
//! lifting maps and their inverses, and the group structure that ties each
//! base variable to the lifted coordinates it appears in.
//!
//! A signal `x` of length `n` lifts to the length `M = n(n+1)/2` vector of
//! monomials `x_i x_j` (real) or `x_i * conj(x_j)` with `i <= j` (complex),
//! ordered `(1,1),(1,2),...,(1,n),(2,2),...,(n,n)`. Base variable `x_j` is
//! zero exactly when the `n` lifted entries involving index `j` all vanish,
//! so signal sparsity equals the number of nonzero groups of the lift.

use nalgebra::DVector;
use num_complex::Complex64;
use thiserror::Error;

/// Absolute tolerance for "zero" and "real positive diagonal" tests inside
/// the inverse maps.
pub const TAU_NU: f64 = 1e-9;

/// Relative tolerance of the diagonal-consistency test `|v_ji|^2 / v_ii = v_jj`,
/// scaled by `max(1, v_ii)`. Solver outputs are inexact, so the inverse maps
/// cannot demand exact monomial consistency.
pub const CONSISTENCY_RTOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum LiftingError {
    #[error("base index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("lifted vector has length {got}, expected {expected} for n = {n}")]
    BadLiftedLength { got: usize, expected: usize, n: usize },
    #[error("dimension mismatch: lifted vector has n = {lifted_n}, groups have n = {group_n}")]
    DimensionMismatch { lifted_n: usize, group_n: usize },
}

/// Number of lifted coordinates for base dimension `n`.
pub fn lifted_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// 1-based position of the monomial `x_i x_j` in the lifted ordering.
///
/// Symmetric in `(i, j)`; the pairs `(i, j)` with `i <= j` enumerate
/// `1..=n(n+1)/2` bijectively.
pub fn pair_to_flat(i: usize, j: usize, n: usize) -> Result<usize, LiftingError> {
    if i == 0 || i > n {
        return Err(LiftingError::IndexOutOfRange { index: i, n });
    }
    if j == 0 || j > n {
        return Err(LiftingError::IndexOutOfRange { index: j, n });
    }
    let a = i.min(j);
    let d = i.abs_diff(j);
    // sum_{k=1}^{a-1} (n - k + 1) + d + 1
    Ok((a - 1) * (n + 1) - a * (a - 1) / 2 + d + 1)
}

/// Second printed form of the index map, `sum_{k=1}^{a-1}(n-k) + a + d`.
/// Kept only to cross-check agreement with [`pair_to_flat`].
pub fn pair_to_flat_alt(i: usize, j: usize, n: usize) -> Result<usize, LiftingError> {
    if i == 0 || i > n {
        return Err(LiftingError::IndexOutOfRange { index: i, n });
    }
    if j == 0 || j > n {
        return Err(LiftingError::IndexOutOfRange { index: j, n });
    }
    let a = i.min(j);
    let d = i.abs_diff(j);
    Ok((a - 1) * n - a * (a - 1) / 2 + a + d)
}

/// Inverse of [`pair_to_flat`]: the unique pair `(i, j)` with `i <= j`.
pub fn flat_to_pair(flat: usize, n: usize) -> Result<(usize, usize), LiftingError> {
    let m = lifted_len(n);
    if flat == 0 || flat > m {
        return Err(LiftingError::IndexOutOfRange { index: flat, n: m });
    }
    let mut i = 1;
    let mut row_start = 1; // flat index of (i, i)
    while row_start + (n - i) < flat {
        row_start += n - i + 1;
        i += 1;
    }
    Ok((i, i + (flat - row_start)))
}

/// One unordered pair of base indices together with its lifted position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairIndex {
    /// First base index, 1-based.
    pub i: usize,
    /// Second base index, 1-based.
    pub j: usize,
    /// Position in the lifted ordering, 1-based.
    pub flat: usize,
}

impl PairIndex {
    pub fn new(i: usize, j: usize, n: usize) -> Result<Self, LiftingError> {
        Ok(Self { i, j, flat: pair_to_flat(i, j, n)? })
    }
}

/// A vector in the lifted space, either an exact lift `nu(x)` or a solver
/// estimate of one. Entries are indexed by unordered base pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedVector<T: nalgebra::Scalar> {
    n: usize,
    entries: DVector<T>,
}

pub type RealLifted = LiftedVector<f64>;
pub type ComplexLifted = LiftedVector<Complex64>;

impl<T: nalgebra::Scalar + Copy> LiftedVector<T> {
    pub fn from_vector(n: usize, entries: DVector<T>) -> Result<Self, LiftingError> {
        let expected = lifted_len(n);
        if entries.len() != expected {
            return Err(LiftingError::BadLiftedLength { got: entries.len(), expected, n });
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry at pair `(i, j)`, 1-based and symmetric.
    pub fn entry(&self, i: usize, j: usize) -> T {
        let flat = pair_to_flat(i, j, self.n).expect("pair indices in range");
        self.entries[flat - 1]
    }

    pub fn as_vector(&self) -> &DVector<T> {
        &self.entries
    }

    pub fn into_vector(self) -> DVector<T> {
        self.entries
    }
}

/// Real Veronese map of degree 2: entry at `(i, j)` is `x_i * x_j`.
/// Invariant under a global sign flip of `x`.
pub fn veronese_real(x: &DVector<f64>) -> RealLifted {
    let n = x.len();
    let mut entries = DVector::zeros(lifted_len(n));
    let mut flat = 0;
    for i in 0..n {
        for j in i..n {
            entries[flat] = x[i] * x[j];
            flat += 1;
        }
    }
    LiftedVector { n, entries }
}

/// Complex Veronese map: entry at `(i, j)` with `i <= j` is `x_i * conj(x_j)`.
/// Invariant under `x -> z x` for any unit-modulus scalar `z`.
pub fn veronese_complex(x: &DVector<Complex64>) -> ComplexLifted {
    let n = x.len();
    let mut entries = DVector::zeros(lifted_len(n));
    let mut flat = 0;
    for i in 0..n {
        for j in i..n {
            entries[flat] = x[i] * x[j].conj();
            flat += 1;
        }
    }
    LiftedVector { n, entries }
}

/// Inverse of the real Veronese map.
///
/// Picks the first pivot `i` with `v_ii > 0`, checks the diagonal consistency
/// `v_ji^2 / v_ii = v_jj` for every `j`, and on success returns the pivot
/// column scaled by `1/sqrt(v_ii)` with its first nonzero entry made positive.
/// Degenerate or inconsistent inputs map to the zero vector, so
/// `inverse_veronese_real(veronese_real(x)) == ±x`.
pub fn inverse_veronese_real(v: &RealLifted) -> DVector<f64> {
    let n = v.n;
    let zero = DVector::zeros(n);
    let pivot = (1..=n).find(|&j| v.entry(j, j) > TAU_NU);
    let Some(i) = pivot else {
        return zero;
    };
    let vii = v.entry(i, i);
    for j in 1..=n {
        let vji = v.entry(j, i);
        if (vji * vji / vii - v.entry(j, j)).abs() > CONSISTENCY_RTOL * vii.max(1.0) {
            return zero;
        }
    }
    let scale = vii.sqrt().recip();
    let mut out = DVector::from_fn(n, |j, _| v.entry(j + 1, i) * scale);
    if let Some(first) = out.iter().find(|e| e.abs() > TAU_NU) {
        if *first < 0.0 {
            out.neg_mut();
        }
    }
    out
}

/// Inverse of the complex Veronese map.
///
/// The pivot is the first `i` whose diagonal entry is real positive (within
/// [`TAU_NU`]); the consistency test compares `|v_ji|^2 / v_ii` against the
/// complex diagonal entry. On success the conjugated pivot column is scaled
/// by `1/sqrt(v_ii)` and rotated so the pivot coordinate is real positive,
/// which places `inverse_veronese_complex(veronese_complex(x))` in the
/// unit-modulus orbit of `x`.
pub fn inverse_veronese_complex(v: &ComplexLifted) -> DVector<Complex64> {
    let n = v.n;
    let zero = DVector::zeros(n);
    let pivot = (1..=n).find(|&j| {
        let d = v.entry(j, j);
        d.re > TAU_NU && d.im.abs() <= TAU_NU * (1.0 + d.norm())
    });
    let Some(i) = pivot else {
        return zero;
    };
    let vii = v.entry(i, i).re;
    for j in 1..=n {
        let vji = v.entry(j, i);
        let expected = Complex64::new(vji.norm_sqr() / vii, 0.0);
        if (expected - v.entry(j, j)).norm() > CONSISTENCY_RTOL * vii.max(1.0) {
            return zero;
        }
    }
    let scale = vii.sqrt().recip();
    let mut out = DVector::from_fn(n, |j, _| v.entry(j + 1, i).conj() * scale);
    // Make the pivot coordinate real positive to fix the global phase.
    let p = out[i - 1];
    if p.norm() > 0.0 {
        let rot = p.conj() / p.norm();
        out *= rot;
    }
    out
}

/// Group-selection structure: group `j` lists the lifted positions of the
/// monomials involving base variable `x_j`, ordered `(1,j),(2,j),...,(n,j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    n: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupStructure {
    pub fn new(n: usize) -> Self {
        let groups = (1..=n)
            .map(|j| {
                (1..=n)
                    .map(|k| pair_to_flat(k, j, n).expect("indices in range"))
                    .collect()
            })
            .collect();
        Self { n, groups }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// 1-based lifted positions selected by group `j` (1-based).
    pub fn group(&self, j: usize) -> &[usize] {
        &self.groups[j - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.groups.iter().map(|g| g.as_slice())
    }
}

/// Number of groups whose sub-vector of `v` is nonzero (Euclidean norm above
/// [`TAU_NU`]). For an exact lift this equals the l0-norm of the base signal.
pub fn group_norm_count<T>(v: &LiftedVector<T>, groups: &GroupStructure) -> Result<usize, LiftingError>
where
    T: nalgebra::Scalar + Copy + num_complex::ComplexFloat<Real = f64>,
{
    if v.n != groups.n {
        return Err(LiftingError::DimensionMismatch { lifted_n: v.n, group_n: groups.n });
    }
    let count = groups
        .iter()
        .filter(|g| {
            let sq: f64 = g.iter().map(|&flat| {
                let e = v.entries[flat - 1];
                let a = e.abs();
                a * a
            }).sum();
            sq.sqrt() > TAU_NU
        })
        .count();
    Ok(count)
}

/// Number of entries of `x` with magnitude above `tol`.
pub fn l0_norm_real(x: &DVector<f64>, tol: f64) -> usize {
    x.iter().filter(|e| e.abs() > tol).count()
}

/// Number of entries of `x` with modulus above `tol`.
pub fn l0_norm_complex(x: &DVector<Complex64>, tol: f64) -> usize {
    x.iter().filter(|e| e.norm() > tol).count()
}
