//! Sparse phase retrieval from quadratic measurements.
//!
//! Measurements of the form `y_i = |q_i^H x|^2` are linearized by lifting the
//! unknown signal `x` through the degree-2 Veronese map, turning each quadratic
//! equation into a linear one on the vector of pairwise monomials. Sparsity of
//! `x` becomes group sparsity of the lift, which is estimated by minimizing a
//! weighted block l1-norm under the linear (or noise-ball) data constraints.
//! The crate provides the lifting algebra, measurement ensembles, mutual
//! coherence recovery certificates, an operator-splitting cone solver, a
//! groupwise greedy baseline, shift/reflection-invariant formulations for
//! Fourier-magnitude data, brute-force oracles for tiny instances and a Monte
//! Carlo benchmark harness.

pub mod certify;
pub mod experiment;
pub mod greedy;
pub mod invariance;
pub mod lifting;
mod linalg;
pub mod measure;
pub mod oracle;
pub mod pipeline;
pub mod solver;

pub use certify::CertificateReport;
pub use lifting::{GroupStructure, LiftedVector, PairIndex};
pub use measure::{MeasurementSet, Signal, Variant, WeightSet};
pub use solver::{ConeProblem, SolveDiagnostics};
