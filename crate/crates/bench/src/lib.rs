//! Shared fixtures for the criterion benchmarks.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use verolift_core::lifting::GroupStructure;
use verolift_core::measure::{gaussian_design, MeasurementSet, Signal, Variant};
use verolift_core::solver::{assemble_program, AssembleOptions, ConeProblem};

/// A planted complex instance together with its assembled cone program.
pub fn planted_complex(n: usize, count: usize, k: usize, seed: u64) -> (MeasurementSet, ConeProblem) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = DVector::from_element(n, Complex64::new(0.0, 0.0));
    for j in 0..k {
        x[j] = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    }
    let q = gaussian_design(Variant::Complex, n, count, &mut rng);
    let ms = MeasurementSet::from_signal(Variant::Complex, q, &Signal::Complex(x), 0.0, seed).unwrap();
    let weights = ms.weights();
    let groups = GroupStructure::new(n);
    let problem = assemble_program(&ms, &weights, &groups, &AssembleOptions::default()).unwrap();
    (ms, problem)
}

/// A dense random real signal.
pub fn random_real(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}
