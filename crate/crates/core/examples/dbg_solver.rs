use nalgebra::DVector;
use verolift_core::lifting::{veronese_real, GroupStructure};
use verolift_core::measure::{gaussian_design, MeasurementSet, Signal, Variant};
use verolift_core::solver::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() {
    for nn in [10usize, 12, 14, 16, 18] {
        let n = 6;
        let mut x = DVector::zeros(n);
        x[1] = 1.0;
        x[4] = -1.4;
        let mut rng = ChaCha12Rng::seed_from_u64(49);
        let q = gaussian_design(Variant::Real, n, nn, &mut rng);
        let ms = MeasurementSet::from_signal(Variant::Real, q, &Signal::Real(x.clone()), 0.0, 7).unwrap();
        let weights = ms.weights();
        let groups = GroupStructure::new(n);
        let p = assemble_program(&ms, &weights, &groups, &AssembleOptions::default()).unwrap();
        let opts = SolverOptions::default();
        let plain = solve(&p, &opts).unwrap();
        let rw = solve_reweighted(&p, &opts).unwrap();
        let expected = veronese_real(&x).into_vector();
        println!(
            "N={nn}: plain err {:.3e} (conv {} iters {}), rw err {:.3e} (rounds {}, iters {}, trace {:?})",
            (&plain.v - &expected).norm(),
            plain.diagnostics.converged,
            plain.diagnostics.iterations,
            (&rw.v - &expected).norm(),
            rw.diagnostics.reweight_rounds,
            rw.diagnostics.iterations,
            rw.diagnostics.reweight_trace,
        );
    }
}
