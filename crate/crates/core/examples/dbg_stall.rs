use nalgebra::DVector;
use verolift_core::lifting::GroupStructure;
use verolift_core::measure::{gaussian_design, MeasurementSet, Signal, Variant};
use verolift_core::solver::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn main() {
    let n = 6;
    let mut x = DVector::zeros(n);
    x[1] = 1.0;
    x[4] = -1.4;
    let mut rng = ChaCha12Rng::seed_from_u64(49);
    let q = gaussian_design(Variant::Real, n, 14, &mut rng);
    let ms = MeasurementSet::from_signal(Variant::Real, q, &Signal::Real(x.clone()), 0.0, 7).unwrap();
    let weights = ms.weights();
    let groups = GroupStructure::new(n);
    let p = assemble_program(&ms, &weights, &groups, &AssembleOptions::default()).unwrap();
    let mut opts = SolverOptions::default();
    for cap in [500, 1000, 2000, 5000, 10000, 20000, 40000, 80000] {
        opts.max_iter = cap;
        let out = solve(&p, &opts).unwrap();
        println!(
            "cap {cap}: iters {} r {:.3e} s {:.3e} conv {} obj {:.9}",
            out.diagnostics.iterations,
            out.diagnostics.primal_residual,
            out.diagnostics.dual_residual,
            out.diagnostics.converged,
            out.diagnostics.objective_value
        );
    }
}
