use std::time::Instant;
use verolift_core::experiment::{run_monte_carlo, ExperimentConfig, IntOrSweep};
use verolift_core::measure::Variant;
use verolift_core::pipeline::{InvarianceMode, Method};

fn show(tag: &str, cfg: &ExperimentConfig) {
    let start = Instant::now();
    let table = run_monte_carlo(cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    print!("{tag} ({secs:.1}s): ");
    for row in &table.rows {
        print!(
            "k/N={} succ={:.2} supp={:.2} iters={:.0} | ",
            row.sweep_value, row.success_rate, row.support_rate, row.mean_iters
        );
    }
    println!();
}

fn main() {
    let arg: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    if arg == 7 {
        // Criterion 7 analog: complex n=10 N=40, k = 1..6, 50 trials.
        for method in [Method::Convex, Method::Greedy] {
            let cfg = ExperimentConfig {
                variant: Variant::Complex,
                n: 10,
                measurements: Some(IntOrSweep::Scalar(40)),
                sparsity: Some(IntOrSweep::Sweep(vec![1, 2, 3, 4, 5, 6])),
                trials: 50,
                method,
                seed: 20260801,
                ..ExperimentConfig::default()
            };
            show(&format!("crit7 {method:?}"), &cfg);
        }
    }
    if arg == 8 {
        for method in [Method::Convex, Method::Greedy] {
            let cfg = ExperimentConfig {
                variant: Variant::Complex,
                n: 20,
                measurements: Some(IntOrSweep::Scalar(64)),
                sparsity: Some(IntOrSweep::Scalar(4)),
                trials: 20,
                method,
                seed: 20260808,
                ..ExperimentConfig::default()
            };
            show(&format!("crit8 {method:?}"), &cfg);
        }
    }
    if arg == 9 {
        let cfg = ExperimentConfig {
            variant: Variant::Complex,
            n: 10,
            measurements: Some(IntOrSweep::Scalar(40)),
            sparsity: Some(IntOrSweep::Sweep(vec![1, 2, 3, 4])),
            trials: 50,
            epsilon: 1.0,
            method: Method::Convex,
            seed: 20260809,
            ..ExperimentConfig::default()
        };
        show("crit9 convex eps=1", &cfg);
    }
    if arg == 11 {
        let cfg20 = ExperimentConfig {
            variant: Variant::Fourier,
            n: 12,
            measurements: Some(IntOrSweep::Scalar(12)),
            sparsity: Some(IntOrSweep::Sweep(vec![1, 2, 3])),
            trials: 50,
            method: Method::Convex,
            invariance: InvarianceMode::Shift,
            seed: 20260811,
            ..ExperimentConfig::default()
        };
        show("crit11 shift N=n", &cfg20);
        let cfg22 = ExperimentConfig {
            measurements: Some(IntOrSweep::Scalar(24)),
            invariance: InvarianceMode::Reflect,
            autocorr: true,
            ..cfg20
        };
        show("crit11 reflect+r N=2n", &cfg22);
    }
}
