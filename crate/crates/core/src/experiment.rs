//! Monte Carlo benchmark harness: seeded instance generation, trial
//! execution on a worker pool, aggregation per sweep point and CSV/SVG
//! emission.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

use crate::measure::{gaussian_design, make_fourier_design, MeasurementSet, Signal, Variant};
use crate::pipeline::{self, InvarianceMode, Method, RecoverOptions, TrialRecord};
use crate::solver::SolverOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config JSON: {0}")]
    Json(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trial failed: {0}")]
    Trial(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A scalar or a sweep list in the config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntOrSweep {
    Scalar(usize),
    Sweep(Vec<usize>),
}

impl IntOrSweep {
    fn values(&self) -> Vec<usize> {
        match self {
            IntOrSweep::Scalar(v) => vec![*v],
            IntOrSweep::Sweep(v) => v.clone(),
        }
    }

    fn is_sweep(&self) -> bool {
        matches!(self, IntOrSweep::Sweep(_))
    }
}

/// Benchmark and solve configuration; unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub n: usize,
    /// Measurement count, or a monotone sweep of counts.
    pub measurements: Option<IntOrSweep>,
    /// Planted sparsity, or a monotone sweep of sparsities.
    pub sparsity: Option<IntOrSweep>,
    pub trials: usize,
    pub epsilon: f64,
    pub method: Method,
    pub invariance: InvarianceMode,
    pub autocorr: bool,
    pub seed: u64,
    pub solver: SolverOptions,
    pub csv: Option<String>,
    pub svg: Option<String>,
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Complex,
            n: 10,
            measurements: None,
            sparsity: None,
            trials: 1,
            epsilon: 0.0,
            method: Method::Convex,
            invariance: InvarianceMode::None,
            autocorr: false,
            seed: 0,
            solver: SolverOptions::default(),
            csv: None,
            svg: None,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))
    }

    pub fn recover_options(&self) -> RecoverOptions {
        RecoverOptions {
            method: self.method,
            invariance: self.invariance,
            autocorr: self.autocorr,
            solver: self.solver.clone(),
            k_max: None,
        }
    }
}

/// What the sweep ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Sparsity,
    Measurements,
}

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub axis: SweepAxis,
    pub sweep: Vec<usize>,
    pub fixed_sparsity: usize,
    pub fixed_measurements: usize,
}

/// Validates a config for benchmarking and fixes the sweep axis: the listed
/// field sweeps, the other stays fixed.
pub fn plan_bench(config: &ExperimentConfig) -> Result<BenchPlan, ConfigError> {
    if config.n == 0 {
        return Err(ConfigError::Invalid("n must be positive".into()));
    }
    if config.trials == 0 {
        return Err(ConfigError::Invalid("trials must be >= 1".into()));
    }
    if config.epsilon < 0.0 {
        return Err(ConfigError::Invalid("epsilon must be nonnegative".into()));
    }
    let meas = config.measurements.clone().unwrap_or(IntOrSweep::Scalar(4 * config.n));
    let spars = config.sparsity.clone().unwrap_or(IntOrSweep::Scalar(1));
    if meas.is_sweep() && spars.is_sweep() {
        return Err(ConfigError::Invalid("only one of measurements/sparsity may sweep".into()));
    }
    let check_sweep = |name: &str, values: &[usize]| -> Result<(), ConfigError> {
        if values.is_empty() {
            return Err(ConfigError::Invalid(format!("{name} sweep is empty")));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::Invalid(format!("{name} sweep must be strictly increasing")));
        }
        Ok(())
    };
    let plan = if meas.is_sweep() {
        let sweep = meas.values();
        check_sweep("measurements", &sweep)?;
        BenchPlan {
            axis: SweepAxis::Measurements,
            sweep,
            fixed_sparsity: spars.values()[0],
            fixed_measurements: 0,
        }
    } else {
        let sweep = spars.values();
        check_sweep("sparsity", &sweep)?;
        BenchPlan {
            axis: SweepAxis::Sparsity,
            sweep,
            fixed_sparsity: 0,
            fixed_measurements: meas.values()[0],
        }
    };
    for &k in plan.sweep.iter().chain([plan.fixed_sparsity].iter()) {
        if plan.axis == SweepAxis::Sparsity && k > config.n {
            return Err(ConfigError::Invalid(format!("sparsity {k} exceeds n = {}", config.n)));
        }
    }
    if plan.axis == SweepAxis::Measurements && plan.fixed_sparsity > config.n {
        return Err(ConfigError::Invalid(format!(
            "sparsity {} exceeds n = {}",
            plan.fixed_sparsity, config.n
        )));
    }
    Ok(plan)
}

/// Draws a planted signal: support uniform at random, values standard
/// normal (independent real and imaginary parts in the complex variant).
pub fn plant_signal(variant: Variant, n: usize, k: usize, rng: &mut ChaCha12Rng) -> Signal {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    if variant == Variant::Complex {
        let mut x = DVector::from_element(n, Complex64::new(0.0, 0.0));
        for &i in &indices[..k] {
            x[i] = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        Signal::Complex(x)
    } else {
        let mut x = DVector::zeros(n);
        for &i in &indices[..k] {
            x[i] = rng.sample(StandardNormal);
        }
        Signal::Real(x)
    }
}

/// One seeded instance: design, planted signal and measurements.
pub fn generate_instance(
    config: &ExperimentConfig,
    count: usize,
    k: usize,
    trial_seed: u64,
) -> Result<(MeasurementSet, Signal), BenchError> {
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed);
    let x0 = plant_signal(config.variant, config.n, k, &mut rng);
    let q = match config.variant {
        Variant::Fourier => make_fourier_design(config.n, count)
            .map_err(|e| BenchError::Trial(e.to_string()))?,
        v => gaussian_design(v, config.n, count, &mut rng),
    };
    let noise_seed = rng.gen::<u64>();
    let ms = MeasurementSet::from_signal(config.variant, q, &x0, config.epsilon, noise_seed)
        .map_err(|e| BenchError::Trial(e.to_string()))?;
    Ok((ms, x0))
}

/// Aggregate of one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub sweep_value: usize,
    pub trials: usize,
    pub success_rate: f64,
    pub support_rate: f64,
    pub mean_rel_error: f64,
    pub mean_mu: f64,
    pub mean_cert_holds_for: f64,
    pub mean_iters: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub records: Vec<Vec<TrialRecord>>,
}

/// Runs the Monte Carlo benchmark: `trials` independent instances per sweep
/// point, trial `t` seeded with `seed + t`, executed on the rayon pool and
/// aggregated by trial index.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<BenchTable, BenchError> {
    let plan = plan_bench(config)?;
    let opts = config.recover_options();
    let mut rows = Vec::with_capacity(plan.sweep.len());
    let mut all_records = Vec::with_capacity(plan.sweep.len());
    for &value in &plan.sweep {
        let (count, k) = match plan.axis {
            SweepAxis::Sparsity => (plan.fixed_measurements, value),
            SweepAxis::Measurements => (value, plan.fixed_sparsity),
        };
        let records: Vec<TrialRecord> = (0..config.trials)
            .into_par_iter()
            .map(|t| -> Result<TrialRecord, BenchError> {
                let trial_seed = config.seed.wrapping_add(t as u64);
                let (ms, x0) = generate_instance(config, count, k, trial_seed)?;
                let start = Instant::now();
                let recovery =
                    pipeline::recover(&ms, &opts).map_err(|e| BenchError::Trial(e.to_string()))?;
                let wall = start.elapsed().as_secs_f64();
                pipeline::score_trial(&ms, &recovery, &x0, config.invariance, trial_seed, wall)
                    .map_err(|e| BenchError::Trial(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let m = records.len() as f64;
        let mean = |f: &dyn Fn(&TrialRecord) -> f64| records.iter().map(|r| f(r)).sum::<f64>() / m;
        rows.push(BenchRow {
            sweep_value: value,
            trials: records.len(),
            success_rate: mean(&|r| r.exact_success as u8 as f64),
            support_rate: mean(&|r| r.support_success as u8 as f64),
            mean_rel_error: mean(&|r| r.relative_error),
            mean_mu: mean(&|r| r.mu),
            mean_cert_holds_for: mean(&|r| r.cert_holds_for as f64),
            mean_iters: mean(&|r| r.iterations as f64),
            mean_seconds: mean(&|r| r.wall_seconds),
        });
        all_records.push(records);
    }
    Ok(BenchTable { rows, records: all_records })
}

/// Nine significant digits, scientific notation.
pub fn fmt_sig9(value: f64) -> String {
    format!("{value:.8e}")
}

pub const CSV_HEADER: &str = "sweep_value,trials,success_rate,support_rate,mean_rel_error,mean_mu,mean_cert_holds_for,mean_iters,mean_seconds";

/// Fixed-schema CSV, rows in sweep order.
pub fn to_csv(table: &BenchTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.sweep_value,
            row.trials,
            fmt_sig9(row.success_rate),
            fmt_sig9(row.support_rate),
            fmt_sig9(row.mean_rel_error),
            fmt_sig9(row.mean_mu),
            fmt_sig9(row.mean_cert_holds_for),
            fmt_sig9(row.mean_iters),
            fmt_sig9(row.mean_seconds),
        ));
    }
    out
}

/// Minimal deterministic SVG line plot of the success and support curves
/// against the sweep axis.
pub fn to_svg(table: &BenchTable, title: &str) -> String {
    let width = 640.0;
    let height = 420.0;
    let left = 70.0;
    let right = 30.0;
    let top = 40.0;
    let bottom = 60.0;
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let xs: Vec<f64> = table.rows.iter().map(|r| r.sweep_value as f64).collect();
    let (xmin, xmax) = match (xs.first(), xs.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a - 0.5, a + 0.5),
        _ => (0.0, 1.0),
    };
    let x_of = |v: f64| left + (v - xmin) / (xmax - xmin) * plot_w;
    let y_of = |p: f64| top + (1.0 - p) * plot_h;
    let polyline = |vals: &dyn Fn(&BenchRow) -> f64| -> String {
        table
            .rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", x_of(r.sweep_value as f64), y_of(vals(r).clamp(0.0, 1.0))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        width / 2.0
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h,
        left + plot_w,
        top + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h
    ));
    for tick in 0..=5 {
        let p = tick as f64 / 5.0;
        let y = y_of(p);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{left}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
            left - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{p:.1}</text>\n",
            left - 9.0,
            y + 4.0
        ));
    }
    for r in &table.rows {
        let x = x_of(r.sweep_value as f64);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\"/>\n",
            top + plot_h,
            top + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            top + plot_h + 20.0,
            r.sweep_value
        ));
    }
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"2\" points=\"{}\"/>\n",
        polyline(&|r| r.success_rate)
    ));
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#bf451f\" stroke-width=\"2\" stroke-dasharray=\"6,4\" points=\"{}\"/>\n",
        polyline(&|r| r.support_rate)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#1f5fbf\">exact</text>\n",
        left + plot_w - 110.0,
        top + 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#bf451f\">support</text>\n",
        left + plot_w - 60.0,
        top + 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">sweep value</text>\n",
        left + plot_w / 2.0,
        height - 18.0
    ));
    svg.push_str("</svg>\n");
    svg
}

pub fn write_outputs(
    table: &BenchTable,
    csv_path: Option<&str>,
    svg_path: Option<&str>,
    title: &str,
) -> Result<(), BenchError> {
    if let Some(path) = csv_path {
        std::fs::write(path, to_csv(table))
            .map_err(|source| BenchError::Io { path: path.to_string(), source })?;
    }
    if let Some(path) = svg_path {
        std::fs::write(path, to_svg(table, title))
            .map_err(|source| BenchError::Io { path: path.to_string(), source })?;
    }
    Ok(())
}
