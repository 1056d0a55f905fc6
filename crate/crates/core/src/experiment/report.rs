use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::algorithm::{run_mean_estimation, run_variance_estimation, RunReport};
use crate::error::{Error, Result};
use crate::gpr::{build_covariance_system, classical_posterior_with_cap, KernelSpec, TrainingSet};

use super::config::{DataSource, ExperimentConfig};
use super::dataset::{generate_synthetic, load_dataset};

pub const REPORT_VERSION: &str = concat!("cvgpr-report/1 (", env!("CARGO_PKG_VERSION"), ")");

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportParams {
    #[serde(flatten)]
    pub run: crate::algorithm::pipeline::RunParams,
    pub d: usize,
    pub x_star: Vec<f64>,
    pub kernel: KernelSpec,
    pub sigma2: f64,
    pub dataset: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalSection {
    pub mean: f64,
    pub variance: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct QuantumSection {
    pub mean: f64,
    pub variance: Option<f64>,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilitySection {
    pub window: f64,
    /// Fraction of accepted fractional queries; `null` on the direct path.
    pub ancilla: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorSection {
    pub trotter_trace_distance: Option<f64>,
    pub approx_bias: f64,
}

/// The JSON report of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub params: ReportParams,
    pub classical: ClassicalSection,
    pub quantum: QuantumSection,
    pub probabilities: ProbabilitySection,
    pub errors: ErrorSection,
    pub version: String,
    pub seed: u64,
    /// Seconds since the Unix epoch; the only field that varies between reruns.
    pub timestamp: u64,
}

/// One flat CSV row per experiment.
#[derive(Debug, Serialize)]
struct FlatRow<'a> {
    seed: u64,
    n: usize,
    d: usize,
    path: &'a str,
    mode: &'a str,
    shots: Option<u64>,
    xi: f64,
    gamma: f64,
    zeta: f64,
    m: usize,
    classical_mean: f64,
    classical_variance: f64,
    kappa: f64,
    quantum_mean: f64,
    quantum_variance: Option<f64>,
    rel_error: f64,
    window_prob: f64,
    ancilla_acceptance: Option<f64>,
    trotter_trace_distance: Option<f64>,
    approx_bias: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(e.to_string()))
    }

    /// JSON with the timestamp zeroed, for reproducibility checks.
    pub fn to_json_without_timestamp(&self) -> Result<String> {
        Self { timestamp: 0, ..self.clone() }.to_json()
    }

    pub fn write_csv_row<W: std::io::Write>(&self, writer: W) -> Result<()> {
        use crate::algorithm::{ExecutionPath, MeasurementMode};
        let run = &self.params.run;
        let row = FlatRow {
            seed: self.seed,
            n: run.n,
            d: self.params.d,
            path: match run.path {
                ExecutionPath::Direct => "direct",
                ExecutionPath::Oracle => "oracle",
            },
            mode: match run.mode {
                MeasurementMode::Exact => "exact",
                MeasurementMode::Sampled { .. } => "sampled",
            },
            shots: match run.mode {
                MeasurementMode::Sampled { shots } => Some(shots),
                MeasurementMode::Exact => None,
            },
            xi: run.xi,
            gamma: run.gamma,
            zeta: run.zeta,
            m: run.m,
            classical_mean: self.classical.mean,
            classical_variance: self.classical.variance,
            kappa: self.classical.kappa,
            quantum_mean: self.quantum.mean,
            quantum_variance: self.quantum.variance,
            rel_error: self.quantum.rel_error,
            window_prob: self.probabilities.window,
            ancilla_acceptance: self.probabilities.ancilla,
            trotter_trace_distance: self.errors.trotter_trace_distance,
            approx_bias: self.errors.approx_bias,
        };
        let mut w = csv::Writer::from_writer(writer);
        w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let json = dir.join("report.json");
        let csv = dir.join("report.csv");
        fs::write(&json, self.to_json()? + "\n").map_err(io)?;
        self.write_csv_row(fs::File::create(&csv).map_err(io)?)?;
        Ok((json, csv))
    }
}

/// Training data and test point named by the config.
pub fn resolve_inputs(config: &ExperimentConfig) -> Result<(TrainingSet, Vec<f64>, String)> {
    let (data, label) = match &config.data {
        DataSource::Csv(path) => (load_dataset(path)?, path.display().to_string()),
        DataSource::Synthetic { .. } => {
            let (spec, seed) = config.synthetic_spec().expect("synthetic source");
            (generate_synthetic(&spec, seed)?, format!("synthetic(n={}, d={}, seed={seed})", spec.n, spec.d))
        }
    };
    let x_star = config.x_star.clone().unwrap_or_else(|| vec![0.0; data.dim()]);
    if x_star.len() != data.dim() {
        return Err(Error::Input(format!("test point has dimension {} but the data has {}", x_star.len(), data.dim())));
    }
    Ok((data, x_star, label))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Runs the pipeline on already-resolved inputs.
pub fn run_on(config: &ExperimentConfig, data: &TrainingSet, x_star: &[f64], label: &str) -> Result<ExperimentReport> {
    config.validate()?;
    let r: RunReport = if config.variance {
        run_variance_estimation(data, &config.kernel, &config.noise, x_star, &config.pipeline)?
    } else {
        run_mean_estimation(data, &config.kernel, &config.noise, x_star, &config.pipeline)?
    };
    Ok(ExperimentReport {
        params: ReportParams {
            run: r.params.clone(),
            d: data.dim(),
            x_star: x_star.to_vec(),
            kernel: config.kernel,
            sigma2: config.noise.sigma2,
            dataset: label.to_string(),
        },
        classical: ClassicalSection { mean: r.classical_mean, variance: r.classical_variance, kappa: r.condition_number },
        quantum: QuantumSection { mean: r.mean_estimate, variance: r.variance_estimate, rel_error: r.rel_error },
        probabilities: ProbabilitySection { window: r.window_probability, ancilla: r.ancilla.as_ref().map(|a| a.probability) },
        errors: ErrorSection { trotter_trace_distance: r.trotter_trace_distance, approx_bias: r.approx_bias },
        version: REPORT_VERSION.to_string(),
        seed: config.pipeline.seed,
        timestamp: now(),
    })
}

/// Resolves inputs, runs the pipeline and writes the report when an output
/// directory is configured.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let (data, x_star, label) = resolve_inputs(config)?;
    let report = run_on(config, &data, &x_star, &label)?;
    if let Some(dir) = config.output_dir() {
        report.write_to(&dir)?;
    }
    Ok(report)
}

/// Classical posterior at the configured test point.
pub fn run_classical(config: &ExperimentConfig) -> Result<ClassicalSection> {
    let (data, x_star, _) = resolve_inputs(config)?;
    let system = build_covariance_system(&data, &config.kernel, &config.noise, &x_star)?;
    let p = classical_posterior_with_cap(&system, &data.target_vector(), config.pipeline.condition_cap)?;
    Ok(ClassicalSection { mean: p.mean, variance: p.variance, kappa: p.condition_number })
}
