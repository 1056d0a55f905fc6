use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::algorithm::MeasurementMode;
use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::report::{resolve_inputs, run_on, ExperimentReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    M,
    Xi,
    Gamma,
    Epsilon,
    Shots,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "m" | "steps" => Ok(Self::M),
            "xi" => Ok(Self::Xi),
            "gamma" => Ok(Self::Gamma),
            "epsilon" => Ok(Self::Epsilon),
            "shots" => Ok(Self::Shots),
            other => Err(Error::Input(format!("unknown sweep axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub base: ExperimentConfig,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>, base: ExperimentConfig) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("sweep needs at least one value".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Input("sweep values must be strictly increasing".into()));
        }
        if matches!(axis, SweepAxis::M | SweepAxis::Shots) && values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(Error::Input("M and shots sweeps take positive integers".into()));
        }
        Ok(Self { axis, values, base })
    }

    /// The base config with the axis set to `value`.
    pub fn config_at(&self, value: f64) -> ExperimentConfig {
        let mut c = self.base.clone();
        let p = &mut c.pipeline;
        match self.axis {
            SweepAxis::M => p.steps = Some(value as usize),
            SweepAxis::Xi => p.xi = value,
            SweepAxis::Gamma => p.gamma = Some(value),
            SweepAxis::Epsilon => p.epsilon = value,
            SweepAxis::Shots => p.mode = MeasurementMode::Sampled { shots: value as u64 },
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepPoint {
    pub axis_value: f64,
    /// Report for the base seed.
    pub report: Option<ExperimentReport>,
    /// Sample standard deviation of the mean estimate over repetitions.
    pub std_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    /// Log-log slope of trace distance against `M`, or of the standard error
    /// against shots.
    pub slope: Option<f64>,
}

/// Least-squares slope of `ln y` against `ln x` over the positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0 && b.is_finite()).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn run_point(spec: &SweepSpec, value: f64, data: &crate::gpr::TrainingSet, x_star: &[f64], label: &str) -> SweepPoint {
    let config = spec.config_at(value);
    let reps = config.repetitions.max(1);
    let mut report = None;
    let mut means = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut c = config.clone();
        c.pipeline.seed = config.pipeline.seed.wrapping_add(r as u64);
        match run_on(&c, data, x_star, label) {
            Ok(rep) => {
                means.push(rep.quantum.mean);
                if r == 0 {
                    report = Some(rep);
                }
            }
            Err(e) => return SweepPoint { axis_value: value, report, std_error: None, error: Some(e.to_string()) },
        }
    }
    let std_error = (means.len() > 1).then(|| {
        let m = means.iter().sum::<f64>() / means.len() as f64;
        (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt()
    });
    SweepPoint { axis_value: value, report, std_error, error: None }
}

/// Runs every sweep point (in parallel) and assembles them in axis order.
/// Failed points are recorded and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.base.validate()?;
    let (data, x_star, label) = resolve_inputs(&spec.base)?;
    let points: Vec<SweepPoint> = spec.values.par_iter().map(|&v| run_point(spec, v, &data, &x_star, &label)).collect();
    let xs: Vec<f64> = points.iter().map(|p| p.axis_value).collect();
    let slope = match spec.axis {
        SweepAxis::M => {
            let ys: Vec<f64> = points
                .iter()
                .map(|p| p.report.as_ref().and_then(|r| r.errors.trotter_trace_distance).unwrap_or(f64::NAN))
                .collect();
            loglog_slope(&xs, &ys)
        }
        SweepAxis::Shots => {
            let ys: Vec<f64> = points.iter().map(|p| p.std_error.unwrap_or(f64::NAN)).collect();
            loglog_slope(&xs, &ys)
        }
        _ => None,
    };
    Ok(SweepReport { axis: spec.axis, points, slope })
}

#[derive(Serialize)]
struct PlotRow {
    axis_value: f64,
    #[serde(rename = "relError")]
    rel_error: Option<f64>,
    #[serde(rename = "traceDistance")]
    trace_distance: Option<f64>,
    #[serde(rename = "windowProb")]
    window_prob: Option<f64>,
    #[serde(rename = "ancillaAcceptance")]
    ancilla_acceptance: Option<f64>,
    #[serde(rename = "stdError")]
    std_error: Option<f64>,
    error: Option<String>,
}

impl SweepReport {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for p in &self.points {
            let r = p.report.as_ref();
            w.serialize(PlotRow {
                axis_value: p.axis_value,
                rel_error: r.map(|r| r.quantum.rel_error),
                trace_distance: r.and_then(|r| r.errors.trotter_trace_distance),
                window_prob: r.map(|r| r.probabilities.window),
                ancilla_acceptance: r.and_then(|r| r.probabilities.ancilla),
                std_error: p.std_error,
                error: p.error.clone(),
            })
            .map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// Writes `sweep.json` and `sweep.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(e.to_string()))?;
        std::fs::write(dir.join("sweep.json"), json + "\n").map_err(io)?;
        self.write_csv(std::fs::File::create(dir.join("sweep.csv")).map_err(io)?)
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.error.is_some()).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::DataSource;

    fn base() -> ExperimentConfig {
        let mut c = ExperimentConfig { data: DataSource::Synthetic { n: 2, d: 1, seed: Some(1) }, variance: false, ..Default::default() };
        c.pipeline.xi = 0.5;
        c.pipeline.gamma = Some(4.0);
        c.pipeline.steps = Some(16);
        c
    }

    #[test]
    fn slope_fit() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[1.0], &[1.0]), None);
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(SweepAxis::M, vec![], base()).is_err());
        assert!(SweepSpec::new(SweepAxis::M, vec![4.0, 2.0], base()).is_err());
        assert!(SweepSpec::new(SweepAxis::Shots, vec![10.5], base()).is_err());
        assert!(SweepSpec::new(SweepAxis::Xi, vec![0.1, 0.2], base()).is_ok());
    }

    #[test]
    fn single_value_sweep_matches_run() {
        let spec = SweepSpec::new(SweepAxis::Gamma, vec![4.0], base()).unwrap();
        let sweep = run_sweep(&spec).unwrap();
        let direct = crate::experiment::run_experiment(&base()).unwrap();
        let from_sweep = sweep.points[0].report.as_ref().unwrap();
        assert_eq!(from_sweep.to_json_without_timestamp().unwrap(), direct.to_json_without_timestamp().unwrap());
        assert_eq!(sweep.slope, None);
    }

    #[test]
    fn failures_are_recorded() {
        let mut c = base();
        c.pipeline.path = crate::algorithm::ExecutionPath::Oracle;
        c.pipeline.max_oracle_steps = 20;
        let spec = SweepSpec::new(SweepAxis::M, vec![8.0, 16.0, 32.0], c).unwrap();
        let sweep = run_sweep(&spec).unwrap();
        assert_eq!(sweep.failures(), 1);
        assert!(sweep.points[2].error.is_some());
        let mut buf = Vec::new();
        sweep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("axis_value,relError,traceDistance,windowProb,ancillaAcceptance,stdError,error"));
    }
}
