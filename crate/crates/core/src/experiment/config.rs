use std::path::{Path, PathBuf};

use crate::algorithm::{ExecutionPath, MeasurementMode, PipelineConfig};
use crate::error::{Error, Result};
use crate::gpr::{KernelFamily, KernelSpec, NoiseModel};

use super::dataset::SyntheticSpec;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CVGPR_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synthetic { n: usize, d: usize, seed: Option<u64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Test point; the origin when unset.
    pub x_star: Option<Vec<f64>>,
    pub kernel: KernelSpec,
    pub noise: NoiseModel,
    pub pipeline: PipelineConfig,
    /// Also run the variance pipeline.
    pub variance: bool,
    /// Seeds per sweep point; more than one yields a standard error.
    pub repetitions: usize,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic { n: 4, d: 1, seed: None },
            x_star: None,
            kernel: KernelSpec::default(),
            noise: NoiseModel { sigma2: 0.1 },
            pipeline: PipelineConfig::default(),
            variance: true,
            repetitions: 1,
            output: None,
        }
    }
}

/// Recognized keys, grouped by their section in a config file.
pub const KEYS: &[(&str, &[&str])] = &[
    ("data", &["dataset", "n", "d", "data_seed", "x_star"]),
    ("kernel", &["kernel", "length_scale", "amplitude", "noise"]),
    (
        "pipeline",
        &[
            "xi", "zeta", "epsilon", "gamma", "m", "path", "mode", "shots", "seed", "sign", "window", "condition_cap",
            "quantization_cap", "trajectories", "max_oracle_steps", "variance", "repetitions",
        ],
    ),
    ("output", &["output"]),
];

fn known(key: &str) -> bool {
    KEYS.iter().any(|(_, keys)| keys.contains(&key))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Input(format!("`{key}`: cannot parse `{value}`")))
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "auto" | "none" => Ok(None),
        v => num(key, v).map(Some),
    }
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Input(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = &mut self.pipeline;
        match key {
            "dataset" => self.data = DataSource::Csv(PathBuf::from(value.trim())),
            "n" | "d" | "data_seed" => {
                let (mut n, mut d, mut seed) = match self.data {
                    DataSource::Synthetic { n, d, seed } => (n, d, seed),
                    DataSource::Csv(_) => (4, 1, None),
                };
                match key {
                    "n" => n = num(key, value)?,
                    "d" => d = num(key, value)?,
                    _ => seed = optional(key, value)?,
                }
                self.data = DataSource::Synthetic { n, d, seed };
            }
            "x_star" => {
                let x: Result<Vec<f64>> = value.split(',').map(|s| num(key, s)).collect();
                self.x_star = Some(x?);
            }
            "kernel" => self.kernel.family = value.parse::<KernelFamily>()?,
            "length_scale" => self.kernel.length_scale = num(key, value)?,
            "amplitude" => self.kernel.amplitude = num(key, value)?,
            "noise" => self.noise = NoiseModel::new(num(key, value)?)?,
            "xi" => p.xi = num(key, value)?,
            "zeta" => p.zeta = num(key, value)?,
            "epsilon" => p.epsilon = num(key, value)?,
            "gamma" => p.gamma = optional(key, value)?,
            "m" => p.steps = optional(key, value)?,
            "path" => p.path = value.parse::<ExecutionPath>()?,
            "mode" => {
                p.mode = match value.trim().to_ascii_lowercase().as_str() {
                    "exact" => MeasurementMode::Exact,
                    "sampled" => match p.mode {
                        MeasurementMode::Sampled { shots } => MeasurementMode::Sampled { shots },
                        MeasurementMode::Exact => MeasurementMode::Sampled { shots: 10_000 },
                    },
                    other => return Err(Error::Input(format!("unknown mode `{other}` (expected exact or sampled)"))),
                }
            }
            "shots" => p.mode = MeasurementMode::Sampled { shots: num(key, value)? },
            "seed" => p.seed = num(key, value)?,
            "sign" => p.sign = num(key, value)?,
            "window" => p.window = optional(key, value)?,
            "condition_cap" => p.condition_cap = num(key, value)?,
            "quantization_cap" => p.quantization_cap = num(key, value)?,
            "trajectories" => p.trajectories = num(key, value)?,
            "max_oracle_steps" => p.max_oracle_steps = num(key, value)?,
            "variance" => self.variance = boolean(key, value)?,
            "repetitions" => self.repetitions = num(key, value)?,
            "output" => self.output = Some(PathBuf::from(value.trim())),
            _ => return Err(Error::Input(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn apply<'a, I: IntoIterator<Item = (&'a str, &'a str)>>(&mut self, pairs: I) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Reads a sectioned `key = value` file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_ini(&text)
    }

    pub fn from_ini(text: &str) -> Result<Self> {
        let ini = ini::Ini::load_from_str(text).map_err(|e| Error::Parse { line: e.line, message: e.msg.to_string() })?;
        let mut config = Self::default();
        for (section, props) in ini.iter() {
            if let Some(s) = section {
                if !KEYS.iter().any(|(name, _)| *name == s) {
                    return Err(Error::Input(format!("unknown config section `[{s}]`")));
                }
            }
            for (k, v) in props.iter() {
                if !known(k) {
                    return Err(Error::Input(format!("unknown config key `{k}`")));
                }
                config.set(k, v)?;
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        if let DataSource::Synthetic { n, d, .. } = self.data {
            if n == 0 || d == 0 {
                return Err(Error::Input("synthetic data needs n ≥ 1 and d ≥ 1".into()));
            }
        }
        if self.repetitions == 0 {
            return Err(Error::Input("repetitions must be at least 1".into()));
        }
        KernelSpec::new(self.kernel.family, self.kernel.length_scale, self.kernel.amplitude)?;
        Ok(())
    }

    pub fn synthetic_spec(&self) -> Option<(SyntheticSpec, u64)> {
        match self.data {
            DataSource::Synthetic { n, d, seed } => {
                Some((SyntheticSpec { n, d, kernel: self.kernel, noise: self.noise }, seed.unwrap_or(self.pipeline.seed)))
            }
            DataSource::Csv(_) => None,
        }
    }

    /// Explicit output directory, else the one named by the environment.
    pub fn output_dir(&self) -> Option<PathBuf> {
        self.output.clone().or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
    }
}
