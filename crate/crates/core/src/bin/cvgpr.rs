use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvgpr::experiment::{
    generate_synthetic, run_classical, run_experiment, run_sweep, write_dataset, ExperimentConfig, SweepAxis, SweepSpec,
};
use cvgpr::{Error, Result};

#[derive(Parser)]
#[command(name = "cvgpr", version, about = "Continuous-variable quantum GP regression simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classical posterior mean and variance at the test point.
    Classical(ConfigArgs),
    /// One pipeline run; prints the JSON report.
    Run(ConfigArgs),
    /// Runs the pipeline over a list of values on one axis.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Writes a synthetic dataset drawn from the GP prior as CSV.
    Gen {
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Flags mirror the config-file keys and override them.
#[derive(Args)]
struct ConfigArgs {
    /// Sectioned key = value file.
    #[arg(long, allow_hyphen_values = true)]
    config: Option<PathBuf>,
    /// CSV training set with header x1,...,xd,y.
    #[arg(long, allow_hyphen_values = true)]
    dataset: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    d: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    data_seed: Option<String>,
    /// Comma-separated test point.
    #[arg(long, allow_hyphen_values = true)]
    x_star: Option<String>,
    /// se, linear or constant.
    #[arg(long, allow_hyphen_values = true)]
    kernel: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    length_scale: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<String>,
    /// Noise variance σ².
    #[arg(long, allow_hyphen_values = true)]
    noise: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    zeta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    /// Explicit γ, or `auto`.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<String>,
    /// Explicit Trotter step count, or `auto`.
    #[arg(long, allow_hyphen_values = true)]
    m: Option<String>,
    /// direct or oracle.
    #[arg(long, allow_hyphen_values = true)]
    path: Option<String>,
    /// exact or sampled.
    #[arg(long, allow_hyphen_values = true)]
    mode: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    shots: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sign: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    condition_cap: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    quantization_cap: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    trajectories: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    max_oracle_steps: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    variance: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    repetitions: Option<String>,
    /// Output directory.
    #[arg(long, env = cvgpr::experiment::OUT_DIR_ENV)]
    output: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("dataset", &self.dataset),
            ("n", &self.n),
            ("d", &self.d),
            ("data_seed", &self.data_seed),
            ("x_star", &self.x_star),
            ("kernel", &self.kernel),
            ("length_scale", &self.length_scale),
            ("amplitude", &self.amplitude),
            ("noise", &self.noise),
            ("xi", &self.xi),
            ("zeta", &self.zeta),
            ("epsilon", &self.epsilon),
            ("gamma", &self.gamma),
            ("m", &self.m),
            ("path", &self.path),
            ("mode", &self.mode),
            ("shots", &self.shots),
            ("seed", &self.seed),
            ("sign", &self.sign),
            ("window", &self.window),
            ("condition_cap", &self.condition_cap),
            ("quantization_cap", &self.quantization_cap),
            ("trajectories", &self.trajectories),
            ("max_oracle_steps", &self.max_oracle_steps),
            ("variance", &self.variance),
            ("repetitions", &self.repetitions),
            ("output", &self.output),
        ];
        config.apply(flags.iter().filter_map(|(k, v)| v.as_deref().map(|v| (*k, v))))?;
        config.validate()?;
        Ok(config)
    }
}

fn json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))
}

fn execute(command: Command) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    let io = |e: std::io::Error| Error::Io(e.to_string());
    match command {
        Command::Classical(args) => {
            let report = run_classical(&args.resolve()?)?;
            writeln!(stdout, "{}", json(&report)?).map_err(io)?;
        }
        Command::Run(args) => {
            let report = run_experiment(&args.resolve()?)?;
            writeln!(stdout, "{}", report.to_json()?).map_err(io)?;
        }
        Command::Sweep { axis, values, config } => {
            let config = config.resolve()?;
            let out = config.output_dir();
            let report = run_sweep(&SweepSpec::new(axis, values, config)?)?;
            match out {
                Some(dir) => report.write_to(&dir)?,
                None => report.write_csv(&mut stdout)?,
            }
            if let Some(slope) = report.slope {
                log::info!("log-log slope {slope:.4}");
            }
            for p in report.points.iter().filter(|p| p.error.is_some()) {
                log::warn!("sweep point {} failed: {}", p.axis_value, p.error.as_deref().unwrap_or(""));
            }
        }
        Command::Gen { out, config } => {
            let config = config.resolve()?;
            let (spec, seed) =
                config.synthetic_spec().ok_or_else(|| Error::Input("gen needs a synthetic spec, not --dataset".into()))?;
            let data = generate_synthetic(&spec, seed)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                    write_dataset(&data, file)?;
                }
                None => write_dataset(&data, &mut stdout)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string(), "exitCode": e.exit_code() } });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
