//! Trace distance of the oracle path against the direct unitary as M grows.

use cvgpr::algorithm::ExecutionPath;
use cvgpr::experiment::{run_sweep, DataSource, ExperimentConfig, SweepAxis, SweepSpec};

fn main() -> cvgpr::Result<()> {
    let mut base = ExperimentConfig { data: DataSource::Synthetic { n: 2, d: 1, seed: Some(3) }, variance: false, ..Default::default() };
    base.pipeline.path = ExecutionPath::Oracle;
    base.pipeline.xi = 1.0;
    base.pipeline.gamma = Some(2.0);
    base.pipeline.zeta = 0.05;

    let sweep = run_sweep(&SweepSpec::new(SweepAxis::M, vec![8.0, 16.0, 32.0, 64.0], base)?)?;
    sweep.write_csv(std::io::stdout())?;
    if let Some(slope) = sweep.slope {
        println!("log-log slope {slope:.3}");
    }
    Ok(())
}
