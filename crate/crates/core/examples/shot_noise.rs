//! Spread of sampled-mode estimates against the shot count.

use cvgpr::algorithm::MeasurementMode;
use cvgpr::experiment::{run_sweep, DataSource, ExperimentConfig, SweepAxis, SweepSpec};

fn main() -> cvgpr::Result<()> {
    let mut base = ExperimentConfig { data: DataSource::Synthetic { n: 2, d: 1, seed: Some(5) }, variance: false, ..Default::default() };
    base.pipeline.mode = MeasurementMode::Sampled { shots: 100 };
    base.repetitions = 100;

    let sweep = run_sweep(&SweepSpec::new(SweepAxis::Shots, vec![1e2, 1e3, 1e4, 1e5], base)?)?;
    for p in &sweep.points {
        let r = p.report.as_ref().unwrap();
        println!(
            "shots {:>8}  estimate {:>9.5}  classical {:>8.5}  std error {:.4}",
            p.axis_value,
            r.quantum.mean,
            r.classical.mean,
            p.std_error.unwrap()
        );
    }
    println!("log-log slope {:.3}", sweep.slope.unwrap());
    Ok(())
}
