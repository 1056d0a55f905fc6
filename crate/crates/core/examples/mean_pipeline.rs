//! Posterior mean and variance through the direct path, then the oracle path
//! converging to the direct path at a fixed γ as M grows.

use cvgpr::algorithm::{run_variance_estimation, ExecutionPath, PipelineConfig};
use cvgpr::gpr::{KernelSpec, NoiseModel, TrainingSet};

fn main() -> cvgpr::Result<()> {
    let data = TrainingSet::new(vec![vec![-0.5], vec![0.1], vec![0.7]], vec![0.3, 0.9, -0.2])?;
    let kernel = KernelSpec::squared_exponential(0.8, 1.0);
    let noise = NoiseModel::new(0.2)?;
    let x_star = [0.25];

    let direct = PipelineConfig { xi: 0.1, epsilon: 0.02, ..Default::default() };
    let r = run_variance_estimation(&data, &kernel, &noise, &x_star, &direct)?;
    println!("classical  mean {:.5}  variance {:.5}  κ {:.2}", r.classical_mean, r.classical_variance, r.condition_number);
    println!("direct     mean {:.5}  variance {:.5}  γ {:.3}", r.mean_estimate, r.variance_estimate.unwrap(), r.params.gamma);

    let fixed = PipelineConfig { xi: 0.7, gamma: Some(6.0), zeta: 0.05, ..Default::default() };
    let reference = run_variance_estimation(&data, &kernel, &noise, &x_star, &fixed)?;
    println!("\nγ = 6, ξ = 0.7: direct mean {:.5}", reference.mean_estimate);
    for m in [8, 16, 32] {
        let oracle = PipelineConfig { path: ExecutionPath::Oracle, steps: Some(m), ..fixed.clone() };
        let r = run_variance_estimation(&data, &kernel, &noise, &x_star, &oracle)?;
        println!(
            "oracle M = {m:>3}  mean {:.5}  window {:.3}  trace distance {:.2e}  quantization {:.2e}",
            r.mean_estimate,
            r.window_probability,
            r.trotter_trace_distance.unwrap(),
            r.quantization_bias.unwrap()
        );
    }
    Ok(())
}
