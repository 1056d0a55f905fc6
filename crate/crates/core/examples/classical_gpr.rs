//! Exact GP posterior on a small synthetic dataset.

use cvgpr::experiment::{generate_synthetic, SyntheticSpec};
use cvgpr::gpr::{build_covariance_system, classical_posterior, KernelSpec, NoiseModel};

fn main() -> cvgpr::Result<()> {
    let kernel = KernelSpec::squared_exponential(0.6, 1.0);
    let noise = NoiseModel::new(0.05)?;
    let data = generate_synthetic(&SyntheticSpec { n: 8, d: 1, kernel, noise }, 17)?;

    println!("{:>6} {:>10} {:>10}", "x*", "mean", "std");
    for i in 0..=10 {
        let x = -1.0 + 0.2 * i as f64;
        let sys = build_covariance_system(&data, &kernel, &noise, &[x])?;
        let post = classical_posterior(&sys, &data.target_vector())?;
        println!("{x:>6.2} {:>10.4} {:>10.4}", post.mean, post.variance.sqrt());
    }
    Ok(())
}
