//! Window acceptance of sheared resource states and the readout gain.

use cvgpr::hybrid::{asymptotic_window_gain, GaussianPair};

fn main() -> cvgpr::Result<()> {
    let xi = 0.1;
    let vacuum = GaussianPair::squeezed(xi)?;
    println!("γ = 0 acceptance: {:.6}", GaussianPair::window_overlap(&vacuum, &vacuum, xi).re);

    println!("{:>10} {:>12} {:>12}", "θ/ξ²", "acceptance", "gain");
    for r in [0.5, 1.0, 4.0, 16.0, 64.0, 256.0] {
        let sheared = GaussianPair::with_shear(xi, r * xi * xi)?;
        let accept = GaussianPair::window_overlap(&sheared, &sheared, xi).re;
        let gain = r * GaussianPair::window_overlap(&vacuum, &sheared, xi).re;
        println!("{r:>10} {accept:>12.6} {gain:>12.6}");
    }
    println!("asymptotic gain 2 erf²(1/√2) = {:.6}", asymptotic_window_gain(xi, xi));
    Ok(())
}
