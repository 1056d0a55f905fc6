//! Split-step evolution on a grid against the closed-form sheared state.

use cvgpr::hybrid::{grid_oracle_evolve, overlap_closed_form, GridSpec, GridWavefunction};

fn main() {
    let xi = 1.0;
    for (gamma, lambda) in [(0.1, 1.0), (1.0, 1.0), (1.0, 4.0), (10.0, 1.0), (10.0, 4.0)] {
        let result = GridSpec::auto(512, xi, gamma * lambda).and_then(|spec| {
            let psi = GridWavefunction::sample(spec, |q, t| overlap_closed_form(0.0, xi, 0.0, q, t));
            let out = grid_oracle_evolve(&psi, lambda, gamma)?;
            let exact = GridWavefunction::sample(spec, |q, t| overlap_closed_form(lambda, xi, gamma, q, t));
            out.l2_distance(&exact)
        });
        match result {
            Ok(d) => println!("γ = {gamma:<4} λ = {lambda:<3} L2 error {d:.2e}"),
            Err(e) => println!("γ = {gamma:<4} λ = {lambda:<3} {e}"),
        }
    }
}
