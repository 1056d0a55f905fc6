use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::gaussian::GaussianPair;
use super::state::{BranchedHybridState, RegisterLayout};
use crate::error::{Error, Result};

type C64 = Complex64;

/// `ρ = Σ_i |ψ_i⟩⟨ψ_i|` with every `ψ_i` a branched hybrid state.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedHybridState {
    components: Vec<BranchedHybridState>,
}

impl MixedHybridState {
    pub fn from_pure(state: BranchedHybridState) -> Self {
        Self { components: vec![state] }
    }

    pub fn from_components(components: Vec<BranchedHybridState>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::Input("mixture has no components".into()))?;
        for c in &components {
            if c.layout() != first.layout() || c.xi() != first.xi() || c.window() != first.window() {
                return Err(Error::Input("mixture components live on different spaces".into()));
            }
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[BranchedHybridState] {
        &self.components
    }

    pub fn layout(&self) -> &RegisterLayout {
        self.components[0].layout()
    }

    pub fn trace(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `Tr[(O ⊗ I) ρ]` for a discrete operator given as a map.
    pub fn expectation_with<F: Fn(&DVector<C64>) -> DVector<C64>>(&self, observable: F) -> C64 {
        self.components.iter().map(|c| c.expectation_with(&observable)).sum()
    }

    /// `½ ‖ρ − σ‖₁`, exact up to the conditioning of the Gaussian Gram matrix.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        let base = &self.components[0];
        if other.components[0].layout() != base.layout() || other.components[0].xi() != base.xi() {
            return Err(Error::Input("states live on different spaces".into()));
        }
        if other.components[0].window() != base.window() {
            return Err(Error::Input("states carry different windows".into()));
        }
        let xi = base.xi();
        let window = base.window().unwrap_or(f64::INFINITY);
        let dim = base.layout().dim();

        let mut shears: Vec<f64> = self
            .components
            .iter()
            .chain(&other.components)
            .flat_map(|c| c.branches().iter().map(|b| b.gaussian.shear()))
            .collect();
        shears.sort_by(f64::total_cmp);
        shears.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
        let k = shears.len();
        let slot = |theta: f64| {
            shears
                .iter()
                .position(|s| (s - theta).abs() <= 1e-12 * s.abs().max(theta.abs()).max(1.0))
                .expect("shear was collected")
        };

        let pairs: Vec<GaussianPair> = shears.iter().map(|&t| GaussianPair::with_shear(xi, t)).collect::<Result<_>>()?;
        let mut gram = DMatrix::<C64>::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v = GaussianPair::window_overlap(&pairs[a], &pairs[b], window);
                gram[(a, b)] = v;
                gram[(b, a)] = v.conj();
            }
        }
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let sqrt_vals = eig.eigenvalues.map(|l| if l > 1e-14 * top { l.sqrt() } else { 0.0 });
        let half = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals.map(|x| C64::new(x, 0.0))) * eig.eigenvectors.adjoint();
        let half_full = half.kronecker(&DMatrix::<C64>::identity(dim, dim));

        let coeffs = |c: &BranchedHybridState| {
            let mut v = DVector::<C64>::zeros(k * dim);
            for b in c.branches() {
                let s = slot(b.gaussian.shear());
                for d in 0..dim {
                    v[s * dim + d] += b.amplitudes[d] * b.gaussian.phase();
                }
            }
            v
        };
        let mut delta = DMatrix::<C64>::zeros(k * dim, k * dim);
        for c in &self.components {
            let v = coeffs(c);
            delta += &v * v.adjoint();
        }
        for c in &other.components {
            let v = coeffs(c);
            delta -= &v * v.adjoint();
        }
        let m = &half_full * delta * &half_full;
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Ok(0.5 * m.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>())
    }
}
