use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hybrid::{BranchedHybridState, RegisterLayout};

/// Factor names of the joint input register.
pub const DATA: &str = "data";
pub const FLAG: &str = "flag";

/// `|v⟩ = Σ_i [v_i/c |i⟩|0⟩ + √(1 − v_i²/c²) |i⟩|1⟩] / √N`, stored with the
/// leading qubit most significant: the first `N` amplitudes carry `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeEncoding {
    amplitudes: DVector<f64>,
    scale: f64,
}

impl AmplitudeEncoding {
    pub fn amplitudes(&self) -> &DVector<f64> {
        &self.amplitudes
    }

    /// `c(v)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `N`, half the amplitude count.
    pub fn n(&self) -> usize {
        self.amplitudes.len() / 2
    }
}

/// `1.01 · max |v_i|`, or `1` for the zero vector.
pub fn default_scale(v: &[f64]) -> f64 {
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        1.0
    } else {
        1.01 * m
    }
}

pub fn encode_vector(v: &[f64], c_override: Option<f64>) -> Result<AmplitudeEncoding> {
    if v.is_empty() {
        return Err(Error::Input("cannot encode an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("vector to encode is not finite".into()));
    }
    let max_abs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = c_override.unwrap_or_else(|| default_scale(v));
    if !(scale > max_abs) || !scale.is_finite() {
        return Err(Error::Encoding { scale, max_abs });
    }
    let n = v.len();
    let root = (n as f64).sqrt();
    let mut amplitudes = DVector::zeros(2 * n);
    for (i, &x) in v.iter().enumerate() {
        let r = x / scale;
        amplitudes[i] = r / root;
        amplitudes[n + i] = (1.0 - r * r).sqrt() / root;
    }
    Ok(AmplitudeEncoding { amplitudes, scale })
}

/// Zero-pads `v` to length `n`.
pub fn pad(v: &DVector<f64>, n: usize) -> Vec<f64> {
    let mut out = v.iter().copied().collect::<Vec<_>>();
    out.resize(n.max(v.len()), 0.0);
    out
}

pub fn joint_layout(n: usize) -> Result<RegisterLayout> {
    RegisterLayout::new(&[(DATA, 2 * n), (FLAG, 2)])
}

/// `(|y⟩|0⟩ + |k*⟩|1⟩)/√2 ⊗ |Φ_R(ξ)⟩` on the `[data, flag]` register.
pub fn build_joint_input(y: &AmplitudeEncoding, k_star: &AmplitudeEncoding, xi: f64) -> Result<BranchedHybridState> {
    if y.amplitudes.len() != k_star.amplitudes.len() {
        return Err(Error::Input("encodings have different sizes".into()));
    }
    let d = y.amplitudes.len();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = DVector::zeros(2 * d);
    for i in 0..d {
        v[2 * i] = Complex64::new(s * y.amplitudes[i], 0.0);
        v[2 * i + 1] = Complex64::new(s * k_star.amplitudes[i], 0.0);
    }
    BranchedHybridState::new(joint_layout(d / 2)?, xi, v)
}
