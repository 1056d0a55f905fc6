use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use super::encoding::{build_joint_input, encode_vector, joint_layout, pad, AmplitudeEncoding};
use super::oracle::{symmetric_state, KeyedBranches, TrotterSchedule, WalkKernel};
use super::trotter::{p_resolved_trace_distance, DEFAULT_MOMENTUM_NODES};
use crate::dilation::{embed_khat, DilatedMatrix, OneSparseDecomposition, DEFAULT_QUANTIZATION_CAP};
use crate::error::{Error, Result};
use crate::gpr::{
    build_covariance_system, classical_posterior_with_cap, KernelSpec, NoiseModel, TrainingSet, DEFAULT_CONDITION_CAP,
};
use crate::hybrid::{asymptotic_window_gain, BranchedHybridState, DenseHermitian, HomodyneWindow};

type C64 = Complex64;

/// Which evolution realizes `exp(i γ K̂ N̂ p p̃ / 4N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionPath {
    /// Exact spectral evolution of `K̂`.
    Direct,
    /// Fractional queries, permutation walk and exponential-swap steps.
    Oracle,
}

impl std::str::FromStr for ExecutionPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" => Ok(Self::Direct),
            "oracle" => Ok(Self::Oracle),
            other => Err(Error::Input(format!("unknown path `{other}` (expected direct or oracle)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum MeasurementMode {
    /// Expectation values computed exactly.
    Exact,
    /// Expectation values estimated from seeded shots.
    Sampled { shots: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub xi: f64,
    pub epsilon: f64,
    /// Explicit `γ`; overrides the value derived from `epsilon`.
    pub gamma: Option<f64>,
    /// Explicit Trotter step count; overrides the value derived from `epsilon`.
    pub steps: Option<usize>,
    pub zeta: f64,
    pub path: ExecutionPath,
    pub mode: MeasurementMode,
    pub seed: u64,
    /// `+1` evolves with `exp(+iγ…)`, `−1` with `exp(−iγ…)`.
    pub sign: f64,
    /// Window half-width; `ξ` when unset.
    pub window: Option<f64>,
    pub condition_cap: f64,
    pub quantization_cap: i64,
    /// Trajectories used for the oracle-path window probability.
    pub trajectories: usize,
    /// Largest `M` the oracle path will simulate.
    pub max_oracle_steps: usize,
    pub momentum_nodes: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            xi: 0.1,
            epsilon: 0.05,
            gamma: None,
            steps: None,
            zeta: 0.05,
            path: ExecutionPath::Direct,
            mode: MeasurementMode::Exact,
            seed: 0,
            sign: 1.0,
            window: None,
            condition_cap: DEFAULT_CONDITION_CAP,
            quantization_cap: DEFAULT_QUANTIZATION_CAP,
            trajectories: 16,
            max_oracle_steps: 4096,
            momentum_nodes: DEFAULT_MOMENTUM_NODES,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::Input(format!("xi must be positive, got {}", self.xi)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Input(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Input(format!("gamma must be non-negative, got {g}")));
            }
        }
        if self.steps == Some(0) {
            return Err(Error::Input("M must be at least 1".into()));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::Input(format!("zeta must be positive, got {}", self.zeta)));
        }
        if let MeasurementMode::Sampled { shots } = self.mode {
            if shots == 0 {
                return Err(Error::Input("shots must be at least 1".into()));
            }
        }
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(Error::Input(format!("sign must be +1 or -1, got {}", self.sign)));
        }
        if let Some(w) = self.window {
            if !(w > 0.0) {
                return Err(Error::Input(format!("window half-width must be positive, got {w}")));
            }
        }
        if self.trajectories == 0 || self.momentum_nodes == 0 {
            return Err(Error::Input("trajectory and node counts must be positive".into()));
        }
        Ok(())
    }

    pub fn window_half_width(&self) -> f64 {
        self.window.unwrap_or(self.xi)
    }
}

/// `γ` and `M` chosen for a target error `ε`, with the quantities behind them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ParameterChoice {
    pub gamma: f64,
    pub steps: usize,
    pub lambda_min: f64,
    pub max_element: f64,
    /// Smallest shear `γ λ_min / 4N`; at least `ξ²/ε` by construction.
    pub theta_min: f64,
    /// `γ² ‖K̂‖²_max / ξ⁴ / M`, bounded by `ε`.
    pub step_error_bound: f64,
}

/// `γ = (ξ²/ε) · 4N / λ_min(K̂)` and `M = ⌈γ² ‖K̂‖²_max / (ε ξ⁴)⌉`.
pub fn select_parameters(epsilon: f64, xi: f64, khat: &DilatedMatrix) -> Result<ParameterChoice> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Input(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::Input(format!("xi must be positive, got {xi}")));
    }
    let lambda_min = khat.lambda_min();
    if !(lambda_min > 0.0) {
        return Err(Error::Singular { lambda_min });
    }
    let n = khat.n() as f64;
    let xi2 = xi * xi;
    let gamma = xi2 / epsilon * 4.0 * n / lambda_min;
    let kmax = khat.max_element_norm();
    let bound = gamma * gamma * kmax * kmax / (epsilon * xi2 * xi2);
    let steps = bound.ceil().max(1.0) as usize;
    Ok(ParameterChoice {
        gamma,
        steps,
        lambda_min,
        max_element: kmax,
        theta_min: gamma * lambda_min / (4.0 * n),
        step_error_bound: gamma * gamma * kmax * kmax / (xi2 * xi2) / steps as f64,
    })
}

/// `(I+Z)/2 ⊗ X` on `[data, flag]`, with `Z` on the leading data qubit.
fn top_x(n: usize) -> impl Fn(&DVector<C64>) -> DVector<C64> {
    move |v| DVector::from_fn(v.len(), |i, _| if i / 2 < n { v[i ^ 1] } else { C64::new(0.0, 0.0) })
}

/// `(I+Z)/2 ⊗ I` on `[data, flag]`.
fn top_projector(n: usize) -> impl Fn(&DVector<C64>) -> DVector<C64> {
    move |v| DVector::from_fn(v.len(), |i, _| if i / 2 < n { v[i] } else { C64::new(0.0, 0.0) })
}

/// `⟨χ̂|(I+Z)/2 ⊗ X|χ̂⟩ / calibration` on a `[data, flag]` state.
pub fn readout_expectation(state: &BranchedHybridState, calibration: f64) -> Result<f64> {
    if !(calibration > 0.0 && calibration.is_finite()) {
        return Err(Error::DegenerateRun(format!("readout calibration is {calibration}")));
    }
    let names = state.layout().names();
    if names.len() != 2 || names[1] != super::encoding::FLAG {
        return Err(Error::Input("readout expects a [data, flag] register".into()));
    }
    let n = state.layout().factor_dim(0) / 2;
    Ok(state.expectation_with(top_x(n)).re / calibration)
}

/// Calibration of the windowed readout: `2N · g` with `g = 2 erf²(w/√2ξ)`,
/// the large-shear limit of `(θ/ξ²) ⟨Φ|Π_w|ψ_θ⟩`.
pub fn readout_calibration(n: usize, xi: f64, half_width: f64) -> f64 {
    2.0 * n as f64 * asymptotic_window_gain(xi, half_width)
}

/// Rescales a calibrated readout to `uᵀ K⁻¹ v`.
pub fn rescale(readout: f64, n: usize, gamma: f64, c_left: f64, c_right: f64, xi: f64) -> f64 {
    n as f64 * gamma * c_left * c_right * readout / (2.0 * xi * xi)
}

/// `exp(i sign γ (K̂/4N) N̂ p p̃)` by spectral decomposition of `K̂`.
pub fn apply_direct_unitary(state: &BranchedHybridState, gamma: f64, khat: &DilatedMatrix, sign: f64) -> Result<BranchedHybridState> {
    let d = khat.dim();
    if state.layout().dims() != [d, 2] {
        return Err(Error::Input("direct unitary expects a [data, flag] register matching K̂".into()));
    }
    let flag1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let g = DenseHermitian::from_real(&khat.matrix().kronecker(&flag1), vec![0, 1])?;
    state.apply_coupled_evolution(&g, sign * gamma / (4.0 * khat.n() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AncillaStats {
    pub probability: f64,
    pub successes: u64,
    pub trials: u64,
}

/// One estimate of `uᵀ K⁻¹ v` through the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearEstimate {
    pub value: f64,
    /// The same quantity in exact mode.
    pub exact_value: f64,
    pub window_probability: f64,
    pub ancilla: Option<AncillaStats>,
    pub trotter_trace_distance: Option<f64>,
    pub quantization_bias: Option<f64>,
}

fn keyed_state(
    layout: &crate::hybrid::RegisterLayout,
    xi: f64,
    flag0: &DVector<C64>,
    flag1: &KeyedBranches,
    angle: f64,
) -> Result<BranchedHybridState> {
    let d = flag0.len();
    let mut branches = Vec::with_capacity(flag1.len() + 1);
    let mut v0 = DVector::zeros(2 * d);
    for i in 0..d {
        v0[2 * i] = flag0[i];
    }
    branches.push((v0, 0.0));
    for (&k, v) in flag1 {
        let mut w = DVector::zeros(2 * d);
        for i in 0..d {
            w[2 * i + 1] = v[i];
        }
        branches.push((w, k as f64 * angle));
    }
    BranchedHybridState::from_branches(layout.clone(), xi, branches)
}

struct OracleRun {
    coherent: BranchedHybridState,
    window_probability: f64,
    top_weight: f64,
}

/// Oracle path on `[data, flag]`. The flag-0 block is untouched; the
/// coherence between the flags evolves by `⟨s|U₁|s⟩` per step, which is all
/// the readout needs. Window probability and the flag-1 weight come from
/// trajectories that pick one swap outcome per step.
fn run_oracle(
    left: &AmplitudeEncoding,
    right: &AmplitudeEncoding,
    kernel: &WalkKernel,
    steps: usize,
    xi: f64,
    window: &HomodyneWindow,
    trajectories: usize,
    rng: &mut ChaCha8Rng,
) -> Result<OracleRun> {
    let d = kernel.pair_dim();
    let layout = joint_layout(d / 2)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let flag0 = left.amplitudes().map(|x| C64::new(s * x, 0.0));
    let start: KeyedBranches = BTreeMap::from([(0, right.amplitudes().iter().map(|&x| C64::new(s * x, 0.0)).collect())]);
    let sym: Vec<C64> = symmetric_state(d).iter().copied().collect();

    let mut coherent = start.clone();
    for _ in 0..steps {
        coherent = kernel.contract(&coherent, &sym);
    }
    let coherent = keyed_state(&layout, xi, &flag0, &coherent, kernel.step_angle())?;

    let n = d / 2;
    let root = C64::new((d as f64).sqrt(), 0.0);
    let (mut p_sum, mut top_sum) = (0.0, 0.0);
    for _ in 0..trajectories {
        let mut b = start.clone();
        for _ in 0..steps {
            let x = rng.random_range(0..d);
            let mut e = vec![C64::new(0.0, 0.0); d];
            e[x] = C64::new(1.0, 0.0);
            b = kernel.contract(&b, &e);
            for v in b.values_mut() {
                for z in v.iter_mut() {
                    *z *= root;
                }
            }
        }
        let traj = keyed_state(&layout, xi, &flag0, &b, kernel.step_angle())?;
        let (proj, p) = traj.window_project(window)?;
        p_sum += p;
        top_sum += proj.expectation_with(top_projector(n)).re;
    }
    Ok(OracleRun {
        coherent,
        window_probability: p_sum / trajectories as f64,
        top_weight: top_sum / trajectories as f64,
    })
}

/// Estimates `uᵀ K⁻¹ v` (`K` the upper block of `K̂`) through the selected
/// path and measurement mode.
pub fn estimate_bilinear(
    khat: &DilatedMatrix,
    u: &DVector<f64>,
    v: &DVector<f64>,
    gamma: f64,
    steps: usize,
    config: &PipelineConfig,
    rng: &mut ChaCha8Rng,
) -> Result<BilinearEstimate> {
    let n = khat.n();
    let xi = config.xi;
    let left = encode_vector(&pad(u, n), None)?;
    let right = encode_vector(&pad(v, n), None)?;
    let state0 = build_joint_input(&left, &right, xi)?;
    let window = HomodyneWindow::with_half_width(xi, config.window_half_width())?;
    let calibration = readout_calibration(n, xi, window.half_width());
    let scale = |r: f64| rescale(r, n, gamma, left.scale(), right.scale(), xi);

    let (projected, window_probability, top_weight, ancilla, trotter, quantization) = match config.path {
        ExecutionPath::Direct => {
            let evolved = apply_direct_unitary(&state0, gamma, khat, config.sign)?;
            let (proj, p) = evolved.window_project(&window)?;
            let top = proj.expectation_with(top_projector(n)).re;
            (proj, p, top, None, None, None)
        }
        ExecutionPath::Oracle => {
            if steps > config.max_oracle_steps {
                return Err(Error::Input(format!(
                    "oracle path with M = {steps} exceeds the limit {}; pass an explicit M",
                    config.max_oracle_steps
                )));
            }
            let dec = OneSparseDecomposition::from_khat(khat, config.zeta, config.quantization_cap)?;
            let schedule = TrotterSchedule::with_sign(steps, gamma, config.zeta, config.sign)?;
            let kernel = WalkKernel::new(&dec, &schedule);
            let run = run_oracle(&left, &right, &kernel, steps, xi, &window, config.trajectories, rng)?;
            let (proj, _) = run.coherent.window_project(&window)?;
            let td = p_resolved_trace_distance(
                &dec,
                khat,
                &schedule,
                &state0.branches()[0].amplitudes,
                xi,
                config.momentum_nodes,
            )?;
            let queries = (steps * dec.terms.len()) as u64;
            let ancilla = AncillaStats { probability: 0.5, successes: queries, trials: 2 * queries };
            (proj, run.window_probability, run.top_weight, Some(ancilla), Some(td.trotter), Some(td.quantization))
        }
    };

    let raw = readout_expectation(&projected, 1.0)?;
    let exact_value = scale(raw / calibration);
    let (value, ancilla) = match config.mode {
        MeasurementMode::Exact => (exact_value, ancilla),
        MeasurementMode::Sampled { shots } => {
            let p_plus = ((top_weight + raw) / 2.0).clamp(0.0, window_probability);
            let p_minus = ((top_weight - raw) / 2.0).clamp(0.0, window_probability - p_plus);
            let accepted = sample_binomial(rng, shots, window_probability)?;
            let n_plus = sample_binomial(rng, accepted, conditional(p_plus, window_probability))?;
            let n_minus = sample_binomial(rng, accepted - n_plus, conditional(p_minus, window_probability - p_plus))?;
            let estimate = (n_plus as f64 - n_minus as f64) / shots as f64;
            let ancilla = match ancilla {
                Some(a) => Some(sample_ancilla(rng, a.successes.saturating_mul(shots))?),
                None => None,
            };
            (scale(estimate / calibration), ancilla)
        }
    };
    Ok(BilinearEstimate {
        value,
        exact_value,
        window_probability,
        ancilla,
        trotter_trace_distance: trotter,
        quantization_bias: quantization,
    })
}

fn conditional(p: f64, total: f64) -> f64 {
    if total > 0.0 {
        (p / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn sample_binomial(rng: &mut ChaCha8Rng, n: u64, p: f64) -> Result<u64> {
    if n == 0 || p <= 0.0 {
        return Ok(0);
    }
    if p >= 1.0 {
        return Ok(n);
    }
    Ok(Binomial::new(n, p).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng))
}

/// Total attempts needed for `successes` accepted queries at probability
/// 1/2: failures follow a negative binomial, drawn as a Gamma–Poisson mixture.
fn sample_ancilla(rng: &mut ChaCha8Rng, successes: u64) -> Result<AncillaStats> {
    if successes == 0 {
        return Ok(AncillaStats { probability: 0.5, successes: 0, trials: 0 });
    }
    let rate = Gamma::new(successes as f64, 1.0).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng);
    let failures = if rate > 0.0 {
        Poisson::new(rate).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng) as u64
    } else {
        0
    };
    let trials = successes + failures;
    Ok(AncillaStats { probability: successes as f64 / trials as f64, successes, trials })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunParams {
    pub xi: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub m: usize,
    pub n: usize,
    pub n_padded: usize,
    pub epsilon: f64,
    pub window: f64,
    pub path: ExecutionPath,
    pub mode: MeasurementMode,
    pub sign: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub mean_estimate: f64,
    pub variance_estimate: Option<f64>,
    pub window_probability: f64,
    pub ancilla: Option<AncillaStats>,
    pub classical_mean: f64,
    pub classical_variance: f64,
    pub condition_number: f64,
    pub rel_error: f64,
    pub variance_abs_error: Option<f64>,
    /// Relative deviation of the exact-mode mean from the classical mean.
    pub approx_bias: f64,
    pub trotter_trace_distance: Option<f64>,
    pub quantization_bias: Option<f64>,
    pub params: RunParams,
}

fn run(
    data: &TrainingSet,
    kernel: &KernelSpec,
    noise: &NoiseModel,
    x_star: &[f64],
    config: &PipelineConfig,
    with_variance: bool,
) -> Result<RunReport> {
    config.validate()?;
    let system = build_covariance_system(data, kernel, noise, x_star)?;
    let y = data.target_vector();
    let classical = classical_posterior_with_cap(&system, &y, config.condition_cap)?;
    let khat = embed_khat(&system.k)?;
    let (gamma, steps) = match (config.gamma, config.steps) {
        (Some(g), Some(m)) => (g, m),
        (g, m) => {
            let choice = select_parameters(config.epsilon, config.xi, &khat)?;
            (g.unwrap_or(choice.gamma), m.unwrap_or(choice.steps))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mean = estimate_bilinear(&khat, &y, &system.k_star, gamma, steps, config, &mut rng)?;
    let floor = classical.mean.abs().max(1e-12);
    let variance = if with_variance {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        Some(estimate_bilinear(&khat, &system.k_star, &system.k_star, gamma, steps, config, &mut rng)?)
    } else {
        None
    };
    let variance_estimate = variance.as_ref().map(|v| system.k_star_star - v.value);
    Ok(RunReport {
        mean_estimate: mean.value,
        variance_estimate,
        window_probability: mean.window_probability,
        ancilla: mean.ancilla.clone(),
        classical_mean: classical.mean,
        classical_variance: classical.variance,
        condition_number: classical.condition_number,
        rel_error: (mean.value - classical.mean).abs() / floor,
        variance_abs_error: variance_estimate.map(|v| (v - classical.variance).abs()),
        approx_bias: (mean.exact_value - classical.mean) / floor,
        trotter_trace_distance: mean.trotter_trace_distance,
        quantization_bias: mean.quantization_bias,
        params: RunParams {
            xi: config.xi,
            gamma,
            zeta: config.zeta,
            m: steps,
            n: data.len(),
            n_padded: khat.n(),
            epsilon: config.epsilon,
            window: config.window_half_width(),
            path: config.path,
            mode: config.mode,
            sign: config.sign,
            seed: config.seed,
        },
    })
}

/// Mean pipeline: build, evolve, post-select, read out and rescale.
pub fn run_mean_estimation(
    data: &TrainingSet,
    kernel: &KernelSpec,
    noise: &NoiseModel,
    x_star: &[f64],
    config: &PipelineConfig,
) -> Result<RunReport> {
    run(data, kernel, noise, x_star, config, false)
}

/// Mean pipeline plus the variance pipeline with `y` replaced by `k*`; the
/// variance is `k** − k*ᵀ K⁻¹ k*`.
pub fn run_variance_estimation(
    data: &TrainingSet,
    kernel: &KernelSpec,
    noise: &NoiseModel,
    x_star: &[f64],
    config: &PipelineConfig,
) -> Result<RunReport> {
    run(data, kernel, noise, x_star, config, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn parameter_rule_examples() {
        let khat = embed_khat(&DMatrix::identity(1, 1)).unwrap();
        let p = select_parameters(0.1, 0.1, &khat).unwrap();
        assert_relative_eq!(p.gamma, 0.4, epsilon = 1e-14);
        // γ² ‖K̂‖²_max / (ε ξ⁴) = 0.16 / 1e-5, up to rounding in the ceiling.
        assert!((p.steps as i64 - 16000).abs() <= 1);
        let half = select_parameters(0.05, 0.1, &khat).unwrap();
        assert!((half.steps as f64 / p.steps as f64 - 8.0).abs() < 1e-3);
        let wide = select_parameters(0.1, 0.2, &khat).unwrap();
        assert_relative_eq!(wide.gamma / p.gamma, 4.0, epsilon = 1e-12);
        assert!((wide.steps as i64 - p.steps as i64).abs() <= 1);
        assert!(p.theta_min >= 0.1 * 0.1 / 0.1 - 1e-12);
        let singular = embed_khat(&DMatrix::zeros(1, 1)).unwrap();
        assert!(matches!(select_parameters(0.1, 0.1, &singular), Err(Error::Singular { .. })));
    }

    #[test]
    fn idealized_state_readout_is_exact() {
        let k = DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.9]);
        let y = [0.7, -0.2];
        let ks = [0.5, 0.8];
        let (xi, gamma) = (0.1, 3.0);
        let khat = embed_khat(&k).unwrap();
        let ey = encode_vector(&y, None).unwrap();
        let ek = encode_vector(&ks, None).unwrap();
        let kinv = khat.matrix().clone().try_inverse().unwrap();
        let ideal = kinv * ek.amplitudes() * (xi * xi / gamma);
        let layout = joint_layout(2).unwrap();
        let mut v = DVector::zeros(8);
        for i in 0..4 {
            v[2 * i] = c(ey.amplitudes()[i]);
            v[2 * i + 1] = c(ideal[i]);
        }
        let state = BranchedHybridState::new(layout, xi, v).unwrap();
        let r = readout_expectation(&state, 1.0).unwrap();
        let kinv_small = k.clone().try_inverse().unwrap();
        let bilinear = (DVector::from_vec(y.to_vec()).transpose() * &kinv_small * DVector::from_vec(ks.to_vec()))[(0, 0)];
        let expected = 2.0 * xi * xi * bilinear / (2.0 * ey.scale() * ek.scale() * gamma);
        assert_relative_eq!(r, expected, max_relative = 1e-12);
        let back = rescale(r, 2, gamma, ey.scale(), ek.scale(), xi);
        assert!((back - bilinear).abs() < 1e-10);
        assert!(matches!(readout_expectation(&state, 0.0), Err(Error::DegenerateRun(_))));
    }

    #[test]
    fn direct_unitary_trivial_cases() {
        let khat = embed_khat(&DMatrix::from_row_slice(1, 1, &[2.0])).unwrap();
        let layout = joint_layout(1).unwrap();
        let v = DVector::from_vec(vec![c(0.6), c(0.0), c(0.8), c(0.0)]);
        let s = BranchedHybridState::new(layout.clone(), 0.5, v).unwrap();
        let out = apply_direct_unitary(&s, 3.0, &khat, 1.0).unwrap();
        assert_eq!(out.branch_count(), 1);
        assert_eq!(out.branches()[0].gaussian.shear(), 0.0);
        assert_eq!(apply_direct_unitary(&s, 0.0, &khat, 1.0).unwrap(), s);
        let v = DVector::from_vec(vec![c(0.0), c(0.6), c(0.0), c(0.8)]);
        let s = BranchedHybridState::new(layout, 0.5, v).unwrap();
        let out = apply_direct_unitary(&s, 3.0, &khat, 1.0).unwrap();
        let shears: Vec<f64> = out.branches().iter().map(|b| b.gaussian.shear()).collect();
        // Diagonal K̂ = diag(2, 1): λ_eff = K̂_xx / 4N.
        assert_relative_eq!(shears[0], 3.0 * 1.0 / 4.0, epsilon = 1e-14);
        assert_relative_eq!(shears[1], 3.0 * 2.0 / 4.0, epsilon = 1e-14);
    }

    fn one_point() -> (TrainingSet, KernelSpec, NoiseModel) {
        (
            TrainingSet::new(vec![vec![0.0]], vec![1.3]).unwrap(),
            KernelSpec::squared_exponential(1.0, 1.0),
            NoiseModel::new(0.1).unwrap(),
        )
    }

    #[test]
    fn single_point_direct_exact() {
        let (data, kernel, noise) = one_point();
        let config = PipelineConfig { xi: 0.05, ..Default::default() };
        let r = run_variance_estimation(&data, &kernel, &noise, &[0.3], &config).unwrap();
        assert!(r.rel_error < 0.05, "{r:?}");
        assert!(r.variance_abs_error.unwrap() < 0.05, "{r:?}");
    }

    #[test]
    fn zero_targets_and_zero_kstar() {
        let data = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![0.0, 0.0]).unwrap();
        let kernel = KernelSpec::squared_exponential(1.0, 1.0);
        let noise = NoiseModel::new(0.1).unwrap();
        let config = PipelineConfig::default();
        let r = run_mean_estimation(&data, &kernel, &noise, &[0.5], &config).unwrap();
        assert!(r.mean_estimate.abs() < 1e-6);
        // A test point far from the data has k* = 0 to machine precision.
        let r = run_variance_estimation(&data, &kernel, &noise, &[60.0], &config).unwrap();
        assert_eq!(r.variance_estimate.unwrap(), 1.0);
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let (data, kernel, noise) = one_point();
        let config = PipelineConfig { mode: MeasurementMode::Sampled { shots: 1000 }, seed: 11, ..Default::default() };
        let a = run_variance_estimation(&data, &kernel, &noise, &[0.3], &config).unwrap();
        let b = run_variance_estimation(&data, &kernel, &noise, &[0.3], &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_path_runs_and_approaches_direct() {
        let data = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![1.0, 2.0]).unwrap();
        let kernel = KernelSpec::squared_exponential(1.0, 1.0);
        let noise = NoiseModel::new(0.3).unwrap();
        let base = PipelineConfig { xi: 0.5, gamma: Some(20.0), steps: Some(16), zeta: 0.1, ..Default::default() };
        let direct = run_mean_estimation(&data, &kernel, &noise, &[0.5], &base).unwrap();
        let oracle = run_mean_estimation(&data, &kernel, &noise, &[0.5], &PipelineConfig { path: ExecutionPath::Oracle, ..base.clone() }).unwrap();
        assert!(oracle.trotter_trace_distance.unwrap() > 0.0);
        assert!((oracle.mean_estimate - direct.mean_estimate).abs() < 0.2 * direct.mean_estimate.abs(), "{} vs {}", oracle.mean_estimate, direct.mean_estimate);
        assert!(oracle.window_probability > 0.0 && oracle.window_probability < 1.0);
    }

    #[test]
    fn both_signs_track_their_direct_unitary() {
        let data = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![1.0, 2.0]).unwrap();
        let kernel = KernelSpec::squared_exponential(1.0, 1.0);
        let noise = NoiseModel::new(0.3).unwrap();
        let mut dist = Vec::new();
        for sign in [1.0, -1.0] {
            let config = PipelineConfig {
                xi: 0.5,
                gamma: Some(8.0),
                steps: Some(16),
                zeta: 0.1,
                sign,
                path: ExecutionPath::Oracle,
                ..Default::default()
            };
            let r = run_mean_estimation(&data, &kernel, &noise, &[0.5], &config).unwrap();
            dist.push(r.trotter_trace_distance.unwrap());
        }
        assert!(dist.iter().all(|d| *d > 0.0 && *d < 0.2), "{dist:?}");
        assert_relative_eq!(dist[0], dist[1], max_relative = 1e-6);
    }
}
