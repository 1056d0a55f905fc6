//! Exact classical Gaussian process regression.
//!
//! The classical posterior serves two roles: it is the baseline every quantum
//! estimate is checked against, and it builds the covariance objects (`K`,
//! `k*`, `k**`) that the quantum pipeline consumes. The prior mean is fixed to
//! zero and a single test point is handled at a time.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on `kappa(K)` before the posterior refuses to invert.
pub const DEFAULT_CONDITION_CAP: f64 = 1e8;

/// Observations the process is conditioned on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != targets.len() {
            return Err(Error::Input(format!(
                "{} input points but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let d = inputs[0].len();
        if d == 0 {
            return Err(Error::Input("input points must have dimension >= 1".into()));
        }
        for (i, x) in inputs.iter().enumerate() {
            if x.len() != d {
                return Err(Error::Schema(format!(
                    "point {i} has dimension {} but expected {d}",
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("point {i} has a non-finite coordinate")));
            }
        }
        if let Some(i) = targets.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("target {i} is not finite")));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.targets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    SquaredExponential,
    Linear,
    Constant,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "se" | "rbf" | "squared-exponential" | "squared_exponential" => {
                Ok(KernelFamily::SquaredExponential)
            }
            "linear" => Ok(KernelFamily::Linear),
            "constant" => Ok(KernelFamily::Constant),
            other => Err(Error::Input(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// Covariance function `k(x, x')`.
///
/// The squared-exponential family is `a² exp(-|x - x'|² / (2 l²))`, the linear
/// family is `a² (x · x')` and the constant family is `a²`. The length scale
/// only enters the squared-exponential family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub length_scale: f64,
    pub amplitude: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::squared_exponential(1.0, 1.0)
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, length_scale: f64, amplitude: f64) -> Result<Self> {
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::Input(format!("length scale must be positive, got {length_scale}")));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Input(format!("amplitude must be positive, got {amplitude}")));
        }
        Ok(Self { family, length_scale, amplitude })
    }

    pub fn squared_exponential(length_scale: f64, amplitude: f64) -> Self {
        Self { family: KernelFamily::SquaredExponential, length_scale, amplitude }
    }

    pub fn linear(amplitude: f64) -> Self {
        Self { family: KernelFamily::Linear, length_scale: 1.0, amplitude }
    }

    pub fn constant(amplitude: f64) -> Self {
        Self { family: KernelFamily::Constant, length_scale: 1.0, amplitude }
    }

    fn eval_unchecked(&self, x: &[f64], xp: &[f64]) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => {
                let r2: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum();
                self.amplitude * (-r2 / (2.0 * self.length_scale * self.length_scale)).exp()
            }
            KernelFamily::Linear => {
                self.amplitude * x.iter().zip(xp).map(|(a, b)| a * b).sum::<f64>()
            }
            KernelFamily::Constant => self.amplitude,
        }
    }
}

/// Evaluates `k(x, x')`.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], xp: &[f64]) -> Result<f64> {
    if x.len() != xp.len() {
        return Err(Error::Input(format!(
            "kernel arguments have dimensions {} and {}",
            x.len(),
            xp.len()
        )));
    }
    Ok(spec.eval_unchecked(x, xp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::Input(format!("noise variance must be >= 0, got {sigma2}")));
        }
        Ok(Self { sigma2 })
    }
}

/// `K`, `k*`, `k**` and the noise level for one test point.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSystem {
    pub k: DMatrix<f64>,
    pub k_star: DVector<f64>,
    pub k_star_star: f64,
    pub sigma2: f64,
}

impl CovarianceSystem {
    pub fn n(&self) -> usize {
        self.k_star.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult {
    pub mean: f64,
    pub variance: f64,
    /// `K^{-1} k*`.
    pub k_tilde: DVector<f64>,
    pub condition_number: f64,
}

/// Builds `K_ij = k(x_i, x_j) + sigma² delta_ij`, `k*_i = k(x_i, x*)` and `k** = k(x*, x*)`.
pub fn build_covariance_system(
    data: &TrainingSet,
    spec: &KernelSpec,
    noise: &NoiseModel,
    x_star: &[f64],
) -> Result<CovarianceSystem> {
    if x_star.len() != data.dim() {
        return Err(Error::Input(format!(
            "test point has dimension {} but data has dimension {}",
            x_star.len(),
            data.dim()
        )));
    }
    if x_star.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("test point is not finite".into()));
    }
    let xs = data.inputs();
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = spec.eval_unchecked(&xs[i], &xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += noise.sigma2;
    }
    let k_star = DVector::from_iterator(n, xs.iter().map(|x| spec.eval_unchecked(x, x_star)));
    Ok(CovarianceSystem {
        k,
        k_star,
        k_star_star: spec.eval_unchecked(x_star, x_star),
        sigma2: noise.sigma2,
    })
}

fn check_square(k: &DMatrix<f64>) -> Result<()> {
    if !k.is_square() || k.nrows() == 0 {
        return Err(Error::Input(format!("expected a non-empty square matrix, got {}x{}", k.nrows(), k.ncols())));
    }
    Ok(())
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(k: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(k.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// `|lambda|_max / |lambda|_min`; infinite when the matrix is singular.
pub fn condition_number(k: &DMatrix<f64>) -> Result<f64> {
    check_square(k)?;
    let ev = symmetric_eigenvalues(k);
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    if lo == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(hi / lo)
}

pub fn classical_posterior(system: &CovarianceSystem, y: &DVector<f64>) -> Result<PosteriorResult> {
    classical_posterior_with_cap(system, y, DEFAULT_CONDITION_CAP)
}

/// Posterior mean `y · K^{-1} k*` and variance `k** - k* · K^{-1} k*`.
///
/// `K` is inverted through its eigendecomposition.
pub fn classical_posterior_with_cap(
    system: &CovarianceSystem,
    y: &DVector<f64>,
    condition_cap: f64,
) -> Result<PosteriorResult> {
    check_square(&system.k)?;
    let n = system.n();
    if system.k.nrows() != n || y.len() != n {
        return Err(Error::Input(format!(
            "dimension mismatch: K is {}x{}, k* has {n} entries, y has {}",
            system.k.nrows(),
            system.k.ncols(),
            y.len()
        )));
    }
    let eig = SymmetricEigen::new(system.k.clone());
    let abs: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    let lo = abs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = abs.iter().copied().fold(0.0, f64::max);
    let kappa = if lo == 0.0 { f64::INFINITY } else { hi / lo };
    if !(kappa <= condition_cap) {
        return Err(Error::Conditioning { kappa, cap: condition_cap });
    }
    let v = &eig.eigenvectors;
    let mut coeff = v.transpose() * &system.k_star;
    for (c, lambda) in coeff.iter_mut().zip(eig.eigenvalues.iter()) {
        *c /= *lambda;
    }
    let k_tilde = v * coeff;
    let mean = y.dot(&k_tilde);
    let variance = system.k_star_star - system.k_star.dot(&k_tilde);
    Ok(PosteriorResult { mean, variance, k_tilde, condition_number: kappa })
}

/// Smallest noise level `sigma2' >= sigma2` for which `K - sigma2 I + sigma2' I`
/// has every eigenvalue at or above `lambda_floor`.
pub fn noise_dilution(k: &DMatrix<f64>, sigma2: f64, lambda_floor: f64) -> Result<f64> {
    check_square(k)?;
    if !(lambda_floor > 0.0) {
        return Err(Error::Input(format!("eigenvalue floor must be positive, got {lambda_floor}")));
    }
    let lambda_min = symmetric_eigenvalues(k)[0];
    Ok(sigma2.max(sigma2 + lambda_floor - lambda_min))
}
