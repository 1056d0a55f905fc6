//! Uniform-grid propagation of two-mode wavefunctions, used to cross-check
//! the closed-form Gaussian branches.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

type C64 = Complex64;

/// Tolerated deviation of the grid norm from one.
pub const NORM_DRIFT_TOL: f64 = 1e-6;
/// Largest probability mass tolerated in the outer band of either grid.
pub const EDGE_MASS_TOL: f64 = 1e-12;
/// Environment variable naming a directory for binary grid dumps.
pub const DUMP_ENV: &str = "CVGPR_GRID_DUMP";

/// `n × n` points on `[-L, L)²` with spacing `2L / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n: usize,
    half_extent: f64,
}

impl GridSpec {
    pub fn new(n: usize, half_extent: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Input(format!("grid size must be even and at least 4, got {n}")));
        }
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(Error::Input(format!("grid extent must be positive, got {half_extent}")));
        }
        Ok(Self { n, half_extent })
    }

    /// Extent chosen for a resource pair of squeezing `xi` sheared by up to
    /// `theta`: nine standard deviations in `q` when the momentum band fits,
    /// otherwise a balance between box size and momentum cutoff.
    pub fn auto(n: usize, xi: f64, theta: f64) -> Result<Self> {
        let sigma_q = ((xi.powi(4) + theta * theta) / (2.0 * xi * xi)).sqrt();
        let sigma_p = 1.0 / (std::f64::consts::SQRT_2 * xi);
        let wanted = 9.0 * sigma_q;
        let nyquist = n as f64 * PI / (2.0 * wanted);
        let l = if nyquist >= 8.0 * sigma_p { wanted } else { (n as f64 * PI * sigma_q / (2.0 * sigma_p)).sqrt() };
        Self::new(n, l)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.n as f64
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_extent + i as f64 * self.spacing()
    }

    /// Angular wavenumber of FFT bin `k`.
    pub fn momentum(&self, k: usize) -> f64 {
        let signed = if k < self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
        2.0 * PI * signed / (self.n as f64 * self.spacing())
    }

    fn in_edge_band(&self, i: usize) -> bool {
        let band = (self.n / 32).max(1);
        i < band || i >= self.n - band
    }
}

/// Row-major samples `ψ(q_i, q̃_j)` at index `i * n + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    spec: GridSpec,
    data: Vec<C64>,
}

impl GridWavefunction {
    pub fn sample<F: Fn(f64, f64) -> C64>(spec: GridSpec, f: F) -> Self {
        let n = spec.n;
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            let q = spec.coordinate(i);
            for j in 0..n {
                data.push(f(q, spec.coordinate(j)));
            }
        }
        Self { spec, data }
    }

    pub fn from_data(spec: GridSpec, data: Vec<C64>) -> Result<Self> {
        if data.len() != spec.n * spec.n {
            return Err(Error::Input("grid data has the wrong length".into()));
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        let h = self.spec.spacing();
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * h * h
    }

    /// L² distance on the grid.
    pub fn l2_distance(&self, other: &Self) -> Result<f64> {
        if self.spec != other.spec {
            return Err(Error::Input("grids differ".into()));
        }
        let h = self.spec.spacing();
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * h * h).sqrt())
    }

    fn edge_mass(&self) -> f64 {
        let n = self.spec.n;
        let h = self.spec.spacing();
        let mut m = 0.0;
        for i in 0..n {
            for j in 0..n {
                if self.spec.in_edge_band(i) || self.spec.in_edge_band(j) {
                    m += self.data[i * n + j].norm_sqr();
                }
            }
        }
        m * h * h
    }

    /// Position moments `(⟨q²⟩, ⟨q̃²⟩, ⟨q q̃⟩)` of the normalized density.
    pub fn position_moments(&self) -> (f64, f64, f64) {
        let n = self.spec.n;
        let (mut qq, mut tt, mut qt, mut total) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let q = self.spec.coordinate(i);
            for j in 0..n {
                let t = self.spec.coordinate(j);
                let rho = self.data[i * n + j].norm_sqr();
                qq += rho * q * q;
                tt += rho * t * t;
                qt += rho * q * t;
                total += rho;
            }
        }
        (qq / total, tt / total, qt / total)
    }

    /// Little-endian `(re, im)` f64 pairs, row-major, preceded by `n` as u64
    /// and the half-extent as f64.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&(self.spec.n as u64).to_le_bytes())?;
        f.write_all(&self.spec.half_extent.to_le_bytes())?;
        for z in &self.data {
            f.write_all(&z.re.to_le_bytes())?;
            f.write_all(&z.im.to_le_bytes())?;
        }
        f.flush()?;
        Ok(())
    }
}

fn fft2(data: &mut [C64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        fft.process(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
    if inverse {
        let s = 1.0 / (n * n) as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }
}

/// `exp(i α λ p p̃) ψ` by transforming to momentum space, multiplying by the
/// phase and transforming back.
///
/// Fails with a resolution error if the input norm is off by more than
/// [`NORM_DRIFT_TOL`] or if either the position or the momentum density
/// reaches the outer band of the grid.
pub fn grid_oracle_evolve(psi: &GridWavefunction, lambda_eff: f64, alpha: f64) -> Result<GridWavefunction> {
    let spec = psi.spec;
    let n = spec.n;
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > NORM_DRIFT_TOL {
        return Err(Error::Resolution(format!("input norm {norm} deviates from 1 by more than {NORM_DRIFT_TOL:e}")));
    }
    let edge = psi.edge_mass();
    if edge > EDGE_MASS_TOL {
        return Err(Error::Resolution(format!("input density reaches the grid boundary (mass {edge:e})")));
    }
    let mut data = psi.data.clone();
    fft2(&mut data, n, false);
    let total: f64 = data.iter().map(|z| z.norm_sqr()).sum();
    let mut spectral_edge = 0.0;
    for i in 0..n {
        for j in 0..n {
            // FFT bins near n/2 are the largest momenta.
            let (ci, cj) = ((i + n / 2) % n, (j + n / 2) % n);
            if spec.in_edge_band(ci) || spec.in_edge_band(cj) {
                spectral_edge += data[i * n + j].norm_sqr();
            }
        }
    }
    if spectral_edge / total > EDGE_MASS_TOL {
        return Err(Error::Resolution(format!(
            "momentum density reaches the Nyquist band (mass {:e})",
            spectral_edge / total
        )));
    }
    let k = alpha * lambda_eff;
    if k != 0.0 {
        for i in 0..n {
            let p = spec.momentum(i);
            for j in 0..n {
                data[i * n + j] *= C64::from_polar(1.0, k * p * spec.momentum(j));
            }
        }
    }
    fft2(&mut data, n, true);
    let out = GridWavefunction { spec, data };
    let out_norm = out.norm_sqr();
    if (out_norm - norm).abs() > NORM_DRIFT_TOL {
        return Err(Error::Resolution(format!("norm drifted from {norm} to {out_norm}")));
    }
    let edge = out.edge_mass();
    if edge > EDGE_MASS_TOL {
        return Err(Error::Resolution(format!("evolved density reaches the grid boundary (mass {edge:e})")));
    }
    if let Ok(dir) = std::env::var(DUMP_ENV) {
        let name = format!("grid_n{n}_k{k:.6}.bin");
        out.write_binary(&Path::new(&dir).join(name))?;
    }
    Ok(out)
}
