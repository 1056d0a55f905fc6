use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gpr::{kernel_eval, KernelSpec, NoiseModel, TrainingSet};

/// Parameters of a synthetic draw from the GP prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub kernel: KernelSpec,
    pub noise: NoiseModel,
}

pub fn load_dataset(path: &Path) -> Result<TrainingSet> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(file)
}

/// Reads the `x1,...,xd,y` CSV format.
pub fn read_dataset<R: Read>(reader: R) -> Result<TrainingSet> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let cols = header.len();
    if cols < 2 || &header[cols - 1] != "y" {
        return Err(Error::Schema(format!("header must read x1,...,xd,y; got `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    for (i, name) in header.iter().take(cols - 1).enumerate() {
        if name != format!("x{}", i + 1) {
            return Err(Error::Schema(format!("column {} should be named x{}, found `{name}`", i + 1, i + 1)));
        }
    }
    let (mut inputs, mut targets) = (Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != cols {
            return Err(Error::Schema(format!("line {line}: expected {cols} fields, found {}", record.len())));
        }
        let mut row = Vec::with_capacity(cols);
        for field in record.iter() {
            let x: f64 = field.parse().map_err(|_| Error::Parse { line, message: format!("`{field}` is not a number") })?;
            if !x.is_finite() {
                return Err(Error::Parse { line, message: format!("non-finite value `{field}`") });
            }
            row.push(x);
        }
        targets.push(row.pop().unwrap());
        inputs.push(row);
    }
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    TrainingSet::new(inputs, targets)
}

pub fn write_dataset<W: Write>(data: &TrainingSet, writer: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(io)?;
    for (x, y) in data.inputs().iter().zip(data.targets()) {
        let row: Vec<String> = x.iter().chain(std::iter::once(y)).map(|v| format!("{v:?}")).collect();
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Lower factor `L` with `L Lᵀ ≈ C`; regularizes, then clips the spectrum,
/// when Cholesky fails.
fn psd_factor(c: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = c.clone().cholesky() {
        return ch.l();
    }
    warn!("Gram matrix is not numerically positive definite; adding 1e-10 I");
    let n = c.nrows();
    if let Some(ch) = (c + DMatrix::identity(n, n) * 1e-10).cholesky() {
        return ch.l();
    }
    warn!("regularized Gram matrix still fails Cholesky; clipping negative eigenvalues");
    let eig = c.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Inputs uniform on `[−1, 1]^d`, targets drawn from the GP prior plus noise.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<TrainingSet> {
    if spec.n == 0 || spec.d == 0 {
        return Err(Error::Input("synthetic data needs n ≥ 1 and d ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Vec<f64>> = (0..spec.n).map(|_| (0..spec.d).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
    let y = sample_prior_targets(&inputs, &spec.kernel, &spec.noise, &mut rng)?;
    TrainingSet::new(inputs, y.iter().copied().collect())
}

/// One draw of `y ~ N(0, K(X, X) + σ² I)`.
pub fn sample_prior_targets<R: Rng>(inputs: &[Vec<f64>], kernel: &KernelSpec, noise: &NoiseModel, rng: &mut R) -> Result<DVector<f64>> {
    let n = inputs.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let k = kernel_eval(kernel, &inputs[i], &inputs[j])?;
            c[(i, j)] = k;
            c[(j, i)] = k;
        }
        c[(i, i)] += noise.sigma2;
    }
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    Ok(psd_factor(&c) * z)
}
