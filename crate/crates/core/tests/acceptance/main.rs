//! Acceptance criteria 1–9. Each criterion prints one `PASS`/`FAIL` line
//! with its measured quantity and runtime, then asserts.

mod cli;
mod properties;

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;
use std::time::{Duration, Instant};

use cvgpr::algorithm::encoding::{build_joint_input, encode_vector};
use cvgpr::algorithm::oracle::{fractional_query, symmetric_state, QueryMode, ANCILLA, INDEX, SWAP};
use cvgpr::algorithm::pipeline::apply_direct_unitary;
use cvgpr::algorithm::{ExecutionPath, MeasurementMode, PipelineConfig};
use cvgpr::dilation::{embed_khat, hermitian_dilation, oracle_q, OneSparseDecomposition, DEFAULT_QUANTIZATION_CAP};
use cvgpr::experiment::{run_experiment, run_sweep, DataSource, ExperimentConfig, SweepAxis, SweepSpec};
use cvgpr::gpr::{build_covariance_system, classical_posterior, condition_number, KernelSpec, NoiseModel, TrainingSet};
use cvgpr::hybrid::{overlap_closed_form, grid_oracle_evolve, GridSpec, GridWavefunction, HomodyneWindow};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn emit(id: usize, pass: bool, detail: &str, elapsed: Duration, limit: Option<f64>) -> bool {
    let secs = elapsed.as_secs_f64();
    let in_time = limit.is_none_or(|l| secs < l);
    let ok = pass && in_time;
    let budget = limit.map_or(String::new(), |l| format!(" (limit {l} s)"));
    let mut out = std::io::stdout().lock();
    writeln!(out, "{} criterion {id}: {detail}; runtime {secs:.2} s{budget}", if ok { "PASS" } else { "FAIL" }).unwrap();
    ok
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Determinant by cofactor expansion along the first row.
fn cofactor_det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        _ => (0..n).map(|j| {
            let minor = m.clone().remove_row(0).remove_column(j);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[(0, j)] * cofactor_det(&minor)
        }).sum(),
    }
}

/// Inverse as the transposed cofactor matrix over the determinant.
fn adjugate_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let det = cofactor_det(m);
    DMatrix::from_fn(n, n, |i, j| {
        let minor = m.clone().remove_row(j).remove_column(i);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * cofactor_det(&minor) / det
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn criterion_1_classical_posterior() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let n = [1, 2, 4][i % 3];
        let d = 1 + (i / 3) % 2;
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = TrainingSet::new(inputs, targets).unwrap();
        let kernel = KernelSpec::squared_exponential(rng.random_range(0.3..2.0), rng.random_range(0.5..2.0));
        let noise = NoiseModel::new(rng.random_range(0.05..0.5)).unwrap();
        let x_star: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sys = build_covariance_system(&data, &kernel, &noise, &x_star).unwrap();
        let got = classical_posterior(&sys, &data.target_vector()).unwrap();
        let inv = adjugate_inverse(&sys.k);
        let mean = sys.k_star.dot(&(&inv * data.target_vector()));
        let var = sys.k_star_star - sys.k_star.dot(&(&inv * &sys.k_star));
        worst = worst.max(rel(got.mean, mean)).max(rel(got.variance, var));
    }
    let pass = worst < 1e-10;
    assert!(emit(1, pass, &format!("50 instances, worst relative error {worst:.2e} (tolerance 1e-10)"), start.elapsed(), Some(1.0)));
}

#[test]
fn criterion_2_decomposition_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut residual, mut max_entry, mut worst_ratio, mut non_involutions) = (0usize, 0i64, 0.0f64, 0usize);
    for i in 0..50 {
        let n = [1, 2, 4][i % 3];
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let k = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
        let khat = embed_khat(&k).unwrap();
        let h = hermitian_dilation(&khat);
        let hmax = h.nonzeros().map(|(_, _, v)| v.abs()).fold(0.0, f64::max);
        let zeta = hmax / rng.random_range(2.0..10.0);
        let dec = OneSparseDecomposition::from_khat(&khat, zeta, DEFAULT_QUANTIZATION_CAP).unwrap();
        max_entry = max_entry.max(dec.htilde.max_abs());
        residual += dec.reconstruction_residual().len();
        for t in &dec.terms {
            let m = t.to_dense();
            if &m * &m != DMatrix::identity(m.nrows(), m.nrows()) {
                non_involutions += 1;
            }
        }
        worst_ratio = worst_ratio.max(dec.max_quantization_error(&h) / zeta);
    }
    let pass = residual == 0 && non_involutions == 0 && worst_ratio <= 2.0 && max_entry <= 20;
    let detail = format!(
        "50 matrices, max |H̃| {max_entry}, residual entries {residual}, non-involutive terms {non_involutions}, max |H − ζH̃|/ζ {worst_ratio:.3} (bound 2)"
    );
    assert!(emit(2, pass, &detail, start.elapsed(), Some(1.0)));
}

#[test]
fn criterion_3_window_probability() {
    let start = Instant::now();
    let target = 0.710_144_626_438_078_3;
    let mut worst = 0.0f64;
    for xi in [0.05, 0.1, 1.0] {
        let y = encode_vector(&[0.4, -0.3], None).unwrap();
        let k = encode_vector(&[0.9, 0.2], None).unwrap();
        let state = build_joint_input(&y, &k, xi).unwrap();
        let khat = embed_khat(&DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0])).unwrap();
        let evolved = apply_direct_unitary(&state, 0.0, &khat, 1.0).unwrap();
        let (_, p) = evolved.window_project(&HomodyneWindow::new(xi).unwrap()).unwrap();
        worst = worst.max((p - target).abs());
    }
    let pass = worst < 1e-6;
    assert!(emit(3, pass, &format!("window probability at γ=0 within {worst:.2e} of erf²(1) = 0.7101 (tolerance 1e-6)"), start.elapsed(), Some(1.0)));
}

#[test]
fn criterion_4_ancilla_acceptance() {
    let start = Instant::now();
    let khat = embed_khat(&DMatrix::from_row_slice(2, 2, &[1.1, 0.6, 0.6, 1.1])).unwrap();
    let dec = OneSparseDecomposition::from_khat(&khat, 0.1, DEFAULT_QUANTIZATION_CAP).unwrap();
    let q = oracle_q(&dec.terms).unwrap();
    let t = dec.terms.len();
    let pair = dec.pair_dim();
    let y = encode_vector(&[0.5, 0.2], None).unwrap();
    let k = encode_vector(&[0.7, -0.1], None).unwrap();
    let base = build_joint_input(&y, &k, 0.3).unwrap();
    let mut worst = 0.0f64;
    for j in 0..t {
        let mut index = DVector::zeros(t);
        index[j] = c(1.0);
        let state = base
            .extend(SWAP, &symmetric_state(pair), true)
            .unwrap()
            .extend(INDEX, &index, true)
            .unwrap()
            .extend(ANCILLA, &DVector::from_element(2, c(FRAC_1_SQRT_2)), false)
            .unwrap();
        let out = fractional_query(&state, &q, &[SWAP, "data"], 0.0, QueryMode::Exact).unwrap();
        worst = worst.max((out.probability - 0.5).abs());
    }
    let pass = worst < 1e-9;
    assert!(emit(4, pass, &format!("{t} query positions at δ=0, max |p − 1/2| = {worst:.2e} (tolerance 1e-9)"), start.elapsed(), Some(1.0)));
}

#[test]
fn criterion_5_closed_form_vs_grid() {
    let start = Instant::now();
    let n = 512;
    let mut failures = Vec::new();
    let mut worst_ok = 0.0f64;
    let mut total = 0;
    for xi in [0.05, 0.1, 1.0] {
        for gamma in [0.1, 1.0, 10.0] {
            for lambda in [0.0, 0.25, 1.0, 4.0] {
                total += 1;
                let result = GridSpec::auto(n, xi, gamma * lambda).and_then(|spec| {
                    let psi = GridWavefunction::sample(spec, |q, t| overlap_closed_form(0.0, xi, 0.0, q, t));
                    let out = grid_oracle_evolve(&psi, lambda, gamma)?;
                    let exact = GridWavefunction::sample(spec, |q, t| overlap_closed_form(lambda, xi, gamma, q, t));
                    out.l2_distance(&exact)
                });
                match result {
                    Ok(d) if d < 1e-6 => worst_ok = worst_ok.max(d),
                    Ok(d) => failures.push(format!("(ξ={xi}, γ={gamma}, λ={lambda}): L2 {d:.1e}")),
                    Err(e) => failures.push(format!("(ξ={xi}, γ={gamma}, λ={lambda}): {}", e.kind())),
                }
            }
        }
    }
    let pass = failures.is_empty();
    let mut detail = format!("{}/{total} combinations agree to L2 < 1e-6 on 512² (worst passing {worst_ok:.1e})", total - failures.len());
    if !pass {
        detail.push_str(&format!("; unresolved: {}", failures.join(", ")));
    }
    assert!(emit(5, pass, &detail, start.elapsed(), Some(60.0)));
}

/// Evenly spaced SE instance with σ² raised until κ(K) ≤ 10.
fn conditioned_instance(n: usize) -> (TrainingSet, KernelSpec, NoiseModel) {
    let kernel = KernelSpec::squared_exponential(1.0, 1.0);
    let xs: Vec<f64> = (0..n).map(|i| if n == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 }).collect();
    let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).sin() + 0.3).collect();
    let data = TrainingSet::new(xs.iter().map(|&x| vec![x]).collect(), ys).unwrap();
    let bare = build_covariance_system(&data, &kernel, &NoiseModel::new(0.0).unwrap(), &[0.0]).unwrap();
    let eig = bare.k.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let sigma2 = ((hi - 10.0 * lo) / 9.0).max(0.0) * 1.05 + 0.01;
    (data, kernel, NoiseModel::new(sigma2).unwrap())
}

#[test]
fn criterion_6_end_to_end_mean_and_variance() {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [1, 2, 4] {
        let (data, kernel, noise) = conditioned_instance(n);
        let x_star = [0.35];
        let sys = build_covariance_system(&data, &kernel, &noise, &x_star).unwrap();
        let kappa = condition_number(&sys.k).unwrap();
        let config = PipelineConfig { epsilon: 0.05, ..Default::default() };
        let r = cvgpr::algorithm::run_variance_estimation(&data, &kernel, &noise, &x_star, &config).unwrap();
        let var_err = r.variance_abs_error.unwrap() / sys.k_star_star;
        pass &= kappa <= 10.0 && r.rel_error < 0.05 && var_err < 0.05;
        parts.push(format!("N={n}: κ {kappa:.2}, mean relError {:.2e}, variance error {var_err:.2e}·k**", r.rel_error));
    }
    assert!(emit(6, pass, &parts.join("; "), start.elapsed(), Some(120.0)));
}

fn two_point_config(dir: &std::path::Path) -> ExperimentConfig {
    let path = dir.join("two_points.csv");
    std::fs::write(&path, "x1,y\n0.0,0.8\n1.0,-0.4\n").unwrap();
    let mut config = ExperimentConfig {
        data: DataSource::Csv(path),
        x_star: Some(vec![0.4]),
        noise: NoiseModel::new(0.1).unwrap(),
        variance: false,
        ..Default::default()
    };
    config.pipeline.xi = 1.0;
    config.pipeline.gamma = Some(2.0);
    config.pipeline.zeta = 0.05;
    config
}

#[test]
fn criterion_7_trotter_scaling() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut base = two_point_config(dir.path());
    base.pipeline.path = ExecutionPath::Oracle;
    let sweep = run_sweep(&SweepSpec::new(SweepAxis::M, vec![16.0, 32.0, 64.0, 128.0], base).unwrap()).unwrap();
    let distances: Vec<String> = sweep
        .points
        .iter()
        .map(|p| p.report.as_ref().and_then(|r| r.errors.trotter_trace_distance).map_or("n/a".into(), |d| format!("{d:.2e}")))
        .collect();
    let slope = sweep.slope.unwrap_or(f64::NAN);
    let pass = sweep.failures() == 0 && (-1.3..=-0.7).contains(&slope);
    let detail = format!("trace distance at M=16,32,64,128: [{}], log-log slope {slope:.3} (window [-1.3, -0.7])", distances.join(", "));
    assert!(emit(7, pass, &detail, start.elapsed(), Some(300.0)));
}

#[test]
fn criterion_8_shot_noise_scaling() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut base = two_point_config(dir.path());
    base.pipeline.xi = 0.1;
    base.pipeline.gamma = None;
    base.pipeline.mode = MeasurementMode::Sampled { shots: 1000 };
    base.pipeline.seed = 8;
    base.repetitions = 200;
    let sweep = run_sweep(&SweepSpec::new(SweepAxis::Shots, vec![1e3, 1e4, 1e5], base).unwrap()).unwrap();
    let errs: Vec<String> = sweep.points.iter().map(|p| p.std_error.map_or("n/a".into(), |s| format!("{s:.3e}"))).collect();
    let slope = sweep.slope.unwrap_or(f64::NAN);
    let pass = sweep.failures() == 0 && (slope + 0.5).abs() <= 0.1;
    let detail = format!("standard error over 200 repetitions at 1e3,1e4,1e5 shots: [{}], slope {slope:.3} (−0.5 ± 0.1)", errs.join(", "));
    assert!(emit(8, pass, &detail, start.elapsed(), Some(300.0)));
}

#[test]
fn criterion_9_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut configs = Vec::new();
    let mut sampled = two_point_config(dir.path());
    sampled.pipeline.xi = 0.1;
    sampled.pipeline.gamma = None;
    sampled.pipeline.mode = MeasurementMode::Sampled { shots: 5000 };
    sampled.pipeline.seed = 42;
    sampled.variance = true;
    configs.push(sampled.clone());
    let mut oracle = two_point_config(dir.path());
    oracle.pipeline.path = ExecutionPath::Oracle;
    oracle.pipeline.steps = Some(16);
    oracle.pipeline.mode = MeasurementMode::Sampled { shots: 5000 };
    oracle.pipeline.seed = 7;
    configs.push(oracle);
    let mut identical = true;
    for config in &configs {
        let a = run_experiment(config).unwrap().to_json_without_timestamp().unwrap();
        let b = run_experiment(config).unwrap().to_json_without_timestamp().unwrap();
        identical &= a == b;
    }
    sampled.repetitions = 5;
    let spec = SweepSpec::new(SweepAxis::Shots, vec![100.0, 1000.0, 10000.0], sampled).unwrap();
    let csv = |s: &SweepSpec| {
        let mut buf = Vec::new();
        run_sweep(s).unwrap().write_csv(&mut buf).unwrap();
        buf
    };
    identical &= csv(&spec) == csv(&spec);
    assert!(emit(9, identical, "repeated runs and a parallel sweep with fixed seeds produce byte-identical numeric output", start.elapsed(), None));
}
