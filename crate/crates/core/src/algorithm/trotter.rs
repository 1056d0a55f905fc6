//! Trotter error of the oracle path against the direct unitary.
//!
//! Every evolution is diagonal in the momenta `(p, p̃)`, so at fixed
//! `s = p p̃` both paths reduce to maps on the `[data, flag]` register. The
//! distance reported here is the trace distance after a `(p, p̃)`
//! measurement: the per-`s` trace distance averaged over the resource
//! pair's momentum density.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::oracle::{walk_order, TrotterSchedule};
use crate::dilation::{DilatedMatrix, OneSparseDecomposition};
use crate::error::{Error, Result};
use crate::hybrid::quadrature::gauss_hermite;

type C64 = Complex64;

/// Gauss–Hermite nodes per momentum axis.
pub const DEFAULT_MOMENTUM_NODES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrotterDistance {
    /// Oracle path against the direct unitary of the quantized `K̂_ζ`.
    pub trotter: f64,
    /// Direct unitary of `K̂_ζ` against that of the exact `K̂`.
    pub quantization: f64,
}

fn trace_norm_half(m: &DMatrix<C64>) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    0.5 * h.symmetric_eigenvalues().iter().map(|x| x.abs()).sum::<f64>()
}

/// `exp(i φ K)` on the flag-1 block of `[data, flag]`, identity on flag 0.
fn direct_unitary(khat: &DMatrix<f64>, phi: f64) -> DMatrix<C64> {
    let d = khat.nrows();
    let eig = khat.clone().symmetric_eigen();
    let mut v1 = DMatrix::<C64>::zeros(d, d);
    for k in 0..d {
        let u = eig.eigenvectors.column(k).map(|x| C64::new(x, 0.0));
        v1 += &u * u.transpose() * C64::from_polar(1.0, phi * eig.eigenvalues[k]);
    }
    let mut full = DMatrix::zeros(2 * d, 2 * d);
    for a in 0..d {
        full[(2 * a, 2 * a)] = C64::new(1.0, 0.0);
        for b in 0..d {
            full[(2 * a + 1, 2 * b + 1)] = v1[(a, b)];
        }
    }
    full
}

/// Kraus operators `⟨x| U₁(s) |s⟩` of one exponential-swap step at fixed
/// `s = p p̃`, lifted to `[data, flag]` (flag 0 gets `⟨x|s⟩ I`).
fn step_kraus(decomposition: &OneSparseDecomposition, angle: f64) -> Vec<DMatrix<C64>> {
    let d = decomposition.pair_dim();
    let dim = d * d;
    let (c, s) = (angle.cos(), angle.sin());
    let mut u = DMatrix::<C64>::identity(dim, dim);
    for j in walk_order(decomposition.terms.len()) {
        let term = &decomposition.terms[j];
        let mut next = u.clone() * C64::new(c, 0.0);
        for (row, &(col, sign)) in term.entries().iter().enumerate() {
            let f = C64::new(0.0, s * sign as f64);
            for k in 0..dim {
                next[(row, k)] += f * u[(col, k)];
            }
        }
        u = next;
    }
    let lift = 1.0 / (d as f64).sqrt();
    (0..d)
        .map(|x| {
            let mut k = DMatrix::<C64>::zeros(2 * d, 2 * d);
            for y in 0..d {
                k[(2 * y, 2 * y)] = C64::new(lift, 0.0);
                for yp in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for xp in 0..d {
                        acc += u[(x * d + y, xp * d + yp)];
                    }
                    k[(2 * y + 1, 2 * yp + 1)] = acc * lift;
                }
            }
            k
        })
        .collect()
}

/// Trace distances at a single value of `s = p p̃`.
pub fn trace_distance_at(
    decomposition: &OneSparseDecomposition,
    khat: &DilatedMatrix,
    schedule: &TrotterSchedule,
    psi0: &DVector<C64>,
    s: f64,
) -> Result<TrotterDistance> {
    let d = decomposition.pair_dim();
    if psi0.len() != 2 * d || khat.dim() != d {
        return Err(Error::Input("state, matrix and decomposition sizes disagree".into()));
    }
    let rho0 = psi0 * psi0.adjoint();
    let kraus = step_kraus(decomposition, schedule.step_angle() * s);
    let mut rho = rho0.clone();
    for _ in 0..schedule.m() {
        let mut next = DMatrix::zeros(2 * d, 2 * d);
        for k in &kraus {
            next += k * &rho * k.adjoint();
        }
        rho = next;
    }
    let n = d as f64 / 2.0;
    let phi = schedule.sign() * schedule.gamma() * s / (4.0 * n);
    let v_q = direct_unitary(decomposition.dequantized_khat().matrix(), phi);
    let v_e = direct_unitary(khat.matrix(), phi);
    let rho_q = &v_q * &rho0 * v_q.adjoint();
    let rho_e = &v_e * &rho0 * v_e.adjoint();
    Ok(TrotterDistance { trotter: trace_norm_half(&(rho - &rho_q)), quantization: trace_norm_half(&(rho_q - rho_e)) })
}

/// Momentum-resolved trace distances averaged over `|Φ̂_R(p, p̃)|²`.
pub fn p_resolved_trace_distance(
    decomposition: &OneSparseDecomposition,
    khat: &DilatedMatrix,
    schedule: &TrotterSchedule,
    psi0: &DVector<C64>,
    xi: f64,
    nodes: usize,
) -> Result<TrotterDistance> {
    if !(xi > 0.0) {
        return Err(Error::Input(format!("xi must be positive, got {xi}")));
    }
    let (u, w) = gauss_hermite(nodes);
    let mut acc = TrotterDistance { trotter: 0.0, quantization: 0.0 };
    for i in 0..nodes {
        for j in i..nodes {
            let s = (u[i] / xi) * (u[j] / xi);
            let t = trace_distance_at(decomposition, khat, schedule, psi0, s)?;
            let weight = w[i] * w[j] / std::f64::consts::PI * if i == j { 1.0 } else { 2.0 };
            acc.trotter += weight * t.trotter;
            acc.quantization += weight * t.quantization;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::encoding::{build_joint_input, encode_vector};
    use crate::algorithm::oracle::exp_swap_step;
    use crate::dilation::{embed_khat, DEFAULT_QUANTIZATION_CAP};
    use crate::hybrid::{BranchedHybridState, DenseHermitian, MixedHybridState};

    fn instance(zeta: f64) -> (DilatedMatrix, OneSparseDecomposition, DVector<C64>) {
        let k = DMatrix::from_row_slice(2, 2, &[1.1, 0.6, 0.6, 1.1]);
        let khat = embed_khat(&k).unwrap();
        let dec = OneSparseDecomposition::from_khat(&khat, zeta, DEFAULT_QUANTIZATION_CAP).unwrap();
        let y = encode_vector(&[0.4, -0.9], None).unwrap();
        let ks = encode_vector(&[0.8, 0.5], None).unwrap();
        let psi = build_joint_input(&y, &ks, 1.0).unwrap();
        (khat, dec, psi.branches()[0].amplitudes.clone())
    }

    #[test]
    fn zero_gamma_has_no_error() {
        let (khat, dec, psi) = instance(0.2);
        let sched = TrotterSchedule::new(4, 0.0, 0.2).unwrap();
        let t = p_resolved_trace_distance(&dec, &khat, &sched, &psi, 1.0, 6).unwrap();
        assert!(t.trotter < 1e-12 && t.quantization < 1e-12);
    }

    #[test]
    fn distance_shrinks_like_one_over_m() {
        let (khat, dec, psi) = instance(0.1);
        let d: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&m| {
                let s = TrotterSchedule::new(m, 2.0, 0.1).unwrap();
                p_resolved_trace_distance(&dec, &khat, &s, &psi, 1.0, 8).unwrap().trotter
            })
            .collect();
        for w in d.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio} in {d:?}");
        }
    }

    #[test]
    fn single_full_step_within_second_order_bound() {
        let (khat, dec, psi) = instance(0.3);
        let sched = TrotterSchedule::new(2, 1.0, 0.3).unwrap();
        let layout = crate::algorithm::encoding::joint_layout(2).unwrap();
        let state = BranchedHybridState::new(layout, 1.0, psi.clone()).unwrap();
        let one = exp_swap_step(&MixedHybridState::from_pure(state.clone()), &dec, &sched).unwrap();
        // Reference: the direct unitary of K̂_ζ for a single step.
        let kz = dec.dequantized_khat();
        let mut g = kz.matrix().kronecker(&DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
        g = (&g + g.transpose()) * 0.5;
        let gen = DenseHermitian::from_real(&g, vec![0, 1]).unwrap();
        let direct = state.apply_coupled_evolution(&gen, sched.gamma() / (4.0 * 2.0 * sched.m() as f64)).unwrap();
        let t = one.trace_distance(&MixedHybridState::from_pure(direct)).unwrap();
        // Second order in the step angle with the max-element norm.
        let a = sched.gamma() / (sched.m() as f64);
        let bound = a * a * khat.max_element_norm().powi(2) * 4.0;
        assert!(t < bound, "single-step distance {t} exceeds {bound}");
        assert!(t > 0.0);
    }
}
