//! Two-mode Gaussian states reachable from the squeezed resource pair by the
//! shear `exp(i θ p p̃)`.
//!
//! Conventions: ħ = 1, vacuum quadrature variance 1/2, phase-space ordering
//! `(q, q̃, p, p̃)`. The squeezed pair has wavefunction
//! `exp(-(q² + q̃²) / (2ξ²)) / (√π ξ)`. After the shear its position-space
//! wavefunction is
//!
//! ```text
//! ψ_θ(q, q̃) = ξ / √(π D) · exp(-[ξ²(q² + q̃²) + 2iθ q q̃] / (2D)),  D = ξ⁴ + θ².
//! ```

use nalgebra::Matrix4;
use num_complex::Complex64;
use statrs::function::erf::erf;
use std::f64::consts::PI;

use super::quadrature;
use crate::error::{Error, Result};

/// Absolute tolerance for windowed cross-branch overlaps.
pub const WINDOW_OVERLAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPair {
    xi: f64,
    shear: f64,
    phase: Complex64,
}

impl GaussianPair {
    /// The resource pair `|Φ_R(ξ)⟩`.
    pub fn squeezed(xi: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::Input(format!("squeezing parameter must be positive, got {xi}")));
        }
        Ok(Self { xi, shear: 0.0, phase: Complex64::new(1.0, 0.0) })
    }

    pub fn with_shear(xi: f64, shear: f64) -> Result<Self> {
        let mut g = Self::squeezed(xi)?;
        g.shear = shear;
        Ok(g)
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Accumulated `θ` in `exp(i θ p p̃)`.
    pub fn shear(&self) -> f64 {
        self.shear
    }

    pub fn phase(&self) -> Complex64 {
        self.phase
    }

    pub fn with_phase(mut self, phase: Complex64) -> Self {
        self.phase = phase;
        self
    }

    /// `exp(i α p p̃)` applied to this pair.
    pub fn sheared(&self, alpha: f64) -> Self {
        Self { shear: self.shear + alpha, ..*self }
    }

    fn denom(&self) -> f64 {
        self.xi.powi(4) + self.shear * self.shear
    }

    /// `(⟨q⟩, ⟨q̃⟩, ⟨p⟩, ⟨p̃⟩)`; the shear keeps the pair centred.
    pub fn mean_vector(&self) -> [f64; 4] {
        [0.0; 4]
    }

    /// Symplectic matrix of `exp(i θ p p̃)`: `q -> q - θ p̃`, `q̃ -> q̃ - θ p`.
    pub fn shear_symplectic(theta: f64) -> Matrix4<f64> {
        let mut s = Matrix4::identity();
        s[(0, 3)] = -theta;
        s[(1, 2)] = -theta;
        s
    }

    pub fn initial_covariance(xi: f64) -> Matrix4<f64> {
        let a = xi * xi / 2.0;
        let b = 1.0 / (2.0 * xi * xi);
        Matrix4::from_diagonal(&nalgebra::Vector4::new(a, a, b, b))
    }

    /// Symmetrized covariance `S V Sᵀ` of the sheared pair.
    pub fn covariance(&self) -> Matrix4<f64> {
        let s = Self::shear_symplectic(self.shear);
        s * Self::initial_covariance(self.xi) * s.transpose()
    }

    /// Position-space wavefunction `⟨q, q̃|ψ⟩`.
    pub fn wavefunction(&self, q: f64, qt: f64) -> Complex64 {
        let d = self.denom();
        let arg = Complex64::new(-self.xi * self.xi * (q * q + qt * qt), -2.0 * self.shear * q * qt) / (2.0 * d);
        self.phase * self.xi / (PI * d).sqrt() * arg.exp()
    }

    /// Exponent coefficients of `conj(ψ_a) ψ_b = pref · exp(-α (q² + q̃²) + i c q q̃)`.
    fn pair_coefficients(a: &Self, b: &Self) -> (f64, f64, f64) {
        let (da, db) = (a.denom(), b.denom());
        let xi2 = a.xi * a.xi;
        let pref = xi2 / (PI * (da * db).sqrt());
        let alpha = 0.5 * xi2 * (1.0 / da + 1.0 / db);
        let c = a.shear / da - b.shear / db;
        (pref, alpha, c)
    }

    /// `⟨a|b⟩` over the whole plane.
    pub fn overlap(a: &Self, b: &Self) -> Complex64 {
        debug_assert_eq!(a.xi, b.xi);
        let (pref, alpha, c) = Self::pair_coefficients(a, b);
        let integral = 2.0 * PI / (4.0 * alpha * alpha + c * c).sqrt();
        a.phase.conj() * b.phase * pref * integral
    }

    /// `⟨a|Π_w|b⟩` with `Π_w` the projector onto `[-w, w]²` in `(q, q̃)`.
    ///
    /// Equal shears use the closed erf form; different shears integrate the
    /// (real) integrand adaptively. `w = ∞` gives [`GaussianPair::overlap`].
    pub fn window_overlap(a: &Self, b: &Self, half_width: f64) -> Complex64 {
        if half_width.is_infinite() {
            return Self::overlap(a, b);
        }
        let (pref, alpha, c) = Self::pair_coefficients(a, b);
        let w = half_width;
        let integral = if c == 0.0 {
            let one = (PI / alpha).sqrt() * erf(alpha.sqrt() * w);
            one * one
        } else {
            let tol = WINDOW_OVERLAP_TOL / pref.max(1e-300);
            // The sine part is odd in q and integrates to zero over the square.
            let inner = |q: f64| {
                quadrature::integrate(|t| (-alpha * t * t).exp() * (c * q * t).cos(), 0.0, w, tol / (16.0 * w))
            };
            4.0 * quadrature::integrate(|q| (-alpha * q * q).exp() * inner(q), 0.0, w, tol / 8.0)
        };
        a.phase.conj() * b.phase * pref * integral
    }
}

/// `⟨q, q̃| exp(i γ λ p p̃) |Φ_R(ξ)⟩`, normalized so that `λ = 0` gives the bare
/// squeezed wavefunction.
pub fn overlap_closed_form(lambda_eff: f64, xi: f64, gamma: f64, q: f64, q_tilde: f64) -> Complex64 {
    let theta = gamma * lambda_eff;
    let d = xi.powi(4) + theta * theta;
    let arg = Complex64::new(-xi * xi * (q * q + q_tilde * q_tilde), -2.0 * theta * q * q_tilde) / (2.0 * d);
    xi / (PI.sqrt() * d.sqrt()) * arg.exp()
}

/// Gain `lim_{θ→∞} (θ/ξ²) ⟨Φ|Π_w|ψ_θ⟩ = 2 erf²(w / (√2 ξ))`.
pub fn asymptotic_window_gain(xi: f64, half_width: f64) -> f64 {
    if half_width.is_infinite() {
        return 2.0;
    }
    let e = erf(half_width / (std::f64::consts::SQRT_2 * xi));
    2.0 * e * e
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn squeezed_variances() {
        let g = GaussianPair::squeezed(1.0).unwrap();
        let v = g.covariance();
        for i in 0..4 {
            assert_relative_eq!(v[(i, i)], 0.5, epsilon = 1e-15);
        }
        let g = GaussianPair::squeezed(0.1).unwrap();
        let v = g.covariance();
        assert_relative_eq!(v[(0, 0)], 0.005, epsilon = 1e-15);
        assert_relative_eq!(v[(2, 2)], 50.0, epsilon = 1e-12);
        for xi in [0.05, 0.3, 2.0] {
            let v = GaussianPair::squeezed(xi).unwrap().covariance();
            assert_relative_eq!(v[(0, 0)] * v[(2, 2)], 0.25, epsilon = 1e-14);
        }
        assert!(GaussianPair::squeezed(0.0).is_err());
        assert!(GaussianPair::squeezed(-1.0).is_err());
    }

    #[test]
    fn uncertainty_relation_holds_after_shear() {
        let g = GaussianPair::with_shear(0.4, 2.7).unwrap();
        let v = g.covariance();
        // Check V + (i/2) Ω ⪰ 0 via the Hermitian 8x8 real embedding.
        let omega = {
            let mut o = Matrix4::zeros();
            o[(0, 2)] = 1.0;
            o[(1, 3)] = 1.0;
            o[(2, 0)] = -1.0;
            o[(3, 1)] = -1.0;
            o
        };
        let mut big = nalgebra::DMatrix::zeros(8, 8);
        for i in 0..4 {
            for j in 0..4 {
                big[(i, j)] = v[(i, j)];
                big[(i + 4, j + 4)] = v[(i, j)];
                big[(i, j + 4)] = -0.5 * omega[(i, j)];
                big[(i + 4, j)] = 0.5 * omega[(i, j)];
            }
        }
        let ev = nalgebra::SymmetricEigen::new(big).eigenvalues;
        assert!(ev.iter().all(|&e| e > -1e-12), "{ev:?}");
        assert_eq!(v, v.transpose());
    }

    #[test]
    fn closed_form_limits() {
        let xi = 0.3;
        let g = GaussianPair::squeezed(xi).unwrap();
        for (q, qt) in [(0.0, 0.0), (0.1, -0.2), (0.5, 0.4)] {
            let bare = (-(q * q + qt * qt) / (2.0 * xi * xi)).exp() / (PI.sqrt() * xi);
            assert_relative_eq!(overlap_closed_form(0.0, xi, 5.0, q, qt).re, bare, epsilon = 1e-14);
            assert_relative_eq!(g.wavefunction(q, qt).re, bare, epsilon = 1e-14);
        }
        let (lam, gamma) = (0.7, 3.0);
        let origin = overlap_closed_form(lam, xi, gamma, 0.0, 0.0);
        let expected = xi / (PI.sqrt() * (xi.powi(4) + (gamma * lam).powi(2)).sqrt());
        assert_relative_eq!(origin.re, expected, epsilon = 1e-15);
        assert_eq!(origin.im, 0.0);
    }

    #[test]
    fn closed_form_origin_matches_direct_quadrature() {
        // ⟨0,0|ψ_θ⟩ = (1/2π) ∫∫ Φ̂(p, p̃) exp(iθ p p̃) dp dp̃, reduced to one
        // dimension by integrating p̃ analytically is still a quadrature over p.
        let (xi, theta) = (0.5f64, 1.3f64);
        let norm = xi / PI.sqrt();
        // Inner p̃ integral: ∫ exp(-ξ² p̃²/2 + iθ p p̃) dp̃ = √(2π)/ξ exp(-θ² p²/(2ξ²)).
        let val = quadrature::integrate(
            |p| (-xi * xi * p * p / 2.0).exp() * (2.0 * PI).sqrt() / xi * (-theta * theta * p * p / (2.0 * xi * xi)).exp(),
            -40.0,
            40.0,
            1e-14,
        ) * norm
            / (2.0 * PI);
        assert_relative_eq!(overlap_closed_form(1.0, xi, theta, 0.0, 0.0).re, val, epsilon = 1e-12);
    }

    #[test]
    fn full_overlaps() {
        let xi = 0.6;
        let a = GaussianPair::with_shear(xi, 0.8).unwrap();
        assert_relative_eq!(GaussianPair::overlap(&a, &a).re, 1.0, epsilon = 1e-14);
        // ⟨ψ_θ|ψ_{-θ}⟩ = ξ² / √(ξ⁴ + θ²)
        let b = GaussianPair::with_shear(xi, -0.8).unwrap();
        let expected = xi * xi / (xi.powi(4) + 0.64f64).sqrt();
        assert_relative_eq!(GaussianPair::overlap(&a, &b).re, expected, epsilon = 1e-14);
    }

    #[test]
    fn window_probability_of_resource_pair() {
        let xi = 0.1;
        let g = GaussianPair::squeezed(xi).unwrap();
        let p = GaussianPair::window_overlap(&g, &g, xi).re;
        assert_relative_eq!(p, erf(1.0).powi(2), epsilon = 1e-15);
        assert!((p - 0.7101).abs() < 1e-4);
    }

    #[test]
    fn window_overlap_matches_brute_force() {
        let xi = 0.7;
        let a = GaussianPair::with_shear(xi, 0.3).unwrap();
        let b = GaussianPair::with_shear(xi, -1.1).unwrap();
        let w = 0.9;
        let (x, wts) = quadrature::gauss_legendre(60);
        let mut brute = Complex64::new(0.0, 0.0);
        for i in 0..60 {
            for j in 0..60 {
                let (q, qt) = (w * x[i], w * x[j]);
                brute += a.wavefunction(q, qt).conj() * b.wavefunction(q, qt) * wts[i] * wts[j] * w * w;
            }
        }
        let v = GaussianPair::window_overlap(&a, &b, w);
        assert!((v - brute).norm() < 1e-12, "{v} vs {brute}");
        let full = GaussianPair::window_overlap(&a, &b, f64::INFINITY);
        assert_relative_eq!(full.re, GaussianPair::overlap(&a, &b).re, epsilon = 1e-15);
        let big = GaussianPair::window_overlap(&a, &b, 40.0);
        assert!((big - full).norm() < 1e-9);
    }

    #[test]
    fn asymptotic_gain_limit() {
        let xi = 0.2;
        let g0 = GaussianPair::squeezed(xi).unwrap();
        let theta = 1e4;
        let gt = GaussianPair::with_shear(xi, theta).unwrap();
        let v = GaussianPair::window_overlap(&g0, &gt, xi).re * theta / (xi * xi);
        assert_relative_eq!(v, asymptotic_window_gain(xi, xi), max_relative = 1e-6);
    }
}
