use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::gaussian::GaussianPair;
use super::quadrature;
use crate::error::{Error, Result};

type C64 = Complex64;

/// Above this many branches windowed quadratic forms switch from pairwise
/// adaptive overlaps to a tensor Gauss–Legendre rule over the window.
pub const PAIRWISE_BRANCH_LIMIT: usize = 24;
const WINDOW_NODES: usize = 64;
const HERMITIAN_TOL: f64 = 1e-12;

/// Ordered tensor factors of the discrete register. Index order is row-major:
/// the first factor is the most significant digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    names: Vec<String>,
    dims: Vec<usize>,
}

impl RegisterLayout {
    pub fn new(factors: &[(&str, usize)]) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Input("register layout needs at least one factor".into()));
        }
        let mut names: Vec<String> = Vec::with_capacity(factors.len());
        for (name, dim) in factors {
            if *dim == 0 {
                return Err(Error::Input(format!("register factor `{name}` has dimension 0")));
            }
            if names.iter().any(|n| n == name) {
                return Err(Error::Input(format!("duplicate register factor `{name}`")));
            }
            names.push((*name).to_string());
        }
        Ok(Self { names, dims: factors.iter().map(|f| f.1).collect() })
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn factor(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Input(format!("no register factor named `{name}`")))
    }

    pub fn factor_dim(&self, factor: usize) -> usize {
        self.dims[factor]
    }

    fn stride(&self, factor: usize) -> usize {
        self.dims[factor + 1..].iter().product()
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.dims.len());
        digits.iter().zip(&self.dims).fold(0, |acc, (d, n)| acc * n + d)
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        out
    }

    fn check_factors(&self, factors: &[usize], m: &DMatrix<C64>) -> Result<usize> {
        let mut seen = vec![false; self.dims.len()];
        for &f in factors {
            if f >= self.dims.len() || seen[f] {
                return Err(Error::Input(format!("invalid factor list {factors:?}")));
            }
            seen[f] = true;
        }
        let d: usize = factors.iter().map(|&f| self.dims[f]).product();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::Input(format!(
                "operator is {}x{} but factors {factors:?} span dimension {d}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(d)
    }

    /// `(m ⊗ I_rest) v`, with `m` ordered like `factors`.
    pub fn apply_local(&self, factors: &[usize], m: &DMatrix<C64>, v: &DVector<C64>) -> Result<DVector<C64>> {
        let d = self.check_factors(factors, m)?;
        let strides: Vec<usize> = factors.iter().map(|&f| self.stride(f)).collect();
        let local_dims: Vec<usize> = factors.iter().map(|&f| self.dims[f]).collect();
        let offsets: Vec<usize> = (0..d)
            .map(|mut l| {
                let mut off = 0;
                for k in (0..factors.len()).rev() {
                    off += (l % local_dims[k]) * strides[k];
                    l /= local_dims[k];
                }
                off
            })
            .collect();
        let mut out = DVector::zeros(v.len());
        for i in 0..v.len() {
            let mut local = 0;
            let mut base = i;
            for k in 0..factors.len() {
                let digit = (i / strides[k]) % local_dims[k];
                local = local * local_dims[k] + digit;
                base -= digit * strides[k];
            }
            let mut acc = C64::new(0.0, 0.0);
            for (l, off) in offsets.iter().enumerate() {
                let mv = m[(local, l)];
                if mv != C64::new(0.0, 0.0) {
                    acc += mv * v[base + off];
                }
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Dense `m ⊗ I_rest` on the whole register. Intended for small layouts.
    pub fn embed(&self, factors: &[usize], m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = C64::new(1.0, 0.0);
            out.set_column(j, &self.apply_local(factors, m, &e)?);
        }
        Ok(out)
    }
}

/// A discrete Hermitian operator `A` whose eigen-decomposition drives
/// `exp(i α A ⊗ p p̃)`.
pub trait Generator {
    /// Splits `v` into eigencomponents `(λ, P_λ v)` with `Σ P_λ v = v`.
    fn spectral_split(&self, layout: &RegisterLayout, v: &DVector<C64>) -> Result<Vec<(f64, DVector<C64>)>>;
}

pub fn check_hermitian(m: &DMatrix<C64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Input("operator is not square".into()));
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    if worst > HERMITIAN_TOL {
        return Err(Error::Input(format!("operator is not Hermitian (max deviation {worst:e})")));
    }
    Ok(())
}

fn same_eigenvalue(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0)
}

/// A dense Hermitian matrix on a subset of register factors.
#[derive(Debug, Clone)]
pub struct DenseHermitian {
    factors: Vec<usize>,
    projectors: Vec<(f64, DMatrix<C64>)>,
}

impl DenseHermitian {
    pub fn new(matrix: DMatrix<C64>, factors: Vec<usize>) -> Result<Self> {
        check_hermitian(&matrix)?;
        let eig = matrix.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut projectors: Vec<(f64, DMatrix<C64>)> = Vec::new();
        for i in order {
            let lambda = eig.eigenvalues[i];
            let u = eig.eigenvectors.column(i);
            let p = &u * u.adjoint();
            match projectors.last_mut() {
                Some((l, acc)) if same_eigenvalue(*l, lambda) => *acc += p,
                _ => projectors.push((lambda, p)),
            }
        }
        Ok(Self { factors, projectors })
    }

    pub fn from_real(matrix: &DMatrix<f64>, factors: Vec<usize>) -> Result<Self> {
        Self::new(matrix.map(|x| C64::new(x, 0.0)), factors)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.projectors.iter().map(|p| p.0).collect()
    }
}

impl Generator for DenseHermitian {
    fn spectral_split(&self, layout: &RegisterLayout, v: &DVector<C64>) -> Result<Vec<(f64, DVector<C64>)>> {
        self.projectors
            .iter()
            .map(|(l, p)| Ok((*l, layout.apply_local(&self.factors, p, v)?)))
            .collect()
    }
}

/// A generator diagonal in the full register basis.
#[derive(Debug, Clone)]
pub struct DiagonalGenerator {
    values: Vec<f64>,
}

impl DiagonalGenerator {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("diagonal generator has non-finite entries".into()));
        }
        Ok(Self { values })
    }
}

impl Generator for DiagonalGenerator {
    fn spectral_split(&self, layout: &RegisterLayout, v: &DVector<C64>) -> Result<Vec<(f64, DVector<C64>)>> {
        if self.values.len() != layout.dim() {
            return Err(Error::Input("diagonal generator does not match the register".into()));
        }
        let mut groups: Vec<(f64, DVector<C64>)> = Vec::new();
        for (i, &lambda) in self.values.iter().enumerate() {
            if v[i] == C64::new(0.0, 0.0) {
                continue;
            }
            let slot = match groups.iter().position(|(l, _)| same_eigenvalue(*l, lambda)) {
                Some(k) => k,
                None => {
                    groups.push((lambda, DVector::zeros(v.len())));
                    groups.len() - 1
                }
            };
            groups[slot].1[i] = v[i];
        }
        Ok(groups)
    }
}

type VectorMap = dyn Fn(&DVector<C64>) -> DVector<C64> + Send + Sync;

/// `R · P` for a reflection `R` (`R² = I`) and a diagonal projector `P`
/// commuting with it. Eigenvalues are `±1` inside `P` and `0` outside.
pub struct ReflectionGenerator {
    reflection: Box<VectorMap>,
    mask: Vec<bool>,
}

impl ReflectionGenerator {
    pub fn new(reflection: Box<VectorMap>, mask: Vec<bool>) -> Self {
        Self { reflection, mask }
    }
}

impl Generator for ReflectionGenerator {
    fn spectral_split(&self, layout: &RegisterLayout, v: &DVector<C64>) -> Result<Vec<(f64, DVector<C64>)>> {
        if self.mask.len() != layout.dim() {
            return Err(Error::Input("reflection mask does not match the register".into()));
        }
        let inside = DVector::from_iterator(v.len(), v.iter().zip(&self.mask).map(|(x, &m)| if m { *x } else { C64::new(0.0, 0.0) }));
        let outside = v - &inside;
        let r = (self.reflection)(&inside);
        Ok(vec![(1.0, (&inside + &r) * C64::new(0.5, 0.0)), (-1.0, (&inside - &r) * C64::new(0.5, 0.0)), (0.0, outside)])
    }
}

/// Homodyne post-selection on `[-w, w]²` in `(q, q̃)`; by default `w = ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneWindow {
    xi: f64,
    half_width: f64,
}

impl HomodyneWindow {
    pub fn new(xi: f64) -> Result<Self> {
        Self::with_half_width(xi, xi)
    }

    pub fn with_half_width(xi: f64, half_width: f64) -> Result<Self> {
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::Input(format!("window squeezing must be positive, got {xi}")));
        }
        if !(half_width > 0.0) {
            return Err(Error::Input(format!("window half-width must be positive, got {half_width}")));
        }
        Ok(Self { xi, half_width })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub amplitudes: DVector<C64>,
    pub gaussian: GaussianPair,
}

/// `Σ_b |v_b⟩ ⊗ |G_b⟩` with every `G_b` a sheared resource pair, optionally
/// restricted by a homodyne window.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchedHybridState {
    layout: RegisterLayout,
    xi: f64,
    branches: Vec<Branch>,
    window: Option<f64>,
}

impl BranchedHybridState {
    /// `|v⟩ ⊗ |Φ_R(ξ)⟩`.
    pub fn new(layout: RegisterLayout, xi: f64, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::Input(format!(
                "amplitude vector has length {} but the register has dimension {}",
                amplitudes.len(),
                layout.dim()
            )));
        }
        let gaussian = GaussianPair::squeezed(xi)?;
        Ok(Self { layout, xi, branches: vec![Branch { amplitudes, gaussian }], window: None })
    }

    pub fn from_branches(layout: RegisterLayout, xi: f64, branches: Vec<(DVector<C64>, f64)>) -> Result<Self> {
        GaussianPair::squeezed(xi)?;
        let mut out = Self { layout, xi, branches: Vec::new(), window: None };
        for (v, shear) in branches {
            if v.len() != out.layout.dim() {
                return Err(Error::Input("branch vector does not match the register".into()));
            }
            out.branches.push(Branch { amplitudes: v, gaussian: GaussianPair::with_shear(xi, shear)? });
        }
        out.merge();
        Ok(out)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    /// Half-width of the applied homodyne window, if any.
    pub fn window(&self) -> Option<f64> {
        self.window
    }

    fn merge(&mut self) {
        let mut items = std::mem::take(&mut self.branches);
        for b in &mut items {
            let phase = b.gaussian.phase();
            if phase != C64::new(1.0, 0.0) {
                b.amplitudes *= phase;
                b.gaussian = b.gaussian.with_phase(C64::new(1.0, 0.0));
            }
        }
        items.sort_by(|a, b| a.gaussian.shear().total_cmp(&b.gaussian.shear()));
        let mut merged: Vec<Branch> = Vec::with_capacity(items.len());
        for b in items {
            match merged.last_mut() {
                Some(last) if same_shear(last.gaussian.shear(), b.gaussian.shear()) => last.amplitudes += b.amplitudes,
                _ => merged.push(b),
            }
        }
        merged.retain(|b| b.amplitudes.iter().any(|x| *x != C64::new(0.0, 0.0)));
        self.branches = merged;
    }

    /// `exp(i α A ⊗ p p̃)`.
    pub fn apply_coupled_evolution(&self, generator: &dyn Generator, alpha: f64) -> Result<Self> {
        if self.window.is_some() {
            return Err(Error::Input("cannot evolve a window-projected state".into()));
        }
        if alpha == 0.0 {
            return Ok(self.clone());
        }
        let mut branches = Vec::new();
        for b in &self.branches {
            let scale = b.amplitudes.norm();
            for (lambda, comp) in generator.spectral_split(&self.layout, &b.amplitudes)? {
                if comp.norm() <= 1e-15 * scale {
                    continue;
                }
                branches.push(Branch { amplitudes: comp, gaussian: b.gaussian.sheared(alpha * lambda) });
            }
        }
        let mut out = Self { branches, ..self.clone() };
        out.merge();
        Ok(out)
    }

    /// Applies a discrete operator on `factors` to every branch.
    pub fn apply_discrete(&self, factors: &[usize], m: &DMatrix<C64>) -> Result<Self> {
        let mut out = self.clone();
        for b in &mut out.branches {
            b.amplitudes = self.layout.apply_local(factors, m, &b.amplitudes)?;
        }
        out.merge();
        Ok(out)
    }

    /// Applies an arbitrary linear map on the full discrete register.
    pub fn map_discrete<F: Fn(&DVector<C64>) -> DVector<C64>>(&self, f: F) -> Self {
        let mut out = self.clone();
        for b in &mut out.branches {
            b.amplitudes = f(&b.amplitudes);
        }
        out.merge();
        out
    }

    /// `⟨G_a|Π|G_b⟩` for all branch pairs.
    pub fn mode_gram(&self) -> DMatrix<C64> {
        let n = self.branches.len();
        let w = self.window.unwrap_or(f64::INFINITY);
        let mut g = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = GaussianPair::window_overlap(&self.branches[a].gaussian, &self.branches[b].gaussian, w);
                g[(a, b)] = v;
                g[(b, a)] = v.conj();
            }
        }
        g
    }

    fn quadratic_form(&self, left: &[DVector<C64>], right: &[DVector<C64>]) -> C64 {
        match self.window {
            Some(w) if self.branches.len() > PAIRWISE_BRANCH_LIMIT => self.node_quadratic_form(left, right, w),
            _ => {
                let g = self.mode_gram();
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..left.len() {
                    for b in 0..right.len() {
                        if g[(a, b)] != C64::new(0.0, 0.0) {
                            acc += left[a].dotc(&right[b]) * g[(a, b)];
                        }
                    }
                }
                acc
            }
        }
    }

    fn node_quadratic_form(&self, left: &[DVector<C64>], right: &[DVector<C64>], w: f64) -> C64 {
        let (x, wts) = quadrature::gauss_legendre(WINDOW_NODES);
        let dim = self.layout.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..x.len() {
            for j in 0..x.len() {
                let (q, qt) = (w * x[i], w * x[j]);
                let mut l = DVector::<C64>::zeros(dim);
                let mut r = DVector::<C64>::zeros(dim);
                for (k, b) in self.branches.iter().enumerate() {
                    let psi = b.gaussian.wavefunction(q, qt);
                    l.axpy(psi, &left[k], C64::new(1.0, 0.0));
                    r.axpy(psi, &right[k], C64::new(1.0, 0.0));
                }
                acc += l.dotc(&r) * (wts[i] * wts[j] * w * w);
            }
        }
        acc
    }

    /// Squared norm, including the window if one was applied.
    pub fn norm_sqr(&self) -> f64 {
        let v: Vec<DVector<C64>> = self.branches.iter().map(|b| b.amplitudes.clone()).collect();
        self.quadratic_form(&v, &v).re
    }

    /// `⟨ψ|O ⊗ I_modes|ψ⟩` for a Hermitian `O` on `factors`; unnormalized.
    pub fn discrete_expectation(&self, factors: &[usize], observable: &DMatrix<C64>) -> Result<f64> {
        check_hermitian(observable)?;
        let left: Vec<DVector<C64>> = self.branches.iter().map(|b| b.amplitudes.clone()).collect();
        let right = self
            .branches
            .iter()
            .map(|b| self.layout.apply_local(factors, observable, &b.amplitudes))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.quadratic_form(&left, &right).re)
    }

    /// `⟨ψ|O ⊗ I_modes|ψ⟩` for an operator on the full register given as a map.
    pub fn expectation_with<F: Fn(&DVector<C64>) -> DVector<C64>>(&self, observable: F) -> C64 {
        let left: Vec<DVector<C64>> = self.branches.iter().map(|b| b.amplitudes.clone()).collect();
        let right: Vec<DVector<C64>> = self.branches.iter().map(|b| observable(&b.amplitudes)).collect();
        self.quadratic_form(&left, &right)
    }

    /// `⟨self|Π|other⟩` where `Π` is the tighter of the two windows.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.layout != other.layout || self.xi != other.xi {
            return Err(Error::Input("states live on different spaces".into()));
        }
        let w = match (self.window, other.window) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => f64::INFINITY,
        };
        let mut acc = C64::new(0.0, 0.0);
        for a in &self.branches {
            for b in &other.branches {
                let d = a.amplitudes.dotc(&b.amplitudes);
                if d != C64::new(0.0, 0.0) {
                    acc += d * GaussianPair::window_overlap(&a.gaussian, &b.gaussian, w);
                }
            }
        }
        Ok(acc)
    }

    /// Unnormalized `Π_w |ψ⟩` together with `‖Π_w ψ‖²`.
    pub fn window_project(&self, window: &HomodyneWindow) -> Result<(Self, f64)> {
        if window.xi() != self.xi {
            return Err(Error::Input("window squeezing does not match the state".into()));
        }
        let w = match self.window {
            Some(old) => old.min(window.half_width()),
            None => window.half_width(),
        };
        let mut out = self.clone();
        out.window = if w.is_infinite() { None } else { Some(w) };
        let p = out.norm_sqr();
        Ok((out, p))
    }

    /// Discrete amplitude vector of `⟨q, q̃|ψ⟩`.
    pub fn wavefunction(&self, q: f64, q_tilde: f64) -> DVector<C64> {
        let mut out = DVector::zeros(self.layout.dim());
        if let Some(w) = self.window {
            if q.abs() > w || q_tilde.abs() > w {
                return out;
            }
        }
        for b in &self.branches {
            out.axpy(b.gaussian.wavefunction(q, q_tilde), &b.amplitudes, C64::new(1.0, 0.0));
        }
        out
    }

    /// Multiplies every amplitude by `c`.
    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for b in &mut out.branches {
            b.amplitudes *= c;
        }
        out
    }

    /// `(⟨c| ⊗ I)|ψ⟩` for a covector on one factor; the factor is removed
    /// from the layout.
    pub fn contract(&self, name: &str, c: &DVector<C64>) -> Result<Self> {
        let f = self.layout.factor(name)?;
        let fd = self.layout.dims[f];
        if c.len() != fd {
            return Err(Error::Input(format!("covector length {} does not match factor `{name}`", c.len())));
        }
        if self.layout.dims.len() == 1 {
            return Err(Error::Input("cannot contract the only register factor".into()));
        }
        let stride = self.layout.stride(f);
        let mut names = self.layout.names.clone();
        let mut dims = self.layout.dims.clone();
        names.remove(f);
        dims.remove(f);
        let layout = RegisterLayout { names, dims };
        let n = layout.dim();
        let mut out = Self { layout, branches: Vec::with_capacity(self.branches.len()), ..self.clone() };
        for b in &self.branches {
            let mut v = DVector::zeros(n);
            for r in 0..n {
                let (hi, lo) = (r / stride, r % stride);
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..fd {
                    acc += c[k].conj() * b.amplitudes[(hi * fd + k) * stride + lo];
                }
                v[r] = acc;
            }
            out.branches.push(Branch { amplitudes: v, gaussian: b.gaussian });
        }
        out.merge();
        Ok(out)
    }

    /// `|ψ⟩ ⊗ |a⟩` with a new factor appended after the existing ones, or
    /// prepended when `front` is set.
    pub fn extend(&self, name: &str, a: &DVector<C64>, front: bool) -> Result<Self> {
        let mut factors: Vec<(&str, usize)> = self.layout.names.iter().map(|s| s.as_str()).zip(self.layout.dims.iter().copied()).collect();
        if front {
            factors.insert(0, (name, a.len()));
        } else {
            factors.push((name, a.len()));
        }
        let layout = RegisterLayout::new(&factors)?;
        let mut out = Self { layout, branches: Vec::with_capacity(self.branches.len()), ..self.clone() };
        for b in &self.branches {
            let v = if front { a.kronecker(&b.amplitudes) } else { b.amplitudes.kronecker(a) };
            out.branches.push(Branch { amplitudes: v, gaussian: b.gaussian });
        }
        Ok(out)
    }

    /// Sum of two states on the same register, neither windowed.
    pub fn superpose(&self, other: &Self) -> Result<Self> {
        if self.layout != other.layout || self.xi != other.xi || self.window != other.window {
            return Err(Error::Input("cannot superpose states on different spaces".into()));
        }
        let mut out = self.clone();
        out.branches.extend(other.branches.iter().cloned());
        out.merge();
        Ok(out)
    }
}

fn same_shear(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}
