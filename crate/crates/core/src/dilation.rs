//! Embedding of `K` into `K̂ = diag(K, I)`, its one-sparse Hermitian dilation
//! `H`, the even-integer quantization `H̃` and the split of `H̃` into
//! reflections (one-sparse matrices with eigenvalues ±1).
//!
//! The dilated space is indexed by pairs `(x, y)` with `x, y ∈ [0, 2N)`,
//! flattened row-major as `x * 2N + y`. `H` maps row `(x, y)` to column
//! `(y, x)` with value `⟨x|K̂|y⟩`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Default cap on `max |H̃ entry|`.
pub const DEFAULT_QUANTIZATION_CAP: i64 = 1_000_000;

/// `K̂ = diag(K, I)` after padding `K` up to a power-of-two size.
#[derive(Debug, Clone, PartialEq)]
pub struct DilatedMatrix {
    khat: DMatrix<f64>,
    original_n: usize,
    padded_n: usize,
}

impl DilatedMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.khat
    }

    /// `N` after padding; `K̂` has size `2N`.
    pub fn n(&self) -> usize {
        self.padded_n
    }

    pub fn original_n(&self) -> usize {
        self.original_n
    }

    pub fn padding(&self) -> usize {
        self.padded_n - self.original_n
    }

    pub fn dim(&self) -> usize {
        2 * self.padded_n
    }

    /// Magnitude of the largest matrix element.
    pub fn max_element_norm(&self) -> f64 {
        self.khat.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        crate::gpr::symmetric_eigenvalues(&self.khat)
    }

    /// Largest eigenvalue magnitude.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Builds a dilated matrix from an explicit `2N x 2N` symmetric matrix,
    /// e.g. the dequantized `ζ H̃` reassembled into matrix form.
    pub fn from_full(khat: DMatrix<f64>) -> Result<Self> {
        if !khat.is_square() || khat.nrows() % 2 != 0 || khat.nrows() == 0 {
            return Err(Error::Input(format!("dilated matrix must be 2N x 2N, got {}x{}", khat.nrows(), khat.ncols())));
        }
        let n = khat.nrows() / 2;
        Ok(Self { khat, original_n: n, padded_n: n })
    }
}

/// Pads `K` to the next power of two with identity rows and columns and
/// embeds it as `diag(K, I)`.
pub fn embed_khat(k: &DMatrix<f64>) -> Result<DilatedMatrix> {
    if !k.is_square() || k.nrows() == 0 {
        return Err(Error::Input(format!("K must be non-empty and square, got {}x{}", k.nrows(), k.ncols())));
    }
    let n = k.nrows();
    let padded = n.next_power_of_two();
    let mut khat = DMatrix::identity(2 * padded, 2 * padded);
    khat.view_mut((0, 0), (n, n)).copy_from(k);
    Ok(DilatedMatrix { khat, original_n: n, padded_n: padded })
}

/// A matrix with at most one nonzero per row, stored as `row -> (col, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneSparseMatrix<T> {
    rows: Vec<Option<(usize, T)>>,
}

impl<T: Copy + PartialEq> OneSparseMatrix<T> {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get_row(&self, row: usize) -> Option<(usize, T)> {
        self.rows[row]
    }

    pub fn entry(&self, row: usize, col: usize) -> Option<T> {
        match self.rows[row] {
            Some((c, v)) if c == col => Some(v),
            _ => None,
        }
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.rows.iter().enumerate().filter_map(|(r, e)| e.map(|(c, v)| (r, c, v)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.nonzeros().all(|(r, c, v)| self.entry(c, r) == Some(v))
    }
}

impl OneSparseMatrix<f64> {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.nonzeros() {
            m[(r, c)] = v;
        }
        m
    }
}

impl OneSparseMatrix<i64> {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.nonzeros() {
            m[(r, c)] = v as f64;
        }
        m
    }

    pub fn max_abs(&self) -> i64 {
        self.nonzeros().map(|(_, _, v)| v.abs()).max().unwrap_or(0)
    }

    /// Builds an integer one-sparse matrix from explicit entries, checking
    /// that rows are unique.
    pub fn from_entries(dim: usize, entries: &[(usize, usize, i64)]) -> Result<Self> {
        let mut rows = vec![None; dim];
        for &(r, c, v) in entries {
            if r >= dim || c >= dim {
                return Err(Error::Input(format!("entry ({r}, {c}) outside dimension {dim}")));
            }
            if v == 0 {
                continue;
            }
            if rows[r].is_some() {
                return Err(Error::Input(format!("row {r} has more than one nonzero")));
            }
            rows[r] = Some((c, v));
        }
        Ok(Self { rows })
    }
}

/// `H = Σ_{x,y} ⟨x|K̂|y⟩ |x⟩⟨y| ⊗ |y⟩⟨x|`.
pub fn hermitian_dilation(khat: &DilatedMatrix) -> OneSparseMatrix<f64> {
    let d = khat.dim();
    let m = khat.matrix();
    let rows = (0..d * d)
        .map(|row| {
            let (x, y) = (row / d, row % d);
            let v = m[(x, y)];
            (v != 0.0).then_some((y * d + x, v))
        })
        .collect();
    OneSparseMatrix { rows }
}

/// Replaces every nonzero `h` by `2 floor(h / (2 zeta))`.
pub fn quantize(h: &OneSparseMatrix<f64>, zeta: f64, cap: i64) -> Result<OneSparseMatrix<i64>> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::Input(format!("quantization scale must be positive, got {zeta}")));
    }
    let mut max_entry = 0i64;
    let mut rows = Vec::with_capacity(h.dim());
    for e in &h.rows {
        let q = match *e {
            Some((c, v)) => {
                let half = (v / (2.0 * zeta)).floor();
                if !(half.abs() * 2.0 <= cap as f64) {
                    return Err(Error::QuantizationOverflow {
                        max_entry: if half.is_finite() { (2.0 * half.abs()) as i64 } else { i64::MAX },
                        cap,
                    });
                }
                let m = 2 * half as i64;
                max_entry = max_entry.max(m.abs());
                (m != 0).then_some((c, m))
            }
            None => None,
        };
        rows.push(q);
    }
    debug_assert!(max_entry <= cap);
    Ok(OneSparseMatrix { rows })
}

/// A symmetric signed permutation matrix: exactly one ±1 per row, squaring
/// to the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneSparseReflection {
    entries: Vec<(usize, i8)>,
}

impl OneSparseReflection {
    pub fn new(entries: Vec<(usize, i8)>) -> Result<Self> {
        let r = Self { entries };
        r.validate()?;
        Ok(r)
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: (0..dim).map(|i| (i, 1)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, i8)] {
        &self.entries
    }

    pub fn row(&self, row: usize) -> (usize, i8) {
        self.entries[row]
    }

    /// Checks symmetry and `R² = I`, exactly.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        for (r, &(c, s)) in self.entries.iter().enumerate() {
            if c >= d || !(s == 1 || s == -1) {
                return Err(Error::InvalidDecomposition(format!("row {r}: entry ({c}, {s}) is not a ±1 in range")));
            }
            let (back, s2) = self.entries[c];
            if back != r || s2 != s {
                return Err(Error::InvalidDecomposition(format!("row {r}: reflection is not symmetric")));
            }
        }
        Ok(())
    }

    /// `R v` for a vector of length `dim`.
    pub fn apply<T>(&self, v: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Neg<Output = T>,
    {
        self.entries.iter().map(|&(c, s)| if s > 0 { v[c] } else { -v[c] }).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (r, &(c, s)) in self.entries.iter().enumerate() {
            m[(r, c)] = s as f64;
        }
        m
    }
}

/// `H̃ = Σ_j H_j` with every `H_j` a reflection.
#[derive(Debug, Clone, PartialEq)]
pub struct OneSparseDecomposition {
    pub zeta: f64,
    pub htilde: OneSparseMatrix<i64>,
    pub terms: Vec<OneSparseReflection>,
    /// Number of generating indices, `max |H̃ entry| / 2`; each emits a pair of terms.
    pub j_max: usize,
}

/// Splits an even-integer one-sparse symmetric matrix into reflections.
///
/// For each `j = 1..=max|m|/2` a pair `(H_j+, H_j-)` is emitted. Both carry
/// `sign(m)` at every position with `2j <= |m|`; all other rows get `+1`
/// (resp. `-1`) on the diagonal so the padding cancels in the sum. The zero
/// matrix yields an empty list.
pub fn decompose_one_sparse(htilde: &OneSparseMatrix<i64>) -> Result<Vec<OneSparseReflection>> {
    if !htilde.is_symmetric() {
        return Err(Error::InvalidDecomposition("H̃ is not symmetric".into()));
    }
    if let Some((r, _, v)) = htilde.nonzeros().find(|(_, _, v)| v % 2 != 0) {
        return Err(Error::InvalidDecomposition(format!("row {r} carries odd entry {v}")));
    }
    let d = htilde.dim();
    let j_max = (htilde.max_abs() / 2) as usize;
    let mut terms = Vec::with_capacity(2 * j_max);
    for j in 1..=j_max as i64 {
        let mut plus = Vec::with_capacity(d);
        let mut minus = Vec::with_capacity(d);
        for row in 0..d {
            match htilde.get_row(row) {
                Some((c, m)) if m.abs() >= 2 * j => {
                    let s = m.signum() as i8;
                    plus.push((c, s));
                    minus.push((c, s));
                }
                _ => {
                    plus.push((row, 1));
                    minus.push((row, -1));
                }
            }
        }
        terms.push(OneSparseReflection { entries: plus });
        terms.push(OneSparseReflection { entries: minus });
    }
    Ok(terms)
}

impl OneSparseDecomposition {
    /// Dilates, quantizes and decomposes `K̂` in one go.
    pub fn from_khat(khat: &DilatedMatrix, zeta: f64, cap: i64) -> Result<Self> {
        let h = hermitian_dilation(khat);
        let htilde = quantize(&h, zeta, cap)?;
        let terms = decompose_one_sparse(&htilde)?;
        let j_max = (htilde.max_abs() / 2) as usize;
        Ok(Self { zeta, htilde, terms, j_max })
    }

    pub fn dim(&self) -> usize {
        self.htilde.dim()
    }

    /// `sqrt(dim)`, i.e. `2N`.
    pub fn pair_dim(&self) -> usize {
        (self.dim() as f64).sqrt().round() as usize
    }

    /// `Σ_j H_j - H̃` in exact integer arithmetic; all zeros for a valid split.
    pub fn reconstruction_residual(&self) -> Vec<(usize, usize, i64)> {
        let d = self.dim();
        let mut acc: Vec<std::collections::BTreeMap<usize, i64>> = vec![Default::default(); d];
        for t in &self.terms {
            for (r, &(c, s)) in t.entries.iter().enumerate() {
                *acc[r].entry(c).or_insert(0) += s as i64;
            }
        }
        for (r, c, v) in self.htilde.nonzeros() {
            *acc[r].entry(c).or_insert(0) -= v;
        }
        acc.into_iter()
            .enumerate()
            .flat_map(|(r, m)| m.into_iter().filter(|&(_, v)| v != 0).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    /// `max |H - ζ H̃|` over all entries.
    pub fn max_quantization_error(&self, h: &OneSparseMatrix<f64>) -> f64 {
        (0..self.dim())
            .map(|r| {
                let exact = h.get_row(r);
                let approx = self.htilde.get_row(r);
                match (exact, approx) {
                    (Some((c1, v)), Some((c2, m))) if c1 == c2 => (v - self.zeta * m as f64).abs(),
                    (Some((_, v)), Some((_, m))) => v.abs().max((self.zeta * m as f64).abs()),
                    (Some((_, v)), None) => v.abs(),
                    (None, Some((_, m))) => (self.zeta * m as f64).abs(),
                    (None, None) => 0.0,
                }
            })
            .fold(0.0, f64::max)
    }

    /// The matrix `K̂_ζ` with entries `ζ m_xy` that the decomposition encodes.
    pub fn dequantized_khat(&self) -> DilatedMatrix {
        let d = self.pair_dim();
        let mut m = DMatrix::zeros(d, d);
        for (row, _, v) in self.htilde.nonzeros() {
            m[(row / d, row % d)] = self.zeta * v as f64;
        }
        DilatedMatrix { khat: m, original_n: d / 2, padded_n: d / 2 }
    }

    /// Debug dump: a header with `zeta`, `j_max` and the term count, then one
    /// `j sign row col` line per nonzero of every term (`j` is 1-based).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# zeta={} j_max={} terms={} dim={}", self.zeta, self.j_max, self.terms.len(), self.dim());
        for (j, t) in self.terms.iter().enumerate() {
            for (row, &(col, s)) in t.entries.iter().enumerate() {
                let _ = writeln!(out, "{} {} {} {}", j + 1, if s > 0 { "+1" } else { "-1" }, row, col);
            }
        }
        out
    }
}

/// `Q = Σ_j |j⟩⟨j| ⊗ H_j`, the Hermitian unitary oracle over the index register.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleQ {
    terms: Vec<OneSparseReflection>,
}

pub fn oracle_q(terms: &[OneSparseReflection]) -> Result<OracleQ> {
    if terms.is_empty() {
        return Err(Error::InvalidDecomposition("oracle needs at least one term".into()));
    }
    let d = terms[0].dim();
    for (j, t) in terms.iter().enumerate() {
        if t.dim() != d {
            return Err(Error::InvalidDecomposition(format!("term {j} has dimension {} != {d}", t.dim())));
        }
        t.validate()?;
    }
    Ok(OracleQ { terms: terms.to_vec() })
}

impl OracleQ {
    pub fn terms(&self) -> &[OneSparseReflection] {
        &self.terms
    }

    /// Size of the index register.
    pub fn index_dim(&self) -> usize {
        self.terms.len()
    }

    /// Size of the space each `H_j` acts on.
    pub fn system_dim(&self) -> usize {
        self.terms[0].dim()
    }

    /// Dense `Q`, index register outermost. Meant for small test instances.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (t, d) = (self.index_dim(), self.system_dim());
        let mut q = DMatrix::zeros(t * d, t * d);
        for (j, h) in self.terms.iter().enumerate() {
            q.view_mut((j * d, j * d), (d, d)).copy_from(&h.to_dense());
        }
        q
    }
}

/// Eigenvalues of a dense symmetric matrix, ascending; used by diagnostics.
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}
