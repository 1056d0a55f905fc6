//! The oracle path: fractional queries, the permutation walk over the index
//! register and the exponential-swap step built from them.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::encoding::{DATA, FLAG};
use crate::dilation::{oracle_q, OneSparseDecomposition, OneSparseReflection, OracleQ};
use crate::error::{Error, Result};
use crate::hybrid::{BranchedHybridState, DiagonalGenerator, MixedHybridState};

type C64 = Complex64;

pub const INDEX: &str = "index";
pub const SWAP: &str = "swap";
pub const ANCILLA: &str = "ancilla";

/// Default number of consecutive post-selection failures tolerated.
pub const DEFAULT_RETRY_CAP: usize = 1000;

/// `M` Trotter steps of total angle `γ`; every fractional query uses
/// `δ = sign · γ ζ / (π M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrotterSchedule {
    m: usize,
    gamma: f64,
    zeta: f64,
    sign: f64,
}

impl TrotterSchedule {
    pub fn new(m: usize, gamma: f64, zeta: f64) -> Result<Self> {
        Self::with_sign(m, gamma, zeta, 1.0)
    }

    pub fn with_sign(m: usize, gamma: f64, zeta: f64, sign: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::Input("step count M must be at least 1".into()));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Input(format!("gamma must be non-negative, got {gamma}")));
        }
        if !(zeta > 0.0 && zeta.is_finite()) {
            return Err(Error::Input(format!("zeta must be positive, got {zeta}")));
        }
        if sign != 1.0 && sign != -1.0 {
            return Err(Error::Input(format!("sign must be +1 or -1, got {sign}")));
        }
        Ok(Self { m, gamma, zeta, sign })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn delta(&self) -> f64 {
        self.sign * self.gamma * self.zeta / (PI * self.m as f64)
    }

    /// `π δ / 2`, the angle each reflection receives per step.
    pub fn step_angle(&self) -> f64 {
        PI * self.delta() / 2.0
    }
}

/// How the ancilla post-selection of a fractional query is resolved.
pub enum QueryMode<'a> {
    /// Keep the conditional state and report its probability.
    Exact,
    /// Draw the outcome; on failure the `|−⟩` branch is returned.
    Sampled(&'a mut ChaCha8Rng),
}

#[derive(Debug, Clone)]
pub struct QueryOutcome {
    /// Unnormalized post-measurement state.
    pub state: BranchedHybridState,
    /// Probability of the `|+⟩` outcome given the input.
    pub probability: f64,
    pub success: bool,
}

fn controlled_q(state: &BranchedHybridState, q: &OracleQ, system: &[&str]) -> Result<BranchedHybridState> {
    let layout = state.layout().clone();
    let anc = layout.factor(ANCILLA)?;
    let index = match layout.factor(INDEX) {
        Ok(f) => Some(f),
        Err(_) if q.index_dim() == 1 => None,
        Err(e) => return Err(e),
    };
    if let Some(f) = index {
        if layout.factor_dim(f) != q.index_dim() {
            return Err(Error::Input("index register does not match the oracle".into()));
        }
    }
    let sys: Vec<usize> = system.iter().map(|s| layout.factor(s)).collect::<Result<_>>()?;
    let sys_dims: Vec<usize> = sys.iter().map(|&f| layout.factor_dim(f)).collect();
    if sys_dims.iter().product::<usize>() != q.system_dim() {
        return Err(Error::Input("system register does not match the oracle".into()));
    }
    let n = layout.dim();
    let mut source = vec![(0usize, 1i8); n];
    for i in 0..n {
        let mut digits = layout.digits(i);
        if digits[anc] == 0 {
            source[i] = (i, 1);
            continue;
        }
        let j = index.map_or(0, |f| digits[f]);
        let local = sys.iter().zip(&sys_dims).fold(0, |acc, (&f, &d)| acc * d + digits[f]);
        let (col, sign) = q.terms()[j].row(local);
        let mut rest = col;
        for k in (0..sys.len()).rev() {
            digits[sys[k]] = rest % sys_dims[k];
            rest /= sys_dims[k];
        }
        source[i] = (layout.index(&digits), sign);
    }
    Ok(state.map_discrete(|v| {
        DVector::from_iterator(n, source.iter().map(|&(c, s)| if s > 0 { v[c] } else { -v[c] }))
    }))
}

/// One fractional query `Q^{δ p p̃ N̂}` via an ancilla in `|+⟩`: controlled-`Q`,
/// a Hadamard on the ancilla, `exp(iπδ/2 · p p̃ N̂ Z_A)` and a projection of
/// the ancilla onto `|+⟩`. On success the output is
/// `exp(iπδ/2 · Q p p̃ N̂)|ψ⟩ / √2`.
///
/// The register must contain `ancilla` and `flag` factors, an `index`
/// factor unless the oracle has a single term, and the `system` factors the
/// reflections act on (outermost first).
pub fn fractional_query(
    state: &BranchedHybridState,
    q: &OracleQ,
    system: &[&str],
    delta: f64,
    mode: QueryMode<'_>,
) -> Result<QueryOutcome> {
    let layout = state.layout().clone();
    let anc = layout.factor(ANCILLA)?;
    let flag = layout.factor(FLAG)?;
    let before = state.norm_sqr();
    let s = FRAC_1_SQRT_2;
    let c = |x: f64| C64::new(x, 0.0);
    let hadamard = DMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)]);

    let rotated = controlled_q(state, q, system)?.apply_discrete(&[anc], &hadamard)?;
    let values = (0..layout.dim())
        .map(|i| {
            let d = layout.digits(i);
            let z = if d[anc] == 0 { 1.0 } else { -1.0 };
            if d[flag] == 1 {
                z
            } else {
                0.0
            }
        })
        .collect();
    let evolved = rotated.apply_coupled_evolution(&DiagonalGenerator::new(values)?, PI * delta / 2.0)?;
    let plus = DMatrix::from_element(2, 2, c(0.5));
    let minus = DMatrix::from_row_slice(2, 2, &[c(0.5), c(-0.5), c(-0.5), c(0.5)]);
    let accepted = evolved.apply_discrete(&[anc], &plus)?;
    let probability = if before > 0.0 { accepted.norm_sqr() / before } else { 0.0 };
    match mode {
        QueryMode::Exact => Ok(QueryOutcome { state: accepted, probability, success: true }),
        QueryMode::Sampled(rng) => {
            if rng.random::<f64>() < probability {
                Ok(QueryOutcome { state: accepted, probability, success: true })
            } else {
                Ok(QueryOutcome { state: evolved.apply_discrete(&[anc], &minus)?, probability, success: false })
            }
        }
    }
}

/// Repeats a sampled fractional query on fresh copies of `state` until it
/// succeeds; returns the accepted state and the number of attempts.
pub fn fractional_query_with_retries(
    state: &BranchedHybridState,
    q: &OracleQ,
    system: &[&str],
    delta: f64,
    rng: &mut ChaCha8Rng,
    cap: usize,
) -> Result<(BranchedHybridState, usize)> {
    for attempt in 1..=cap {
        let out = fractional_query(state, q, system, delta, QueryMode::Sampled(rng))?;
        if out.success {
            return Ok((out.state, attempt));
        }
    }
    Err(Error::PostSelection { attempts: cap })
}

/// Indices of the terms in the order the walk applies them: the shift
/// `j -> j + 1` precedes every query, so starting from index 0 the walk
/// visits `1, 2, …, T−1, 0`.
pub fn walk_order(terms: usize) -> Vec<usize> {
    (1..terms).chain(std::iter::once(0)).take(terms).collect()
}

fn cyclic_shift(t: usize) -> DMatrix<C64> {
    let mut p = DMatrix::zeros(t, t);
    for j in 0..t {
        p[((j + 1) % t, j)] = C64::new(1.0, 0.0);
    }
    p
}

/// `(Q^{δ p p̃ N̂} (P ⊗ I))^T` with `P` the cyclic shift of the index register,
/// which must start in `|0⟩`. Queries are resolved in exact mode; the
/// returned probability is the product of the per-query acceptances.
pub fn permutation_walk(
    state: &BranchedHybridState,
    decomposition: &OneSparseDecomposition,
    system: &[&str],
    delta: f64,
) -> Result<(BranchedHybridState, f64)> {
    if decomposition.terms.is_empty() {
        return Ok((state.clone(), 1.0));
    }
    let q = oracle_q(&decomposition.terms)?;
    let t = q.index_dim();
    let index = state.layout().factor(INDEX)?;
    let shift = cyclic_shift(t);
    let mut current = state.clone();
    let mut probability = 1.0;
    for _ in 0..t {
        current = current.apply_discrete(&[index], &shift)?;
        let out = fractional_query(&current, &q, system, delta, QueryMode::Exact)?;
        probability *= out.probability;
        current = out.state;
    }
    Ok((current, probability))
}

/// The uniform state `|s⟩` over `dim` basis states.
pub fn symmetric_state(dim: usize) -> DVector<C64> {
    DVector::from_element(dim, C64::new(1.0 / (dim as f64).sqrt(), 0.0))
}

/// One exponential-swap step on a state over `[data, flag]`, simulated through
/// the full protocol: append `|0⟩_index ⊗ |s⟩_swap` and an ancilla in `|+⟩`,
/// run the permutation walk with accepted queries renormalized, and trace out
/// the swap register. The result approximates
/// `exp(i sign γ/(4MN) K̂ N̂ p p̃)` to second order in the step angle.
pub fn exp_swap_step(
    rho: &MixedHybridState,
    decomposition: &OneSparseDecomposition,
    schedule: &TrotterSchedule,
) -> Result<MixedHybridState> {
    let pair = decomposition.pair_dim();
    if rho.layout().names() != [DATA, FLAG] || rho.layout().factor_dim(0) != pair {
        return Err(Error::Input("exp-swap expects a [data, flag] register matching the decomposition".into()));
    }
    let t = decomposition.terms.len().max(1);
    let mut index0 = DVector::zeros(t);
    index0[0] = C64::new(1.0, 0.0);
    let plus = DVector::from_element(2, C64::new(FRAC_1_SQRT_2, 0.0));
    let mut components = Vec::new();
    for psi in rho.components() {
        let extended = psi
            .extend(SWAP, &symmetric_state(pair), true)?
            .extend(INDEX, &index0, true)?
            .extend(ANCILLA, &plus, false)?;
        let (walked, p) = permutation_walk(&extended, decomposition, &[SWAP, DATA], schedule.delta())?;
        let walked = if p > 0.0 { walked.scaled(C64::new(1.0 / p.sqrt(), 0.0)) } else { walked };
        let reduced = walked.contract(INDEX, &index0)?.contract(ANCILLA, &plus)?;
        for x in 0..pair {
            let mut e = DVector::zeros(pair);
            e[x] = C64::new(1.0, 0.0);
            components.push(reduced.contract(SWAP, &e)?);
        }
    }
    MixedHybridState::from_components(components)
}

/// Branches of a flag-1 data vector keyed by integer multiples of the step
/// angle: the shear of key `k` is `k · step_angle`.
pub type KeyedBranches = BTreeMap<i64, Vec<C64>>;

/// Fast form of one walk step restricted to the flag-1 sector: lifts a data
/// vector to `|s⟩ ⊗ v`, applies `exp(i a H_j p p̃)` for every term in walk
/// order and contracts the swap register with a covector.
#[derive(Debug, Clone)]
pub struct WalkKernel {
    order: Vec<OneSparseReflection>,
    pair: usize,
    step_angle: f64,
}

impl WalkKernel {
    pub fn new(decomposition: &OneSparseDecomposition, schedule: &TrotterSchedule) -> Self {
        let order = walk_order(decomposition.terms.len()).into_iter().map(|j| decomposition.terms[j].clone()).collect();
        Self { order, pair: decomposition.pair_dim(), step_angle: schedule.step_angle() }
    }

    pub fn pair_dim(&self) -> usize {
        self.pair
    }

    pub fn step_angle(&self) -> f64 {
        self.step_angle
    }

    /// `⟨c|_swap U₁ |s⟩_swap` applied to every branch.
    pub fn contract(&self, branches: &KeyedBranches, c: &[C64]) -> KeyedBranches {
        let d = self.pair;
        let lift = 1.0 / (d as f64).sqrt();
        let mut current: KeyedBranches = branches
            .iter()
            .map(|(&k, v)| {
                let mut u = Vec::with_capacity(d * d);
                for _ in 0..d {
                    u.extend(v.iter().map(|z| z * lift));
                }
                (k, u)
            })
            .collect();
        for term in &self.order {
            let mut next: KeyedBranches = BTreeMap::new();
            for (k, u) in current {
                let r = term.apply(&u);
                let mut plus = Vec::with_capacity(u.len());
                let mut minus = Vec::with_capacity(u.len());
                for (a, b) in u.iter().zip(&r) {
                    plus.push((a + b) * 0.5);
                    minus.push((a - b) * 0.5);
                }
                accumulate(&mut next, k + 1, plus);
                accumulate(&mut next, k - 1, minus);
            }
            current = next;
        }
        let mut out = BTreeMap::new();
        for (k, u) in current {
            let mut v = vec![C64::new(0.0, 0.0); d];
            for x in 0..d {
                let cx = c[x].conj();
                if cx == C64::new(0.0, 0.0) {
                    continue;
                }
                for y in 0..d {
                    v[y] += cx * u[x * d + y];
                }
            }
            if v.iter().any(|z| *z != C64::new(0.0, 0.0)) {
                out.insert(k, v);
            }
        }
        prune(&mut out);
        out
    }
}

fn accumulate(map: &mut KeyedBranches, key: i64, v: Vec<C64>) {
    match map.get_mut(&key) {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(v) {
                *a += b;
            }
        }
        None => {
            map.insert(key, v);
        }
    }
}

/// Drops branches whose norm is below `1e-14` of the largest one.
fn prune(map: &mut KeyedBranches) {
    let norm = |v: &Vec<C64>| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let top = map.values().map(norm).fold(0.0, f64::max);
    map.retain(|_, v| norm(v) > 1e-14 * top);
}
