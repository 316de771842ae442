//! Generalized Wick theorem for phase-twisted Gaussian expectation values
//!
//! ```text
//! ⟨Ψ_GS| e^{iΣ_j α_j n_j} c_{j1}^(†) … c_{jm}^(†) |Ψ_GS⟩
//! ```
//!
//! The phase-only expectation `A[α]` is a Pfaffian of the altered covariance
//! matrix Γ_F; every string expectation is `A[α]` times a signed sum over
//! pairings of two-point ratios read off the skew matrix G[α].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::{symplectic_form, CovarianceMatrix};
use crate::linalg::{
    block_contract_unchecked, condition_number, invert, miller_inverse, pfaffian_raw, to_complex,
    BlockContractionKind, CMatrix, RankOneUpdate, SkewMatrix, I, MILLER_SINGULAR_TOL,
};

/// Above this denominator condition number G[α] is declared singular.
pub const MAX_CONDITION: f64 = 1e12;
/// Below this |A[α]| a product of more than one pair is refused.
pub const MIN_A_MAGNITUDE: f64 = 1e-13;
/// Longest operator string supported.
pub const MAX_STRING_LEN: usize = 8;
/// |1 − e^{iα_j}| at or below this counts as an unphased mode.
pub const UNPHASED_TOL: f64 = 1e-12;

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Per-mode phases, wrapped into (−π, π].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    alpha: Vec<f64>,
}

impl PhaseVector {
    pub fn new(alpha: Vec<f64>) -> Self {
        Self { alpha: alpha.into_iter().map(wrap_phase).collect() }
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self { alpha: vec![0.0; n_modes] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    fn key(&self) -> Vec<u64> {
        // −0.0 and 0.0 give the same e^{iα}; normalize so they share a cache slot
        self.alpha.iter().map(|&a| if a == 0.0 { 0u64 } else { a.to_bits() }).collect()
    }
}

/// One ladder operator; `mode` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn create(mode: usize) -> Self {
        Self { mode, dagger: true }
    }

    pub fn annihilate(mode: usize) -> Self {
        Self { mode, dagger: false }
    }
}

/// Ordered product of ladder operators with an even number of factors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorString {
    factors: Vec<Ladder>,
}

impl OperatorString {
    pub fn new(factors: Vec<Ladder>) -> Result<Self> {
        if !factors.len().is_multiple_of(2) {
            return Err(Error::Parity(factors.len()));
        }
        if factors.len() > MAX_STRING_LEN {
            return Err(Error::Resource(format!(
                "operator strings are limited to {MAX_STRING_LEN} factors, got {}",
                factors.len()
            )));
        }
        Ok(Self { factors })
    }

    pub fn empty() -> Self {
        Self { factors: Vec::new() }
    }

    /// `c†_{d0} c†_{d1} … c_{a0} c_{a1} …`
    pub fn normal_ordered(daggers: &[usize], plains: &[usize]) -> Result<Self> {
        Self::new(
            daggers
                .iter()
                .map(|&m| Ladder::create(m))
                .chain(plains.iter().map(|&m| Ladder::annihilate(m)))
                .collect(),
        )
    }

    pub fn factors(&self) -> &[Ladder] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// The Hermitian adjoint: reversed order, daggers flipped.
    pub fn adjoint(&self) -> Self {
        Self {
            factors: self
                .factors
                .iter()
                .rev()
                .map(|l| Ladder { mode: l.mode, dagger: !l.dagger })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairKind {
    /// c_p† c_q
    DagPlain,
    /// c_p† c_q†
    DagDag,
    /// c_p c_q
    PlainPlain,
}

/// A perfect matching of string positions with the sign of the permutation
/// that brings the paired factors next to each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pub pairs: Vec<(usize, usize)>,
    pub sign: i8,
}

fn build_pairings(positions: &[usize]) -> Vec<Pairing> {
    if positions.is_empty() {
        return vec![Pairing { pairs: Vec::new(), sign: 1 }];
    }
    let mut out = Vec::new();
    let first = positions[0];
    for j in 1..positions.len() {
        let rest: Vec<usize> = positions[1..].iter().enumerate().filter(|&(k, _)| k + 1 != j).map(|(_, &p)| p).collect();
        let sign = if (j - 1) % 2 == 0 { 1 } else { -1 };
        for sub in build_pairings(&rest) {
            let mut pairs = Vec::with_capacity(positions.len() / 2);
            pairs.push((first, positions[j]));
            pairs.extend(sub.pairs);
            out.push(Pairing { pairs, sign: sign * sub.sign });
        }
    }
    out
}

/// All (len−1)!! pairings of `0..len`, cached per length.
pub fn enumerate_pairings(len: usize) -> Result<Arc<Vec<Pairing>>> {
    if !len.is_multiple_of(2) {
        return Err(Error::Parity(len));
    }
    if len > MAX_STRING_LEN {
        return Err(Error::Resource(format!("pairings are limited to strings of {MAX_STRING_LEN} factors")));
    }
    static CACHE: [OnceLock<Arc<Vec<Pairing>>>; MAX_STRING_LEN / 2 + 1] =
        [const { OnceLock::new() }; MAX_STRING_LEN / 2 + 1];
    Ok(CACHE[len / 2]
        .get_or_init(|| {
            let positions: Vec<usize> = (0..len).collect();
            Arc::new(build_pairings(&positions))
        })
        .clone())
}

fn sign_factor(n_modes: usize) -> f64 {
    let exponent = if n_modes.is_multiple_of(2) { n_modes / 2 } else { n_modes.div_ceil(2) };
    if exponent % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn phases(alpha: &PhaseVector) -> Vec<Complex64> {
    alpha.as_slice().iter().map(|&a| Complex64::from_polar(1.0, a)).collect()
}

fn check_lengths(gamma: &CovarianceMatrix, alpha: &PhaseVector) -> Result<()> {
    if gamma.n_modes() != alpha.len() {
        return Err(Error::Dimension(format!(
            "phase vector has {} entries for {} modes",
            alpha.len(),
            gamma.n_modes()
        )));
    }
    Ok(())
}

fn gamma_f_raw(gamma: &CovarianceMatrix, e: &[Complex64]) -> CMatrix {
    let n = gamma.n_modes();
    let s: Vec<Complex64> = e.iter().map(|&z| (ONE - z).sqrt()).collect();
    let g = gamma.matrix();
    let mut out = CMatrix::from_fn(2 * n, 2 * n, |i, j| s[i % n] * g[(i, j)] * s[j % n]);
    for j in 0..n {
        out[(j, n + j)] -= ONE + e[j];
        out[(n + j, j)] += ONE + e[j];
    }
    out
}

/// Γ_F = √(1−e^{iα}) Γ √(1−e^{iα}) − σ⊗diag(1+e^{iα}), principal root.
pub fn gamma_f(gamma: &CovarianceMatrix, alpha: &PhaseVector) -> Result<SkewMatrix> {
    check_lengths(gamma, alpha)?;
    SkewMatrix::new(gamma_f_raw(gamma, &phases(alpha)))
}

/// A[α] = ⟨e^{iΣα_j n_j}⟩.
pub fn a_coeff(gamma: &CovarianceMatrix, alpha: &PhaseVector) -> Result<Complex64> {
    check_lengths(gamma, alpha)?;
    Ok(a_from_gamma_f(gamma.n_modes(), &gamma_f_raw(gamma, &phases(alpha))))
}

fn a_from_gamma_f(n_modes: usize, gf: &CMatrix) -> Complex64 {
    pfaffian_raw(gf) * (sign_factor(n_modes) * 0.5f64.powi(n_modes as i32))
}

/// How an inverse was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversePath {
    RankOne,
    Direct,
}

fn singular(alpha: &PhaseVector, reason: String) -> Error {
    Error::SingularContraction { alpha: alpha.as_slice().to_vec(), reason }
}

/// G[α] = (Γ+Υ)·[1 + ½(1−e^{iα})(ΥΓ − 1)]⁻¹ through a chosen path.
pub fn g_matrix_with(gamma: &CovarianceMatrix, alpha: &PhaseVector, path: InversePath) -> Result<CMatrix> {
    check_lengths(gamma, alpha)?;
    let e = phases(alpha);
    match path {
        InversePath::Direct => g_direct(gamma, alpha, &e),
        InversePath::RankOne => g_rank_one(gamma, alpha, &e),
    }
}

/// G[α], using rank-1 assembly when every mode carries a nonzero phase and
/// the update chain stays well conditioned, direct inversion otherwise.
pub fn g_matrix(gamma: &CovarianceMatrix, alpha: &PhaseVector) -> Result<SkewMatrix> {
    check_lengths(gamma, alpha)?;
    let e = phases(alpha);
    let g = g_auto(gamma, alpha, &e)?;
    SkewMatrix::new(g)
}

fn g_auto(gamma: &CovarianceMatrix, alpha: &PhaseVector, e: &[Complex64]) -> Result<CMatrix> {
    let all_phased = e.iter().all(|&z| (ONE - z).norm() > UNPHASED_TOL);
    if all_phased {
        if let Ok(g) = g_rank_one(gamma, alpha, e) {
            return Ok(g);
        }
    }
    g_direct(gamma, alpha, e)
}

fn g_direct(gamma: &CovarianceMatrix, alpha: &PhaseVector, e: &[Complex64]) -> Result<CMatrix> {
    let n = gamma.n_modes();
    let ups = symplectic_form(n);
    let g = gamma.matrix();
    let shifted = to_complex(&(g + &ups));
    let upsilon_gamma_minus_one = to_complex(&(&ups * g - nalgebra::DMatrix::identity(2 * n, 2 * n)));
    let mut den = upsilon_gamma_minus_one;
    for i in 0..2 * n {
        let beta = (ONE - e[i % n]) * 0.5;
        for j in 0..2 * n {
            den[(i, j)] *= beta;
        }
        den[(i, i)] += ONE;
    }
    let inv = den
        .clone()
        .try_inverse()
        .ok_or_else(|| singular(alpha, "denominator of G is not invertible".into()))?;
    let cond = condition_number(&den, &inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(singular(alpha, format!("denominator of G has condition number {cond:e}")));
    }
    let out = shifted * inv;
    Ok((&out - out.transpose()) * Complex64::new(0.5, 0.0))
}

fn g_rank_one(gamma: &CovarianceMatrix, alpha: &PhaseVector, e: &[Complex64]) -> Result<CMatrix> {
    // With P = Υ(Γ+Υ) = ΥΓ − 1, G = −Υ·(P⁻¹ + diag β)⁻¹: start from the
    // (possibly singular) "inverse" P and add β_i|i⟩⟨i| one at a time.
    let n = gamma.n_modes();
    let ups = symplectic_form(n);
    let p = to_complex(&(&ups * (gamma.matrix() + &ups)));
    let updates: Vec<RankOneUpdate> = (0..2 * n)
        .filter_map(|i| {
            let beta = (ONE - e[i % n]) * 0.5;
            (beta.norm() > 0.0).then(|| RankOneUpdate::unit(beta, i, i, 2 * n))
        })
        .collect();
    // det(1 + βP) is the product of the step denominators
    let mut x = p.clone();
    let mut det = ONE;
    for (step, upd) in updates.iter().enumerate() {
        let i = upd.left.iter().position(|z| z.norm() > 0.0).unwrap_or(0);
        let denom = ONE + upd.coeff * x[(i, i)];
        if denom.norm() < MILLER_SINGULAR_TOL {
            return Err(Error::SingularUpdate { step, magnitude: denom.norm() });
        }
        det *= denom;
        x = miller_inverse(&x, std::slice::from_ref(upd))?;
    }
    if det.norm() < MILLER_SINGULAR_TOL {
        return Err(singular(alpha, format!("rank-one chain determinant {:e}", det.norm())));
    }
    let out = -(to_complex(&ups) * x);
    Ok((&out - out.transpose()) * Complex64::new(0.5, 0.0))
}

/// (i/4)·phase·A[α]·G-block for one normal-ordered pair.
pub fn pair_expectation(
    gamma: &CovarianceMatrix,
    alpha: &PhaseVector,
    kind: PairKind,
    p: usize,
    q: usize,
) -> Result<Complex64> {
    let c = Contraction::new(gamma, alpha)?;
    c.pair_expectation(kind, p, q)
}

/// ⟨e^{iΣα n} · string⟩.
pub fn expectation(gamma: &CovarianceMatrix, alpha: &PhaseVector, string: &OperatorString) -> Result<Complex64> {
    let c = Contraction::new(gamma, alpha)?;
    c.expectation(string)
}

/// Everything derived from one (Γ, α): A[α], the phases and G[α] (or the
/// reason G[α] is unavailable).
#[derive(Debug, Clone)]
pub struct Contraction {
    alpha: PhaseVector,
    e: Vec<Complex64>,
    a: Complex64,
    g: std::result::Result<CMatrix, String>,
}

impl Contraction {
    pub fn new(gamma: &CovarianceMatrix, alpha: &PhaseVector) -> Result<Self> {
        check_lengths(gamma, alpha)?;
        let e = phases(alpha);
        let a = a_from_gamma_f(gamma.n_modes(), &gamma_f_raw(gamma, &e));
        let g = match g_auto(gamma, alpha, &e) {
            Ok(g) => Ok(g),
            Err(Error::SingularContraction { reason, .. }) => Err(reason),
            Err(other) => return Err(other),
        };
        Ok(Self { alpha: alpha.clone(), e, a, g })
    }

    pub fn alpha(&self) -> &PhaseVector {
        &self.alpha
    }

    pub fn n_modes(&self) -> usize {
        self.e.len()
    }

    pub fn a(&self) -> Complex64 {
        self.a
    }

    pub fn g(&self) -> Result<&CMatrix> {
        self.g.as_ref().map_err(|reason| singular(&self.alpha, reason.clone()))
    }

    pub fn phase(&self, mode: usize) -> Complex64 {
        self.e[mode]
    }

    /// Block contraction of G[α].
    pub fn g_block(&self, kind: BlockContractionKind, p: usize, q: usize) -> Result<Complex64> {
        Ok(block_contract_unchecked(self.g()?, kind, p, q))
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.n_modes() {
            return Err(Error::IndexOutOfRange { index: mode, bound: self.n_modes() });
        }
        Ok(())
    }

    /// Two-point ratio ⟨… x y …⟩-contraction for the ordered factors x, y,
    /// normalized by A[α].
    fn ratio(&self, g: &CMatrix, x: Ladder, y: Ladder) -> Complex64 {
        let quarter_i = I * 0.25;
        match (x.dagger, y.dagger) {
            (true, false) => {
                quarter_i * self.e[x.mode] * block_contract_unchecked(g, BlockContractionKind::PlusMinus, x.mode, y.mode)
            }
            (true, true) => {
                quarter_i
                    * self.e[x.mode]
                    * self.e[y.mode]
                    * block_contract_unchecked(g, BlockContractionKind::PlusPlus, x.mode, y.mode)
            }
            (false, false) => quarter_i * block_contract_unchecked(g, BlockContractionKind::MinusMinus, x.mode, y.mode),
            (false, true) => {
                // c_p c_q† = δ_pq − c_q† c_p
                let delta = if x.mode == y.mode { ONE } else { Complex64::new(0.0, 0.0) };
                delta
                    - quarter_i
                        * self.e[y.mode]
                        * block_contract_unchecked(g, BlockContractionKind::PlusMinus, y.mode, x.mode)
            }
        }
    }

    pub fn pair_expectation(&self, kind: PairKind, p: usize, q: usize) -> Result<Complex64> {
        self.check_mode(p)?;
        self.check_mode(q)?;
        let g = self.g()?;
        let (x, y) = match kind {
            PairKind::DagPlain => (Ladder::create(p), Ladder::annihilate(q)),
            PairKind::DagDag => (Ladder::create(p), Ladder::create(q)),
            PairKind::PlainPlain => (Ladder::annihilate(p), Ladder::annihilate(q)),
        };
        Ok(self.a * self.ratio(g, x, y))
    }

    pub fn expectation(&self, string: &OperatorString) -> Result<Complex64> {
        self.expectation_of(string.factors())
    }

    /// Same as [`Contraction::expectation`] on an unchecked slice of factors.
    pub fn expectation_of(&self, factors: &[Ladder]) -> Result<Complex64> {
        let len = factors.len();
        if !len.is_multiple_of(2) {
            return Err(Error::Parity(len));
        }
        if len == 0 {
            return Ok(self.a);
        }
        for f in factors {
            self.check_mode(f.mode)?;
        }
        let n_pairs = len / 2;
        if n_pairs > 1 && self.a.norm() < MIN_A_MAGNITUDE {
            return Err(singular(
                &self.alpha,
                format!("|A| = {:e} is too small for a product of {n_pairs} pairs", self.a.norm()),
            ));
        }
        let g = self.g()?;
        let pairings = enumerate_pairings(len)?;
        let mut table = [[Complex64::new(0.0, 0.0); MAX_STRING_LEN]; MAX_STRING_LEN];
        for i in 0..len {
            for j in (i + 1)..len {
                table[i][j] = self.ratio(g, factors[i], factors[j]);
            }
        }
        let mut total = Complex64::new(0.0, 0.0);
        for pairing in pairings.iter() {
            let mut prod = Complex64::new(f64::from(pairing.sign), 0.0);
            for &(i, j) in &pairing.pairs {
                prod *= table[i][j];
            }
            total += prod;
        }
        Ok(self.a * total)
    }

    /// L[α] = 1 − ½·G[α]·(1−e^{iα})·Υ.
    pub fn l_matrix(&self) -> Result<CMatrix> {
        let n = self.n_modes();
        let g = self.g()?;
        let mut right = to_complex(&symplectic_form(n));
        for i in 0..2 * n {
            let beta = ONE - self.e[i % n];
            for j in 0..2 * n {
                right[(i, j)] *= beta;
            }
        }
        Ok(CMatrix::identity(2 * n, 2 * n) - g * right * Complex64::new(0.5, 0.0))
    }
}

/// Q[α] = −½·S·Γ_F⁻¹·S with S = √(1−e^{iα}) on both blocks.
///
/// The rank-one route starts from Γ⁻¹ = −Γ and adds the phase-dependent
/// corner terms; it is used only when every mode carries a phase.
pub fn q_matrix(gamma: &CovarianceMatrix, alpha: &PhaseVector) -> Result<(CMatrix, InversePath)> {
    check_lengths(gamma, alpha)?;
    let e = phases(alpha);
    if e.iter().all(|&z| (ONE - z).norm() > UNPHASED_TOL) {
        if let Ok(q) = q_rank_one(gamma, alpha, &e) {
            return Ok((q, InversePath::RankOne));
        }
    }
    Ok((q_direct(gamma, alpha, &e)?, InversePath::Direct))
}

/// Q[α] through a chosen path.
pub fn q_matrix_with(gamma: &CovarianceMatrix, alpha: &PhaseVector, path: InversePath) -> Result<CMatrix> {
    check_lengths(gamma, alpha)?;
    let e = phases(alpha);
    match path {
        InversePath::Direct => q_direct(gamma, alpha, &e),
        InversePath::RankOne => q_rank_one(gamma, alpha, &e),
    }
}

fn q_rank_one(gamma: &CovarianceMatrix, alpha: &PhaseVector, e: &[Complex64]) -> Result<CMatrix> {
    let n = gamma.n_modes();
    if let Some(j) = e.iter().position(|&z| (ONE - z).norm() <= UNPHASED_TOL) {
        return Err(singular(alpha, format!("mode {} carries no phase", j + 1)));
    }
    let base_inv = to_complex(&(-gamma.matrix()));
    let mut updates = Vec::with_capacity(2 * n);
    for j in 0..n {
        let bt = (ONE + e[j]) / (ONE - e[j]);
        if bt.norm() == 0.0 {
            continue;
        }
        updates.push(RankOneUpdate::unit(-bt, j, n + j, 2 * n));
        updates.push(RankOneUpdate::unit(bt, n + j, j, 2 * n));
    }
    let inv = miller_inverse(&base_inv, &updates).map_err(|err| singular(alpha, err.to_string()))?;
    if !inv.iter().all(|z| z.is_finite()) {
        return Err(singular(alpha, "rank-one chain produced non-finite entries".into()));
    }
    Ok(inv * Complex64::new(-0.5, 0.0))
}

fn q_direct(gamma: &CovarianceMatrix, alpha: &PhaseVector, e: &[Complex64]) -> Result<CMatrix> {
    let n = gamma.n_modes();
    let gf = gamma_f_raw(gamma, e);
    let gf_inv = invert(&gf, "Γ_F").map_err(|_| singular(alpha, "Γ_F is not invertible".into()))?;
    let cond = condition_number(&gf, &gf_inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(singular(alpha, format!("Γ_F has condition number {cond:e}")));
    }
    let s: Vec<Complex64> = e.iter().map(|&z| (ONE - z).sqrt()).collect();
    Ok(CMatrix::from_fn(2 * n, 2 * n, |i, j| -0.5 * s[i % n] * gf_inv[(i, j)] * s[j % n]))
}

/// Thread-safe memo of [`Contraction`]s keyed by the wrapped phase vector,
/// for one fixed Γ.
pub struct ContractionCache<'a> {
    gamma: &'a CovarianceMatrix,
    entries: Mutex<HashMap<Vec<u64>, Arc<Contraction>>>,
}

impl<'a> ContractionCache<'a> {
    pub fn new(gamma: &'a CovarianceMatrix) -> Self {
        Self { gamma, entries: Mutex::new(HashMap::new()) }
    }

    pub fn gamma(&self) -> &CovarianceMatrix {
        self.gamma
    }

    pub fn get(&self, alpha: &PhaseVector) -> Result<Arc<Contraction>> {
        let key = alpha.key();
        if let Some(hit) = self.entries.lock().expect("cache lock poisoned").get(&key) {
            return Ok(hit.clone());
        }
        // computed outside the lock; a racing duplicate is identical
        let fresh = Arc::new(Contraction::new(self.gamma, alpha)?);
        let mut map = self.entries.lock().expect("cache lock poisoned");
        Ok(map.entry(key).or_insert(fresh).clone())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Plain Wick contraction of a string against a Gaussian state, built from
/// G[0] = Γ + Υ without any phase machinery.
pub fn plain_wick(gamma: &CovarianceMatrix, string: &OperatorString) -> Result<Complex64> {
    let n = gamma.n_modes();
    let g0 = to_complex(&(gamma.matrix() + symplectic_form(n)));
    let c = Contraction {
        alpha: PhaseVector::zeros(n),
        e: vec![ONE; n],
        a: ONE,
        g: Ok(g0),
    };
    c.expectation(string)
}
