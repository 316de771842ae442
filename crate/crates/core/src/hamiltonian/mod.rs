//! Many-body Hamiltonians `Σ f_pq c_p† c_q + ½ Σ h_pqrs c_p† c_q† c_r c_s`
//! and everything the optimizer needs from them: the energy of a
//! non-Gaussian state, its ω-gradient and the two mean-field matrices.
//!
//! Conjugating with the phase unitary U = exp(i Σ_{j<k} ω_jk n_j n_k) turns
//! each ladder operator into itself times a number-dependent phase, so every
//! term becomes a phase-twisted Gaussian expectation evaluated by [`crate::wick`].

mod io;

pub use io::{load_hamiltonian, parse_hamiltonian, save_hamiltonian, write_hamiltonian};

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{symplectic_form, CovarianceMatrix};
use crate::linalg::{block_contract_unchecked, BlockContractionKind, CMatrix, RMatrix, I, STRUCTURE_TOL};
use crate::wick::{q_matrix, wrap_phase, Contraction, ContractionCache, Ladder, PhaseVector};

/// Largest imaginary part of the energy tolerated before it is discarded.
pub const ENERGY_IMAG_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneBodyTerm {
    pub p: usize,
    pub q: usize,
    pub value: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoBodyTerm {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyHamiltonian {
    n_modes: usize,
    f: CMatrix,
    h: Vec<f64>,
    one_body: Vec<OneBodyTerm>,
    two_body: Vec<TwoBodyTerm>,
}

impl ManyBodyHamiltonian {
    /// `h` is the dense N⁴ tensor, row-major in (p, q, r, s).
    pub fn new(f: CMatrix, h: Vec<f64>) -> Result<Self> {
        let n = f.nrows();
        if !f.is_square() || n == 0 {
            return Err(Error::Dimension(format!("one-body tensor must be square and non-empty, got {}x{}", f.nrows(), f.ncols())));
        }
        if h.len() != n.pow(4) {
            return Err(Error::Dimension(format!("two-body tensor needs {} entries, got {}", n.pow(4), h.len())));
        }
        if f.iter().any(|z| !z.is_finite()) || h.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("Hamiltonian has non-finite coefficients".into()));
        }
        let idx = |p: usize, q: usize, r: usize, s: usize| ((p * n + q) * n + r) * n + s;
        for p in 0..n {
            for q in 0..n {
                if (f[(p, q)] - f[(q, p)].conj()).norm() > STRUCTURE_TOL {
                    return Err(Error::Symmetry {
                        indices: vec![p + 1, q + 1],
                        message: "one-body tensor is not Hermitian".into(),
                    });
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let v = h[idx(p, q, r, s)];
                        let checks = [
                            (h[idx(q, p, r, s)], -1.0, "h_pqrs = −h_qprs"),
                            (h[idx(p, q, s, r)], -1.0, "h_pqrs = −h_pqsr"),
                            (h[idx(q, p, s, r)], 1.0, "h_pqrs = h_qpsr"),
                            (h[idx(s, r, q, p)], 1.0, "h_pqrs = h_srqp"),
                        ];
                        for (other, sign, rule) in checks {
                            if (v - sign * other).abs() > STRUCTURE_TOL {
                                return Err(Error::Symmetry {
                                    indices: vec![p + 1, q + 1, r + 1, s + 1],
                                    message: format!("violates {rule}"),
                                });
                            }
                        }
                    }
                }
            }
        }
        let mut one_body = Vec::new();
        for p in 0..n {
            for q in 0..n {
                if f[(p, q)] != Complex64::new(0.0, 0.0) {
                    one_body.push(OneBodyTerm { p, q, value: f[(p, q)] });
                }
            }
        }
        let mut two_body = Vec::new();
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let value = h[idx(p, q, r, s)];
                        if value != 0.0 {
                            two_body.push(TwoBodyTerm { p, q, r, s, value });
                        }
                    }
                }
            }
        }
        Ok(Self { n_modes: n, f, h, one_body, two_body })
    }

    pub fn zero(n_modes: usize) -> Self {
        Self {
            n_modes,
            f: CMatrix::zeros(n_modes, n_modes),
            h: vec![0.0; n_modes.pow(4)],
            one_body: Vec::new(),
            two_body: Vec::new(),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn f(&self) -> &CMatrix {
        &self.f
    }

    pub fn h(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let n = self.n_modes;
        self.h[((p * n + q) * n + r) * n + s]
    }

    pub fn h_tensor(&self) -> &[f64] {
        &self.h
    }

    /// Nonzero one-body entries in row-major order.
    pub fn one_body_terms(&self) -> &[OneBodyTerm] {
        &self.one_body
    }

    /// Nonzero two-body entries in row-major order.
    pub fn two_body_terms(&self) -> &[TwoBodyTerm] {
        &self.two_body
    }
}

/// Real symmetric ω with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct NonGaussianParams {
    omega: RMatrix,
}

impl NonGaussianParams {
    pub fn new(omega: RMatrix) -> Result<Self> {
        if !omega.is_square() || omega.nrows() == 0 {
            return Err(Error::Dimension(format!("ω must be square and non-empty, got {}x{}", omega.nrows(), omega.ncols())));
        }
        if omega.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("ω has non-finite entries".into()));
        }
        let n = omega.nrows();
        for i in 0..n {
            if omega[(i, i)].abs() > STRUCTURE_TOL {
                return Err(Error::Validation(format!("ω has nonzero diagonal entry at mode {}", i + 1)));
            }
            for j in (i + 1)..n {
                if (omega[(i, j)] - omega[(j, i)]).abs() > STRUCTURE_TOL {
                    return Err(Error::Validation(format!("ω is not symmetric at ({}, {})", i + 1, j + 1)));
                }
            }
        }
        let mut clean = (&omega + omega.transpose()) * 0.5;
        clean.fill_diagonal(0.0);
        Ok(Self { omega: clean })
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self { omega: RMatrix::zeros(n_modes, n_modes) }
    }

    /// Symmetric matrix from upper-triangle values, row-major over k < l.
    pub fn from_pairs(n_modes: usize, values: &[f64]) -> Result<Self> {
        let expected = n_modes * n_modes.saturating_sub(1) / 2;
        if values.len() != expected {
            return Err(Error::Dimension(format!("expected {expected} pair values, got {}", values.len())));
        }
        let mut omega = RMatrix::zeros(n_modes, n_modes);
        let mut it = values.iter();
        for k in 0..n_modes {
            for l in (k + 1)..n_modes {
                let v = *it.next().expect("length checked");
                omega[(k, l)] = v;
                omega[(l, k)] = v;
            }
        }
        Self::new(omega)
    }

    pub fn n_modes(&self) -> usize {
        self.omega.nrows()
    }

    pub fn matrix(&self) -> &RMatrix {
        &self.omega
    }

    /// Entries wrapped into (−π, π].
    pub fn wrapped(&self) -> Self {
        Self { omega: self.omega.map(wrap_phase) }
    }
}

/// α_pq(k) = ω_kq − ω_kp.
pub fn alpha_fa(omega: &RMatrix, p: usize, q: usize) -> Vec<f64> {
    (0..omega.nrows()).map(|k| omega[(k, q)] - omega[(k, p)]).collect()
}

/// β_pqrs = α_ps + α_qr.
pub fn beta_fa(omega: &RMatrix, p: usize, q: usize, r: usize, s: usize) -> Vec<f64> {
    (0..omega.nrows())
        .map(|k| omega[(k, s)] - omega[(k, p)] + omega[(k, r)] - omega[(k, q)])
        .collect()
}

/// f_pq·e^{−iα_pq(p)}.
pub fn f_fa(omega: &RMatrix, p: usize, q: usize, f: Complex64) -> Complex64 {
    let a = omega[(p, q)] - omega[(p, p)];
    f * Complex64::from_polar(1.0, -a)
}

/// h_pqrs·e^{−i(β(p)+β(q))}·e^{i(ω_rs − ω_pq)}.
///
/// The last factor comes from re-ordering `c_r c_s` past the pair phase
/// e^{iω_rs n_r n_s}; without it the rotated energy does not reproduce the
/// exact expectation value.
pub fn h_fa(omega: &RMatrix, p: usize, q: usize, r: usize, s: usize, h: f64) -> Complex64 {
    let beta = |k: usize| omega[(k, s)] - omega[(k, p)] + omega[(k, r)] - omega[(k, q)];
    let phase = -(beta(p) + beta(q)) + omega[(r, s)] - omega[(p, q)];
    Complex64::from_polar(h, phase)
}

/// Rotated one- and two-body coefficients with their phase vectors.
#[derive(Debug, Clone)]
pub struct RotatedCoefficients {
    pub one_body: Vec<RotatedOneBody>,
    pub two_body: Vec<RotatedTwoBody>,
}

#[derive(Debug, Clone)]
pub struct RotatedOneBody {
    pub p: usize,
    pub q: usize,
    pub coeff: Complex64,
    pub alpha: PhaseVector,
}

#[derive(Debug, Clone)]
pub struct RotatedTwoBody {
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
    pub coeff: Complex64,
    pub beta: PhaseVector,
}

pub fn rotate_coefficients(ham: &ManyBodyHamiltonian, omega: &NonGaussianParams) -> Result<RotatedCoefficients> {
    check_modes(ham, omega.n_modes())?;
    let w = omega.matrix();
    let one_body = ham
        .one_body_terms()
        .iter()
        .map(|t| RotatedOneBody {
            p: t.p,
            q: t.q,
            coeff: f_fa(w, t.p, t.q, t.value),
            alpha: PhaseVector::new(alpha_fa(w, t.p, t.q)),
        })
        .collect();
    let two_body = ham
        .two_body_terms()
        .iter()
        .map(|t| RotatedTwoBody {
            p: t.p,
            q: t.q,
            r: t.r,
            s: t.s,
            coeff: h_fa(w, t.p, t.q, t.r, t.s, t.value),
            beta: PhaseVector::new(beta_fa(w, t.p, t.q, t.r, t.s)),
        })
        .collect();
    Ok(RotatedCoefficients { one_body, two_body })
}

fn check_modes(ham: &ManyBodyHamiltonian, n: usize) -> Result<()> {
    if ham.n_modes() != n {
        return Err(Error::Dimension(format!("Hamiltonian has {} modes, state has {n}", ham.n_modes())));
    }
    Ok(())
}

fn name_tuple(err: Error, indices: &[usize]) -> Error {
    match err {
        Error::SingularContraction { alpha, reason } => Error::SingularContraction {
            alpha,
            reason: format!("{reason} (term {:?})", indices.iter().map(|i| i + 1).collect::<Vec<_>>()),
        },
        other => other,
    }
}

/// Energy split into its one- and two-body parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energy {
    pub one_body: f64,
    pub two_body: f64,
    pub total: f64,
}

pub fn energy(gamma: &CovarianceMatrix, omega: &NonGaussianParams, ham: &ManyBodyHamiltonian) -> Result<Energy> {
    let cache = ContractionCache::new(gamma);
    energy_with_cache(&cache, omega, ham)
}

pub(crate) fn energy_with_cache(
    cache: &ContractionCache<'_>,
    omega: &NonGaussianParams,
    ham: &ManyBodyHamiltonian,
) -> Result<Energy> {
    check_modes(ham, cache.gamma().n_modes())?;
    check_modes(ham, omega.n_modes())?;
    let rot = rotate_coefficients(ham, omega)?;
    let e1: Vec<Complex64> = rot
        .one_body
        .par_iter()
        .map(|t| {
            let c = cache.get(&t.alpha).map_err(|e| name_tuple(e, &[t.p, t.q]))?;
            let v = c
                .expectation_of(&[Ladder::create(t.p), Ladder::annihilate(t.q)])
                .map_err(|e| name_tuple(e, &[t.p, t.q]))?;
            Ok(t.coeff * v)
        })
        .collect::<Result<_>>()?;
    let e2: Vec<Complex64> = rot
        .two_body
        .par_iter()
        .map(|t| {
            let idx = [t.p, t.q, t.r, t.s];
            let c = cache.get(&t.beta).map_err(|e| name_tuple(e, &idx))?;
            let v = c
                .expectation_of(&[Ladder::create(t.p), Ladder::create(t.q), Ladder::annihilate(t.r), Ladder::annihilate(t.s)])
                .map_err(|e| name_tuple(e, &idx))?;
            Ok(t.coeff * v * 0.5)
        })
        .collect::<Result<_>>()?;
    let one: Complex64 = e1.iter().sum();
    let two: Complex64 = e2.iter().sum();
    let total = one + two;
    if total.im.abs() > ENERGY_IMAG_TOL * total.re.abs().max(1.0) {
        return Err(Error::Validation(format!("energy has imaginary part {:e}", total.im)));
    }
    Ok(Energy { one_body: one.re, two_body: two.re, total: one.re + two.re })
}

/// ∂E/∂ω_ij with ω_ij and ω_ji treated as independent, so that
/// dE = Σ_ij g_ij dω_ij. Symmetric with zero diagonal.
pub fn energy_gradient_omega(
    gamma: &CovarianceMatrix,
    omega: &NonGaussianParams,
    ham: &ManyBodyHamiltonian,
) -> Result<RMatrix> {
    let cache = ContractionCache::new(gamma);
    energy_gradient_with_cache(&cache, omega, ham)
}

pub(crate) fn energy_gradient_with_cache(
    cache: &ContractionCache<'_>,
    omega: &NonGaussianParams,
    ham: &ManyBodyHamiltonian,
) -> Result<RMatrix> {
    let n = ham.n_modes();
    check_modes(ham, cache.gamma().n_modes())?;
    check_modes(ham, omega.n_modes())?;
    let w = omega.matrix();

    let mut f_by_row: Vec<Vec<&OneBodyTerm>> = vec![Vec::new(); n];
    for t in ham.one_body_terms() {
        f_by_row[t.p].push(t);
    }
    let mut h_by_first: Vec<Vec<&TwoBodyTerm>> = vec![Vec::new(); n];
    for t in ham.two_body_terms() {
        if t.r < t.s {
            h_by_first[t.p].push(t);
        }
    }

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| -> Result<f64> {
            let mut total = 0.0;
            for (x, y) in [(i, j), (j, i)] {
                for t in &f_by_row[x] {
                    let alpha = PhaseVector::new(alpha_fa(w, x, t.q));
                    let c = cache.get(&alpha).map_err(|e| name_tuple(e, &[x, t.q]))?;
                    let v = c
                        .expectation_of(&[Ladder::create(x), Ladder::create(y), Ladder::annihilate(y), Ladder::annihilate(t.q)])
                        .map_err(|e| name_tuple(e, &[x, t.q]))?;
                    total += (f_fa(w, x, t.q, t.value) * v).im;
                }
                for t in &h_by_first[x] {
                    let idx = [x, t.q, t.r, t.s];
                    let beta = PhaseVector::new(beta_fa(w, x, t.q, t.r, t.s));
                    let c = cache.get(&beta).map_err(|e| name_tuple(e, &idx))?;
                    let v = c
                        .expectation_of(&[
                            Ladder::create(y),
                            Ladder::create(x),
                            Ladder::create(t.q),
                            Ladder::annihilate(y),
                            Ladder::annihilate(t.r),
                            Ladder::annihilate(t.s),
                        ])
                        .map_err(|e| name_tuple(e, &idx))?;
                    total += 2.0 * (h_fa(w, x, t.q, t.r, t.s, t.value) * v).im;
                }
            }
            for t in &h_by_first[i] {
                if t.q != j {
                    continue;
                }
                let idx = [i, j, t.r, t.s];
                let beta = PhaseVector::new(beta_fa(w, i, j, t.r, t.s));
                let c = cache.get(&beta).map_err(|e| name_tuple(e, &idx))?;
                let v = c
                    .expectation_of(&[Ladder::create(i), Ladder::create(j), Ladder::annihilate(t.r), Ladder::annihilate(t.s)])
                    .map_err(|e| name_tuple(e, &idx))?;
                total += 2.0 * (h_fa(w, i, j, t.r, t.s, t.value) * v).im;
            }
            Ok(total)
        })
        .collect::<Result<_>>()?;

    let mut grad = RMatrix::zeros(n, n);
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        grad[(i, j)] = v;
        grad[(j, i)] = v;
    }
    Ok(grad)
}

/// Pieces of the Γ-derivative of one phase-twisted term.
struct MeanFieldPieces {
    contraction: std::sync::Arc<Contraction>,
    l: CMatrix,
    q: CMatrix,
}

impl MeanFieldPieces {
    fn new(cache: &ContractionCache<'_>, alpha: &PhaseVector) -> Result<Self> {
        let contraction = cache.get(alpha)?;
        let l = contraction.l_matrix()?;
        let (q, _) = q_matrix(cache.gamma(), alpha)?;
        Ok(Self { contraction, l, q })
    }

    fn block(&self, kind: BlockContractionKind, p: usize, q: usize) -> Complex64 {
        block_contract_unchecked(self.contraction.g().expect("checked by l_matrix"), kind, p, q)
    }

    /// Derivative of a G-block with respect to Γ: u vᵀ − v uᵀ with
    /// u = Lᵀ·row, v = Lᵀ·col.
    fn d_block(&self, kind: BlockContractionKind, p: usize, q: usize) -> CMatrix {
        let n = self.l.nrows() / 2;
        let (row, col) = kind.vectors(n, p, q);
        let lt = self.l.transpose();
        let u: DVector<Complex64> = &lt * row;
        let v: DVector<Complex64> = &lt * col;
        &u * v.transpose() - &v * u.transpose()
    }
}

/// H_m = 4·∂E/∂Γ as a complex matrix; the imaginary part is numerical noise.
pub fn mean_field_h_raw(
    gamma: &CovarianceMatrix,
    omega: &NonGaussianParams,
    ham: &ManyBodyHamiltonian,
) -> Result<CMatrix> {
    let cache = ContractionCache::new(gamma);
    mean_field_h_with_cache(&cache, omega, ham)
}

/// H_m = 4·∂E/∂Γ, real antisymmetric.
pub fn mean_field_h(gamma: &CovarianceMatrix, omega: &NonGaussianParams, ham: &ManyBodyHamiltonian) -> Result<RMatrix> {
    Ok(real_skew_part(&mean_field_h_raw(gamma, omega, ham)?))
}

pub(crate) fn real_skew_part(m: &CMatrix) -> RMatrix {
    let re = m.map(|z| z.re);
    (&re - re.transpose()) * 0.5
}

pub(crate) fn mean_field_h_with_cache(
    cache: &ContractionCache<'_>,
    omega: &NonGaussianParams,
    ham: &ManyBodyHamiltonian,
) -> Result<CMatrix> {
    use BlockContractionKind::{MinusMinus, PlusMinus, PlusPlus};
    let n = ham.n_modes();
    check_modes(ham, cache.gamma().n_modes())?;
    check_modes(ham, omega.n_modes())?;
    let w = omega.matrix();
    let dim = 2 * n;

    let ones: Vec<CMatrix> = ham
        .one_body_terms()
        .par_iter()
        .map(|t| {
            let alpha = PhaseVector::new(alpha_fa(w, t.p, t.q));
            let mf = MeanFieldPieces::new(cache, &alpha).map_err(|e| name_tuple(e, &[t.p, t.q]))?;
            let a = mf.contraction.a();
            let g = mf.block(PlusMinus, t.p, t.q);
            let mut term = &mf.q * g + mf.d_block(PlusMinus, t.p, t.q) * Complex64::new(0.5, 0.0);
            term *= I * t.value * a;
            Ok(term)
        })
        .collect::<Result<_>>()?;
    let twos: Vec<CMatrix> = ham
        .two_body_terms()
        .par_iter()
        .map(|t| {
            let (p, q, r, s) = (t.p, t.q, t.r, t.s);
            let beta = PhaseVector::new(beta_fa(w, p, q, r, s));
            let mf = MeanFieldPieces::new(cache, &beta).map_err(|e| name_tuple(e, &[p, q, r, s]))?;
            let a = mf.contraction.a();
            let coeff = Complex64::from_polar(t.value, w[(r, s)] - w[(p, q)]);
            let gps = mf.block(PlusMinus, p, s);
            let gqr = mf.block(PlusMinus, q, r);
            let gpq = mf.block(PlusPlus, p, q);
            let grs = mf.block(MinusMinus, r, s);
            let mut term = &mf.q * (gps * gqr * 4.0 + gpq * grs * 2.0);
            term += mf.d_block(PlusMinus, p, s) * (gqr * 4.0);
            term += mf.d_block(PlusPlus, p, q) * grs;
            term += mf.d_block(MinusMinus, r, s) * gpq;
            term *= -coeff * a / 16.0;
            Ok(term)
        })
        .collect::<Result<_>>()?;
    let mut total = CMatrix::zeros(dim, dim);
    for m in ones.iter().chain(twos.iter()) {
        total += m;
    }
    Ok(total)
}

/// g_j = (Γ_{j,N+j} + 1) = 2⟨n_j⟩.
pub fn occupation_vector(gamma: &CovarianceMatrix) -> Vec<f64> {
    let n = gamma.n_modes();
    (0..n).map(|j| gamma.matrix()[(j, n + j)] + 1.0).collect()
}

/// O_m for a given ω-velocity: the Γ-derivative of the change in
/// ⟨Σ dω_kl n_k n_l⟩, shaped so that iO_m is real antisymmetric.
pub fn mean_field_o(gamma: &CovarianceMatrix, dtau_omega: &RMatrix) -> Result<CMatrix> {
    let n = gamma.n_modes();
    if dtau_omega.nrows() != n || dtau_omega.ncols() != n {
        return Err(Error::Dimension(format!(
            "dω is {}x{} for {n} modes",
            dtau_omega.nrows(),
            dtau_omega.ncols()
        )));
    }
    let g = DVector::from_vec(occupation_vector(gamma));
    let d = dtau_omega * g;
    let g0 = gamma.matrix() + symplectic_form(n);
    let half_i = Complex64::new(0.0, 0.5);
    let mut o = CMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        o[(j, n + j)] += half_i * d[j];
        o[(n + j, j)] -= half_i * d[j];
    }
    for k in 0..n {
        for l in 0..n {
            let w = dtau_omega[(k, l)];
            if w == 0.0 {
                continue;
            }
            o[(k, l)] += half_i * (w * -g0[(n + k, n + l)]);
            o[(k, n + l)] += half_i * (w * g0[(n + k, l)]);
            o[(n + k, l)] += half_i * (w * g0[(k, n + l)]);
            o[(n + k, n + l)] += half_i * (w * -g0[(k, l)]);
        }
    }
    Ok(o)
}

/// Fermi–Hubbard chain: modes `0..L` spin-up, `L..2L` spin-down, hopping −t
/// on nearest-neighbour bonds, on-site repulsion U and chemical potential μ.
pub fn hubbard_model(sites: usize, t: f64, u: f64, mu: f64, periodic: bool) -> Result<ManyBodyHamiltonian> {
    if sites < 2 {
        return Err(Error::Config(format!("Hubbard chain needs at least 2 sites, got {sites}")));
    }
    for (name, v) in [("t", t), ("U", u), ("mu", mu)] {
        if !v.is_finite() {
            return Err(Error::Config(format!("Hubbard parameter {name} must be finite")));
        }
    }
    let n = 2 * sites;
    let mut bonds: Vec<(usize, usize)> = (0..sites - 1).map(|i| (i, i + 1)).collect();
    // a 2-site ring would double the single bond
    if periodic && sites > 2 {
        bonds.push((sites - 1, 0));
    }
    let mut f = CMatrix::zeros(n, n);
    for spin in 0..2 {
        let off = spin * sites;
        for &(i, j) in &bonds {
            f[(off + i, off + j)] -= Complex64::new(t, 0.0);
            f[(off + j, off + i)] -= Complex64::new(t, 0.0);
        }
        for i in 0..sites {
            f[(off + i, off + i)] -= Complex64::new(mu, 0.0);
        }
    }
    let mut h = vec![0.0; n.pow(4)];
    let idx = |p: usize, q: usize, r: usize, s: usize| ((p * n + q) * n + r) * n + s;
    for i in 0..sites {
        let (a, b) = (i, sites + i);
        h[idx(a, b, b, a)] = u / 2.0;
        h[idx(b, a, a, b)] = u / 2.0;
        h[idx(a, b, a, b)] = -u / 2.0;
        h[idx(b, a, b, a)] = -u / 2.0;
    }
    ManyBodyHamiltonian::new(f, h)
}

/// Dense random Hamiltonian with all declared symmetries, entries of order
/// `scale`. Used by the validation suite.
pub fn random_hamiltonian<R: rand::Rng>(rng: &mut R, n_modes: usize, scale: f64) -> ManyBodyHamiltonian {
    let n = n_modes;
    let mut f = CMatrix::zeros(n, n);
    for p in 0..n {
        f[(p, p)] = Complex64::new(rng.random_range(-scale..scale), 0.0);
        for q in (p + 1)..n {
            let z = Complex64::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale));
            f[(p, q)] = z;
            f[(q, p)] = z.conj();
        }
    }
    let idx = |p: usize, q: usize, r: usize, s: usize| ((p * n + q) * n + r) * n + s;
    let raw: Vec<f64> = (0..n.pow(4)).map(|_| rng.random_range(-scale..scale)).collect();
    let mut h = vec![0.0; n.pow(4)];
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    // antisymmetrize in (p,q) and (r,s), then symmetrize under (pqrs) -> (srqp)
                    let a = |p, q, r, s| raw[idx(p, q, r, s)] - raw[idx(q, p, r, s)] - raw[idx(p, q, s, r)] + raw[idx(q, p, s, r)];
                    h[idx(p, q, r, s)] = 0.125 * (a(p, q, r, s) + a(s, r, q, p));
                }
            }
        }
    }
    ManyBodyHamiltonian::new(f, h).expect("construction is symmetric by design")
}

#[cfg(test)]
mod tests;
