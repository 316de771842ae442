//! Brute-force Fock-space reference.
//!
//! Basis states are bit strings with mode 0 in the least significant bit.
//! Ladder operators carry the Jordan–Wigner sign of all lower modes:
//! `c_j |s⟩ = (−1)^{popcount(s & (2^j − 1))} |s ⊕ 2^j⟩` when bit j is set.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::{CovarianceMatrix, GaussianParams};
use crate::hamiltonian::{ManyBodyHamiltonian, NonGaussianParams};
use crate::linalg::CMatrix;
use crate::wick::{Ladder, OperatorString, PhaseVector};

/// Operator sets (one dense 2^N × 2^N matrix per mode on request) are capped
/// here: at 12 modes a single complex matrix is already 256 MiB.
pub const MAX_OPERATOR_MODES: usize = 12;
/// Dense exponentials and diagonalization are O(8^N); 10 modes keeps them
/// to seconds.
pub const MAX_DENSE_MODES: usize = 10;

pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Ladder operators of an N-mode Fock space. Operators are applied to
/// vectors through bit arithmetic; dense matrices are built on request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseOperatorSet {
    n_modes: usize,
}

impl DenseOperatorSet {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > MAX_OPERATOR_MODES {
            return Err(Error::Resource(format!(
                "dense operators support 1..={MAX_OPERATOR_MODES} modes, got {n_modes}"
            )));
        }
        Ok(Self { n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        1 << self.n_modes
    }

    /// (target basis index, sign) of a ladder operator acting on |s⟩.
    #[inline]
    pub fn act(&self, op: Ladder, s: usize) -> Option<(usize, f64)> {
        let bit = 1usize << op.mode;
        let occupied = s & bit != 0;
        if occupied == op.dagger {
            return None;
        }
        let sign = if (s & (bit - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        Some((s ^ bit, sign))
    }

    pub fn apply(&self, op: Ladder, v: &CVector) -> CVector {
        let mut out = CVector::zeros(v.len());
        for s in 0..v.len() {
            if v[s] == ZERO {
                continue;
            }
            if let Some((t, sign)) = self.act(op, s) {
                out[t] += v[s] * sign;
            }
        }
        out
    }

    /// Applies the product `f_0 f_1 … f_{m−1}` (rightmost factor first).
    pub fn apply_string(&self, factors: &[Ladder], v: &CVector) -> CVector {
        factors.iter().rev().fold(v.clone(), |acc, &op| self.apply(op, &acc))
    }

    /// Dense matrix of `c_j`.
    pub fn annihilator(&self, mode: usize) -> CMatrix {
        self.matrix_of(Ladder::annihilate(mode))
    }

    pub fn matrix_of(&self, op: Ladder) -> CMatrix {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for s in 0..d {
            if let Some((t, sign)) = self.act(op, s) {
                m[(t, s)] = Complex64::new(sign, 0.0);
            }
        }
        m
    }

    /// Majoranas A_j = c_j† + c_j and A_{N+j} = i(c_j† − c_j).
    pub fn majoranas(&self) -> Vec<CMatrix> {
        let n = self.n_modes;
        let mut out = Vec::with_capacity(2 * n);
        for j in 0..n {
            out.push(self.matrix_of(Ladder::create(j)) + self.annihilator(j));
        }
        for j in 0..n {
            out.push((self.matrix_of(Ladder::create(j)) - self.annihilator(j)) * Complex64::new(0.0, 1.0));
        }
        out
    }

    /// e^{iΣ_j α_j n_j} on a vector.
    pub fn apply_number_phase(&self, alpha: &[f64], v: &CVector) -> CVector {
        CVector::from_fn(v.len(), |s, _| {
            let phase: f64 = (0..self.n_modes).filter(|&j| s >> j & 1 == 1).map(|j| alpha[j]).sum();
            v[s] * Complex64::from_polar(1.0, phase)
        })
    }

    /// exp(i Σ_{j<k} ω_jk n_j n_k) on a vector.
    pub fn apply_pair_phase(&self, omega: &crate::linalg::RMatrix, v: &CVector) -> CVector {
        CVector::from_fn(v.len(), |s, _| v[s] * Complex64::from_polar(1.0, pair_phase(omega, s, self.n_modes)))
    }

    pub fn hamiltonian_apply(&self, ham: &ManyBodyHamiltonian, v: &CVector) -> CVector {
        let mut out = CVector::zeros(v.len());
        for t in ham.one_body_terms() {
            out += self.apply_string(&[Ladder::create(t.p), Ladder::annihilate(t.q)], v) * t.value;
        }
        for t in ham.two_body_terms() {
            let w = self.apply_string(
                &[Ladder::create(t.p), Ladder::create(t.q), Ladder::annihilate(t.r), Ladder::annihilate(t.s)],
                v,
            );
            out += w * Complex64::new(0.5 * t.value, 0.0);
        }
        out
    }
}

/// Σ_{j<k} ω_jk n_j n_k on basis state s.
pub fn pair_phase(omega: &crate::linalg::RMatrix, s: usize, n: usize) -> f64 {
    let mut phase = 0.0;
    for j in 0..n {
        if s >> j & 1 == 0 {
            continue;
        }
        for k in (j + 1)..n {
            if s >> k & 1 == 1 {
                phase += omega[(j, k)];
            }
        }
    }
    phase
}

fn check_dense(n: usize) -> Result<()> {
    if n > MAX_DENSE_MODES {
        return Err(Error::Resource(format!("dense states support at most {MAX_DENSE_MODES} modes, got {n}")));
    }
    Ok(())
}

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    amplitudes: CVector,
}

impl DenseState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn vacuum(ops: &DenseOperatorSet) -> Self {
        let mut v = CVector::zeros(ops.dim());
        v[0] = Complex64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn basis(ops: &DenseOperatorSet, index: usize) -> Self {
        let mut v = CVector::zeros(ops.dim());
        v[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    /// U_FA·U_GS|0⟩ with U_GS = exp((i/4) Σ_kl ξ_kl A_k A_l).
    pub fn from_params(ops: &DenseOperatorSet, xi: &GaussianParams, omega: &NonGaussianParams) -> Result<Self> {
        let n = ops.n_modes();
        check_dense(n)?;
        if xi.n_modes() != n || omega.n_modes() != n {
            return Err(Error::Dimension("parameter sizes do not match the operator set".into()));
        }
        let majoranas = ops.majoranas();
        let d = ops.dim();
        let mut generator = CMatrix::zeros(d, d);
        for k in 0..2 * n {
            for l in 0..2 * n {
                let x = xi.xi()[(k, l)];
                if x != ZERO {
                    generator += &majoranas[k] * &majoranas[l] * x;
                }
            }
        }
        let u = (generator * Complex64::new(0.0, 0.25)).exp();
        let psi = u.column(0).into_owned();
        let psi = ops.apply_pair_phase(omega.matrix(), &psi);
        Ok(Self { amplitudes: psi })
    }

    /// A state with the given covariance: the ground state of
    /// −(i/4) Σ Γ_kl A_k A_l, gapped by 1 per mode for pure Γ.
    pub fn from_covariance(ops: &DenseOperatorSet, gamma: &CovarianceMatrix) -> Result<Self> {
        let n = ops.n_modes();
        check_dense(n)?;
        if gamma.n_modes() != n {
            return Err(Error::Dimension("covariance size does not match the operator set".into()));
        }
        let majoranas = ops.majoranas();
        let d = ops.dim();
        let mut h = CMatrix::zeros(d, d);
        for k in 0..2 * n {
            for l in 0..2 * n {
                let g = gamma.matrix()[(k, l)];
                if g != 0.0 {
                    h += &majoranas[k] * &majoranas[l] * Complex64::new(0.0, -0.25 * g);
                }
            }
        }
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let (_, v) = lowest_eigenpair(h);
        Ok(Self { amplitudes: v })
    }

    /// Applies the pair-phase unitary to this state.
    pub fn with_pair_phase(&self, ops: &DenseOperatorSet, omega: &NonGaussianParams) -> Self {
        Self { amplitudes: ops.apply_pair_phase(omega.matrix(), &self.amplitudes) }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// ⟨ψ| e^{iΣα n} · string |ψ⟩.
    pub fn expectation(&self, ops: &DenseOperatorSet, alpha: &PhaseVector, string: &OperatorString) -> Complex64 {
        let w = ops.apply_string(string.factors(), &self.amplitudes);
        let w = ops.apply_number_phase(alpha.as_slice(), &w);
        self.amplitudes.dotc(&w)
    }

    pub fn energy(&self, ops: &DenseOperatorSet, ham: &ManyBodyHamiltonian) -> f64 {
        self.amplitudes.dotc(&ops.hamiltonian_apply(ham, &self.amplitudes)).re
    }

    /// ⟨n_j⟩ for every mode.
    pub fn occupations(&self, ops: &DenseOperatorSet) -> Vec<f64> {
        (0..ops.n_modes())
            .map(|j| {
                self.amplitudes
                    .iter()
                    .enumerate()
                    .filter(|(s, _)| s >> j & 1 == 1)
                    .map(|(_, a)| a.norm_sqr())
                    .sum()
            })
            .collect()
    }
}

fn lowest_eigenpair(h: CMatrix) -> (f64, CVector) {
    let eig = SymmetricEigen::new(h);
    let (idx, &e0) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let v = eig.eigenvectors.column(idx).into_owned();
    let v = &v / Complex64::new(v.norm(), 0.0);
    (e0, v)
}

pub fn dense_hamiltonian(ops: &DenseOperatorSet, ham: &ManyBodyHamiltonian) -> Result<CMatrix> {
    check_dense(ops.n_modes())?;
    if ham.n_modes() != ops.n_modes() {
        return Err(Error::Dimension("Hamiltonian size does not match the operator set".into()));
    }
    let d = ops.dim();
    let mut m = DMatrix::zeros(d, d);
    for s in 0..d {
        let mut e = CVector::zeros(d);
        e[s] = Complex64::new(1.0, 0.0);
        m.set_column(s, &ops.hamiltonian_apply(ham, &e));
    }
    Ok(m)
}

/// Exact ground energy and a ground state.
pub fn dense_ground(ham: &ManyBodyHamiltonian) -> Result<(f64, DenseState)> {
    let ops = DenseOperatorSet::new(ham.n_modes())?;
    let h = dense_hamiltonian(&ops, ham)?;
    let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let (e0, v) = lowest_eigenpair(h);
    Ok((e0, DenseState { amplitudes: v }))
}

/// |⟨a|b⟩|.
pub fn overlap(a: &DenseState, b: &DenseState) -> Result<f64> {
    if a.amplitudes.len() != b.amplitudes.len() {
        return Err(Error::Dimension(format!(
            "overlap of states with {} and {} amplitudes",
            a.amplitudes.len(),
            b.amplitudes.len()
        )));
    }
    Ok(a.amplitudes.dotc(&b.amplitudes).norm())
}

/// Exact energy of the non-Gaussian state built from (Γ, ω).
pub fn dense_energy(gamma: &CovarianceMatrix, omega: &NonGaussianParams, ham: &ManyBodyHamiltonian) -> Result<f64> {
    let ops = DenseOperatorSet::new(gamma.n_modes())?;
    let psi = DenseState::from_covariance(&ops, gamma)?.with_pair_phase(&ops, omega);
    Ok(psi.energy(&ops, ham))
}
