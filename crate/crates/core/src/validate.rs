//! Cross-checks of the fast paths against the dense oracle, finite
//! differences and exact identities. Each check reports the largest
//! deviation it saw next to the tolerance it was held to.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::Serialize;

use crate::circuit::{dense_unitary_diagonal, emit_ufa, parse_qasm, to_qasm, verify_dense};
use crate::error::Result;
use crate::gaussian::{covariance_from_xi, random_covariance, random_gaussian_params, symplectic_form, CovarianceMatrix};
use crate::hamiltonian::{
    energy, energy_gradient_omega, mean_field_h_raw, mean_field_o, random_hamiltonian, real_skew_part, ManyBodyHamiltonian,
    NonGaussianParams,
};
use crate::linalg::{pfaffian, skew_violation, to_complex, CMatrix, RMatrix, SkewMatrix};
use crate::optimizer::{b_tensor, dtau_omega_hitgd};
use crate::oracle::{DenseOperatorSet, DenseState};
use crate::wick::{
    a_coeff, g_matrix, g_matrix_with, plain_wick, q_matrix, q_matrix_with, Contraction, InversePath, Ladder,
    OperatorString, PhaseVector,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub samples: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckResult {
    fn new(name: &str, samples: usize, max_deviation: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            samples,
            max_deviation,
            tolerance,
            passed: max_deviation.is_finite() && max_deviation < tolerance,
            detail: None,
        }
    }

    fn failed(name: &str, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            samples: 0,
            max_deviation: f64::INFINITY,
            tolerance,
            passed: false,
            detail: Some(detail),
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

fn guard(name: &str, tolerance: f64, body: impl FnOnce() -> Result<CheckResult>) -> CheckResult {
    body().unwrap_or_else(|e| CheckResult::failed(name, tolerance, e.to_string()))
}

pub fn random_phases(rng: &mut impl Rng, n: usize) -> PhaseVector {
    PhaseVector::new((0..n).map(|_| rng.random_range(-PI..PI)).collect())
}

pub fn random_omega(rng: &mut impl Rng, n: usize, scale: f64) -> NonGaussianParams {
    let values: Vec<f64> = (0..n * n.saturating_sub(1) / 2).map(|_| rng.random_range(-scale..scale)).collect();
    NonGaussianParams::from_pairs(n, &values).expect("pair list has the right length")
}

pub fn random_string(rng: &mut impl Rng, n: usize, len: usize) -> OperatorString {
    let factors = (0..len).map(|_| Ladder { mode: rng.random_range(0..n), dagger: rng.random_bool(0.5) }).collect();
    OperatorString::new(factors).expect("even length within bounds")
}

fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Generalized Wick expectations against the dense state built from ξ.
pub fn check_wick(rng: &mut impl Rng, n: usize, draws: usize, strings: usize) -> CheckResult {
    let tol = 1e-9;
    guard("wick_vs_dense", tol, || {
        let ops = DenseOperatorSet::new(n)?;
        let mut worst = 0.0f64;
        for _ in 0..draws {
            let xi = random_gaussian_params(rng, n, 1.0);
            let gamma = covariance_from_xi(&xi);
            let psi = DenseState::from_params(&ops, &xi, &NonGaussianParams::zeros(n))?;
            let alpha = random_phases(rng, n);
            let c = Contraction::new(&gamma, &alpha)?;
            for _ in 0..strings {
                let len = [0, 2, 4, 6][rng.random_range(0..4)];
                let string = random_string(rng, n, len);
                let wick = c.expectation(&string)?;
                worst = worst.max((wick - psi.expectation(&ops, &alpha, &string)).norm());
            }
        }
        Ok(CheckResult::new("wick_vs_dense", draws * strings, worst, tol))
    })
}

/// The zero-phase path against the textbook Wick sum and G[0] = Γ + Υ.
pub fn check_plain_wick(rng: &mut impl Rng, n: usize, draws: usize) -> CheckResult {
    let tol = 1e-12;
    guard("plain_wick_reduction", tol, || {
        let mut worst = 0.0f64;
        let alpha = PhaseVector::zeros(n);
        for _ in 0..draws {
            let gamma = random_covariance(rng, n, 1.0);
            let g0 = to_complex(&(gamma.matrix() + symplectic_form(n)));
            worst = worst.max(max_abs_diff(g_matrix(&gamma, &alpha)?.entries(), &g0));
            let c = Contraction::new(&gamma, &alpha)?;
            for len in [2, 4, 6] {
                let string = random_string(rng, n, len);
                worst = worst.max((c.expectation(&string)? - plain_wick(&gamma, &string)?).norm());
            }
        }
        Ok(CheckResult::new("plain_wick_reduction", draws, worst, tol))
    })
}

/// energy() against ⟨Ψ|Ĥ|Ψ⟩ with Ψ built densely from (ξ, ω).
pub fn check_energy(rng: &mut impl Rng, ham: &ManyBodyHamiltonian, draws: usize) -> CheckResult {
    let tol = 1e-10;
    guard("energy_vs_dense", tol, || {
        let n = ham.n_modes();
        let ops = DenseOperatorSet::new(n)?;
        let mut worst = 0.0f64;
        for _ in 0..draws {
            let xi = random_gaussian_params(rng, n, 1.0);
            let omega = random_omega(rng, n, PI);
            let dense = DenseState::from_params(&ops, &xi, &omega)?.energy(&ops, ham);
            let fast = energy(&covariance_from_xi(&xi), &omega, ham)?.total;
            worst = worst.max((fast - dense).abs());
        }
        Ok(CheckResult::new("energy_vs_dense", draws, worst, tol))
    })
}

/// ∂E/∂ω against central differences of the dense energy. Moving the pair
/// coordinate shifts ω_ij and ω_ji together, which doubles the derivative.
pub fn check_gradient(rng: &mut impl Rng, ham: &ManyBodyHamiltonian, instances: usize) -> CheckResult {
    let tol = 1e-6;
    let eps = 1e-5;
    guard("gradient_vs_fd", tol, || {
        let n = ham.n_modes();
        let ops = DenseOperatorSet::new(n)?;
        let mut worst = 0.0f64;
        for _ in 0..instances {
            let xi = random_gaussian_params(rng, n, 1.0);
            let omega = random_omega(rng, n, PI);
            let grad = energy_gradient_omega(&covariance_from_xi(&xi), &omega, ham)?;
            let mut fd = RMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let shifted = |sign: f64| -> Result<f64> {
                        let mut w = omega.matrix().clone();
                        w[(i, j)] += sign * eps;
                        w[(j, i)] += sign * eps;
                        Ok(DenseState::from_params(&ops, &xi, &NonGaussianParams::new(w)?)?.energy(&ops, ham))
                    };
                    let d = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * eps);
                    fd[(i, j)] = 0.5 * d;
                    fd[(j, i)] = 0.5 * d;
                }
            }
            let scale = fd.amax().max(1e-3);
            worst = worst.max((&grad - &fd).amax() / scale);
        }
        Ok(CheckResult::new("gradient_vs_fd", instances, worst, tol))
    })
}

/// H_m against finite differences of energy() along the skew direction
/// e_ij − e_ji. The independent-entry derivative is half of that one, so
/// H_m equals four times it and twice the directional one.
pub fn check_mean_field_h(rng: &mut impl Rng, ham: &ManyBodyHamiltonian, instances: usize) -> CheckResult {
    let tol = 1e-6;
    let eps = 1e-5;
    guard("mean_field_h_vs_fd", tol, || {
        let n = ham.n_modes();
        let dim = 2 * n;
        let mut worst = 0.0f64;
        let mut structure = 0.0f64;
        for _ in 0..instances {
            let gamma = random_covariance(rng, n, 1.0);
            let omega = random_omega(rng, n, PI);
            let raw = mean_field_h_raw(&gamma, &omega, ham)?;
            structure = structure.max(raw.map(|z| z.im).amax()).max(skew_violation(&raw));
            let h = real_skew_part(&raw);
            let mut fd = RMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in (i + 1)..dim {
                    let mut d = RMatrix::zeros(dim, dim);
                    d[(i, j)] = eps;
                    d[(j, i)] = -eps;
                    let ep = energy(&CovarianceMatrix::unchecked(gamma.matrix() + &d), &omega, ham)?.total;
                    let em = energy(&CovarianceMatrix::unchecked(gamma.matrix() - &d), &omega, ham)?.total;
                    let v = 2.0 * (ep - em) / (2.0 * eps);
                    fd[(i, j)] = v;
                    fd[(j, i)] = -v;
                }
            }
            let scale = fd.amax().max(1e-3);
            worst = worst.max((&h - &fd).amax() / scale);
        }
        let result = CheckResult::new("mean_field_h_vs_fd", instances, worst, tol);
        if structure >= 1e-9 {
            return Ok(CheckResult { passed: false, ..result }
                .with_detail(format!("imaginary part or skew violation {structure:e}")));
        }
        Ok(result.with_detail(format!("imaginary part and skew violation ≤ {structure:e}")))
    })
}

/// Σ dω·B·dω against tr(O(dω)²).
pub fn check_b_tensor(rng: &mut impl Rng, n: usize, draws: usize) -> CheckResult {
    let tol = 1e-10;
    guard("b_tensor_vs_trace", tol, || {
        let mut worst = 0.0f64;
        for _ in 0..draws {
            let gamma = random_covariance(rng, n, 1.0);
            let dw = random_omega(rng, n, 1.0);
            let o = mean_field_o(&gamma, dw.matrix())?;
            let tr = (&o * &o).trace();
            worst = worst.max((tr - b_tensor(&gamma).quadratic_form(dw.matrix())).norm());
        }
        Ok(CheckResult::new("b_tensor_vs_trace", draws, worst, tol))
    })
}

/// ⅛·tr(O²) + Σ ∂E/∂ω · dω for the pseudo-inverse velocity.
pub fn check_cancellation(rng: &mut impl Rng, ham: &ManyBodyHamiltonian, instances: usize) -> CheckResult {
    let tol = 1e-10;
    guard("hitgd_cancellation", tol, || {
        let n = ham.n_modes();
        let mut worst = 0.0f64;
        for _ in 0..instances {
            let gamma = random_covariance(rng, n, 1.0);
            let omega = random_omega(rng, n, PI);
            let grad = energy_gradient_omega(&gamma, &omega, ham)?;
            let dw = dtau_omega_hitgd(&b_tensor(&gamma), &grad)?;
            let o = mean_field_o(&gamma, &dw)?;
            let residual = (&o * &o).trace().re / 8.0 + grad.component_mul(&dw).sum();
            worst = worst.max(residual.abs());
        }
        Ok(CheckResult::new("hitgd_cancellation", instances, worst, tol))
    })
}

/// Rank-one assembly of G and Q against direct inversion, and the
/// automatic fallback once a mode carries no phase.
pub fn check_rank_one_paths(rng: &mut impl Rng, n: usize, draws: usize) -> CheckResult {
    let tol = 1e-10;
    guard("rank_one_vs_direct", tol, || {
        let mut worst = 0.0f64;
        let mut fallbacks = 0;
        for _ in 0..draws {
            let gamma = random_covariance(rng, n, 1.0);
            let alpha = random_phases(rng, n);
            let g_fast = g_matrix_with(&gamma, &alpha, InversePath::RankOne)?;
            let g_slow = g_matrix_with(&gamma, &alpha, InversePath::Direct)?;
            let q_fast = q_matrix_with(&gamma, &alpha, InversePath::RankOne)?;
            let q_slow = q_matrix_with(&gamma, &alpha, InversePath::Direct)?;
            worst = worst.max(max_abs_diff(&g_fast, &g_slow)).max(max_abs_diff(&q_fast, &q_slow));

            let mut injected = alpha.as_slice().to_vec();
            injected[rng.random_range(0..n)] = 0.0;
            let injected = PhaseVector::new(injected);
            let (q_auto, path) = q_matrix(&gamma, &injected)?;
            if path != InversePath::Direct {
                return Ok(CheckResult::failed("rank_one_vs_direct", tol, "no fallback for an unphased mode".into()));
            }
            let g_auto = g_matrix(&gamma, &injected)?;
            worst = worst
                .max(max_abs_diff(g_auto.entries(), &g_matrix_with(&gamma, &injected, InversePath::Direct)?))
                .max(max_abs_diff(&q_auto, &q_matrix_with(&gamma, &injected, InversePath::Direct)?));
            fallbacks += 1;
        }
        Ok(CheckResult::new("rank_one_vs_direct", draws, worst, tol)
            .with_detail(format!("{fallbacks} injected zero-phase draws fell back to direct inversion")))
    })
}

/// Emitted circuit against the exact phase unitary, the QASM text read
/// back, and the gate counts for dense ω.
pub fn check_circuit(rng: &mut impl Rng, n: usize, draws: usize) -> CheckResult {
    let tol = 1e-10;
    guard("circuit_fidelity", tol, || {
        let mut worst = 0.0f64;
        for _ in 0..draws {
            let omega = random_omega(rng, n, PI);
            let gates = emit_ufa(&omega);
            if gates.rz_count() != n || gates.zz_count() != n * (n - 1) / 2 {
                return Ok(CheckResult::failed(
                    "circuit_fidelity",
                    tol,
                    format!("{} Rz and {} ZZ gates for dense ω on {n} qubits", gates.rz_count(), gates.zz_count()),
                ));
            }
            worst = worst.max(verify_dense(&gates, &omega)?);
            let direct = dense_unitary_diagonal(&gates)?;
            let replay = parse_qasm(&to_qasm(&gates, false))?.diagonal()?;
            worst = worst.max(direct.iter().zip(&replay).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
        }
        Ok(CheckResult::new("circuit_fidelity", draws, worst, tol)
            .with_detail(format!("{n} Rz and {} ZZ gates per dense ω", n * (n - 1) / 2)))
    })
}

pub fn random_skew(rng: &mut impl Rng, dim: usize) -> SkewMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in (i + 1)..dim {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = -z;
        }
    }
    SkewMatrix::new(m).expect("antisymmetric by construction")
}

/// Pf² = det on random complex skew matrices, and A[0] = 1 on random
/// covariances.
pub fn check_pfaffian(rng: &mut impl Rng, draws: usize, max_dim: usize, covariances: usize, n: usize) -> CheckResult {
    let tol = 1e-10;
    guard("pfaffian_identities", tol, || {
        let mut worst = 0.0f64;
        let dims: Vec<usize> = (1..=max_dim / 2).map(|k| 2 * k).collect();
        for k in 0..draws {
            let s = random_skew(rng, dims[k % dims.len()]);
            let pf = pfaffian(&s);
            let det = DMatrix::from(s.entries().clone()).determinant();
            let scale = det.norm().max((pf * pf).norm()).max(f64::MIN_POSITIVE);
            worst = worst.max((pf * pf - det).norm() / scale);
        }
        let mut unit = 0.0f64;
        for _ in 0..covariances {
            let gamma = random_covariance(rng, n, 1.0);
            unit = unit.max((a_coeff(&gamma, &PhaseVector::zeros(n))? - 1.0).norm());
        }
        let result = CheckResult::new("pfaffian_identities", draws + covariances, worst, tol);
        if unit >= 1e-12 {
            return Ok(CheckResult { passed: false, ..result }.with_detail(format!("|A[0] − 1| reached {unit:e}")));
        }
        Ok(result.with_detail(format!("|A[0] − 1| ≤ {unit:e}")))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub n_modes: usize,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// A quick pass over every check with a random Hamiltonian on `n_modes`
/// modes, reproducible from `seed`.
pub fn run_validation(n_modes: usize, seed: u64) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ham = random_hamiltonian(&mut rng, n_modes, 1.0);
    run_checks(&mut rng, &ham, seed)
}

/// As [`run_validation`], with the Hamiltonian-dependent checks run on
/// `ham`.
pub fn run_validation_for(ham: &ManyBodyHamiltonian, seed: u64) -> ValidationReport {
    run_checks(&mut ChaCha8Rng::seed_from_u64(seed), ham, seed)
}

fn run_checks(rng: &mut ChaCha8Rng, ham: &ManyBodyHamiltonian, seed: u64) -> ValidationReport {
    let n = ham.n_modes();
    let checks = vec![
        check_wick(rng, n, 10, 20),
        check_plain_wick(rng, n, 10),
        check_energy(rng, ham, 10),
        check_gradient(rng, ham, 3),
        check_mean_field_h(rng, ham, 3),
        check_b_tensor(rng, n, 10),
        check_cancellation(rng, ham, 5),
        check_rank_one_paths(rng, n, 10),
        check_circuit(rng, n, 10),
        check_pfaffian(rng, 40, 12, 10, n),
    ];
    ValidationReport { seed, n_modes: n, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_validation_passes_at_three_modes() {
        let report = run_validation(3, 11);
        for c in &report.checks {
            assert!(c.passed, "{c:?}");
        }
        assert_eq!(report.checks.len(), 10);
    }

    #[test]
    fn same_seed_same_report() {
        let a = run_validation(2, 5);
        let b = run_validation(2, 5);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
