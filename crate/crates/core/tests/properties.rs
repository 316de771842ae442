use std::f64::consts::PI;

use nalgebra::DMatrix;
use ngs_core::circuit::{emit_ufa, verify_dense};
use ngs_core::gaussian::{purify, random_covariance, CovarianceMatrix};
use ngs_core::hamiltonian::{parse_hamiltonian, random_hamiltonian, write_hamiltonian, NonGaussianParams};
use ngs_core::linalg::{pfaffian, RMatrix};
use ngs_core::optimizer::b_tensor;
use ngs_core::validate::{random_omega, random_phases, random_skew, random_string};
use ngs_core::wick::{expectation, wrap_phase, Contraction, PhaseVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pfaffian_squares_to_determinant(seed in any::<u64>(), half in 1usize..=6) {
        let s = random_skew(&mut rng(seed), 2 * half);
        let pf = pfaffian(&s);
        let det = DMatrix::from(s.entries().clone()).determinant();
        let scale = det.norm().max((pf * pf).norm()).max(1e-300);
        prop_assert!((pf * pf - det).norm() / scale < 1e-10);
    }

    #[test]
    fn wrap_phase_lands_in_half_open_interval(x in -1e4f64..1e4) {
        let w = wrap_phase(x);
        prop_assert!(w > -PI && w <= PI);
        let turns = (x - w) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn purification_is_idempotent(seed in any::<u64>(), n in 1usize..=4, noise in 0.0f64..1e-3) {
        let mut r = rng(seed);
        let gamma = random_covariance(&mut r, n, 1.0);
        let mut raw = gamma.matrix().clone();
        let dim = 2 * n;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let d = noise * (((i * 7 + j * 13) % 11) as f64 / 11.0 - 0.5);
                raw[(i, j)] += d;
                raw[(j, i)] -= d;
            }
        }
        let once = purify(&raw).unwrap();
        prop_assert!(once.purity_defect() < 1e-10);
        let twice = purify(once.matrix()).unwrap();
        prop_assert!((twice.matrix() - once.matrix()).amax() < 1e-12);
    }

    #[test]
    fn b_tensor_is_symmetric_with_empty_diagonal(seed in any::<u64>(), n in 2usize..=4) {
        let b = b_tensor(&random_covariance(&mut rng(seed), n, 1.0));
        for k in 0..n {
            for l in 0..n {
                for m in 0..n {
                    for q in 0..n {
                        let v = b.get(k, l, m, q);
                        prop_assert_eq!(v, b.get(l, k, m, q));
                        prop_assert_eq!(v, b.get(k, l, q, m));
                        prop_assert_eq!(v, b.get(m, q, k, l));
                        if k == l || m == q {
                            prop_assert_eq!(v, 0.0);
                        }
                    }
                }
            }
        }
    }

    /// conj(E(α, s)) = e^{iθ}·E(−α, s†), where θ collects +α_j for every
    /// creator and −α_j for every annihilator of s†: commuting e^{−iαn}
    /// through s† picks up exactly those phases.
    #[test]
    fn conjugation_flips_phases(seed in any::<u64>(), n in 2usize..=4, half in 0usize..=3) {
        let mut r = rng(seed);
        let gamma = random_covariance(&mut r, n, 1.0);
        let alpha = random_phases(&mut r, n);
        let string = random_string(&mut r, n, 2 * half);
        let adjoint = string.adjoint();
        let theta: f64 = adjoint
            .factors()
            .iter()
            .map(|f| if f.dagger { alpha.as_slice()[f.mode] } else { -alpha.as_slice()[f.mode] })
            .sum();
        let minus = PhaseVector::new(alpha.as_slice().iter().map(|a| -a).collect());
        let lhs = expectation(&gamma, &alpha, &string).unwrap().conj();
        let rhs = Complex64::from_polar(1.0, theta) * expectation(&gamma, &minus, &adjoint).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-10, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn adjoint_is_an_involution(seed in any::<u64>(), half in 0usize..=4) {
        let s = random_string(&mut rng(seed), 5, 2 * half);
        prop_assert_eq!(s.adjoint().adjoint(), s);
    }

    #[test]
    fn cached_contraction_agrees_with_free_function(seed in any::<u64>(), n in 2usize..=4, half in 1usize..=3) {
        let mut r = rng(seed);
        let gamma = random_covariance(&mut r, n, 1.0);
        let alpha = random_phases(&mut r, n);
        let string = random_string(&mut r, n, 2 * half);
        let a = Contraction::new(&gamma, &alpha).unwrap().expectation(&string).unwrap();
        let b = expectation(&gamma, &alpha, &string).unwrap();
        prop_assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn hamiltonian_text_round_trip(seed in any::<u64>(), n in 1usize..=4) {
        let ham = random_hamiltonian(&mut rng(seed), n, 2.0);
        let back = parse_hamiltonian(&write_hamiltonian(&ham)).unwrap();
        prop_assert_eq!(back, ham);
    }

    #[test]
    fn circuit_matches_phase_unitary(seed in any::<u64>(), n in 1usize..=5) {
        let omega = random_omega(&mut rng(seed), n, 4.0 * PI);
        prop_assert!(verify_dense(&emit_ufa(&omega), &omega).unwrap() < 1e-10);
    }
}

#[test]
fn vacuum_and_filled_are_pure() {
    for n in 1..=5 {
        assert_eq!(CovarianceMatrix::vacuum(n).purity_defect(), 0.0);
        assert_eq!(CovarianceMatrix::filled(n).purity_defect(), 0.0);
    }
    let omega = NonGaussianParams::zeros(3);
    assert_eq!(omega.matrix(), &RMatrix::zeros(3, 3));
}
