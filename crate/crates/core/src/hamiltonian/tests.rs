use super::*;
use crate::gaussian::{mean_field_init, random_covariance};
use crate::oracle::{dense_energy, dense_ground};
use crate::wick::plain_wick;
use crate::wick::OperatorString;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_omega(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> NonGaussianParams {
    let values: Vec<f64> = (0..n * (n - 1) / 2).map(|_| rng.random_range(-scale..scale)).collect();
    NonGaussianParams::from_pairs(n, &values).unwrap()
}

#[test]
fn rotation_at_zero_omega_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ham = random_hamiltonian(&mut rng, 3, 1.0);
    let rot = rotate_coefficients(&ham, &NonGaussianParams::zeros(3)).unwrap();
    assert_eq!(rot.one_body.len(), ham.one_body_terms().len());
    assert_eq!(rot.two_body.len(), ham.two_body_terms().len());
    for (r, t) in rot.one_body.iter().zip(ham.one_body_terms()) {
        assert_eq!(r.coeff, t.value);
        assert!(r.alpha.as_slice().iter().all(|&a| a == 0.0));
    }
    for (r, t) in rot.two_body.iter().zip(ham.two_body_terms()) {
        assert_eq!(r.coeff, Complex64::new(t.value, 0.0));
        assert!(r.beta.as_slice().iter().all(|&a| a == 0.0));
    }
}

#[test]
fn alpha_two_modes_by_hand() {
    let w = 0.37;
    let omega = NonGaussianParams::from_pairs(2, &[w]).unwrap();
    assert_eq!(alpha_fa(omega.matrix(), 0, 1), vec![w, -w]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let omega = random_omega(&mut rng, 4, 2.0);
    for p in 0..4 {
        for q in 0..4 {
            let a = alpha_fa(omega.matrix(), p, q);
            let b = alpha_fa(omega.matrix(), q, p);
            assert!(a.iter().zip(&b).all(|(x, y)| x == &-y));
        }
    }
}

#[test]
fn vacuum_energy_and_gradient_vanish() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ham = random_hamiltonian(&mut rng, 3, 1.0);
    let omega = random_omega(&mut rng, 3, 1.0);
    let vac = CovarianceMatrix::vacuum(3);
    assert!(energy(&vac, &omega, &ham).unwrap().total.abs() < 1e-14);
    assert!(energy_gradient_omega(&vac, &omega, &ham).unwrap().camax() < 1e-14);
}

#[test]
fn zero_omega_energy_is_plain_wick() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ham = random_hamiltonian(&mut rng, 3, 1.0);
    for _ in 0..5 {
        let gamma = random_covariance(&mut rng, 3, 1.0);
        let mut expected = Complex64::new(0.0, 0.0);
        for t in ham.one_body_terms() {
            expected += t.value * plain_wick(&gamma, &OperatorString::normal_ordered(&[t.p], &[t.q]).unwrap()).unwrap();
        }
        for t in ham.two_body_terms() {
            expected += 0.5
                * t.value
                * plain_wick(&gamma, &OperatorString::normal_ordered(&[t.p, t.q], &[t.r, t.s]).unwrap()).unwrap();
        }
        let e = energy(&gamma, &NonGaussianParams::zeros(3), &ham).unwrap();
        assert!((e.total - expected.re).abs() < 1e-12);
        assert!((e.one_body + e.two_body - e.total).abs() < 1e-15);
    }
}

#[test]
fn energy_matches_dense_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let hubbard = hubbard_model(2, 1.0, 4.0, 2.0, false).unwrap();
    let general = random_hamiltonian(&mut rng, 4, 1.0);
    for ham in [&hubbard, &general] {
        for _ in 0..4 {
            let gamma = random_covariance(&mut rng, 4, 1.0);
            let omega = random_omega(&mut rng, 4, 2.0);
            let e = energy(&gamma, &omega, ham).unwrap().total;
            let exact = dense_energy(&gamma, &omega, ham).unwrap();
            assert!((e - exact).abs() < 1e-10, "{e} vs {exact}");
        }
    }
}

#[test]
fn gradient_zero_for_zero_hamiltonian() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let gamma = random_covariance(&mut rng, 3, 1.0);
    let omega = random_omega(&mut rng, 3, 1.0);
    let g = energy_gradient_omega(&gamma, &omega, &ManyBodyHamiltonian::zero(3)).unwrap();
    assert_eq!(g, RMatrix::zeros(3, 3));
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 4;
    let ham = random_hamiltonian(&mut rng, n, 1.0);
    let gamma = random_covariance(&mut rng, n, 1.0);
    let omega = random_omega(&mut rng, n, 1.5);
    let grad = energy_gradient_omega(&gamma, &omega, &ham).unwrap();
    let eps = 1e-5;
    for i in 0..n {
        assert_eq!(grad[(i, i)], 0.0);
        for j in (i + 1)..n {
            assert_eq!(grad[(i, j)], grad[(j, i)]);
            let mut plus = omega.matrix().clone();
            plus[(i, j)] += eps;
            plus[(j, i)] += eps;
            let mut minus = omega.matrix().clone();
            minus[(i, j)] -= eps;
            minus[(j, i)] -= eps;
            let ep = dense_energy(&gamma, &NonGaussianParams::new(plus).unwrap(), &ham).unwrap();
            let em = dense_energy(&gamma, &NonGaussianParams::new(minus).unwrap(), &ham).unwrap();
            // a symmetric perturbation moves both ω_ij and ω_ji
            let fd = (ep - em) / (2.0 * eps) / 2.0;
            assert!((grad[(i, j)] - fd).abs() < 1e-6 * fd.abs().max(1.0), "({i},{j}): {} vs {fd}", grad[(i, j)]);
        }
    }
}

fn structured_fd(gamma: &CovarianceMatrix, omega: &NonGaussianParams, ham: &ManyBodyHamiltonian, i: usize, j: usize) -> f64 {
    let eps = 1e-5;
    let mut d = RMatrix::zeros(gamma.matrix().nrows(), gamma.matrix().ncols());
    d[(i, j)] = eps;
    d[(j, i)] = -eps;
    let ep = energy(&CovarianceMatrix::unchecked(gamma.matrix() + &d), omega, ham).unwrap().total;
    let em = energy(&CovarianceMatrix::unchecked(gamma.matrix() - &d), omega, ham).unwrap().total;
    (ep - em) / (2.0 * eps)
}

#[test]
fn mean_field_h_zero_hamiltonian() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let gamma = random_covariance(&mut rng, 3, 1.0);
    let h = mean_field_h(&gamma, &random_omega(&mut rng, 3, 1.0), &ManyBodyHamiltonian::zero(3)).unwrap();
    assert_eq!(h, RMatrix::zeros(6, 6));
}

#[test]
fn mean_field_h_matches_structured_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 3;
    for ham in [random_hamiltonian(&mut rng, n, 1.0), hubbard_model(2, 1.0, 4.0, 2.0, false).unwrap()] {
        let n = ham.n_modes();
        let gamma = random_covariance(&mut rng, n, 1.0);
        let omega = random_omega(&mut rng, n, 1.0);
        let raw = mean_field_h_raw(&gamma, &omega, &ham).unwrap();
        assert!(raw.map(|z| z.im).camax() < 1e-9);
        assert!(crate::linalg::skew_violation(&raw) < 1e-9);
        let h = real_skew_part(&raw);
        for i in 0..2 * n {
            for j in (i + 1)..2 * n {
                // directional derivative along e_ij − e_ji is twice the structured one
                let fd = structured_fd(&gamma, &omega, &ham, i, j);
                assert!((h[(i, j)] - 2.0 * fd).abs() < 1e-6 * fd.abs().max(1.0), "({i},{j}) {} vs {}", h[(i, j)], 2.0 * fd);
            }
        }
    }
}

#[test]
fn quadratic_hamiltonian_mean_field_at_zero_omega() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let ham = hubbard_model(3, 1.0, 0.0, 0.3, true).unwrap();
    let gamma = random_covariance(&mut rng, 6, 1.0);
    let omega = NonGaussianParams::zeros(6);
    let h = mean_field_h(&gamma, &omega, &ham).unwrap();
    for (i, j) in [(0, 1), (2, 9), (4, 11), (7, 8)] {
        let fd = structured_fd(&gamma, &omega, &ham, i, j);
        assert!((h[(i, j)] - 2.0 * fd).abs() < 1e-6 * fd.abs().max(1.0));
    }
}

#[test]
fn mean_field_o_simple_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gamma = random_covariance(&mut rng, 3, 1.0);
    assert_eq!(mean_field_o(&gamma, &RMatrix::zeros(3, 3)).unwrap(), CMatrix::zeros(6, 6));
    let dw = random_omega(&mut rng, 3, 1.0);
    let o = mean_field_o(&CovarianceMatrix::vacuum(3), dw.matrix()).unwrap();
    assert!(o.camax() < 1e-15);
    let o = mean_field_o(&gamma, dw.matrix()).unwrap();
    let io = o * Complex64::new(0.0, 1.0);
    assert!(io.map(|z| z.im).camax() < 1e-15);
    assert!(crate::linalg::skew_violation(&io) < 1e-14);
}

#[test]
fn hubbard_reference_energies() {
    let ham = hubbard_model(2, 1.0, 4.0, 2.0, false).unwrap();
    assert_eq!(ham.n_modes(), 4);
    let (e0, _) = dense_ground(&ham).unwrap();
    assert!((e0 - (2.0 - 2.0 * 2f64.sqrt() - 4.0)).abs() < 1e-10);
    assert!(matches!(hubbard_model(1, 1.0, 4.0, 2.0, false), Err(Error::Config(_))));

    // a 2-site ring is the open chain
    assert_eq!(hubbard_model(2, 1.0, 4.0, 2.0, true).unwrap(), ham);
}

#[test]
fn mean_field_start_energy() {
    let ham = hubbard_model(2, 1.0, 4.0, 2.0, false).unwrap();
    let gamma = mean_field_init(ham.f(), 2).unwrap();
    let e = energy(&gamma, &NonGaussianParams::zeros(4), &ham).unwrap();
    // bonding orbital of each spin: −2·(1 + 2) + U·¼·2 = −4
    assert!((e.total + 4.0).abs() < 1e-12, "{}", e.total);
}

#[test]
fn text_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ham = random_hamiltonian(&mut rng, 3, 1.0);
    let text = write_hamiltonian(&ham);
    let back = parse_hamiltonian(&text).unwrap();
    assert_eq!(back, ham);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.txt");
    let hub = hubbard_model(2, 1.0, 4.0, 2.0, false).unwrap();
    save_hamiltonian(&hub, &path).unwrap();
    let loaded = load_hamiltonian(&path).unwrap();
    let (e0, _) = dense_ground(&loaded).unwrap();
    assert!((e0 + 4.828427124746).abs() < 1e-9);
}

#[test]
fn loader_rejects_asymmetric_tensor() {
    let text = "NMODES 2\nH 1 2 2 1 1.0\n";
    match parse_hamiltonian(text) {
        Err(Error::Symmetry { indices, .. }) => assert_eq!(indices, vec![1, 2, 1, 2]),
        other => panic!("expected symmetry error, got {other:?}"),
    }
    let text = "NMODES 2\nF 1 2 1.0 0.5\nF 2 1 1.0 0.5\n";
    assert!(matches!(parse_hamiltonian(text), Err(Error::Symmetry { .. })));
}

#[test]
fn loader_reports_line_numbers() {
    let cases = [
        ("F 1 1 0 0\n", 1),
        ("NMODES 2\n\n# comment\nF 1 3 0 0\n", 4),
        ("NMODES 2\nX 1\n", 2),
        ("NMODES 2\nF 1 1 abc 0\n", 2),
        ("NMODES 2\nF 1 1 1 0\nF 1 1 1 0\n", 3),
    ];
    for (text, line) in cases {
        match parse_hamiltonian(text) {
            Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("expected parse error for {text:?}, got {other:?}"),
        }
    }
}
