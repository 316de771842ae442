//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

use std::io::Write;
use std::time::{Duration, Instant};

use ngs_core::gaussian::{mean_field_init, perturb_covariance};
use ngs_core::hamiltonian::{energy, hubbard_model, random_hamiltonian, NonGaussianParams};
use ngs_core::optimizer::{run, OmegaUpdate, OptimizerConfig, OptimizerState};
use ngs_core::oracle::dense_ground;
use ngs_core::validate::{self, CheckResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// written to the stdout handle rather than through `println!`, which the test
// harness captures for passing tests
fn report(id: u32, title: &str, passed: bool, summary: String) {
    let line = format!("[{}] criterion {id:>2} {title}: {summary}\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn report_check(id: u32, title: &str, check: &CheckResult, elapsed: Duration, budget: Option<Duration>) -> bool {
    let in_time = budget.is_none_or(|b| elapsed < b);
    let passed = check.passed && in_time;
    let mut summary = format!(
        "max deviation {:.3e} (tol {:.0e}, {} samples, {:.2?})",
        check.max_deviation, check.tolerance, check.samples, elapsed
    );
    if let Some(d) = &check.detail {
        summary += &format!("; {d}");
    }
    if !in_time {
        summary += "; over the time budget";
    }
    report(id, title, passed, summary);
    passed
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn criterion_01_generalized_wick_matches_dense() {
    let start = Instant::now();
    let mut r = rng(101);
    let checks: Vec<CheckResult> = [2, 3, 4].iter().map(|&n| validate::check_wick(&mut r, n, 50, 20)).collect();
    let worst = checks.iter().map(|c| c.max_deviation).fold(0.0, f64::max);
    let merged = CheckResult {
        name: "wick_vs_dense".into(),
        samples: checks.iter().map(|c| c.samples).sum(),
        max_deviation: worst,
        tolerance: 1e-9,
        passed: checks.iter().all(|c| c.passed),
        detail: checks.iter().find_map(|c| c.detail.clone()),
    };
    assert!(report_check(1, "generalized Wick vs dense (N = 2, 3, 4)", &merged, start.elapsed(), Some(Duration::from_secs(120))));
}

#[test]
fn criterion_02_zero_phase_reduces_to_plain_wick() {
    let start = Instant::now();
    let check = validate::check_plain_wick(&mut rng(102), 4, 50);
    assert!(report_check(2, "zero-phase path equals plain Wick", &check, start.elapsed(), None));
}

#[test]
fn criterion_03_energy_matches_dense_for_hubbard() {
    let start = Instant::now();
    let ham = hubbard_model(2, 1.0, 4.0, 2.0, false).unwrap();
    let check = validate::check_energy(&mut rng(103), &ham, 20);
    assert!(report_check(3, "energy vs dense, 2-site Hubbard", &check, start.elapsed(), Some(Duration::from_secs(30))));
}

#[test]
fn criterion_04_omega_gradient_matches_finite_differences() {
    let start = Instant::now();
    let mut r = rng(104);
    let ham = random_hamiltonian(&mut r, 4, 1.0);
    let check = validate::check_gradient(&mut r, &ham, 10);
    assert!(report_check(4, "ω-gradient vs central differences (N = 4)", &check, start.elapsed(), None));
}

#[test]
fn criterion_05_mean_field_h_matches_finite_differences() {
    let start = Instant::now();
    let mut r = rng(105);
    let ham = random_hamiltonian(&mut r, 4, 1.0);
    let check = validate::check_mean_field_h(&mut r, &ham, 10);
    assert!(report_check(5, "mean-field H vs skew-direction differences", &check, start.elapsed(), None));
}

#[test]
fn criterion_06_b_tensor_reproduces_trace() {
    let start = Instant::now();
    let check = validate::check_b_tensor(&mut rng(106), 4, 50);
    assert!(report_check(6, "B quadratic form equals tr(O²)", &check, start.elapsed(), None));
}

#[test]
fn criterion_07_pseudo_inverse_update_cancels() {
    let start = Instant::now();
    let mut r = rng(107);
    let ham = random_hamiltonian(&mut r, 4, 1.0);
    let check = validate::check_cancellation(&mut r, &ham, 20);
    assert!(report_check(7, "pseudo-inverse ω-update cancellation", &check, start.elapsed(), None));
}

struct Monotone {
    steps: usize,
    worst_rise: f64,
}

fn monotone_run(config: &OptimizerConfig, initial: OptimizerState) -> (OptimizerState, Monotone) {
    let ham = hubbard_model(2, 1.0, 4.0, 2.0, false).unwrap();
    let mut last = initial.energy;
    let mut worst_rise = f64::NEG_INFINITY;
    let out = run(&ham, initial, config, |rec, _| {
        worst_rise = worst_rise.max(rec.energy - last);
        last = rec.energy;
        Ok(())
    })
    .unwrap();
    let steps = out.trajectory.len();
    (out.state, Monotone { steps, worst_rise })
}

#[test]
fn criterion_08_monotone_hubbard_optimization() {
    let start = Instant::now();
    let ham = hubbard_model(2, 1.0, 4.0, 2.0, false).unwrap();
    let (e_exact, _) = dense_ground(&ham).unwrap();
    let mean_field = mean_field_init(ham.f(), 2).unwrap();
    let e_mf = energy(&mean_field, &NonGaussianParams::zeros(4), &ham).unwrap().total;
    // the mean-field determinant is stationary, so both runs start from the
    // same slightly rotated copy of it
    let gamma0 = perturb_covariance(&mean_field, &mut rng(108), 1e-2);
    let initial = OptimizerState::new(gamma0, NonGaussianParams::zeros(4), &ham, 0.1).unwrap();

    // tolerances far below reach so every one of the 250 steps is taken
    let base = OptimizerConfig { tol_grad: 1e-300, tol_energy: 1e-300, max_steps: 250, ..Default::default() };
    let (ngs, ngs_run) = monotone_run(&base, initial.clone());
    let frozen_cfg = OptimizerConfig { omega_update: OmegaUpdate::Frozen, ..base.clone() };
    let (gauss, gauss_run) = monotone_run(&frozen_cfg, initial.clone());
    let simple_cfg = OptimizerConfig { omega_update: OmegaUpdate::Simple { c: None }, ..base.clone() };
    let (simple, simple_run) = monotone_run(&simple_cfg, initial);
    let elapsed = start.elapsed();

    let slack = 1e-12;
    let checks = [
        ("≥ 200 accepted steps", ngs_run.steps >= 200 && gauss_run.steps >= 200 && simple_run.steps >= 200),
        (
            "energy non-increasing",
            ngs_run.worst_rise <= slack && gauss_run.worst_rise <= slack && simple_run.worst_rise <= slack,
        ),
        ("final energy within [exact, mean-field]", ngs.energy >= e_exact - 1e-9 && ngs.energy <= e_mf),
        ("NGS ≤ Gaussian-only + 1e-9", ngs.energy <= gauss.energy + 1e-9),
        ("under 5 minutes", elapsed < Duration::from_secs(300)),
    ];
    let passed = checks.iter().all(|(_, ok)| *ok);
    let failed: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(name, _)| *name).collect();
    report(
        8,
        "monotone 2-site Hubbard optimization",
        passed,
        format!(
            "E_ngs {:.10}, E_gaussian {:.10}, E_simple {:.10}, E_mf {:.6}, E_exact {:.6}, steps {}/{}/{}, worst rise {:.1e}, {:.2?}{}",
            ngs.energy,
            gauss.energy,
            simple.energy,
            e_mf,
            e_exact,
            ngs_run.steps,
            gauss_run.steps,
            simple_run.steps,
            ngs_run.worst_rise.max(gauss_run.worst_rise).max(simple_run.worst_rise),
            elapsed,
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_09_rank_one_paths_match_direct_inversion() {
    let start = Instant::now();
    let check = validate::check_rank_one_paths(&mut rng(109), 4, 50);
    assert!(report_check(9, "rank-one G and Q vs direct inversion, with fallback", &check, start.elapsed(), None));
}

#[test]
fn criterion_10_circuit_reproduces_phase_unitary() {
    let start = Instant::now();
    let check = validate::check_circuit(&mut rng(110), 4, 20);
    assert!(report_check(10, "circuit fidelity and gate counts (N = 4)", &check, start.elapsed(), None));
}

#[test]
fn criterion_11_pfaffian_identities() {
    let start = Instant::now();
    let check = validate::check_pfaffian(&mut rng(111), 200, 12, 50, 4);
    assert!(report_check(11, "Pf² = det and A[0] = 1", &check, start.elapsed(), None));
}
