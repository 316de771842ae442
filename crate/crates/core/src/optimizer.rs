//! Hybrid imaginary-time / gradient-descent optimization.
//!
//! Each step moves ω along a velocity chosen so that the ω-part of the
//! energy change is exactly cancelled by the induced reaction of Γ (or a
//! plain scaled gradient), then advances Γ along the projected
//! imaginary-time flow, purifies, and accepts only if the energy did not
//! rise. Rejected trials halve the step.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{purify, symplectic_form, CovarianceMatrix};
use crate::hamiltonian::{
    energy_gradient_with_cache, energy_with_cache, mean_field_h_with_cache, mean_field_o, occupation_vector,
    real_skew_part, ManyBodyHamiltonian, NonGaussianParams,
};
use crate::linalg::{pseudo_inverse, CMatrix, RMatrix, DEFAULT_RCOND};
use crate::wick::ContractionCache;

/// B_klmn with tr(O(dω)²) = Σ dω_kl B_klmn dω_mn.
#[derive(Debug, Clone, PartialEq)]
pub struct BTensor {
    n_modes: usize,
    entries: Vec<f64>,
    g: Vec<f64>,
}

impl BTensor {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn get(&self, k: usize, l: usize, m: usize, n: usize) -> f64 {
        let nm = self.n_modes;
        self.entries[((k * nm + l) * nm + m) * nm + n]
    }

    /// The occupation vector g_j = 2⟨n_j⟩ the tensor was built from.
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn quadratic_form(&self, dw: &RMatrix) -> f64 {
        let n = self.n_modes;
        let mut total = 0.0;
        for k in 0..n {
            for l in 0..n {
                let a = dw[(k, l)];
                if a == 0.0 {
                    continue;
                }
                for m in 0..n {
                    for nn in 0..n {
                        total += a * self.get(k, l, m, nn) * dw[(m, nn)];
                    }
                }
            }
        }
        total
    }

    /// Matrix over unordered pairs k < l (row-major), scaled so that
    /// xᵀ·M·x equals the full quadratic form for the symmetric dω built
    /// from x.
    pub fn reduced_matrix(&self) -> RMatrix {
        let pairs = pair_list(self.n_modes);
        RMatrix::from_fn(pairs.len(), pairs.len(), |a, b| {
            let (k, l) = pairs[a];
            let (m, n) = pairs[b];
            4.0 * self.get(k, l, m, n)
        })
    }

    /// The full N²×N² flattening.
    pub fn full_matrix(&self) -> RMatrix {
        let n = self.n_modes;
        RMatrix::from_fn(n * n, n * n, |a, b| self.get(a / n, a % n, b / n, b % n))
    }
}

pub(crate) fn pair_list(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|k| ((k + 1)..n).map(move |l| (k, l))).collect()
}

pub fn b_tensor(gamma: &CovarianceMatrix) -> BTensor {
    let n = gamma.n_modes();
    let g = occupation_vector(gamma);
    let g0 = gamma.matrix() + symplectic_form(n);
    // evaluated once per unordered pair so that B is exactly symmetric
    let sq = RMatrix::from_fn(n, n, |a, b| {
        let (k, l) = (a.min(b), a.max(b));
        g0[(k, l)].powi(2) + g0[(k, n + l)].powi(2) + g0[(n + k, l)].powi(2) + g0[(n + k, n + l)].powi(2)
    });
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut entries = vec![0.0; n.pow(4)];
    for k in 0..n {
        for l in 0..n {
            if k == l {
                continue;
            }
            for m in 0..n {
                for nn in 0..n {
                    if m == nn {
                        continue;
                    }
                    let outer = g[l] * g[m] * delta(nn, k)
                        + g[l] * g[nn] * delta(m, k)
                        + g[k] * g[m] * delta(nn, l)
                        + g[k] * g[nn] * delta(m, l);
                    let local = sq[(k, l)] * (delta(m, k) * delta(nn, l) + delta(nn, k) * delta(m, l));
                    entries[((k * n + l) * n + m) * n + nn] = (outer + local) / 8.0;
                }
            }
        }
    }
    BTensor { n_modes: n, entries, g }
}

fn pairs_to_matrix(n: usize, values: &DVector<f64>) -> RMatrix {
    let mut out = RMatrix::zeros(n, n);
    for (&(k, l), &v) in pair_list(n).iter().zip(values.iter()) {
        out[(k, l)] = v;
        out[(l, k)] = v;
    }
    out
}

/// dω = −8·B⁺·∂E/∂ω on the symmetric zero-diagonal subspace.
pub fn dtau_omega_hitgd(b: &BTensor, grad: &RMatrix) -> Result<RMatrix> {
    dtau_omega_hitgd_with(b, grad, DEFAULT_RCOND)
}

/// As [`dtau_omega_hitgd`] with singular values below `rcond·σ_max`
/// discarded. Any spectral cutoff keeps B⁺BB⁺ = B⁺, so the cancellation
/// identity survives truncation.
pub fn dtau_omega_hitgd_with(b: &BTensor, grad: &RMatrix, rcond: f64) -> Result<RMatrix> {
    let n = b.n_modes();
    if grad.nrows() != n || grad.ncols() != n {
        return Err(Error::Dimension(format!("gradient is {}x{} for {n} modes", grad.nrows(), grad.ncols())));
    }
    let pairs = pair_list(n);
    if pairs.is_empty() {
        return Ok(RMatrix::zeros(n, n));
    }
    // gradient along the pair coordinate x_kl, which moves ω_kl and ω_lk together
    let g_red = DVector::from_iterator(pairs.len(), pairs.iter().map(|&(k, l)| grad[(k, l)] + grad[(l, k)]));
    let x = pseudo_inverse(&b.reduced_matrix(), rcond) * g_red * -8.0;
    Ok(pairs_to_matrix(n, &x))
}

/// dω = −∂E/∂ω / c.
pub fn dtau_omega_simple(grad: &RMatrix, c: f64) -> Result<RMatrix> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Config(format!("gradient-descent constant must be positive, got {c}")));
    }
    Ok(grad / -c)
}

/// Smallest c for which the plain gradient step is guaranteed to decrease
/// the energy: the largest eigenvalue of the flattened B over 8.
pub fn simple_step_bound(b: &BTensor) -> f64 {
    let full = b.full_matrix();
    let eig = SymmetricEigen::new((&full + full.transpose()) * 0.5);
    eig.eigenvalues.iter().cloned().fold(0.0, f64::max) / 8.0
}

/// dΓ/dτ = −H − ΓHΓ + i[Γ, O].
pub fn dtau_gamma(gamma: &CovarianceMatrix, h: &RMatrix, o: &CMatrix) -> Result<RMatrix> {
    let dim = gamma.matrix().nrows();
    if h.shape() != (dim, dim) || o.shape() != (dim, dim) {
        return Err(Error::Dimension("mean-field matrices do not match the covariance".into()));
    }
    let g = gamma.matrix();
    let gc = crate::linalg::to_complex(g);
    let comm = (&gc * o - o * &gc) * Complex64::new(0.0, 1.0);
    let d = -h - g * h * g + comm.map(|z| z.re);
    Ok((&d - d.transpose()) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaUpdate {
    /// Pseudo-inverse of the B tensor.
    Hitgd,
    /// Plain gradient descent with constant c; `None` picks the
    /// monotonicity bound from B at every step.
    Simple { c: Option<f64> },
    /// ω held fixed: a purely Gaussian imaginary-time descent.
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub omega_update: OmegaUpdate,
    pub dtau0: f64,
    pub dtau_min: f64,
    pub dtau_max: f64,
    pub growth: f64,
    pub tol_grad: f64,
    pub tol_energy: f64,
    pub patience: usize,
    pub max_steps: usize,
    /// Allowed energy rise of an accepted step.
    pub energy_slack: f64,
    /// Relative singular-value cutoff of the B pseudo-inverse.
    pub pinv_rcond: f64,
    /// Upper bound on max|dω/dτ|; larger velocities are scaled down.
    /// Scaling the pseudo-inverse velocity by s ∈ [0, 1] turns the exact
    /// cancellation into an ω-contribution of −s(1−s)·dωBdω/8 ≤ 0, so the
    /// cap never costs monotonicity, while it keeps nearly null directions
    /// of B from forcing Δτ towards zero. `None` disables it.
    pub omega_speed_max: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            omega_update: OmegaUpdate::Hitgd,
            dtau0: 0.1,
            dtau_min: 1e-8,
            dtau_max: 1.0,
            growth: 1.2,
            tol_grad: 1e-7,
            tol_energy: 1e-11,
            patience: 10,
            max_steps: 5000,
            energy_slack: 1e-12,
            pinv_rcond: DEFAULT_RCOND,
            omega_speed_max: Some(0.1),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dtau0", self.dtau0),
            ("dtau_min", self.dtau_min),
            ("dtau_max", self.dtau_max),
            ("tol_grad", self.tol_grad),
            ("tol_energy", self.tol_energy),
            ("pinv_rcond", self.pinv_rcond),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.energy_slack >= 0.0) {
            return Err(Error::Config("energy_slack must be non-negative".into()));
        }
        if self.dtau_min > self.dtau0 || self.dtau0 > self.dtau_max {
            return Err(Error::Config("step sizes must satisfy dtau_min ≤ dtau0 ≤ dtau_max".into()));
        }
        if !(self.growth >= 1.0) {
            return Err(Error::Config(format!("growth must be at least 1, got {}", self.growth)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if let Some(cap) = self.omega_speed_max {
            if !(cap > 0.0) || !cap.is_finite() {
                return Err(Error::Config(format!("omega_speed_max must be positive, got {cap}")));
            }
        }
        if let OmegaUpdate::Simple { c: Some(c) } = self.omega_update {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Config(format!("simple-update constant c must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub gamma: CovarianceMatrix,
    pub omega: NonGaussianParams,
    pub tau: f64,
    pub energy: f64,
    pub dtau: f64,
}

impl OptimizerState {
    pub fn new(gamma: CovarianceMatrix, omega: NonGaussianParams, ham: &ManyBodyHamiltonian, dtau: f64) -> Result<Self> {
        let energy = crate::hamiltonian::energy(&gamma, &omega, ham)?.total;
        Ok(Self { gamma, omega, tau: 0.0, energy, dtau })
    }
}

/// Derivatives of the energy at one state.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub grad_omega: RMatrix,
    pub h: RMatrix,
}

impl Derivatives {
    pub fn compute(state: &OptimizerState, ham: &ManyBodyHamiltonian, update: OmegaUpdate) -> Result<Self> {
        let cache = ContractionCache::new(&state.gamma);
        let n = ham.n_modes();
        let grad_omega = match update {
            OmegaUpdate::Frozen => RMatrix::zeros(n, n),
            _ => energy_gradient_with_cache(&cache, &state.omega, ham)?,
        };
        let h = real_skew_part(&mean_field_h_with_cache(&cache, &state.omega, ham)?);
        Ok(Self { grad_omega, h })
    }

    /// max(|∂E/∂ω|_max, ¼|H + ΓHΓ|_max): both parts vanish exactly at a
    /// stationary point of the energy on the pure manifold.
    pub fn norm(&self, gamma: &CovarianceMatrix) -> f64 {
        let g = gamma.matrix();
        let projected = &self.h + g * &self.h * g;
        self.grad_omega.camax().max(0.25 * projected.camax())
    }
}

/// Velocities (dω, dΓ) for the current state.
pub fn velocities(
    state: &OptimizerState,
    derivs: &Derivatives,
    config: &OptimizerConfig,
) -> Result<(RMatrix, RMatrix)> {
    let n = state.omega.n_modes();
    let dw = match config.omega_update {
        OmegaUpdate::Frozen => RMatrix::zeros(n, n),
        OmegaUpdate::Hitgd => dtau_omega_hitgd_with(&b_tensor(&state.gamma), &derivs.grad_omega, config.pinv_rcond)?,
        OmegaUpdate::Simple { c } => {
            let c = match c {
                Some(c) => c,
                None => (simple_step_bound(&b_tensor(&state.gamma)) * (1.0 + 1e-6)).max(f64::MIN_POSITIVE),
            };
            dtau_omega_simple(&derivs.grad_omega, c)?
        }
    };
    let dw = match config.omega_speed_max {
        Some(cap) if dw.amax() > cap => {
            let scale = cap / dw.amax();
            dw * scale
        }
        _ => dw,
    };
    let o = mean_field_o(&state.gamma, &dw)?;
    let dg = dtau_gamma(&state.gamma, &derivs.h, &o)?;
    Ok((dw, dg))
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: OptimizerState,
    /// Step size actually used.
    pub dtau: f64,
    /// Number of rejected trials before acceptance.
    pub rejections: usize,
}

/// One accepted forward-Euler step with backtracking.
pub fn step(
    state: &OptimizerState,
    ham: &ManyBodyHamiltonian,
    config: &OptimizerConfig,
    derivs: &Derivatives,
) -> Result<StepOutcome> {
    let (dw, dg) = velocities(state, derivs, config)?;
    let mut dtau = state.dtau.clamp(config.dtau_min, config.dtau_max);
    let mut rejections = 0;
    loop {
        match trial(state, ham, &dw, &dg, dtau) {
            Ok((gamma, omega, energy)) if energy - state.energy <= config.energy_slack => {
                let next_dtau = (dtau * config.growth).min(config.dtau_max);
                return Ok(StepOutcome {
                    state: OptimizerState { gamma, omega, tau: state.tau + dtau, energy, dtau: next_dtau },
                    dtau,
                    rejections,
                });
            }
            Ok(_) => {}
            // an unlucky trial point; shrinking the step moves away from it
            Err(e) if e.is_numerical() => {}
            Err(e) => return Err(e),
        }
        rejections += 1;
        dtau *= 0.5;
        if dtau < config.dtau_min {
            return Err(Error::Stagnation { dtau_min: config.dtau_min });
        }
    }
}

fn trial(
    state: &OptimizerState,
    ham: &ManyBodyHamiltonian,
    dw: &RMatrix,
    dg: &RMatrix,
    dtau: f64,
) -> Result<(CovarianceMatrix, NonGaussianParams, f64)> {
    let gamma = purify(&(state.gamma.matrix() + dg * dtau))?;
    let omega = NonGaussianParams::new(state.omega.matrix() + dw * dtau)?.wrapped();
    let cache = ContractionCache::new(&gamma);
    let energy = energy_with_cache(&cache, &omega, ham)?.total;
    Ok((gamma, omega, energy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub tau: f64,
    pub energy: f64,
    /// Gradient norm at the start of the step.
    pub grad_norm: f64,
    pub dtau: f64,
    pub purity_err: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    EnergyPlateau,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: OptimizerState,
    pub trajectory: Vec<TrajectoryRecord>,
    pub reason: StopReason,
    pub final_grad_norm: f64,
}

/// Runs until the gradient norm drops below `tol_grad`, the energy changes
/// by less than `tol_energy` for `patience` consecutive steps, or
/// `max_steps` is reached. `observer` sees every accepted step.
pub fn run<F>(
    ham: &ManyBodyHamiltonian,
    initial: OptimizerState,
    config: &OptimizerConfig,
    mut observer: F,
) -> Result<RunOutcome>
where
    F: FnMut(&TrajectoryRecord, &OptimizerState) -> Result<()>,
{
    config.validate()?;
    if initial.gamma.n_modes() != ham.n_modes() || initial.omega.n_modes() != ham.n_modes() {
        return Err(Error::Dimension("initial state does not match the Hamiltonian".into()));
    }
    let start = Instant::now();
    let mut state = initial;
    let mut trajectory = Vec::new();
    let mut quiet = 0;
    let mut derivs = Derivatives::compute(&state, ham, config.omega_update)?;
    let mut grad_norm = derivs.norm(&state.gamma);
    for step_index in 0..config.max_steps {
        if grad_norm < config.tol_grad {
            return Ok(RunOutcome { state, trajectory, reason: StopReason::GradientTolerance, final_grad_norm: grad_norm });
        }
        let outcome = step(&state, ham, config, &derivs)?;
        let delta = (outcome.state.energy - state.energy).abs();
        state = outcome.state;
        let record = TrajectoryRecord {
            step: step_index + 1,
            tau: state.tau,
            energy: state.energy,
            grad_norm,
            dtau: outcome.dtau,
            purity_err: state.gamma.purity_defect(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        observer(&record, &state)?;
        trajectory.push(record);

        derivs = Derivatives::compute(&state, ham, config.omega_update)?;
        grad_norm = derivs.norm(&state.gamma);
        quiet = if delta < config.tol_energy { quiet + 1 } else { 0 };
        if quiet >= config.patience {
            return Ok(RunOutcome { state, trajectory, reason: StopReason::EnergyPlateau, final_grad_norm: grad_norm });
        }
    }
    let reason = if grad_norm < config.tol_grad { StopReason::GradientTolerance } else { StopReason::MaxSteps };
    Ok(RunOutcome { state, trajectory, reason, final_grad_norm: grad_norm })
}

/// Restartable snapshot; matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub n_modes: usize,
    pub gamma: Vec<f64>,
    pub omega: Vec<f64>,
    pub tau: f64,
    pub energy: f64,
}

fn row_major(m: &RMatrix) -> Vec<f64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect()
}

impl Checkpoint {
    pub fn from_state(state: &OptimizerState) -> Self {
        Self {
            n_modes: state.gamma.n_modes(),
            gamma: row_major(state.gamma.matrix()),
            omega: row_major(state.omega.matrix()),
            tau: state.tau,
            energy: state.energy,
        }
    }

    pub fn gamma(&self) -> Result<CovarianceMatrix> {
        let d = 2 * self.n_modes;
        if self.gamma.len() != d * d {
            return Err(Error::Dimension(format!("checkpoint Γ has {} entries, expected {}", self.gamma.len(), d * d)));
        }
        CovarianceMatrix::new(RMatrix::from_row_slice(d, d, &self.gamma))
    }

    pub fn omega(&self) -> Result<NonGaussianParams> {
        let n = self.n_modes;
        if self.omega.len() != n * n {
            return Err(Error::Dimension(format!("checkpoint ω has {} entries, expected {}", self.omega.len(), n * n)));
        }
        NonGaussianParams::new(RMatrix::from_row_slice(n, n, &self.omega))
    }

    /// Restores an optimizer state; the stored energy is kept so a restart
    /// continues the same monotone sequence.
    pub fn to_state(&self, dtau: f64) -> Result<OptimizerState> {
        Ok(OptimizerState { gamma: self.gamma()?, omega: self.omega()?, tau: self.tau, energy: self.energy, dtau })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}
