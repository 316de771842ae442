//! Run configuration. Unknown keys are rejected so that a misspelt
//! tolerance fails loudly instead of silently falling back to a default.
//!
//! ```json
//! {
//!   "hamiltonian": { "model": { "sites": 2, "t": 1.0, "u": 4.0, "mu": 2.0 } },
//!   "init": { "kind": "mean_field", "perturbation": 0.01 },
//!   "optimizer": { "omega_update": { "kind": "hitgd" }, "max_steps": 2000 },
//!   "output": { "trajectory": "traj.jsonl", "checkpoint": "final.json" },
//!   "seed": 7,
//!   "threads": 1
//! }
//! ```

use std::path::{Path, PathBuf};

use ngs_core::gaussian::{mean_field_init, perturb_covariance, random_covariance};
use ngs_core::hamiltonian::{hubbard_model, load_hamiltonian, ManyBodyHamiltonian, NonGaussianParams};
use ngs_core::optimizer::{Checkpoint, OptimizerConfig, OptimizerState};
use ngs_core::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSource {
    File(PathBuf),
    Model(HubbardSpec),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HubbardSpec {
    pub sites: usize,
    pub t: f64,
    pub u: f64,
    pub mu: f64,
    #[serde(default)]
    pub periodic: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Init {
    /// Lowest eigenvectors of the one-body part, filled with `filling`
    /// particles (half the modes by default), then rotated by a small
    /// seeded SO(2N) element: the bare determinant is a stationary point.
    MeanField {
        filling: Option<usize>,
        #[serde(default = "default_perturbation")]
        perturbation: f64,
    },
    Random {
        #[serde(default = "default_scale")]
        scale: f64,
        #[serde(default)]
        omega_scale: f64,
    },
    Checkpoint { path: PathBuf },
}

fn default_perturbation() -> f64 {
    1e-2
}

fn default_scale() -> f64 {
    1.0
}

impl Default for Init {
    fn default() -> Self {
        Init::MeanField { filling: None, perturbation: default_perturbation() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub trajectory: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub hamiltonian: HamiltonianSource,
    #[serde(default)]
    pub init: Init,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_threads() -> usize {
    1
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        match &self.init {
            Init::MeanField { perturbation, .. } if !(*perturbation >= 0.0) => {
                Err(Error::Config(format!("perturbation must be non-negative, got {perturbation}")))
            }
            Init::Random { scale, omega_scale } if !(*scale >= 0.0) || !(*omega_scale >= 0.0) => {
                Err(Error::Config("random init scales must be non-negative".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn hamiltonian(&self) -> Result<ManyBodyHamiltonian> {
        match &self.hamiltonian {
            HamiltonianSource::File(path) => load_hamiltonian(path),
            HamiltonianSource::Model(m) => hubbard_model(m.sites, m.t, m.u, m.mu, m.periodic),
        }
    }

    pub fn initial_state(&self, ham: &ManyBodyHamiltonian) -> Result<OptimizerState> {
        let n = ham.n_modes();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dtau = self.optimizer.dtau0;
        match &self.init {
            Init::MeanField { filling, perturbation } => {
                let filling = filling.unwrap_or(n / 2);
                let gamma = mean_field_init(ham.f(), filling)?;
                let gamma = perturb_covariance(&gamma, &mut rng, *perturbation);
                OptimizerState::new(gamma, NonGaussianParams::zeros(n), ham, dtau)
            }
            Init::Random { scale, omega_scale } => {
                let gamma = random_covariance(&mut rng, n, *scale);
                let omega = ngs_core::validate::random_omega(&mut rng, n, *omega_scale);
                OptimizerState::new(gamma, omega, ham, dtau)
            }
            Init::Checkpoint { path } => {
                let cp = Checkpoint::load(path)?;
                if cp.n_modes != n {
                    return Err(Error::Config(format!(
                        "checkpoint has {} modes but the Hamiltonian has {n}",
                        cp.n_modes
                    )));
                }
                let mut state = OptimizerState::new(cp.gamma()?, cp.omega()?, ham, dtau)?;
                state.tau = cp.tau;
                Ok(state)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"hamiltonian": {"model": {"sites": 2, "t": 1, "u": 4, "mu": 2}}}"#).unwrap();
        assert_eq!(cfg.init, Init::default());
        assert_eq!(cfg.optimizer, OptimizerConfig::default());
        assert_eq!(cfg.threads, 1);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"hamiltonian": {"file": "h.txt"}, "tolerance": 1}"#,
            r#"{"hamiltonian": {"file": "h.txt"}, "optimizer": {"tol_gradient": 1e-5}}"#,
            r#"{"hamiltonian": {"model": {"sites": 2, "t": 1, "u": 4, "mu": 2, "v": 1}}}"#,
            r#"{"hamiltonian": {"file": "h.txt"}, "init": {"kind": "mean_field", "seed": 3}}"#,
        ] {
            assert!(serde_json::from_str::<RunConfig>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn simple_variant_parses() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"hamiltonian": {"file": "h.txt"}, "optimizer": {"omega_update": {"kind": "simple", "c": 0.5}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.optimizer.omega_update, ngs_core::optimizer::OmegaUpdate::Simple { c: Some(0.5) });
    }

    #[test]
    fn bad_values_fail_validation() {
        let mut cfg: RunConfig = serde_json::from_str(r#"{"hamiltonian": {"file": "h.txt"}}"#).unwrap();
        cfg.threads = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.threads = 1;
        cfg.optimizer.tol_grad = -1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
