mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ngs_core::circuit::{emit_ufa, resource_report, to_qasm, verify_dense, Connectivity};
use ngs_core::hamiltonian::{hubbard_model, load_hamiltonian, save_hamiltonian};
use ngs_core::optimizer::{run, Checkpoint, OmegaUpdate, OptimizerState};
use ngs_core::oracle::MAX_DENSE_MODES;
use ngs_core::validate::{run_validation, run_validation_for};
use ngs_core::Error;

use crate::config::RunConfig;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_STAGNATION: u8 = 4;

#[derive(Parser)]
#[command(name = "ngs", version, about = "Non-Gaussian variational ground states for interacting fermions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a model Hamiltonian file.
    #[command(subcommand)]
    Model(Model),
    /// Optimize a state from a JSON run configuration.
    Run(RunArgs),
    /// Cross-check the fast evaluation paths against dense references.
    Validate(ValidateArgs),
    /// Compile the phase unitary of a checkpoint into OpenQASM 2.0.
    Circuit(CircuitArgs),
}

#[derive(Subcommand)]
enum Model {
    /// Spinful Hubbard chain; modes `0..L` are spin-up, `L..2L` spin-down.
    Hubbard {
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        u: f64,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long)]
        periodic: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OmegaVariant {
    Hitgd,
    Simple,
    Frozen,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    omega_update: Option<OmegaVariant>,
    /// Constant of the simple update; omitted means the bound from B.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 4)]
    modes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run the Hamiltonian-dependent checks on this file instead of a
    /// random Hamiltonian.
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConnectivityArg {
    AllToAll,
    Linear,
}

#[derive(Args)]
struct CircuitArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Resource report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ConnectivityArg::AllToAll)]
    connectivity: ConnectivityArg,
    /// Emit native `rzz` instead of cx–rz–cx.
    #[arg(long)]
    rzz: bool,
}

/// Either a library error (mapped onto an exit code) or a check that ran
/// but did not meet its tolerance.
enum Failure {
    Core(Error),
    Tolerance(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Tolerance(_) => EXIT_NUMERICAL,
        Failure::Core(Error::Stagnation { .. }) => EXIT_STAGNATION,
        Failure::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
        Failure::Core(_) => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Model(Model::Hubbard { sites, t, u, mu, periodic, out }) => cmd_model(sites, t, u, mu, periodic, &out),
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Circuit(args) => cmd_circuit(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Tolerance(msg) => eprintln!("error: {msg}"),
            }
            ExitCode::from(exit_code(&f))
        }
    }
}

fn cmd_model(sites: usize, t: f64, u: f64, mu: f64, periodic: bool, out: &Path) -> Result<(), Failure> {
    let ham = hubbard_model(sites, t, u, mu, periodic)?;
    save_hamiltonian(&ham, out)?;
    eprintln!("wrote {}-mode Hubbard Hamiltonian to {}", ham.n_modes(), out.display());
    Ok(())
}

fn apply_overrides(cfg: &mut RunConfig, args: &RunArgs) -> Result<(), Error> {
    if let Some(v) = args.omega_update {
        cfg.optimizer.omega_update = match v {
            OmegaVariant::Hitgd => OmegaUpdate::Hitgd,
            OmegaVariant::Simple => OmegaUpdate::Simple { c: args.c },
            OmegaVariant::Frozen => OmegaUpdate::Frozen,
        };
    } else if let Some(c) = args.c {
        match &mut cfg.optimizer.omega_update {
            OmegaUpdate::Simple { c: slot } => *slot = Some(c),
            _ => return Err(Error::Config("--c only applies to the simple ω-update".into())),
        }
    }
    if let Some(v) = args.max_steps {
        cfg.optimizer.max_steps = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.threads {
        cfg.threads = v;
    }
    if let Some(p) = &args.trajectory {
        cfg.output.trajectory = Some(p.clone());
    }
    if let Some(p) = &args.checkpoint {
        cfg.output.checkpoint = Some(p.clone());
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply_overrides(&mut cfg, &args)?;
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} threads: {e}", cfg.threads)))?;
    pool.install(|| run_configured(&cfg))
}

fn run_configured(cfg: &RunConfig) -> Result<(), Failure> {
    let ham = cfg.hamiltonian()?;
    let initial = cfg.initial_state(&ham)?;
    let mut trajectory = match &cfg.output.trajectory {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    let mut last: OptimizerState = initial.clone();
    let initial_energy = initial.energy;

    let outcome = run(&ham, initial, &cfg.optimizer, |rec, state| {
        if let Some(w) = trajectory.as_mut() {
            serde_json::to_writer(&mut *w, rec)?;
            w.write_all(b"\n")?;
        }
        last = state.clone();
        Ok(())
    });
    if let Some(w) = trajectory.as_mut() {
        w.flush()?;
    }
    // the last accepted state is worth keeping even when the run fails
    if let Some(p) = &cfg.output.checkpoint {
        let state = outcome.as_ref().map(|o| &o.state).unwrap_or(&last);
        Checkpoint::from_state(state).save(p)?;
    }
    let outcome = outcome?;
    let summary = serde_json::json!({
        "reason": outcome.reason,
        "steps": outcome.trajectory.len(),
        "initial_energy": initial_energy,
        "energy": outcome.state.energy,
        "grad_norm": outcome.final_grad_norm,
        "tau": outcome.state.tau,
    });
    println!("{summary}");
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let report = match &args.hamiltonian {
        Some(path) => {
            let ham = load_hamiltonian(path)?;
            check_dense_size(ham.n_modes())?;
            run_validation_for(&ham, args.seed)
        }
        None => {
            check_dense_size(args.modes)?;
            run_validation(args.modes, args.seed)
        }
    };
    for c in &report.checks {
        println!(
            "{:<5} {:<22} max deviation {:.3e}  tol {:.0e}{}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.max_deviation,
            c.tolerance,
            c.detail.as_ref().map(|d| format!("  ({d})")).unwrap_or_default()
        );
    }
    if let Some(p) = &args.report {
        std::fs::write(p, serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!("checks over tolerance: {}", failed.join(", "))))
    }
}

fn check_dense_size(n: usize) -> Result<(), Error> {
    if !(2..=MAX_DENSE_MODES).contains(&n) {
        return Err(Error::Config(format!("validation needs 2..={MAX_DENSE_MODES} modes, got {n}")));
    }
    Ok(())
}

fn cmd_circuit(args: CircuitArgs) -> Result<(), Failure> {
    let omega = Checkpoint::load(&args.checkpoint)?.omega()?;
    let gates = emit_ufa(&omega);
    std::fs::write(&args.out, to_qasm(&gates, args.rzz))?;
    let connectivity = match args.connectivity {
        ConnectivityArg::AllToAll => Connectivity::AllToAll,
        ConnectivityArg::Linear => Connectivity::Linear,
    };
    let report = resource_report(&gates, connectivity);
    let deviation = if omega.n_modes() <= MAX_DENSE_MODES { Some(verify_dense(&gates, &omega)?) } else { None };
    if let Some(p) = &args.report {
        let mut value = serde_json::to_value(&report).map_err(Error::from)?;
        value["dense_deviation"] = serde_json::json!(deviation);
        std::fs::write(p, serde_json::to_string_pretty(&value).map_err(Error::from)?)?;
    }
    eprintln!(
        "{} Rz + {} ZZ gates, global phase {:.6}, dense deviation {}",
        report.rz_count,
        report.zz_count,
        report.global_phase,
        deviation.map(|d| format!("{d:.1e}")).unwrap_or_else(|| "not checked".into())
    );
    match deviation {
        Some(d) if d >= 1e-10 => Err(Failure::Tolerance(format!("circuit deviates from the phase unitary by {d:e}"))),
        _ => Ok(()),
    }
}
