//! `mixdim`: solve 3D-1D coupled problems and run verification studies.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
//! 3 iteration budget exhausted (artifacts are still written).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Status;
use config::{ConfigError, FileConfig, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "mixdim", version, about = "Optimization-based 3D-1D coupled diffusion solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write VTK fields, CSV tables and a manifest.
    Solve(RunArgs),
    /// Solve on a sequence of meshes and fit error slopes.
    Convergence(RunArgs),
    /// Print cond(K) of the saddle-point matrix and cond(M) of the reduced operator.
    Condition(RunArgs),
    /// Conditioning and iteration counts over a grid of δ values.
    Sweep(RunArgs),
    /// Compare an optimization solver against the coupled reference.
    Compare(RunArgs),
}

/// Flags mirror the config file; a flag wins over the file.
#[derive(Args, Clone)]
struct RunArgs {
    /// TOML config with sections problems, geom, trace, optsolver, analysis, monolithic, output.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in problem: tp1, tp2_like or cgtest_like.
    #[arg(long)]
    problem: Option<String>,
    /// Mesh file for a custom problem (with --network).
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Network file for a custom problem (with --mesh).
    #[arg(long)]
    network: Option<PathBuf>,
    /// Seed of the synthetic networks.
    #[arg(long)]
    seed: Option<u64>,
    /// Segment count of the synthetic networks.
    #[arg(long)]
    count: Option<usize>,
    /// Mesh subdivisions per box edge; comma-separated for studies.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// δ̂_u; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',')]
    delta_uhat: Option<Vec<f64>>,
    /// δ_D; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',')]
    delta_psi_d: Option<Vec<f64>>,
    /// δ_Σ; comma-separated for sweeps.
    #[arg(long, value_delimiter = ',')]
    delta_psi_sigma: Option<Vec<f64>>,
    /// opt_pcg, opt_cg, opt_direct or coupled.
    #[arg(long)]
    solver: Option<String>,
    /// Relative residual tolerance of CG.
    #[arg(long)]
    tol: Option<f64>,
    /// CG iteration budget (default 10 × number of controls).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Block-Jacobi preconditioner for opt_pcg.
    #[arg(long)]
    preconditioner: Option<bool>,
    /// Relative tolerance of the Lanczos estimate of cond(M).
    #[arg(long)]
    lanczos_tol: Option<f64>,
    /// Comparison plane such as z=0; repeatable.
    #[arg(long = "plane")]
    planes: Option<Vec<String>>,
    /// Samples per axis on each comparison plane.
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long, env = "MIXDIM_OUTPUT_ROOT")]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        RunConfig::resolve(
            file,
            Overrides {
                problem: self.problem,
                mesh: self.mesh,
                network: self.network,
                seed: self.seed,
                count: self.count,
                n: self.n,
                delta_uhat: self.delta_uhat,
                delta_psi_d: self.delta_psi_d,
                delta_psi_sigma: self.delta_psi_sigma,
                solver: self.solver,
                tol: self.tol,
                max_iter: self.max_iter,
                preconditioner: self.preconditioner,
                lanczos_tol: self.lanczos_tol,
                planes: self.planes,
                samples: self.samples,
                output: self.output,
            },
        )
    }
}

fn run(cli: Cli) -> anyhow::Result<Status> {
    let (args, cmd): (RunArgs, fn(&RunConfig) -> anyhow::Result<Status>) = match cli.command {
        Command::Solve(a) => (a, commands::solve),
        Command::Convergence(a) => (a, commands::convergence),
        Command::Condition(a) => (a, commands::condition),
        Command::Sweep(a) => (a, commands::sweep),
        Command::Compare(a) => (a, commands::compare),
    };
    let cfg = args.resolve()?;
    cmd(&cfg)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<mixdim::Error>() {
        Some(mixdim::Error::InvalidArgument(_) | mixdim::Error::Parse { .. } | mixdim::Error::Validation(_)) => 2,
        Some(mixdim::Error::NonConvergence { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Status::Converged) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("error: iteration budget exhausted; partial artifacts written");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
