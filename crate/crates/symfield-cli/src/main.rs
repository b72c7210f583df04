//! `symfield` — learn Hamiltonian vector fields from trajectory data with
//! structure-preserving kernels, and reproduce the benchmark experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use symfield_cli::{
    cmd_evaluate, cmd_field, cmd_generate, cmd_repro, cmd_rollout, cmd_train, cmd_tune, CommonArgs,
    Resolved,
};

#[derive(Parser)]
#[command(
    name = "symfield",
    about = "Kernel learning of Hamiltonian vector fields",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct SharedFlags {
    /// JSON config file mirroring the flags; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Benchmark system: oscillator or pendulum
    #[arg(long, global = true)]
    system: Option<String>,
    /// System parameter overrides, e.g. `m=0.5,k=1` or `m=0.5,l=1,g=9.81`
    #[arg(long, global = true)]
    params: Option<String>,
    /// RNG seed (noise, folds, sampling)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $SYMFIELD_OUT or ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories and write a noisy training dataset
    Generate {
        #[command(flatten)]
        shared: SharedFlags,
        /// Initial conditions, `q,p;q,p;...`
        #[arg(long)]
        ics: Option<String>,
        /// Integration time step in seconds
        #[arg(long)]
        dt: Option<f64>,
        /// Trajectory horizon in seconds
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        /// Standard deviation of the additive Gaussian noise
        #[arg(long = "noise-std")]
        noise_std: Option<f64>,
    },
    /// Cross-validation grid search for (sigma, lambda)
    Tune {
        #[command(flatten)]
        shared: SharedFlags,
        /// Dataset CSV produced by `generate`
        #[arg(long)]
        data: PathBuf,
        /// Kernel family
        #[arg(long)]
        kernel: Option<String>,
        /// Number of cross-validation folds
        #[arg(long)]
        folds: Option<usize>,
        /// Candidate kernel widths, `s1,s2,...` (default: built-in grid)
        #[arg(long = "grid-sigma")]
        grid_sigma: Option<String>,
        /// Candidate regularizers, `l1,l2,...` (default: built-in grid)
        #[arg(long = "grid-lambda")]
        grid_lambda: Option<String>,
    },
    /// Train a model at fixed hyperparameters and save it
    Train {
        #[command(flatten)]
        shared: SharedFlags,
        /// Dataset CSV produced by `generate`
        #[arg(long)]
        data: PathBuf,
        /// Kernel family
        #[arg(long)]
        kernel: Option<String>,
        /// Kernel width
        #[arg(long)]
        sigma: Option<f64>,
        /// Regularization parameter
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Integrate a learned model against the true system and report errors
    Rollout {
        #[command(flatten)]
        shared: SharedFlags,
        /// Model file produced by `train`
        #[arg(long)]
        model: PathBuf,
        /// Initial condition `q,p`
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
    },
    /// Full evaluation report for a trained model
    Evaluate {
        #[command(flatten)]
        shared: SharedFlags,
        /// Model file produced by `train`
        #[arg(long)]
        model: PathBuf,
        /// Test-trajectory initial condition `q,p`
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        /// Number of odd-error samples
        #[arg(long)]
        samples: Option<usize>,
        /// Sampling window `x1min,x1max,x2min,x2max`
        #[arg(long)]
        window: Option<String>,
    },
    /// Sample a vector field (model or true system) on a grid
    Field {
        #[command(flatten)]
        shared: SharedFlags,
        /// Model file; omit to sample the true system
        #[arg(long)]
        model: Option<PathBuf>,
        /// Window `x1min,x1max,x2min,x2max`
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
    },
    /// Run a full benchmark experiment: generate, tune, train, evaluate
    Repro {
        /// Which experiment: oscillator or pendulum
        experiment: String,
        #[command(flatten)]
        shared: SharedFlags,
    },
}

fn resolved(shared: SharedFlags, rest: CommonArgs) -> anyhow::Result<Resolved> {
    Resolved::new(CommonArgs {
        config: shared.config,
        system: shared.system,
        params: shared.params,
        seed: shared.seed,
        out: shared.out,
        ..rest
    })
}

fn run() -> anyhow::Result<bool> {
    match Cli::parse().command {
        Command::Generate {
            shared,
            ics,
            dt,
            t_end,
            noise_std,
        } => {
            let resolved = resolved(
                shared,
                CommonArgs {
                    ics,
                    dt,
                    t_end,
                    noise_std,
                    ..Default::default()
                },
            )?;
            cmd_generate(&resolved)?;
            Ok(true)
        }
        Command::Tune {
            shared,
            data,
            kernel,
            folds,
            grid_sigma,
            grid_lambda,
        } => {
            let resolved = resolved(
                shared,
                CommonArgs {
                    kernel,
                    folds,
                    grid_sigma,
                    grid_lambda,
                    ..Default::default()
                },
            )?;
            cmd_tune(&resolved, &data)?;
            Ok(true)
        }
        Command::Train {
            shared,
            data,
            kernel,
            sigma,
            lambda,
        } => {
            let resolved = resolved(
                shared,
                CommonArgs {
                    kernel,
                    sigma,
                    lambda,
                    ..Default::default()
                },
            )?;
            cmd_train(&resolved, &data)?;
            Ok(true)
        }
        Command::Rollout {
            shared,
            model,
            x0,
            dt,
            t_end,
        } => {
            let resolved = resolved(
                shared,
                CommonArgs {
                    x0,
                    dt,
                    t_end,
                    ..Default::default()
                },
            )?;
            cmd_rollout(&resolved, &model)?;
            Ok(true)
        }
        Command::Evaluate {
            shared,
            model,
            x0,
            dt,
            t_end,
            samples,
            window,
        } => {
            let resolved = resolved(
                shared,
                CommonArgs {
                    x0,
                    dt,
                    t_end,
                    samples,
                    window,
                    ..Default::default()
                },
            )?;
            cmd_evaluate(&resolved, &model)?;
            Ok(true)
        }
        Command::Field {
            shared,
            model,
            window,
            nx,
            ny,
        } => {
            let resolved = resolved(
                shared,
                CommonArgs {
                    window,
                    nx,
                    ny,
                    ..Default::default()
                },
            )?;
            cmd_field(&resolved, model.as_deref())?;
            Ok(true)
        }
        Command::Repro { experiment, shared } => {
            let resolved = resolved(shared, CommonArgs::default())?;
            cmd_repro(&resolved, &experiment)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more summary checks failed");
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
