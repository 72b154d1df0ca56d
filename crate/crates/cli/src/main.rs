mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spbe_core::backward::{BackwardOptions, Mode};
use spbe_core::verifier::DEFAULT_HISTORY_LIMIT;
use spbe_core::SolverConfig;

use failure::{Failure, Kind, EXIT_CODE_TABLE};

/// Structured perfect Bayesian equilibria of finite repeated games with
/// correlated private types.
#[derive(Debug, Parser)]
#[command(name = "spbe", version, after_help = EXIT_CODE_TABLE)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the command's artifact here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Write the JSON error document here instead of stderr.
    #[arg(long, global = true, value_name = "PATH")]
    error_out: Option<PathBuf>,

    /// Cap on worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and check a game file; emits a summary document.
    Validate { game: PathBuf },
    /// Run the backward recursion; emits the solve report, which also serves
    /// as the policy file for the other commands.
    Solve {
        game: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Sample episodes under the equilibrium; emits the summary and traces.
    Simulate {
        game: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long, default_value_t = 1000)]
        episodes: usize,
        /// Also write one CSV row per (episode, stage).
        #[arg(long, value_name = "PATH")]
        traces_csv: Option<PathBuf>,
    },
    /// Certify the equilibrium by exact best-deviation search; emits a certificate.
    Verify {
        game: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        /// Largest deviation gain accepted.
        #[arg(long, default_value_t = 1e-6)]
        verify_tol: f64,
        /// Random strategies per (player, stage) for the continuation identity check.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Refuse games with more public histories than this.
        #[arg(long, default_value_t = DEFAULT_HISTORY_LIMIT)]
        history_limit: f64,
    },
    /// Write the grid policy as a CSV table (grid mode only).
    Export {
        game: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Grid,
}

#[derive(Debug, Clone, Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Lattice resolution G for grid mode.
    #[arg(long, default_value_t = 10)]
    grid_resolution: usize,
    /// Fixed-point residual tolerance.
    #[arg(long, default_value_t = SolverConfig::default().tolerance)]
    tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iterations)]
    max_iters: usize,
    #[arg(long, default_value_t = SolverConfig::default().damping)]
    damping: f64,
    #[arg(long, default_value_t = SolverConfig::default().restarts)]
    restarts: usize,
    /// Seeds solver restarts, simulation and sampled strategies.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest number of memoized beliefs in exact mode.
    #[arg(long, default_value_t = BackwardOptions::default().cache_budget)]
    cache_budget: usize,
}

#[derive(Debug, Clone, Args)]
struct PolicyArgs {
    /// Solve report from `spbe solve`. Without it the game is solved first.
    #[arg(long, value_name = "PATH")]
    policy: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        let config = SolverConfig {
            tolerance: self.tol,
            max_iterations: self.max_iters,
            damping: self.damping,
            restarts: self.restarts,
            seed: self.seed,
            ..SolverConfig::default()
        };
        config.check().map_err(|m| Failure::new(Kind::Usage, m))?;
        Ok(config)
    }

    fn options(&self) -> anyhow::Result<BackwardOptions> {
        let mode = match self.mode {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Grid if self.grid_resolution == 0 => {
                return Err(Failure::new(Kind::Usage, "--grid-resolution must be positive").into())
            }
            ModeArg::Grid => Mode::Grid {
                resolution: self.grid_resolution,
            },
        };
        if self.cache_budget == 0 {
            return Err(Failure::new(Kind::Usage, "--cache-budget must be positive").into());
        }
        Ok(BackwardOptions {
            mode,
            cache_budget: self.cache_budget,
            ..BackwardOptions::default()
        })
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::new(Kind::Usage, "--threads must be positive").into());
        }
        spbe_core::par::configure_threads(n);
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Validate { game } => commands::validate(game, out),
        Command::Solve { game, solver } => {
            commands::solve(game, &solver.config()?, &solver.options()?, out)
        }
        Command::Simulate {
            game,
            policy,
            episodes,
            traces_csv,
        } => {
            if *episodes == 0 {
                return Err(Failure::new(Kind::Usage, "--episodes must be positive").into());
            }
            let source = policy_source(policy)?;
            commands::simulate(
                game,
                &source,
                policy.solver.seed,
                *episodes,
                out,
                traces_csv.as_deref(),
            )
        }
        Command::Verify {
            game,
            policy,
            verify_tol,
            samples,
            history_limit,
        } => {
            if verify_tol.is_nan()
                || *verify_tol < 0.0
                || history_limit.is_nan()
                || *history_limit <= 0.0
            {
                return Err(Failure::new(
                    Kind::Usage,
                    "--verify-tol must be nonnegative and --history-limit positive",
                )
                .into());
            }
            let source = policy_source(policy)?;
            let checks = commands::VerifyChecks {
                tolerance: *verify_tol,
                samples: *samples,
                seed: policy.solver.seed,
                history_limit: *history_limit,
            };
            commands::verify(game, &source, &checks, out)
        }
        Command::Export { game, policy } => {
            if policy.policy.is_none() && policy.solver.mode != ModeArg::Grid {
                return Err(Failure::new(
                    Kind::Usage,
                    "export needs --mode grid or a grid-mode --policy",
                )
                .into());
            }
            commands::export(game, &policy_source(policy)?, out)
        }
    }
}

fn policy_source(args: &PolicyArgs) -> anyhow::Result<commands::PolicySource> {
    Ok(match &args.policy {
        Some(path) => commands::PolicySource::File(path.clone()),
        None => commands::PolicySource::Solve(args.solver.config()?, args.solver.options()?),
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Solve { .. } => "solve",
        Command::Simulate { .. } => "simulate",
        Command::Verify { .. } => "verify",
        Command::Export { .. } => "export",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let (code, doc) =
                failure::render(&Failure::new(Kind::Usage, e.kind().to_string()).into());
            eprintln!("{doc}");
            return ExitCode::from(code as u8);
        }
    };
    let start = Instant::now();
    let result = run(&cli);
    eprintln!(
        "spbe {}: {:.3} s",
        command_name(&cli.command),
        start.elapsed().as_secs_f64()
    );
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, doc) = failure::render(&err);
            let written = cli
                .error_out
                .as_ref()
                .map(|path| std::fs::write(path, format!("{doc}\n")));
            if !matches!(written, Some(Ok(()))) {
                eprintln!("{doc}");
            }
            ExitCode::from(code as u8)
        }
    }
}
