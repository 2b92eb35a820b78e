use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dqg_cli::commands::{self, ApEmit, OperatorKind, PairArgs, Suite};
use dqg_cli::{ApChoice, CommandOutput, Format, ProcessKind, RunConfig};

/// Causal-set growth processes and the discrete operators built on them.
#[derive(Parser)]
#[command(name = "dqg", version)]
struct Cli {
    /// Largest causet size to build.
    #[arg(long, global = true, default_value_t = 5)]
    max_level: usize,
    /// Numerical tolerance for every check.
    #[arg(long, global = true, default_value_t = dqg_core::qmeasure::DEFAULT_TOL)]
    tol: f64,
    /// Output format: json, csv or table.
    #[arg(long, global = true, default_value = "json")]
    format: Format,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Use the literal complement semantics when approximating `not(...)`.
    #[arg(long, global = true)]
    strict_complement: bool,
    /// Write the output to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Transition table: action, uniform or file:<path>.
    #[arg(long, global = true, default_value = "action")]
    ap: ApChoice,
    /// Operators built from the table: amplitude (rank one) or classical (diagonal).
    #[arg(long, global = true, default_value = "amplitude")]
    process: ProcessKind,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct PairOpts {
    /// Truncation level (defaults to min(max-level, 5)).
    #[arg(long = "N")]
    truncation: Option<usize>,
    /// First path: chain, antichain, random or a path literal.
    #[arg(long, default_value = "path:chain")]
    omega: String,
    /// Second path: chain, antichain, random or a path literal.
    #[arg(long, default_value = "path:antichain")]
    omega_prime: String,
}

impl From<PairOpts> for PairArgs {
    fn from(p: PairOpts) -> Self {
        PairArgs { truncation: p.truncation, omega: p.omega, omega_prime: p.omega_prime }
    }
}

#[derive(Subcommand)]
enum Command {
    /// List every causet per level with order statistics and offspring counts.
    Enum,
    /// Count n-paths per level and list those of one level.
    Paths {
        /// Level to list (defaults to max-level).
        #[arg(long)]
        level: Option<usize>,
        /// Maximum number of paths to list.
        #[arg(long, default_value_t = 200)]
        limit: usize,
    },
    /// Recompute the three-step worked example and compare it with the bundled table.
    PaperExample,
    /// Inspect an amplitude process: characterization report, table or path amplitudes.
    Ap {
        /// What to print: report, table or amplitudes.
        #[arg(long, default_value = "report")]
        emit: ApEmit,
    },
    /// Finite-level q-measures of an event.
    Mu {
        /// Event in the set-spec language, e.g. `cyl:1;|2;0<1` or `not(path:chain)`.
        #[arg(long = "set")]
        set: String,
    },
    /// Run invariant suites and report pass/fail per property.
    Verify {
        /// growth, consistency, ap, grade2, einstein, classical or all.
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[command(flatten)]
        pair: PairOpts,
        /// Random samples per randomized check.
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Dump one discrete geometric operator for a path pair.
    Einstein {
        /// nabla, curvature, metric, mass-energy, adjoint-metric or a contracted-* variant.
        #[arg(long, default_value = "curvature")]
        op: OperatorKind,
        #[command(flatten)]
        pair: PairOpts,
    },
    /// Extremes of the partition-function magnitude per level.
    Zscan,
    /// Site measures and flatness checks for a classical process.
    Classical {
        /// Random samples per randomized check.
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

fn run(cli: Cli) -> Result<(CommandOutput, Format, Option<PathBuf>)> {
    let cfg = RunConfig {
        max_level: cli.max_level,
        ap: cli.ap,
        process: cli.process,
        tol: cli.tol,
        format: cli.format,
        seed: cli.seed,
        strict_complement: cli.strict_complement,
    };
    cfg.validate()?;
    let out = match cli.command {
        Command::Enum => commands::cmd_enum(&cfg)?,
        Command::Paths { level, limit } => commands::cmd_paths(&cfg, level, limit)?,
        Command::PaperExample => commands::cmd_paper_example(&cfg)?,
        Command::Ap { emit } => commands::cmd_ap(&cfg, emit)?,
        Command::Mu { set } => commands::cmd_mu(&cfg, &set)?,
        Command::Verify { suite, pair, trials } => commands::cmd_verify(&cfg, suite, &pair.into(), trials)?,
        Command::Einstein { op, pair } => commands::cmd_einstein(&cfg, &pair.into(), op)?,
        Command::Zscan => commands::cmd_zscan(&cfg)?,
        Command::Classical { trials } => commands::cmd_classical(&cfg, trials)?,
    };
    Ok((out, cfg.format, cli.out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(out, format, path)| {
        let text = out.render(format)?;
        match path {
            Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
            None => std::io::stdout().lock().write_all(text.as_bytes())?,
        }
        Ok(out.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("dqg: one or more checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("dqg: error: {e:#}");
            ExitCode::from(2)
        }
    }
}
