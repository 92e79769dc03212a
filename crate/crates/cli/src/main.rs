use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dyadtf::harness::config::GridSection;
use dyadtf::{ExperimentConfig, ExperimentKind, RunReport};

/// Seeded experiment suites for the dyadic model operators and multipliers.
///
/// Exit status: 0 when every exact invariant holds, 1 when one fails, 2 on a configuration error.
#[derive(Debug, Parser)]
#[command(name = "dyadtf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Every exact check with a few trials each.
    Invariants(RunArgs),
    /// Empirical restricted weak-type constant under grid and collection doubling.
    Weaktype(RunArgs),
    /// Fractional Leibniz ratios and the dilation homogeneity sweep.
    Leibniz(RunArgs),
    /// 1D and 2D sparsity of level-set decompositions.
    Sparsity(RunArgs),
    /// Fast model operators against the brute-force oracle.
    Oracle(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML config; its `run.kind`, if present, must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of stdout; overrides `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Resolution exponent `m` (`2^m` cells per unit length).
    #[arg(long = "grid-exp")]
    grid_exp: Option<i32>,
    /// Box exponent `J` (domain `[0, 2^J)`).
    #[arg(long = "box-exp")]
    box_exp: Option<i32>,
    #[arg(long)]
    trials: Option<usize>,
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Self::Invariants(a) => (ExperimentKind::Invariants, a),
            Self::Weaktype(a) => (ExperimentKind::WeakTypeSweep, a),
            Self::Leibniz(a) => (ExperimentKind::LeibnizSweep, a),
            Self::Sparsity(a) => (ExperimentKind::SparsitySuite, a),
            Self::Oracle(a) => (ExperimentKind::OracleEquivalence, a),
        }
    }
}

fn config(kind: ExperimentKind, args: &RunArgs) -> dyadtf::Result<ExperimentConfig> {
    let mut c = match &args.config {
        Some(path) => ExperimentConfig::from_path(path, Some(kind))?,
        None => ExperimentConfig::new(kind),
    };
    if let Some(seed) = args.seed {
        c.run.seed = seed;
    }
    if let Some(trials) = args.trials {
        c.run.trials = Some(trials);
    }
    if args.grid_exp.is_some() || args.box_exp.is_some() {
        let g = c.grid_section();
        c.grid = Some(GridSection { box_exp: args.box_exp.unwrap_or(g.box_exp), res_exp: args.grid_exp.unwrap_or(g.res_exp) });
    }
    Ok(c)
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> dyadtf::Result<RunReport> {
    let c = config(kind, args)?;
    let report = dyadtf::run(&c)?;
    match args.out.as_ref().or(c.run.out.as_ref()) {
        Some(path) => {
            report.write(path)?;
            println!(
                "{}: invariant_failures={} report={}",
                kind.name(),
                report.invariant_failures,
                path.display()
            );
        }
        None => print!("{}", report.render()?),
    }
    Ok(report)
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    match execute(kind, &args) {
        Ok(report) => ExitCode::from(report.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
