use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curvebound_cli::commands::{check_bundled, gnuplot_header};
use curvebound_cli::error::exit;
use curvebound_cli::{cmd_check, cmd_rgflow, cmd_scan, cmd_solve, cmd_wavefunction, CliError, OutputDir, Scenario};

#[derive(Debug, Parser)]
#[command(name = "curvebound", version, about = "Bound states of delta interactions on closed curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (falls back to CURVEBOUND_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON document.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ground state, positivity and Geršgorin certificates.
    Solve(Common),
    /// Eigenvalue flow over the scenario energy grid.
    Scan(Common),
    /// Ground-state wave function on the scenario box.
    Wavefunction(Common),
    /// Coupling flow and scaling-law table (rg_subtracted scheme).
    Rgflow(Common),
    /// Invariant suite; without --scenario, runs every bundled scenario.
    Check {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Seed for the sampled checks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a gnuplot script header for the scan CSV.
    Gnuplot {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("CURVEBOUND_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Schema(format!("CURVEBOUND_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(CliError::Schema("--threads must be positive".into()));
        }
        curvebound::par::configure_threads(n).map_err(CliError::Io)?;
    }
    let summary = |r: &curvebound_cli::RunRecord| {
        if let Some(g) = &r.ground_state {
            println!("E_gr = {:.15e}", g.energy);
        }
    };
    match cli.command {
        Command::Solve(c) => summary(&cmd_solve(&Scenario::load(&c.scenario)?, &OutputDir(c.out))?),
        Command::Scan(c) => {
            let r = cmd_scan(&Scenario::load(&c.scenario)?, &OutputDir(c.out))?;
            if let Some(s) = r.scan {
                println!("{} points, max slope {:e}", s.points, s.max_slope);
            }
        }
        Command::Wavefunction(c) => {
            summary(&cmd_wavefunction(&Scenario::load(&c.scenario)?, &OutputDir(c.out))?)
        }
        Command::Rgflow(c) => {
            let r = cmd_rgflow(&Scenario::load(&c.scenario)?, &OutputDir(c.out))?;
            if let Some(f) = r.rgflow {
                println!("C = {:.12}, max scaling discrepancy {:e}", f.c, f.max_scaling_discrepancy);
            }
        }
        Command::Check { scenario, out, seed } => match scenario {
            Some(path) => {
                cmd_check(&Scenario::load(&path)?, &OutputDir(out), seed)?;
                println!("all checks passed");
            }
            None => {
                let records = check_bundled(&out, seed)?;
                println!("all checks passed for {} bundled scenarios", records.len());
            }
        },
        Command::Gnuplot { scenario } => print!("{}", gnuplot_header(&Scenario::load(&scenario)?)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::SCHEMA } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("curvebound: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
