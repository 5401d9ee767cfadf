use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nlab::config::ProblemConfig;
use nlab::scenario::{
    empirical_threshold, render_field, run_scenario, sweep_epsilon, validate_config,
};
use nlab::Error;

/// Nonlocal bistable steady states around obstacles.
///
/// Exit codes: 0 success, 2 config error, 3 construction error, 4 convergence error, 5 certification failure.
/// Set NLAB_THREADS to fix the worker thread count.
#[derive(Parser)]
#[command(name = "nlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write fields, reports and the run log.
    Run {
        config: PathBuf,
        /// Overrides output.directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun a scenario over a list of epsilon values and write sweep.csv.
    Sweep {
        config: PathBuf,
        /// Comma-separated epsilon values.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a binary field file as an 8-bit PGM.
    Render {
        field: PathBuf,
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        max: Option<f64>,
    },
    /// Check a config without solving.
    Validate { config: PathBuf },
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("NLAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("NLAB_THREADS = {v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ProblemConfig::load(&config)?;
            let outcome = run_scenario(&cfg, out.as_deref())?;
            let r = &outcome.report;
            println!(
                "{}: residual {:.3e} (tol {:.3e}), inner ball min {:.6}, ring mean {:.6}, liouvilleFlag {}",
                cfg.scenario, r.residual_max, r.tolerance, r.inner_ball.min, r.ring_mean, r.liouville_flag
            );
        }
        Command::Sweep { config, eps, out } => {
            let cfg = ProblemConfig::load(&config)?;
            let rows = sweep_epsilon(&cfg, &eps, out.as_deref())?;
            print!("{}", nlab::scenario::sweep_csv(&rows));
            match empirical_threshold(&rows) {
                Some(e) => println!("counterexample certified up to epsilon = {e}"),
                None => println!("no certified counterexample in the sweep"),
            }
        }
        Command::Render {
            field,
            out,
            min,
            max,
        } => render_field(&field, &out, min, max)?,
        Command::Validate { config } => {
            let cfg = ProblemConfig::load(&config)?;
            println!("{}", validate_config(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class().exit_code() as u8)
        }
    }
}
