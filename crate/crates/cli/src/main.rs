use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use omarray_cli::commands::{self, RunOptions};
use omarray_cli::config::ExperimentConfig;
use omarray_cli::{output, CliError};

#[derive(Parser)]
#[command(
    name = "omarray",
    about = "Quantum state transfer in 1-D optomechanical arrays",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON, or TOML by extension)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV/metadata files
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Bypass the Hamiltonian/density-matrix dimension guards
    #[arg(long, global = true)]
    force_dim: bool,

    /// Worker threads for sweeps (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Also emit a gnuplot script next to the CSV
    #[arg(long, global = true)]
    gnuplot_script: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Stability, rotating-wave validity, and transfer-time compatibility
    Check,
    /// One transfer run with a time-series CSV
    Simulate,
    /// Fidelity at the transfer time across a parameter grid
    Sweep,
    /// Simultaneous counter-propagating transfers from both ends
    Bidirectional,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let cfg = ExperimentConfig::load(config_path)?;
    let opts = RunOptions {
        force_dim: cli.force_dim,
    };
    let started = Instant::now();

    match cli.command {
        Command::Check => {
            let report = commands::run_check(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            for s in &report.stability {
                println!(
                    "stability cell {}: G = {:e} vs bound {:e} -> {}",
                    s.cell,
                    s.g,
                    s.bound,
                    if s.ok { "pass" } else { "FAIL" }
                );
            }
            println!(
                "rwa: min ratio {:.3} at bond {} (margin {}) -> {}",
                report.rwa.ratio,
                report.rwa.bond,
                report.rwa.margin,
                if report.rwa.ok { "pass" } else { "FAIL" }
            );
            println!(
                "transfer-time compatibility: ratio {:.6} (nearest odd {}) -> {}",
                report.time_compatibility.ratio,
                report.time_compatibility.nearest_odd,
                if report.time_compatibility.ok {
                    "pass"
                } else {
                    "FAIL"
                }
            );
            if !report.all_ok {
                return Err(CliError::PhysicsCheckFailed);
            }
        }
        Command::Simulate => {
            let outcome = commands::run_simulate(&cfg, &opts)?;
            let paths = output::write_simulate(
                &cli.out,
                &cfg,
                &outcome,
                started.elapsed(),
                cli.gnuplot_script,
            )?;
            println!("wrote {}", paths.csv.display());
            println!("wrote {}", paths.metadata.display());
            if let Some(gp) = paths.gnuplot {
                println!("wrote {}", gp.display());
            }
            if let Some(conv) = &outcome.convergence {
                if !conv.converged {
                    return Err(CliError::NotConverged {
                        last_delta: conv.last_delta,
                        tol: conv.tol,
                    });
                }
            }
        }
        Command::Sweep => {
            let outcome = commands::run_sweep(&cfg, &opts)?;
            let paths = output::write_sweep(
                &cli.out,
                &cfg,
                &outcome,
                started.elapsed(),
                cli.gnuplot_script,
            )?;
            println!("wrote {}", paths.csv.display());
            println!("wrote {}", paths.metadata.display());
            if let Some(gp) = paths.gnuplot {
                println!("wrote {}", gp.display());
            }
        }
        Command::Bidirectional => {
            let outcome = commands::run_bidirectional(&cfg, &opts)?;
            let paths =
                output::write_bidirectional(&cli.out, &cfg, &outcome, started.elapsed())?;
            println!(
                "forward corrected fidelity  {:.6}",
                outcome.forward_corrected
            );
            println!(
                "backward corrected fidelity {:.6}",
                outcome.backward_corrected
            );
            println!("wrote {}", paths.csv.display());
            println!("wrote {}", paths.metadata.display());
        }
    }
    Ok(())
}
