use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use swirlsolve::io::{load_config, run, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "swirlsolve", version, about = "Steady swirling Euler-Poisson flow in a cylinder")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// JSON run configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Grid size as `NX,NR`.
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Perturbation amplitude.
    #[arg(long, global = true, allow_negative_numbers = true)]
    sigma: Option<f64>,
    /// Number of grids in a convergence study.
    #[arg(long, global = true)]
    levels: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Background profile CSV.
    Background,
    /// Perturbed solve: field CSV and report JSON.
    Solve,
    /// Solves over a list of amplitudes.
    Sweep,
    /// Residuals and streamline checks on stored or freshly solved fields.
    Verify,
    /// Observed orders over successively refined grids.
    Convergence,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected NX,NR")?;
    let nx = a.trim().parse().map_err(|e| format!("NX: {e}"))?;
    let nr = b.trim().parse().map_err(|e| format!("NR: {e}"))?;
    Ok((nx, nr))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match load_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides { out_dir: cli.out, grid: cli.grid, sigma: cli.sigma, levels: cli.levels });
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let command = match cli.command {
        Sub::Background => Command::Background,
        Sub::Solve => Command::Solve,
        Sub::Sweep => Command::Sweep,
        Sub::Verify => Command::Verify,
        Sub::Convergence => Command::Convergence,
    };
    match run(command, &cfg) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
