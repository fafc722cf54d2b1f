use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qwl::experiment::{self, ExperimentConfig};
use qwl::qpe::Tier;
use qwl::validate::run_battery;

/// Quantum Wang-Landau sampling for the transverse-field Ising chain.
#[derive(Parser)]
#[command(name = "qwl", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact spectrum, thermodynamics and binned density of states
    Exact(Common),
    /// Wang-Landau runs with phase-estimation proposals
    Wl(Common),
    /// Metropolis runs with phase-estimation proposals
    Metropolis(Common),
    /// Exact, Wang-Landau and Metropolis side by side, with error curves and plots
    Compare(Common),
    /// Quick oracle checks
    Validate,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`section.key = value` lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; run r uses seed + r
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Phase-estimation tier: pair_statevector, eigen_statevector or analytic
    #[arg(long)]
    tier: Option<Tier>,
    /// Number of independent runs
    #[arg(long)]
    runs: Option<usize>,
}

impl Common {
    fn resolve(&self) -> qwl::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::desk(),
        };
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(t) = self.tier {
            cfg.tier = t;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(command: Command) -> qwl::Result<bool> {
    match command {
        Command::Exact(c) => {
            let cfg = c.resolve()?;
            let spectrum = experiment::exact_command(&cfg)?;
            print!("{}", spectrum.to_fixture(&cfg.model));
        }
        Command::Wl(c) => {
            let cfg = c.resolve()?;
            let out = experiment::wl_command(&cfg)?;
            println!(
                "{} runs, {} steps, output in {}",
                out.runs.len(),
                out.total_steps,
                cfg.output_dir.display()
            );
        }
        Command::Metropolis(c) => {
            let cfg = c.resolve()?;
            let out = experiment::metropolis_command(&cfg)?;
            println!(
                "{} steps per chain, {} steps total, output in {}",
                out.steps_per_chain,
                out.total_steps,
                cfg.output_dir.display()
            );
        }
        Command::Compare(c) => {
            let cfg = c.resolve()?;
            let report = experiment::compare_command(&cfg)?;
            println!("quantity  wl_rmse  metropolis_rmse");
            for r in &report.rmse {
                println!("{:<8}  {:.5}  {:.5}", r.quantity.name(), r.wl, r.metropolis);
            }
            println!("output in {}", cfg.output_dir.display());
        }
        Command::Validate => {
            let checks = run_battery();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
