use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dampwave::config::ExperimentConfig;
use dampwave::dynamics::write_trajectory_csv;
use dampwave::exec::Execution;
use dampwave::harness::{
    validate_config, write_gramian_spectrum, write_report_csv, write_timings_csv, Experiment, SweepRow,
};
use dampwave::Error;

#[derive(Parser)]
#[command(name = "dampwave", version, about = "Steer a strongly damped delayed wave equation")]
struct Cli {
    /// Run every data-parallel loop on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Output directory; overrides `[sweep] output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration against the model hypotheses.
    Validate { config: PathBuf },
    /// Integrate with the base control only.
    Simulate { config: PathBuf },
    /// One steering run.
    Steer {
        config: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Every (alpha, delta) pair in the config.
    Sweep { config: PathBuf },
    /// Dump the Gramian spectrum for one window.
    Gramian {
        config: PathBuf,
        #[arg(long)]
        delta: f64,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Config(_) | Error::InvalidParameter(_) => 2,
        Error::Io(_) | Error::Csv(_) => 1,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn output_dir(cli: &Cli, config: &ExperimentConfig) -> std::io::Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&config.sweep.output_dir));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load(path: &Path) -> dampwave::Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}

fn run(cli: &Cli) -> dampwave::Result<u8> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match &cli.command {
        Command::Validate { config } => {
            let report = validate_config(&load(config)?);
            println!("{report}");
            Ok(if report.is_ok() { 0 } else { 2 })
        }
        Command::Simulate { config } => {
            let cfg = load(config)?;
            let ex = Experiment::from_config(&cfg)?;
            let traj = ex.simulate()?;
            let path = output_dir(cli, &cfg)?.join("trajectory_base.csv");
            write_trajectory_csv(&path, &traj, ex.simulator().model().basis.eigenvalues())?;
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Steer { config, alpha, delta } => {
            let cfg = load(config)?;
            let ex = Experiment::from_config(&cfg)?;
            ex.window(*delta)?;
            let outcome = ex.run_steering(*alpha, *delta, exec)?;
            let dir = output_dir(cli, &cfg)?;
            let rows = [SweepRow { alpha: *alpha, delta: *delta, outcome: Ok(outcome.row), timings: outcome.timings }];
            write_report_csv(&dir.join("report.csv"), &rows)?;
            write_timings_csv(&dir.join("timings.csv"), &rows)?;
            write_trajectory_csv(
                &dir.join("trajectory_steered.csv"),
                &outcome.trajectory,
                ex.simulator().model().basis.eigenvalues(),
            )?;
            let r = outcome.row;
            println!(
                "final error {:.6e}  linear residual {:.6e}  nonlinear perturbation {:.6e}  uncontrolled {:.6e}  q_min {:.6e}",
                r.final_error, r.linear_residual, r.nonlinear_perturbation, r.uncontrolled_error, r.q_min
            );
            Ok(0)
        }
        Command::Sweep { config } => {
            let cfg = load(config)?;
            let ex = Experiment::from_config(&cfg)?;
            if cfg.sweep.deltas.is_empty() || cfg.sweep.alphas.is_empty() {
                return Err(Error::InvalidParameter("sweep needs nonempty alpha and delta lists".into()));
            }
            let rows = ex.sweep(exec);
            let dir = output_dir(cli, &cfg)?;
            write_report_csv(&dir.join("report.csv"), &rows)?;
            write_timings_csv(&dir.join("timings.csv"), &rows)?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!("{} rows, {failed} failed; wrote {}", rows.len(), dir.join("report.csv").display());
            Ok(if failed == 0 { 0 } else { 3 })
        }
        Command::Gramian { config, delta } => {
            let cfg = load(config)?;
            let ex = Experiment::from_config(&cfg)?;
            let g = ex.gramian(*delta, exec)?;
            let path = output_dir(cli, &cfg)?.join("gramian_spectrum.csv");
            write_gramian_spectrum(std::fs::File::create(&path)?, &g)?;
            println!("min eigenvalue {:.6e}; wrote {}", g.min_eigenvalue(), path.display());
            Ok(0)
        }
    }
}
