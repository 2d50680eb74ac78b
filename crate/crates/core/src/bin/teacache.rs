use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use teacache::bench::{self, Experiment};
use teacache::config::ExperimentConfig;
use teacache::Error;

#[derive(Parser)]
#[command(
    name = "teacache",
    version,
    about = "Timestep-embedding-aware caching benchmark"
)]
struct Cli {
    /// Experiment config file; built-in reference defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Replace the configured seed list with this single seed.
    #[arg(long, global = true, value_name = "N")]
    seed_override: Option<u64>,

    /// Output directory (overrides `run.output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,

    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record uncached difference traces and fit the rescaling polynomial.
    Calibrate {
        /// Polynomial order (defaults to `calibration.order`).
        #[arg(long)]
        order: Option<usize>,
    },
    /// Run the baseline and the configured policy on every seed.
    Run,
    /// Run the policy over the δ grid and aggregate per δ.
    Sweep,
    /// Dump per-step trajectories of the configured policy.
    TraceDump,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed_override {
        config.seeds = vec![seed];
        config.calibration_seeds = vec![seed];
    }
    if let Some(dir) = &cli.output {
        config.output_dir = dir.clone();
    }
    if let Command::Calibrate { order: Some(order) } = cli.command {
        config.calibration_order = order;
    }
    let out_dir = config.output_dir.clone();
    let exp = Experiment::new(config)?;
    let say = |msg: String| {
        if !cli.quiet {
            println!("{msg}");
        }
    };

    match cli.command {
        Command::Calibrate { .. } => {
            let res = bench::cmd_calibrate(&exp, &out_dir)?;
            say(format!(
                "fitted order-{} rescaler on {} traces: rmse {:.6e} (identity {:.6e})",
                res.rescaler.order(),
                res.traces.len(),
                res.fit_rmse,
                res.identity_rmse
            ));
            say(format!("wrote {}", out_dir.join("rescaler.txt").display()));
        }
        Command::Run => {
            let rows = bench::cmd_run(&exp, &out_dir)?;
            say(format!(
                "wrote {} rows to {}",
                rows.len(),
                out_dir.join("report.csv").display()
            ));
        }
        Command::Sweep => {
            let res = bench::cmd_sweep(&exp, &out_dir)?;
            for r in &res.aggregate {
                say(format!(
                    "delta {:<6} computed {:>6.2}  speedup {:>5.2}x  psnr {:>7.2} dB  ssim {:.4}",
                    r.delta, r.computed_steps.mean, r.speedup.mean, r.psnr.mean, r.ssim.mean
                ));
            }
            say(format!("wrote sweep outputs to {}", out_dir.display()));
        }
        Command::TraceDump => {
            let paths = bench::cmd_trace_dump(&exp, &out_dir)?;
            say(format!(
                "wrote {} trajectories to {}",
                paths.len(),
                out_dir.display()
            ));
        }
    }
    Ok(())
}
