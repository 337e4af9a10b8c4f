use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use otfs_core::bench::{aggregate, run_sweep, write_outputs, ExperimentConfig, Sweep, SweepAxis};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "otfs-bench", version, about = "OTFS massive-MIMO channel estimation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file or built-in profile.
    Run(RunArgs),
    /// Run a one-axis sweep, overriding the configured sweep.
    Sweep {
        #[arg(long)]
        axis: String,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the built-in signal-chain and estimator checks.
    Validate,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Desk,
    Paper,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; defaults to the selected profile.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    /// Base seed; trial t uses seed + t.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "desk")]
    profile: Profile,
    /// Write measured wall-clock times instead of zeros.
    #[arg(long)]
    record_runtime: bool,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => match self.profile {
                Profile::Desk => ExperimentConfig::desk(),
                Profile::Paper => ExperimentConfig::paper(),
            },
        };
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.base_seed = s;
        }
        Ok(cfg)
    }
}

fn execute(cfg: &ExperimentConfig, args: &RunArgs) -> Result<()> {
    let rows = run_sweep(cfg)?;
    write_outputs(&args.out, cfg, &rows, args.record_runtime)?;
    println!("{:>12} {:>10} {:>8} {:>12} {:>12} {:>8}", cfg.sweep.axis.name(), "estimator", "trials", "mean_nmse", "median_nmse", "flagged");
    for a in aggregate(&rows, false) {
        println!(
            "{:>12} {:>10} {:>8} {:>12.4e} {:>12.4e} {:>8}",
            a.sweep_value, a.estimator, a.trials, a.mean, a.median, a.flagged
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn validate() -> Result<bool> {
    let checks = otfs_core::validate::run_all()?;
    let mut all = true;
    for c in &checks {
        println!("{} {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        all &= c.passed;
    }
    Ok(all)
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            cfg.validate()?;
            execute(&cfg, &args)?;
        }
        Command::Sweep { axis, values, run } => {
            let mut cfg = run.load()?;
            let axis: SweepAxis = axis.parse()?;
            if values.iter().any(|v| !v.is_finite()) {
                bail!("sweep values must be finite");
            }
            cfg.sweep = Sweep { axis, values };
            cfg.validate()?;
            execute(&cfg, &run)?;
        }
        Command::Validate => {
            if !validate()? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
