use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fermisim::experiments::{axis_range, run, sweep, ExperimentConfig, ExperimentId, SweepAxis};
use fermisim::{Error, Result};

#[derive(Parser)]
#[command(name = "fermisim", version, about = "Digital simulation of small fermionic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV and JSON outputs.
    Run(RunArgs),
    /// Run an experiment across values of one axis and tabulate the summaries.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment id, e.g. fig3 or census_table_s1.
    #[arg(long)]
    experiment: Option<String>,
    /// JSON config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// none, paper, or a multiple of the reference gate errors.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// s5 (canonical) or s6 (odd/even).
    #[arg(long)]
    ordering: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// steps, noise_scale or ordering.
    #[arg(long, default_value = "steps")]
    axis: String,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    /// Number of values for a noise_scale range.
    #[arg(long, default_value_t = 5)]
    points: usize,
    /// Explicit comma-separated values; overrides --from/--to.
    #[arg(long, value_delimiter = ',')]
    values: Vec<String>,
}

fn parse_noise(s: &str) -> Result<f64> {
    match s {
        "none" => Ok(0.0),
        "paper" => Ok(1.0),
        x => x
            .parse()
            .map_err(|_| Error::config("noise", format!("expected none, paper or a scale, got '{x}'"))),
    }
}

fn build_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => {
            let id = c
                .experiment
                .as_deref()
                .ok_or_else(|| Error::config("experiment", "pass --experiment or --config"))?;
            ExperimentConfig::new(id.parse::<ExperimentId>()?)
        }
    };
    if let (Some(id), Some(_)) = (&c.experiment, &c.config) {
        cfg.experiment = id.parse()?;
    }
    if let Some(n) = &c.noise {
        cfg.noise_scale = parse_noise(n)?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.ordering {
        cfg.ordering = Some(o.clone());
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = build_config(&args.common)?;
            if args.steps.is_some() {
                cfg.steps = args.steps;
            }
            let out = run(&cfg)?;
            out.write_to(&args.common.out)?;
            print!("{}", out.summary_json()?);
        }
        Command::Sweep(args) => {
            let cfg = build_config(&args.common)?;
            let axis: SweepAxis = args.axis.parse()?;
            let values = if !args.values.is_empty() {
                args.values.clone()
            } else {
                let from = args
                    .from
                    .ok_or_else(|| Error::config("from", "pass --from/--to or --values"))?;
                let to = args
                    .to
                    .ok_or_else(|| Error::config("to", "pass --from/--to or --values"))?;
                axis_range(axis, from, to, args.points)?
            };
            let table = sweep(&cfg, axis, &values)?;
            table.write_to(&args.common.out)?;
            print!("{}", table.to_csv()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
