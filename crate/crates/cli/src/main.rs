//! `trialscope` command-line driver.
//!
//! Exit status: 0 on success, 1 when a stage fails (bad input, failed
//! estimation), 2 on usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};
use trialscope::pipeline::{run, PipelineConfig, Subcommand};

#[derive(Parser)]
#[command(name = "trialscope", version, about = "Reporting-irregularity forensics for registered trials")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable), e.g. --set bootstrap_reps=200
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Directory holding trials.csv, outcomes.csv, rankings.csv and optional side files
    #[arg(long, global = true)]
    input_dir: Option<PathBuf>,
    /// Output directory
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Master seed (also used as the simulator seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    bootstrap_reps: Option<usize>,
    /// two-sided or one-sided
    #[arg(long, global = true)]
    side: Option<String>,
    #[arg(long, global = true)]
    cutoff: Option<f64>,
    /// Sponsor split as criterion:k, e.g. revenue2018:10
    #[arg(long, global = true)]
    split: Option<String>,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Load and filter the registry tables
    Ingest,
    /// Convert reported p-values into z-scores
    Transform,
    /// Kernel density curves of phase II and phase III z-scores
    Density,
    /// Density discontinuity tests at the significance cutoff
    Disctest {
        /// Local polynomial order of the test
        #[arg(long)]
        order: Option<usize>,
        /// Common bandwidth on both sides
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Test name (cjm or binned)
        #[arg(long)]
        test: Option<String>,
        /// phase or sponsor_class,phase
        #[arg(long)]
        group_by: Option<String>,
    },
    /// Link phase II trials to later phase III trials
    Link,
    /// Fit the continuation logit
    FitSelection,
    /// Decompose the phase II to III change in significant shares
    Decompose,
    /// Run tests and decompositions over all sponsor splits
    Sweep,
    /// Generate a synthetic registry with ground truth
    Simulate,
    /// Run every analysis stage
    Report,
}

fn build_config(cli: &Cli) -> trialscope::Result<(Subcommand, PipelineConfig)> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(d) = &g.input_dir {
        cfg.set("input_dir", &d.to_string_lossy())?;
    }
    if let Some(o) = &g.out {
        cfg.output = o.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
        cfg.sim.seed = s;
    }
    if let Some(b) = g.bootstrap_reps {
        cfg.bootstrap_reps = b;
    }
    if let Some(s) = &g.side {
        cfg.set("side", s)?;
    }
    if let Some(c) = g.cutoff {
        cfg.cutoff = Some(c);
    }
    if let Some(s) = &g.split {
        cfg.set("split", s)?;
    }
    for kv in &g.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| trialscope::Error::config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    let cmd = match &cli.command {
        Command::Ingest => Subcommand::Ingest,
        Command::Transform => Subcommand::Transform,
        Command::Density => Subcommand::Density,
        Command::Disctest {
            order,
            bandwidth,
            test,
            group_by,
        } => {
            if let Some(t) = test {
                cfg.test = t.clone();
            }
            let mut params = Vec::new();
            if let Some(o) = order {
                params.push(format!("order={o}"));
            }
            if let Some(h) = bandwidth {
                params.push(format!("h={h}"));
            }
            if !params.is_empty() {
                let name = cfg.test.split(':').next().unwrap_or("cjm").to_string();
                cfg.test = format!("{name}:{}", params.join(","));
            }
            if let Some(gb) = group_by {
                cfg.set("group_by", gb)?;
            }
            Subcommand::Disctest
        }
        Command::Link => Subcommand::Link,
        Command::FitSelection => Subcommand::FitSelection,
        Command::Decompose => Subcommand::Decompose,
        Command::Sweep => Subcommand::Sweep,
        Command::Simulate => Subcommand::Simulate,
        Command::Report => Subcommand::Report,
    };
    Ok((cmd, cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, cfg) = match build_config(&cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(cmd, &cfg) {
        Ok(summary) => {
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}: wrote {} files to {}", cmd, summary.outputs.len(), cfg.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
