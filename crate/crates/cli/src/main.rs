use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use panel_lp::ingest::config::RunConfig;
use panel_lp::ingest::{write_events, write_mortality, write_panel};
use panel_lp::lp::Registry;
use panel_lp::simgen::{generate, DgpSpec};
use panel_lp::{pipeline, validate, Error, Result};

/// Panel local-projection impulse responses.
#[derive(Debug, Parser)]
#[command(name = "panel-lp", version, about)]
struct Cli {
    /// Worker threads for horizon and replication parallelism
    /// (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the configured specification and write irf.csv, one table
    /// per horizon and manifest.json.
    Estimate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic panel, its events and mortality, and the truth record.
    Simulate {
        /// DGP settings as `key = value` lines; defaults apply otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an oracle or Monte Carlo suite and report metrics against thresholds.
    Validate {
        /// One of: ols-oracle, fe-oracle, cluster-oracle, fwl-oracle,
        /// irf-recovery, size-control, transition-separation.
        suite: String,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = 20_210)]
        seed: u64,
    },
}

fn estimate(config: &Path) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let outcome = pipeline::run(&cfg, &Registry::default())?;
    for entry in &outcome.irf.entries {
        for effect in &entry.effects {
            let ci = &effect.interval;
            println!(
                "k={} {} {:.4}{} [{:.4}, {:.4}] n={}",
                entry.horizon, effect.name, ci.estimate, ci.stars, ci.ci_low, ci.ci_high, entry.n_obs
            );
        }
    }
    println!("wrote {} files to {}", outcome.files.len(), cfg.output_dir.display());
    Ok(())
}

fn simulate(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut dgp = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            DgpSpec::parse_config(&text, &path.display().to_string())?
        }
        None => DgpSpec::default(),
    };
    if let Some(seed) = seed {
        dgp.seed = seed;
    }
    let sim = generate(&dgp)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_panel(&sim.panel, &out.join("panel.csv"))?;
    write_events(&sim.events, &out.join("events.csv"))?;
    write_mortality(&sim.events, &out.join("mortality.csv"))?;
    let truth = out.join("truth.txt");
    std::fs::write(&truth, sim.truth.to_text()).map_err(|e| Error::io(&truth, e))?;
    println!(
        "simulated {} entity-years with {} shocks into {}",
        sim.panel.n_rows(),
        sim.truth.shocks.len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Estimate { config } => estimate(&config)?,
        Command::Simulate { config, seed, out } => simulate(config.as_deref(), seed, &out)?,
        Command::Validate { suite, reps, seed } => {
            let report = validate::run_suite(&suite, reps, seed)?;
            println!("{report}");
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e.to_string().replace('\n', " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
