use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tzsim_core::backhaul::{fit_from_log, parse_log};
use tzsim_core::config::{load_config, parse_config, ScenarioConfig};
use tzsim_core::experiment::{run_experiment, simulate_artifacts, sweep_artifacts, threshold_sweep, Artifact};
use tzsim_core::sync::ThresholdSpec;

/// Edge-cloud Trust Zone reliability simulator.
#[derive(Parser)]
#[command(name = "tzsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON). Omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run warm-up, training and testing for one seed at the configured threshold.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every threshold against every seed.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated thresholds; `disabled` for the no-sync baseline.
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<String>>,
        /// Comma-separated seeds. Defaults to five seeds starting at the config seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Abort with exit code 4 if any seed breaks the report/traffic ordering.
        #[arg(long)]
        self_check: bool,
    },
    /// Estimate a transition matrix from a state-per-line log.
    FitChain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: PathBuf,
        /// Pseudo-count added to each permitted transition.
        #[arg(long, default_value_t = 0.0)]
        smoothing: f64,
    },
    /// Parse and validate a config, printing the resolved echo.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
    SelfCheck(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::SelfCheck(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Runtime(m) | Failure::SelfCheck(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn read_config(path: Option<&Path>) -> Result<ScenarioConfig, Failure> {
    let config = match path {
        Some(p) => load_config(p),
        None => parse_config("{}", Path::new(".")),
    };
    config.map_err(|e| Failure::Config(format!("config error at {e}")))
}

fn resolve(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut config = read_config(common.config.as_deref())?;
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    Ok(config)
}

fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    for (name, bytes) in artifacts {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn simulate(common: &Common, seed: Option<u64>) -> Result<(), Failure> {
    let mut config = resolve(common)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let outcome = run_experiment(&config, config.seed).map_err(runtime)?;
    let run = &outcome.runs[0];
    write_artifacts(&config.output.dir, &simulate_artifacts(&config, &outcome, run))?;
    eprintln!(
        "seed {}: {} CSSO reports (baseline {}), sync traffic {}, written to {}",
        config.seed,
        run.metrics.csso_reports_total,
        outcome.baseline_reports,
        run.metrics.sync_traffic_total,
        config.output.dir.display()
    );
    Ok(())
}

fn sweep(
    common: &Common,
    thresholds: Option<&[String]>,
    seeds: Option<&[u64]>,
    self_check: bool,
) -> Result<(), Failure> {
    let config = resolve(common)?;
    let thresholds = match thresholds {
        Some(list) => list
            .iter()
            .map(|s| {
                ThresholdSpec::parse(s)
                    .ok_or_else(|| Failure::Config(format!("--thresholds: {s:?} is not `disabled` or a level in [0, 1]")))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => config.sweep_thresholds(),
    };
    let seeds = match seeds {
        Some(list) => list.to_vec(),
        None => (0..5).map(|i| config.seed.wrapping_add(i)).collect(),
    };
    let table = threshold_sweep(&config, &seeds, &thresholds).map_err(runtime)?;
    if self_check {
        if let Err(v) = table.check_monotonicity() {
            return Err(Failure::SelfCheck(format!(
                "seed {}: threshold {} gave {} reports / {} traffic, stricter {} gave {} / {}",
                v.seed,
                v.looser.threshold,
                v.looser.csso_reports,
                v.looser.sync_traffic,
                v.stricter.threshold,
                v.stricter.csso_reports,
                v.stricter.sync_traffic
            )));
        }
    }
    write_artifacts(&config.output.dir, &sweep_artifacts(&config, &table))?;
    eprintln!(
        "{} thresholds x {} seeds written to {}",
        thresholds.len(),
        seeds.len(),
        config.output.dir.display()
    );
    Ok(())
}

fn fit_chain(common: &Common, log: &Path, smoothing: f64) -> Result<(), Failure> {
    let config = resolve(common)?;
    let text = fs::read_to_string(log).map_err(|e| Failure::Config(format!("{}: {e}", log.display())))?;
    let states = parse_log(&text).map_err(|e| Failure::Config(format!("{}: {e}", log.display())))?;
    let mut doc = config.chain().to_document();
    let fitted = fit_from_log(&states, smoothing, config.chain().classes())
        .map_err(|e| Failure::Config(format!("{}: {e}", log.display())))?;
    doc.transition = fitted.iter().map(|row| row.to_vec()).collect();
    let mut json = serde_json::to_string_pretty(&doc).map_err(runtime)?;
    json.push('\n');
    write_artifacts(&config.output.dir, &[("chain.json", json.into_bytes())])?;
    eprintln!("fitted {} transitions into {}", states.len().saturating_sub(1), config.output.dir.join("chain.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { common, seed } => simulate(common, *seed),
        Command::Sweep { common, thresholds, seeds, self_check } => {
            sweep(common, thresholds.as_deref(), seeds.as_deref(), *self_check)
        }
        Command::FitChain { common, log, smoothing } => fit_chain(common, log, *smoothing),
        Command::Validate { config } => read_config(config.as_deref()).map(|c| println!("{}", c.echo())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("tzsim: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}
