use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdsched::harness::{
    canned_experiments, drop_gain_table, run_and_write, ExperimentConfig, HarnessError,
};
use fdsched::model::WeightMode;
use fdsched::scenario::ScenarioDump;
use fdsched::solvers::Registry;

#[derive(Parser)]
#[command(name = "fdsched", version, about = "Full-duplex UL/DL pairing and power allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in experiment: fig2, fig3 or fig4.
    #[arg(long)]
    canned: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV/JSON results.
    Run {
        #[command(flatten)]
        source: Source,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of Monte Carlo drops.
        #[arg(long)]
        iters: Option<usize>,
        /// Output directory (overrides FDSCHED_OUT_DIR and the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Also write every drop's gain table.
        #[arg(long)]
        dump_scenarios: bool,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write one drop's positions and gains as JSON.
    DumpScenario {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Drop index within the seed's stream family.
        #[arg(long, default_value_t = 0)]
        drop: usize,
        /// Take the scenario from this config instead of fig2.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        canned: Option<String>,
    },
}

fn load(config: Option<&PathBuf>, canned: Option<&str>) -> Result<ExperimentConfig, HarnessError> {
    match (config, canned) {
        (Some(path), _) => ExperimentConfig::load(path),
        (None, Some(name)) => canned_experiments(name),
        (None, None) => canned_experiments("fig2"),
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            source,
            seed,
            iters,
            out,
            parallelism,
            dump_scenarios,
        } => {
            let mut cfg = load(source.config.as_ref(), source.canned.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = iters {
                cfg.iterations = n;
            }
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            cfg.dump_scenarios |= dump_scenarios;
            let dir = out.unwrap_or_else(|| cfg.resolved_output_dir());
            cfg.validate(&Registry::with_builtins())?;
            eprintln!(
                "running {} ({} drops, seed {}, {} threads) -> {}",
                cfg.name,
                cfg.iterations,
                cfg.seed,
                cfg.parallelism,
                dir.display()
            );
            let result = run_and_write(&cfg, &dir)?;
            for m in &result.summary.medians {
                println!(
                    "median {:<9} {:<7} mu={:<4} {}  {:.6}",
                    m.metric, m.strategy, m.mu, m.weight_mode, m.median
                );
            }
            eprintln!("done in {:.1} s", result.wall_time_s);
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            cfg.validate(&Registry::with_builtins())?;
            println!("OK");
            Ok(())
        }
        Command::DumpScenario {
            seed,
            out,
            drop,
            config,
            canned,
        } => {
            let mut cfg = load(config.as_ref(), canned.as_deref())?;
            cfg.seed = seed;
            let gains = drop_gain_table(&cfg, drop)?;
            let mu = cfg.mus.first().copied().unwrap_or(0.0);
            let dump = ScenarioDump {
                params: cfg.params(mu, WeightMode::SumRate),
                gains,
            };
            std::fs::write(&out, dump.to_json() + "\n").map_err(|source| HarnessError::Io {
                path: out.clone(),
                source,
            })?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
