//! `hgrn`: train, evaluate and inspect hierarchical graph recurrent network
//! agents from TOML experiment specs.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hgrn_core::diffcore::Checkpoint;
use hgrn_core::harness::{
    dump_introspection, evaluate_runs, run_eval, run_sweep, run_training, run_transfer, write_episode_log,
    ExperimentSpec,
};

#[derive(Parser)]
#[command(name = "hgrn", version, about = "Multi-agent HGRN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Spec file plus overrides for its top-level fields.
#[derive(Args)]
struct SpecArgs {
    /// Experiment spec (TOML).
    #[arg(long, short, conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-run the experiment spec recorded in a manifest.json.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Evaluate with argmax actions.
    #[arg(long)]
    greedy: bool,
    #[arg(long, value_delimiter = ',')]
    transfer_scales: Option<Vec<usize>>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match (&self.config, &self.manifest) {
            (Some(path), _) => ExperimentSpec::load(path).with_context(|| format!("loading {}", path.display()))?,
            (None, Some(path)) => {
                ExperimentSpec::from_manifest(path).with_context(|| format!("loading {}", path.display()))?
            }
            (None, None) => bail!("pass --config <spec.toml> or --manifest <manifest.json>"),
        };
        if let Some(s) = &self.seeds {
            spec.seeds = s.clone();
        }
        if let Some(n) = self.eval_episodes {
            spec.eval_episodes = n;
        }
        spec.greedy |= self.greedy;
        if let Some(s) = &self.transfer_scales {
            spec.transfer_scales = s.clone();
        }
        if let Some(d) = &self.output_dir {
            spec.output_dir = d.clone();
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed, then evaluate each checkpoint.
    Train {
        #[command(flatten)]
        spec: SpecArgs,
        /// Skip evaluation and transfer after training.
        #[arg(long)]
        no_eval: bool,
    },
    /// Evaluate a checkpoint on the experiment spec's environment.
    Eval {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the raw episode log (JSON lines) here.
        #[arg(long)]
        episode_log: Option<PathBuf>,
    },
    /// Evaluate a checkpoint at several agent counts.
    Transfer {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump per-step attention weights and reset-gate means for one agent.
    Introspect {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        focus_agent: usize,
        #[arg(long, default_value_t = 0)]
        episode_seed: u64,
        /// JSON-lines output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train at several target-entropy ratios and summarise the temperature.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        p_alphas: Vec<f64>,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let stdout = io::stdout();
    let mut w = stdout.lock();
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { spec, no_eval } => {
            let spec = spec.resolve()?;
            let summary = run_training(&spec)?;
            eprintln!("manifest: {}", summary.manifest.display());
            for run in &summary.runs {
                eprintln!("seed {}: {} episodes -> {}", run.seed, run.episode_rewards.len(), run.dir.display());
            }
            if no_eval {
                return Ok(ExitCode::SUCCESS);
            }
            let evals = evaluate_runs(&spec, &summary)?;
            print_json(&evals)?;
            let failed = evals.iter().flat_map(|e| &e.transfer).any(|t| t.error.is_some());
            Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Eval {
            spec,
            checkpoint,
            seed,
            episode_log,
        } => {
            let spec = spec.resolve()?;
            let ckpt = Checkpoint::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let report = run_eval(&ckpt, &spec.env, spec.eval_episodes, spec.greedy, seed)?;
            if let Some(path) = episode_log {
                write_episode_log(File::create(&path)?, &report.log)?;
            }
            print_json(&report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Transfer { spec, checkpoint, seed } => {
            let spec = spec.resolve()?;
            if spec.transfer_scales.is_empty() {
                bail!("no transfer scales; set transfer_scales in the experiment spec or pass --transfer-scales");
            }
            let ckpt = Checkpoint::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let results = run_transfer(&ckpt, &spec.env, &spec.transfer_scales, spec.eval_episodes, spec.greedy, seed);
            print_json(&results)?;
            for r in results.iter().filter(|r| r.error.is_some()) {
                eprintln!("scale {} failed: {}", r.agents, r.error.as_deref().unwrap_or_default());
            }
            Ok(if results.iter().any(|r| r.error.is_some()) {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Introspect {
            spec,
            checkpoint,
            focus_agent,
            episode_seed,
            out,
        } => {
            let spec = spec.resolve()?;
            let ckpt = Checkpoint::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let trace = dump_introspection(&ckpt, &spec.env, episode_seed, focus_agent, spec.greedy)?;
            let mut w: Box<dyn Write> = match out {
                Some(path) => Box::new(BufWriter::new(File::create(path)?)),
                None => Box::new(io::stdout().lock()),
            };
            for rec in &trace {
                serde_json::to_writer(&mut w, rec)?;
                writeln!(w)?;
            }
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { spec, p_alphas } => {
            let spec = spec.resolve()?;
            let points = run_sweep(&spec, &p_alphas)?;
            print_json(&points)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
