//! Experiment orchestration: specs read from TOML, training runs with
//! manifests, evaluation, transfer across agent counts, introspection traces
//! and temperature sweeps.
//!
//! Every artifact is a plain file under the experiment's output directory:
//!
//! ```text
//! manifest.json               resolved spec plus one entry per run
//! seed-<s>/metrics.jsonl      one MetricRecord per update
//! seed-<s>/train_episodes.jsonl
//! seed-<s>/model.ckpt         checkpoint container
//! seed-<s>/eval.json          EvalReport summary
//! seed-<s>/eval_episodes.jsonl raw episode log the summary is computed from
//! seed-<s>/transfer.json
//! ```

mod eval;
mod introspect;
mod sweep;

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffcore::Checkpoint;
use crate::envs::EnvConfig;
use crate::training::{train_loop, MetricRecord, TrainConfig};
use crate::{Error, Result};

pub use eval::{
    read_episode_log, run_eval, run_random, run_transfer, write_episode_log, EpisodeLog, EvalReport, TransferResult,
};
pub use introspect::{dump_introspection, IntrospectionRecord};
pub use sweep::{run_sweep, SweepPoint};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const TRAIN_EPISODES_FILE: &str = "train_episodes.jsonl";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const EVAL_FILE: &str = "eval.json";
pub const EVAL_EPISODES_FILE: &str = "eval_episodes.jsonl";
pub const TRANSFER_FILE: &str = "transfer.json";

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

fn default_eval_episodes() -> usize {
    200
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// One experiment: an environment, a training configuration and the
/// repetitions to run. The `seed` inside `train` is replaced per run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub env: EnvConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Evaluate with argmax actions instead of the trained stochastic policy.
    #[serde(default)]
    pub greedy: bool,
    /// Agent counts for transfer evaluation; empty skips transfer.
    #[serde(default)]
    pub transfer_scales: Vec<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn new(env: EnvConfig, train: TrainConfig) -> Self {
        Self {
            env,
            train,
            seeds: default_seeds(),
            eval_episodes: default_eval_episodes(),
            greedy: false,
            transfer_scales: Vec::new(),
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| Error::config(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read experiment spec {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Spec recorded in a manifest written by [`run_training`].
    pub fn from_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::config(format!("cannot read manifest {}: {e}", path.display())))?;
        let manifest: Manifest = serde_json::from_reader(BufReader::new(file))?;
        manifest.spec.validate()?;
        Ok(manifest.spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()?;
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(format!("seed {} is listed twice", w[0])));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes must be at least 1"));
        }
        if let Some(&s) = self.transfer_scales.iter().find(|&&s| s == 0) {
            return Err(Error::config(format!("transfer scale {s} has no agents")));
        }
        Ok(())
    }

    /// Training configuration of the run for `seed`.
    pub fn run_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }

    pub fn run_dir(&self, seed: u64) -> PathBuf {
        self.output_dir.join(format!("seed-{seed}"))
    }
}

/// Entry of the manifest for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub seed: u64,
    /// Run directory relative to the output directory.
    pub dir: String,
    pub train: TrainConfig,
}

/// Full resolved description of an experiment, written before any run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub spec: ExperimentSpec,
    pub runs: Vec<ManifestRun>,
}

impl Manifest {
    pub fn new(spec: &ExperimentSpec) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            spec: spec.clone(),
            runs: spec
                .seeds
                .iter()
                .map(|&seed| ManifestRun {
                    seed,
                    dir: format!("seed-{seed}"),
                    train: spec.run_config(seed),
                })
                .collect(),
        }
    }
}

/// Artifacts of one finished training run.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub seed: u64,
    pub dir: PathBuf,
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub episode_rewards: Vec<f64>,
    pub final_epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingSummary {
    pub manifest: PathBuf,
    pub runs: Vec<RunArtifacts>,
}

/// Per-episode training return, one JSON line each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrainEpisode {
    episode: usize,
    reward: f64,
}

fn output_error(dir: &Path, e: impl std::fmt::Display) -> Error {
    Error::config(format!("output directory {} is not writable: {e}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Creates the output directory and writes the manifest. Fails before any
/// training starts when the directory cannot be written.
pub fn write_manifest(spec: &ExperimentSpec) -> Result<PathBuf> {
    spec.validate()?;
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &Manifest::new(spec)).map_err(|e| output_error(dir, e))?;
    Ok(path)
}

/// Trains once per seed. Runs execute one after another; each run follows
/// the training module's own threading (`rollout_workers`).
pub fn run_training(spec: &ExperimentSpec) -> Result<TrainingSummary> {
    let manifest = write_manifest(spec)?;
    let mut runs = Vec::with_capacity(spec.seeds.len());
    for &seed in &spec.seeds {
        runs.push(train_one(spec, seed)?);
    }
    Ok(TrainingSummary { manifest, runs })
}

fn train_one(spec: &ExperimentSpec, seed: u64) -> Result<RunArtifacts> {
    let dir = spec.run_dir(seed);
    fs::create_dir_all(&dir).map_err(|e| output_error(&dir, e))?;
    let config = spec.run_config(seed);
    let metrics = dir.join(METRICS_FILE);
    let mut sink = BufWriter::new(File::create(&metrics)?);
    let outcome = train_loop(&config, &spec.env, Some(&mut sink))?;
    sink.flush()?;

    let mut w = BufWriter::new(File::create(dir.join(TRAIN_EPISODES_FILE))?);
    for (episode, &reward) in outcome.episode_rewards.iter().enumerate() {
        serde_json::to_writer(&mut w, &TrainEpisode { episode, reward })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let checkpoint = dir.join(CHECKPOINT_FILE);
    outcome.learner.checkpoint(outcome.final_epsilon)?.save(&checkpoint)?;
    Ok(RunArtifacts {
        seed,
        dir,
        checkpoint,
        metrics,
        episode_rewards: outcome.episode_rewards,
        final_epsilon: outcome.final_epsilon,
    })
}

/// Reads a metric stream written during training.
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricRecord>> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Evaluation of one trained seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedEval {
    pub seed: u64,
    pub report: EvalReport,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transfer: Vec<TransferResult>,
}

/// Evaluates every run of a finished experiment and, when the experiment spec lists
/// scales, its transfer results. Reports and raw episode logs are written
/// next to each checkpoint.
pub fn evaluate_runs(spec: &ExperimentSpec, summary: &TrainingSummary) -> Result<Vec<SeedEval>> {
    let mut out = Vec::with_capacity(summary.runs.len());
    for run in &summary.runs {
        let ckpt = Checkpoint::load(&run.checkpoint)?;
        let eval_seed = run.seed ^ 0xe7a1;
        let report = run_eval(&ckpt, &spec.env, spec.eval_episodes, spec.greedy, eval_seed)?;
        write_json(&run.dir.join(EVAL_FILE), &report)?;
        write_episode_log(File::create(run.dir.join(EVAL_EPISODES_FILE))?, &report.log)?;
        let transfer = if spec.transfer_scales.is_empty() {
            Vec::new()
        } else {
            let t = run_transfer(&ckpt, &spec.env, &spec.transfer_scales, spec.eval_episodes, spec.greedy, eval_seed);
            write_json(&run.dir.join(TRANSFER_FILE), &t)?;
            t
        };
        out.push(SeedEval {
            seed: run.seed,
            report,
            transfer,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
