use std::fs::File;
use std::io::{BufWriter, Write};

use serde::{Deserialize, Serialize};

use super::{run_training, ExperimentSpec};
use crate::{Error, Result};

/// Temperature behaviour of one run at one target-entropy ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p_alpha: f64,
    pub seed: u64,
    pub target_entropy: f64,
    pub final_alpha: f64,
    /// Mean batch entropy over the last quarter of the metric records.
    pub tail_entropy: f64,
    /// Mean training return over the last quarter of finished episodes.
    pub tail_reward: f64,
}

fn tail_mean(xs: &[f64]) -> f64 {
    let tail = &xs[xs.len() - xs.len().div_ceil(4)..];
    if tail.is_empty() {
        0.0
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// Trains the experiment spec once per `p_alpha` (and seed) under
/// `output_dir/p_alpha-<value>/` and writes `sweep.jsonl` with one
/// [`SweepPoint`] per run.
pub fn run_sweep(spec: &ExperimentSpec, p_alphas: &[f64]) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    if p_alphas.is_empty() {
        return Err(Error::config("sweep needs at least one p_alpha value"));
    }
    let subs: Vec<ExperimentSpec> = p_alphas
        .iter()
        .map(|&p| {
            let mut s = spec.clone();
            s.train.p_alpha = p;
            s.output_dir = spec.output_dir.join(format!("p_alpha-{p}"));
            s.validate().map(|_| s)
        })
        .collect::<Result<_>>()?;
    let probe = spec.env.build(0)?;
    let max_entropy = (probe.n_actions() as f64).ln();

    std::fs::create_dir_all(&spec.output_dir)?;
    let mut w = BufWriter::new(File::create(spec.output_dir.join("sweep.jsonl"))?);
    let mut points = Vec::new();
    for sub in &subs {
        let summary = run_training(sub)?;
        for run in &summary.runs {
            let metrics = super::read_metrics(&run.metrics)?;
            let entropy: Vec<f64> = metrics.iter().map(|m| m.entropy).collect();
            let point = SweepPoint {
                p_alpha: sub.train.p_alpha,
                seed: run.seed,
                target_entropy: sub.train.p_alpha * max_entropy,
                final_alpha: metrics.last().map_or(sub.train.alpha_init, |m| m.alpha),
                tail_entropy: tail_mean(&entropy),
                tail_reward: tail_mean(&run.episode_rewards),
            };
            serde_json::to_writer(&mut w, &point)?;
            w.write_all(b"\n")?;
            points.push(point);
        }
    }
    w.flush()?;
    Ok(points)
}
