use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::Checkpoint;
use crate::envs::{EnvConfig, Environment, EventCounts, StepResult};
use crate::hgrn::{GraphBatch, HgrnConfig};
use crate::training::{mean_std, policy_from_checkpoint, ActionMode, Policy, PolicyHidden, ACTOR_PREFIX, CRITIC_PREFIX};
use crate::{Error, Result};

/// One evaluation episode, as logged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Environment reset seed.
    pub seed: u64,
    /// Reward summed over agents and steps.
    pub reward: f64,
    pub steps: usize,
    pub events: EventCounts,
}

/// Summary of an evaluation. Every number is a function of `log`; see
/// [`EvalReport::from_log`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub agents: usize,
    pub greedy: bool,
    pub episodes: usize,
    pub mean: f64,
    /// Population standard deviation over episodes.
    pub std: f64,
    /// Event totals over all episodes.
    pub events: EventCounts,
    #[serde(skip)]
    pub log: Vec<EpisodeLog>,
}

impl EvalReport {
    pub fn from_log(agents: usize, greedy: bool, log: Vec<EpisodeLog>) -> Self {
        let rewards: Vec<f64> = log.iter().map(|e| e.reward).collect();
        let (mean, std) = mean_std(&rewards);
        let mut events = EventCounts::default();
        for e in &log {
            events.add(&e.events);
        }
        Self {
            agents,
            greedy,
            episodes: log.len(),
            mean,
            std,
            events,
            log,
        }
    }
}

pub fn write_episode_log<W: Write>(w: W, log: &[EpisodeLog]) -> Result<()> {
    let mut w = BufWriter::new(w);
    for e in log {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episode_log<R: Read>(r: R) -> Result<Vec<EpisodeLog>> {
    let mut out = Vec::new();
    for line in BufReader::new(r).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Rejects a network that cannot consume the environment's observations or
/// emit its actions, naming the first incompatible tensor.
fn check_network(prefix: &str, config: &HgrnConfig, env: &dyn Environment) -> Result<()> {
    let dims = env.obs_dims();
    let model = &config.obs_dims;
    for k in 0..dims.len().max(model.len()) {
        let name = format!("{prefix}g{k}.encoder.0.weight");
        match (dims.get(k), model.get(k)) {
            (Some(_), None) => {
                return Err(Error::config(format!(
                    "tensor {name} is missing: the environment has {} agent groups, the checkpoint {}",
                    dims.len(),
                    model.len()
                )))
            }
            (None, Some(_)) => {
                return Err(Error::config(format!(
                    "tensor {name} has no matching group: the environment has {} agent groups, the checkpoint {}",
                    dims.len(),
                    model.len()
                )))
            }
            (Some(&d), Some(&m)) if d != m => {
                return Err(Error::config(format!(
                    "tensor {name} has shape [{}, {m}] but group {k} observations have length {d}",
                    config.encoder_hidden
                )))
            }
            _ => {}
        }
    }
    if config.n_actions != env.n_actions() {
        return Err(Error::config(format!(
            "tensor {prefix}g0.head.weight has shape [{}, {}] but the environment has {} actions",
            config.n_actions,
            config.hidden_dim,
            env.n_actions()
        )));
    }
    Ok(())
}

pub(crate) fn load_policy(ckpt: &Checkpoint, env: &dyn Environment) -> Result<Policy> {
    let (policy, meta) = policy_from_checkpoint(ckpt)?;
    check_network(CRITIC_PREFIX, &meta.critic, env)?;
    if let Some(actor) = &meta.actor {
        check_network(ACTOR_PREFIX, actor, env)?;
    }
    Ok(policy)
}

/// What picks the actions during an episode.
pub(crate) enum Actor<'a> {
    Policy { policy: &'a Policy, mode: ActionMode },
    Uniform,
}

/// Per-step view handed to episode observers.
pub(crate) struct StepView<'a> {
    pub step: usize,
    pub batch: &'a GraphBatch,
    pub hidden: Option<&'a PolicyHidden>,
    pub actions: &'a [usize],
    pub result: &'a StepResult,
}

/// Plays one episode from `seed` to the horizon.
pub(crate) fn play_episode<R: Rng>(
    env: &mut dyn Environment,
    actor: &Actor<'_>,
    seed: u64,
    rng: &mut R,
    mut observe: impl FnMut(StepView<'_>) -> Result<()>,
) -> Result<(f64, usize, EventCounts)> {
    env.reset(seed)?;
    let n = env.n_agents();
    let mut hidden = match actor {
        Actor::Policy { policy, .. } => Some(policy.zero_hidden(n)),
        Actor::Uniform => None,
    };
    let n_actions = env.n_actions();
    let mut reward = 0.0;
    let mut events = EventCounts::default();
    for step in 0.. {
        let batch = GraphBatch::from_graph(&env.graph()?, &env.observe_all())?;
        let (actions, next_hidden) = match (actor, &hidden) {
            (Actor::Policy { policy, mode }, Some(h)) => {
                let d = policy.act(&batch, h, *mode, rng)?;
                (d.actions, Some(d.hidden))
            }
            _ => ((0..n).map(|_| rng.random_range(0..n_actions)).collect(), None),
        };
        let result = env.step(&actions)?;
        reward += result.rewards.iter().sum::<f64>();
        events.add(&result.info);
        observe(StepView {
            step,
            batch: &batch,
            hidden: hidden.as_ref(),
            actions: &actions,
            result: &result,
        })?;
        hidden = next_hidden;
        if result.done {
            return Ok((reward, step + 1, events));
        }
    }
    unreachable!("episodes end at the horizon")
}

fn evaluate(env_config: &EnvConfig, actor: Actor<'_>, episodes: usize, greedy: bool, seed: u64) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::config("evaluation needs at least one episode"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = env_config.build(0)?;
    let mut log = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let ep_seed: u64 = rng.random();
        let (reward, steps, events) = play_episode(env.as_mut(), &actor, ep_seed, &mut rng, |_| Ok(()))?;
        log.push(EpisodeLog {
            episode,
            seed: ep_seed,
            reward,
            steps,
            events,
        });
    }
    Ok(EvalReport::from_log(env.n_agents(), greedy, log))
}

/// Evaluates a checkpoint for `episodes` episodes, with the trained
/// stochastic policy or greedy argmax actions (ties to the lowest index).
pub fn run_eval(ckpt: &Checkpoint, env: &EnvConfig, episodes: usize, greedy: bool, seed: u64) -> Result<EvalReport> {
    let probe = env.build(0)?;
    let policy = load_policy(ckpt, probe.as_ref())?;
    let mode = if greedy { ActionMode::Greedy } else { ActionMode::Stochastic };
    evaluate(env, Actor::Policy { policy: &policy, mode }, episodes, greedy, seed)
}

/// Baseline evaluation with uniformly random actions.
pub fn run_random(env: &EnvConfig, episodes: usize, seed: u64) -> Result<EvalReport> {
    evaluate(env, Actor::Uniform, episodes, false, seed)
}

/// Outcome at one agent count; exactly one of `report` and `error` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub agents: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Evaluates the same parameters at each agent count. A scale the
/// environment cannot hold fails on its own; the others still run.
pub fn run_transfer(
    ckpt: &Checkpoint,
    base: &EnvConfig,
    scales: &[usize],
    episodes: usize,
    greedy: bool,
    seed: u64,
) -> Vec<TransferResult> {
    scales
        .iter()
        .map(|&agents| match run_eval(ckpt, &base.with_scale(agents), episodes, greedy, seed) {
            Ok(report) => TransferResult {
                agents,
                report: Some(report),
                error: None,
            },
            Err(e) => TransferResult {
                agents,
                report: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}
