use std::io::Write;
use std::thread;

use crossbeam_channel::{bounded, unbounded, Receiver, Sender, TryRecvError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvConfig, Environment};
use crate::hgrn::GraphBatch;
use crate::training::config::TrainConfig;
use crate::training::learner::{Learner, UpdateStats};
use crate::training::policy::{ActionMode, Policy, PolicyHidden};
use crate::training::replay::{ReplayBuffer, SegmentBuilder, StepRecord, TrajectorySegment};
use crate::{Error, Result};

/// One line of the metric stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub update: u64,
    /// Rollout iterations so far (each steps every environment once).
    pub env_steps: u64,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub actor_loss: Option<f64>,
    pub alpha: f64,
    pub alpha_grad: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    pub epsilon: f64,
    /// Episodes finished so far.
    pub episodes: u64,
    /// Mean and population std of the episode returns finished since the
    /// previous record.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub episode_reward_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub episode_reward_std: Option<f64>,
}

/// Result of a training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub learner: Learner,
    pub metrics: Vec<MetricRecord>,
    /// Return (summed over agents) of every finished training episode.
    pub episode_rewards: Vec<f64>,
    /// Exploration rate at the end of the run.
    pub final_epsilon: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

struct EnvSlot {
    env: Box<dyn Environment>,
    current: GraphBatch,
    hidden: PolicyHidden,
    builder: SegmentBuilder,
    finished: Vec<bool>,
    episode_return: f64,
}

fn observe(env: &dyn Environment) -> Result<GraphBatch> {
    GraphBatch::from_graph(&env.graph()?, &env.observe_all())
}

/// Steps a set of environments in lockstep with one batched forward pass.
pub struct Rollout {
    slots: Vec<EnvSlot>,
    rng: ChaCha8Rng,
    segment_len: usize,
}

/// Output of one rollout iteration.
#[derive(Debug, Default)]
pub struct RolloutStep {
    pub segments: Vec<TrajectorySegment>,
    pub finished_returns: Vec<f64>,
}

impl Rollout {
    pub fn new(env: &EnvConfig, count: usize, segment_len: usize, policy: &Policy, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slots = (0..count)
            .map(|_| {
                let e = env.build(rng.random())?;
                let n = e.n_agents();
                Ok(EnvSlot {
                    current: observe(e.as_ref())?,
                    env: e,
                    hidden: policy.zero_hidden(n),
                    builder: SegmentBuilder::new(segment_len),
                    finished: vec![false; n],
                    episode_return: 0.0,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { slots, rng, segment_len })
    }

    pub fn step(&mut self, policy: &Policy) -> Result<RolloutStep> {
        let batch = GraphBatch::concat(&self.slots.iter().map(|s| s.current.clone()).collect::<Vec<_>>());
        let hidden = PolicyHidden::concat(&self.slots.iter().map(|s| &s.hidden).collect::<Vec<_>>())?;
        let decision = policy.act(&batch, &hidden, ActionMode::Stochastic, &mut self.rng)?;
        let mut out = RolloutStep::default();
        let mut offset = 0;
        for slot in &mut self.slots {
            let n = slot.env.n_agents();
            let actions = decision.actions[offset..offset + n].to_vec();
            let next_hidden = decision.hidden.slice(offset, n);
            offset += n;
            let result = slot.env.step(&actions)?;
            slot.episode_return += result.rewards.iter().sum::<f64>();
            let active: Vec<bool> = slot.finished.iter().map(|f| !f).collect();
            for (f, &d) in slot.finished.iter_mut().zip(&result.agent_done) {
                *f |= d;
            }
            let next = if result.done { slot.current.clone() } else { observe(slot.env.as_ref())? };
            let record = StepRecord {
                graph: std::mem::replace(&mut slot.current, next),
                actions,
                rewards: result.rewards,
                active,
                agent_done: result.agent_done,
                done: result.done,
            };
            if let Some(seg) = slot.builder.push(record, &slot.hidden.critic, slot.hidden.actor.as_ref(), &slot.current) {
                out.segments.push(seg);
            }
            slot.hidden = next_hidden;
            if result.done {
                out.finished_returns.push(slot.episode_return);
                slot.env.reset(self.rng.random())?;
                slot.current = observe(slot.env.as_ref())?;
                slot.hidden = policy.zero_hidden(n);
                slot.finished = vec![false; n];
                slot.episode_return = 0.0;
                slot.builder = SegmentBuilder::new(self.segment_len);
            }
        }
        Ok(out)
    }
}

struct Progress<'a, 'w> {
    config: &'a TrainConfig,
    metrics: Vec<MetricRecord>,
    episode_rewards: Vec<f64>,
    pending_returns: Vec<f64>,
    sink: Option<&'w mut dyn Write>,
}

impl Progress<'_, '_> {
    fn record(&mut self, stats: &UpdateStats, update: u64, env_steps: u64, epsilon: f64) -> Result<()> {
        if !update.is_multiple_of(self.config.log_every as u64) {
            return Ok(());
        }
        let (mean, std) = mean_std(&self.pending_returns);
        let have = !self.pending_returns.is_empty();
        let rec = MetricRecord {
            update,
            env_steps,
            loss: stats.loss,
            actor_loss: stats.actor_loss,
            alpha: stats.alpha,
            alpha_grad: stats.alpha_grad,
            entropy: stats.entropy,
            grad_norm: stats.grad_norm,
            epsilon,
            episodes: self.episode_rewards.len() as u64,
            episode_reward_mean: have.then_some(mean),
            episode_reward_std: have.then_some(std),
        };
        self.pending_returns.clear();
        if let Some(w) = self.sink.as_deref_mut() {
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
        self.metrics.push(rec);
        Ok(())
    }

    fn finished(&mut self, returns: &[f64]) {
        self.episode_rewards.extend_from_slice(returns);
        self.pending_returns.extend_from_slice(returns);
    }
}

/// Trains on environments built from `env`, alternating rollout steps and
/// updates every `update_interval` steps. Metric records go to `sink` as
/// JSON lines when given.
pub fn train_loop(config: &TrainConfig, env: &EnvConfig, sink: Option<&mut dyn Write>) -> Result<TrainOutcome> {
    config.validate()?;
    env.validate()?;
    let probe = env.build(config.seed)?;
    let mut learner = Learner::new(config.clone(), probe.obs_dims(), probe.n_actions())?;
    drop(probe);
    let mut progress = Progress {
        config,
        metrics: Vec::new(),
        episode_rewards: Vec::new(),
        pending_returns: Vec::new(),
        sink,
    };
    if config.rollout_workers == 0 {
        train_inline(config, env, &mut learner, &mut progress)?;
    } else {
        train_threaded(config, env, &mut learner, &mut progress)?;
    }
    if let Some(w) = progress.sink.as_deref_mut() {
        w.flush()?;
    }
    Ok(TrainOutcome {
        learner,
        metrics: progress.metrics,
        episode_rewards: progress.episode_rewards,
        final_epsilon: config.epsilon_at(config.total_steps),
    })
}

fn train_inline(config: &TrainConfig, env: &EnvConfig, learner: &mut Learner, progress: &mut Progress) -> Result<()> {
    let mut sample_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5a11);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;
    let mut policy = learner.policy(config.epsilon_at(0));
    let mut rollout = Rollout::new(env, config.num_envs, config.segment_len, &policy, config.seed.wrapping_add(1))?;
    for step in 0..config.total_steps {
        let epsilon = config.epsilon_at(step);
        policy.behaviour = learner.behaviour(epsilon);
        let out = rollout.step(&policy)?;
        for seg in out.segments {
            buffer.push(seg);
        }
        progress.finished(&out.finished_returns);
        let done_steps = step + 1;
        if done_steps >= config.learning_starts && done_steps % config.update_interval == 0 && !buffer.is_empty() {
            let batch = buffer.sample(config.batch_size, &mut sample_rng)?;
            let stats = learner.update(&batch)?;
            progress.record(&stats, learner.updates, done_steps as u64, epsilon)?;
            policy = learner.policy(epsilon);
        }
    }
    Ok(())
}

struct Snapshot {
    policy: Policy,
}

struct WorkerMessage {
    step: RolloutStep,
}

fn worker(env: EnvConfig, config: TrainConfig, seed: u64, snapshots: Receiver<Snapshot>, out: Sender<Result<WorkerMessage>>) {
    let Ok(first) = snapshots.recv() else {
        return;
    };
    let mut policy = first.policy;
    let mut rollout = match Rollout::new(&env, config.num_envs, config.segment_len, &policy, seed) {
        Ok(r) => r,
        Err(e) => {
            let _ = out.send(Err(e));
            return;
        }
    };
    loop {
        loop {
            match snapshots.try_recv() {
                Ok(s) => policy = s.policy,
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return,
            }
        }
        let msg = rollout.step(&policy).map(|step| WorkerMessage { step });
        let failed = msg.is_err();
        if out.send(msg).is_err() || failed {
            return;
        }
    }
}

// Rollout threads own their environments and act on value snapshots; this
// thread is the only one that writes parameters.
fn train_threaded(config: &TrainConfig, env: &EnvConfig, learner: &mut Learner, progress: &mut Progress) -> Result<()> {
    let mut sample_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_5a11);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;
    let (tx, rx) = bounded::<Result<WorkerMessage>>(config.rollout_workers * 2);
    let mut snapshot_txs = Vec::new();
    let mut handles = Vec::new();
    for w in 0..config.rollout_workers {
        let (stx, srx) = unbounded();
        stx.send(Snapshot {
            policy: learner.policy(config.epsilon_at(0)),
        })
        .map_err(|_| Error::integrity("rollout worker exited before starting"))?;
        snapshot_txs.push(stx);
        let (env, cfg, out) = (env.clone(), config.clone(), tx.clone());
        let seed = config.seed.wrapping_add(1 + w as u64 * 0x9e37_79b9);
        handles.push(thread::spawn(move || worker(env, cfg, seed, srx, out)));
    }
    drop(tx);
    let mut result = Ok(());
    for step in 0..config.total_steps {
        let msg = match rx.recv() {
            Ok(Ok(m)) => m,
            Ok(Err(e)) => {
                result = Err(e);
                break;
            }
            Err(_) => {
                result = Err(Error::integrity("all rollout workers stopped"));
                break;
            }
        };
        for seg in msg.step.segments {
            buffer.push(seg);
        }
        progress.finished(&msg.step.finished_returns);
        let done_steps = step + 1;
        let epsilon = config.epsilon_at(step);
        if done_steps >= config.learning_starts && done_steps % config.update_interval == 0 && !buffer.is_empty() {
            let update = buffer
                .sample(config.batch_size, &mut sample_rng)
                .and_then(|batch| learner.update(&batch))
                .and_then(|stats| progress.record(&stats, learner.updates, done_steps as u64, epsilon));
            if let Err(e) = update {
                result = Err(e);
                break;
            }
            if learner.updates.is_multiple_of(config.snapshot_interval as u64) {
                for stx in &snapshot_txs {
                    let _ = stx.send(Snapshot {
                        policy: learner.policy(epsilon),
                    });
                }
            }
        }
    }
    drop(snapshot_txs);
    drop(rx);
    for h in handles {
        h.join().map_err(|_| Error::integrity("rollout worker panicked"))?;
    }
    result
}
