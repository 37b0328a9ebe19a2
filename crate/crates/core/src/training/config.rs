use serde::{Deserialize, Serialize};

use crate::hgrn::{CommMode, HeadKind, HgrnConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Soft Q-learning: softmax policy over Q / alpha, log-sum-exp values.
    SoftHgrn,
    /// Actor-critic with a separate policy network.
    SacHgrn,
    /// Greedy max-target Q-learning with an epsilon-greedy behaviour policy.
    DqnBaseline,
}

/// Layer widths shared by every network a run builds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSizes {
    pub encoder_hidden: usize,
    pub embed_dim: usize,
    pub attn_dim: usize,
    pub hidden_dim: usize,
}

impl Default for NetworkSizes {
    fn default() -> Self {
        Self {
            encoder_hidden: 64,
            embed_dim: 64,
            attn_dim: 32,
            hidden_dim: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// `-G`: every agent attends only to itself.
    pub disable_comm: bool,
    /// `-R`: the GRU is replaced by a feed-forward layer.
    pub disable_gru: bool,
    /// `-S`: greedy targets and an epsilon-greedy behaviour policy.
    pub deterministic: bool,
    /// Communication mode used when `disable_comm` is off.
    pub comm: CommMode,
    pub network: NetworkSizes,

    pub gamma: f64,
    /// Segments per sampled batch.
    pub batch_size: usize,
    /// Environment steps between updates.
    pub update_interval: usize,
    /// Updates between hard target copies.
    pub target_copy_interval: usize,
    pub lr: f64,
    pub lr_alpha: f64,
    pub alpha_init: f64,
    pub p_alpha: f64,
    /// Capacity in segments.
    pub buffer_capacity: usize,
    pub segment_len: usize,
    /// Global gradient norm cap; 0 disables clipping.
    pub grad_clip: f64,

    /// Environment steps (per environment instance) to run.
    pub total_steps: usize,
    /// Steps collected before the first update.
    pub learning_starts: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `total_steps` over which epsilon decays linearly.
    pub epsilon_fraction: f64,

    /// Environments stepped in lockstep by each rollout.
    pub num_envs: usize,
    /// Rollout threads; 0 runs everything on the calling thread.
    pub rollout_workers: usize,
    /// Updates between parameter snapshots sent to rollout threads.
    pub snapshot_interval: usize,
    /// Emit a metric record every this many updates.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::SoftHgrn,
            disable_comm: false,
            disable_gru: false,
            deterministic: false,
            comm: CommMode::Hierarchical,
            network: NetworkSizes::default(),
            gamma: 0.96,
            batch_size: 32,
            update_interval: 4,
            target_copy_interval: 200,
            lr: 1e-3,
            lr_alpha: 1e-3,
            alpha_init: 0.1,
            p_alpha: 0.3,
            buffer_capacity: 20_000,
            segment_len: 4,
            grad_clip: 10.0,
            total_steps: 20_000,
            learning_starts: 200,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.2,
            num_envs: 1,
            rollout_workers: 0,
            snapshot_interval: 20,
            log_every: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.p_alpha) {
            return Err(Error::config(format!("p_alpha must lie in [0, 1], got {}", self.p_alpha)));
        }
        for (name, v) in [("lr", self.lr), ("lr_alpha", self.lr_alpha), ("alpha_init", self.alpha_init)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("update_interval", self.update_interval),
            ("target_copy_interval", self.target_copy_interval),
            ("buffer_capacity", self.buffer_capacity),
            ("segment_len", self.segment_len),
            ("num_envs", self.num_envs),
            ("snapshot_interval", self.snapshot_interval),
            ("log_every", self.log_every),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        let eps_ok = |e: f64| (0.0..=1.0).contains(&e);
        if !eps_ok(self.epsilon_start) || !eps_ok(self.epsilon_end) || !eps_ok(self.epsilon_fraction) {
            return Err(Error::config("epsilon schedule values must lie in [0, 1]"));
        }
        if self.grad_clip < 0.0 {
            return Err(Error::config("grad_clip must be non-negative"));
        }
        Ok(())
    }

    /// Exploration rate after `step` environment steps.
    pub fn epsilon_at(&self, step: usize) -> f64 {
        let span = self.epsilon_fraction * self.total_steps as f64;
        if span <= 0.0 {
            return self.epsilon_end;
        }
        let frac = step as f64 / span;
        if frac >= 1.0 {
            return self.epsilon_end;
        }
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }

    /// True when the behaviour policy is epsilon-greedy.
    pub fn epsilon_greedy(&self) -> bool {
        self.deterministic || self.algorithm == Algorithm::DqnBaseline
    }

    /// True when the temperature is learned.
    pub fn adapts_temperature(&self) -> bool {
        !self.epsilon_greedy()
    }

    /// Network description for an environment with the given group
    /// observation sizes and action count.
    pub fn network_config(&self, obs_dims: Vec<usize>, n_actions: usize, head: HeadKind) -> HgrnConfig {
        HgrnConfig {
            obs_dims,
            n_actions,
            encoder_hidden: self.network.encoder_hidden,
            embed_dim: self.network.embed_dim,
            attn_dim: self.network.attn_dim,
            hidden_dim: self.network.hidden_dim,
            comm: if self.disable_comm { CommMode::Off } else { self.comm },
            second_layer_comm: true,
            recurrent: !self.disable_gru,
            head,
        }
    }
}
