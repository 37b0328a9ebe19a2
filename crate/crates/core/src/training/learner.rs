use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{Checkpoint, OptimizerState, ParamStore, Tape};
use crate::hgrn::{HeadKind, Hgrn, HgrnConfig};
use crate::training::config::{Algorithm, TrainConfig};
use crate::training::entropy::EntropyControllerState;
use crate::training::losses::{dqn_loss, sac_losses, soft_q_loss, LossStats, SegmentBatch};
use crate::training::policy::{Behaviour, Policy};
use crate::training::replay::TrajectorySegment;
use crate::{Error, Result};

pub const CRITIC_PREFIX: &str = "critic.";
pub const ACTOR_PREFIX: &str = "actor.";

/// Everything besides tensors needed to rebuild a policy from a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub train: TrainConfig,
    pub critic: HgrnConfig,
    pub actor: Option<HgrnConfig>,
    pub alpha: f64,
    /// Exploration rate reached by the end of training.
    pub epsilon: f64,
    pub updates: u64,
}

/// Scalars reported by one update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub loss: f64,
    pub actor_loss: Option<f64>,
    /// Temperature after the update.
    pub alpha: f64,
    /// Clipped temperature gradient (0 when the temperature is fixed).
    pub alpha_grad: f64,
    pub entropy: f64,
    pub grad_norm: f64,
}

/// Sole owner of the trainable parameters.
#[derive(Clone, Debug)]
pub struct Learner {
    pub config: TrainConfig,
    pub critic: Hgrn,
    pub store: ParamStore,
    pub target: ParamStore,
    optimizer: OptimizerState,
    pub actor: Option<(Hgrn, ParamStore)>,
    actor_optimizer: Option<OptimizerState>,
    pub temperature: EntropyControllerState,
    pub updates: u64,
}

impl Learner {
    pub fn new(config: TrainConfig, obs_dims: Vec<usize>, n_actions: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let critic = Hgrn::new(config.network_config(obs_dims.clone(), n_actions, HeadKind::QValues), &mut store, &mut rng)?;
        let target = store.clone();
        let actor = if config.algorithm == Algorithm::SacHgrn {
            let mut astore = ParamStore::new();
            let net = Hgrn::new(config.network_config(obs_dims, n_actions, HeadKind::Policy), &mut astore, &mut rng)?;
            Some((net, astore))
        } else {
            None
        };
        let actor_optimizer = actor.as_ref().map(|_| OptimizerState::adam(config.lr)).transpose()?;
        Ok(Self {
            optimizer: OptimizerState::adam(config.lr)?,
            temperature: EntropyControllerState::new(config.alpha_init, config.p_alpha, n_actions, config.lr_alpha)?,
            config,
            critic,
            store,
            target,
            actor,
            actor_optimizer,
            updates: 0,
        })
    }

    /// Temperature used in losses and behaviour; 0 when it is not learned.
    pub fn alpha(&self) -> f64 {
        if self.config.adapts_temperature() {
            self.temperature.alpha
        } else {
            0.0
        }
    }

    pub fn behaviour(&self, epsilon: f64) -> Behaviour {
        if self.config.epsilon_greedy() {
            Behaviour::EpsilonGreedy { epsilon }
        } else if self.actor.is_some() {
            Behaviour::Actor
        } else {
            Behaviour::Softmax { alpha: self.temperature.alpha }
        }
    }

    /// Value copy of the networks for acting.
    pub fn policy(&self, epsilon: f64) -> Policy {
        Policy {
            critic: self.critic.clone(),
            critic_store: self.store.clone(),
            actor: self.actor.clone(),
            behaviour: self.behaviour(epsilon),
        }
    }

    fn finish_critic(&mut self, tape: &mut Tape, loss: crate::Var, stats: &LossStats) -> Result<f64> {
        if !stats.loss.is_finite() {
            return Err(Error::Numeric(format!("loss diverged at update {}", self.updates + 1)));
        }
        tape.backward(loss, &mut self.store)?;
        let norm = clip(&mut self.store, self.config.grad_clip);
        self.optimizer.apply(&mut self.store)?;
        Ok(norm)
    }

    /// One gradient step on a sampled batch, followed by the temperature
    /// step and the periodic target copy.
    pub fn update(&mut self, segments: &[&TrajectorySegment]) -> Result<UpdateStats> {
        let batch = SegmentBatch::new(segments)?;
        self.store.zero_grads();
        let gamma = self.config.gamma;
        let mut tape = Tape::new();
        let mut actor_loss = None;
        let (stats, grad_norm) = match self.config.algorithm {
            Algorithm::SacHgrn => {
                let (actor, astore) = self
                    .actor
                    .as_ref()
                    .ok_or_else(|| Error::integrity("actor-critic learner without an actor"))?;
                let mut atape = Tape::new();
                let out = sac_losses(&mut tape, &mut atape, &self.critic, &self.store, &self.target, actor, astore, &batch, self.alpha(), gamma)?;
                if !out.actor_loss.is_finite() {
                    return Err(Error::Numeric(format!("actor loss diverged at update {}", self.updates + 1)));
                }
                let norm = self.finish_critic(&mut tape, out.critic, &out.stats)?;
                let (_, astore) = self.actor.as_mut().expect("checked above");
                astore.zero_grads();
                atape.backward(out.actor, astore)?;
                clip(astore, self.config.grad_clip);
                self.actor_optimizer.as_mut().expect("built with the actor").apply(astore)?;
                actor_loss = Some(out.actor_loss);
                (out.stats, norm)
            }
            _ if self.config.epsilon_greedy() => {
                let (loss, stats) = dqn_loss(&mut tape, &self.critic, &self.store, &self.target, &batch, gamma)?;
                let norm = self.finish_critic(&mut tape, loss, &stats)?;
                (stats, norm)
            }
            _ => {
                let alpha = self.temperature.alpha;
                let (loss, stats) = soft_q_loss(&mut tape, &self.critic, &self.store, &self.target, &batch, alpha, gamma)?;
                let norm = self.finish_critic(&mut tape, loss, &stats)?;
                (stats, norm)
            }
        };
        let mut alpha_grad = 0.0;
        if self.config.adapts_temperature() {
            self.temperature.update(stats.entropy);
            alpha_grad = self.temperature.last_grad;
        }
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_copy_interval as u64) {
            self.target.copy_values_from(&self.store)?;
        }
        Ok(UpdateStats {
            loss: stats.loss,
            actor_loss,
            alpha: self.alpha(),
            alpha_grad,
            entropy: stats.entropy,
            grad_norm,
        })
    }

    pub fn meta(&self, epsilon: f64) -> ModelMeta {
        ModelMeta {
            train: self.config.clone(),
            critic: self.critic.config.clone(),
            actor: self.actor.as_ref().map(|(a, _)| a.config.clone()),
            alpha: self.temperature.alpha,
            epsilon,
            updates: self.updates,
        }
    }

    pub fn checkpoint(&self, epsilon: f64) -> Result<Checkpoint> {
        let meta = serde_json::to_string(&self.meta(epsilon))?;
        let mut ckpt = Checkpoint::new(self.critic.config.group_count() as u32, meta);
        ckpt.push_store(CRITIC_PREFIX, &self.store);
        if let Some((_, astore)) = &self.actor {
            ckpt.push_store(ACTOR_PREFIX, astore);
        }
        Ok(ckpt)
    }
}

fn clip(store: &mut ParamStore, max_norm: f64) -> f64 {
    if max_norm > 0.0 {
        store.clip_grad_norm(max_norm)
    } else {
        store.grad_norm()
    }
}

/// Rebuilds a policy from a checkpoint written by [`Learner::checkpoint`].
pub fn policy_from_checkpoint(ckpt: &Checkpoint) -> Result<(Policy, ModelMeta)> {
    let meta: ModelMeta = serde_json::from_str(&ckpt.meta)
        .map_err(|e| Error::Format(format!("checkpoint metadata: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    let critic = Hgrn::new(meta.critic.clone(), &mut store, &mut rng)?;
    ckpt.load_into(CRITIC_PREFIX, &mut store)?;
    let actor = match &meta.actor {
        Some(cfg) => {
            let mut astore = ParamStore::new();
            let net = Hgrn::new(cfg.clone(), &mut astore, &mut rng)?;
            ckpt.load_into(ACTOR_PREFIX, &mut astore)?;
            Some((net, astore))
        }
        None => None,
    };
    let behaviour = if meta.train.epsilon_greedy() {
        Behaviour::EpsilonGreedy { epsilon: meta.epsilon }
    } else if actor.is_some() {
        Behaviour::Actor
    } else {
        Behaviour::Softmax { alpha: meta.alpha }
    };
    let policy = Policy {
        critic,
        critic_store: store,
        actor,
        behaviour,
    };
    Ok((policy, meta))
}
