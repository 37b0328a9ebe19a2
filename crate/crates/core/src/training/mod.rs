//! Recurrent replay, soft Q-learning with an adaptive temperature, the
//! actor-critic variant and the DQN baseline.

mod config;
mod entropy;
mod learner;
pub mod losses;
mod policy;
mod replay;
mod trainer;

#[cfg(test)]
pub(crate) mod testutil;

pub use config::{Algorithm, NetworkSizes, TrainConfig};
pub use entropy::{action_entropy, temperature_update, EntropyControllerState, ALPHA_CLIP_FRACTION, ALPHA_FLOOR};
pub use learner::{policy_from_checkpoint, Learner, ModelMeta, UpdateStats, ACTOR_PREFIX, CRITIC_PREFIX};
pub use losses::{dqn_loss, expected_soft_value, sac_losses, soft_q_loss, soft_value, LossStats, SacLoss, SegmentBatch};
pub use policy::{sample, ActionMode, Behaviour, Decision, Policy, PolicyHidden};
pub use replay::{ReplayBuffer, SegmentBuilder, StepRecord, TrajectorySegment};
pub use trainer::{mean_std, train_loop, MetricRecord, Rollout, RolloutStep, TrainOutcome};
