use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::eval::{load_policy, play_episode, Actor};
use crate::diffcore::Checkpoint;
use crate::envs::EnvConfig;
use crate::hgrn::AttentionEntry;
use crate::training::ActionMode;
use crate::{Error, Result};

/// Readout for the focus agent at one step of an episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntrospectionRecord {
    pub step: usize,
    pub agent: usize,
    /// Communication-graph neighbours (self included) at this step.
    pub neighbors: Vec<usize>,
    /// Attention entries of the two attention layers.
    pub layers: Vec<Vec<AttentionEntry>>,
    pub reset_gate_mean: Option<f64>,
    /// Per layer and source partition, share of the fused message.
    pub group_contribution: Vec<Vec<f64>>,
    pub action: usize,
    pub reward: f64,
}

/// Plays one episode and records the critic's attention weights and mean
/// reset-gate activation for `focus_agent` at every step.
pub fn dump_introspection(
    ckpt: &Checkpoint,
    env_config: &EnvConfig,
    episode_seed: u64,
    focus_agent: usize,
    greedy: bool,
) -> Result<Vec<IntrospectionRecord>> {
    let mut env = env_config.build(episode_seed)?;
    if focus_agent >= env.n_agents() {
        return Err(Error::config(format!(
            "focus agent {focus_agent} does not exist; the environment has {} agents",
            env.n_agents()
        )));
    }
    let policy = load_policy(ckpt, env.as_ref())?;
    let mode = if greedy { ActionMode::Greedy } else { ActionMode::Stochastic };
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
    let mut out = Vec::new();
    play_episode(
        env.as_mut(),
        &Actor::Policy { policy: &policy, mode },
        episode_seed,
        &mut rng,
        |view| {
            let hidden = view.hidden.expect("policy episodes carry hidden state");
            let inf = policy
                .critic
                .forward_batch(&policy.critic_store, view.batch, &hidden.critic, true)?;
            let row = view
                .batch
                .agent_ids
                .iter()
                .position(|&id| id == focus_agent)
                .ok_or_else(|| Error::integrity(format!("agent {focus_agent} missing from the step batch")))?;
            let info = inf.introspection.expect("requested").swap_remove(row);
            out.push(IntrospectionRecord {
                step: view.step,
                agent: focus_agent,
                neighbors: view.batch.neighbors[row].iter().map(|&r| view.batch.agent_ids[r]).collect(),
                layers: info.layers,
                reset_gate_mean: info.reset_gate_mean,
                group_contribution: info.group_contribution,
                action: view.actions[row],
                reward: view.result.rewards[focus_agent],
            });
            Ok(())
        },
    )?;
    Ok(out)
}
