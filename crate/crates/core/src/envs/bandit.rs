use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grid::check_actions;
use super::{Environment, EventCounts, StepResult};
use crate::{Error, Result};

/// Stationary multi-armed bandit: one agent, constant observation `[1.0]`,
/// one-step episodes, reward `arm_means[a]` plus Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BanditConfig {
    pub arm_means: Vec<f64>,
    pub noise_std: f64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            arm_means: vec![1.0, 0.0],
            noise_std: 0.1,
        }
    }
}

impl BanditConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arm_means.len() < 2 {
            return Err(Error::config("bandit: at least two arms are required"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::config("bandit: noise std must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Bandit {
    pub config: BanditConfig,
    steps: usize,
    rng: ChaCha8Rng,
}

impl Bandit {
    pub fn new(config: BanditConfig) -> Self {
        Self {
            config,
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl Environment for Bandit {
    fn reset(&mut self, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.config.validate()?;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.steps = 0;
        Ok(self.observe_all())
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        check_actions(actions, 1, self.config.arm_means.len())?;
        let noise = Normal::new(0.0, self.config.noise_std).map_err(|e| Error::config(e.to_string()))?;
        let reward = self.config.arm_means[actions[0]] + noise.sample(&mut self.rng);
        self.steps += 1;
        Ok(StepResult {
            obs: self.observe_all(),
            rewards: vec![reward],
            done: true,
            agent_done: vec![false],
            info: EventCounts::default(),
        })
    }

    fn observe(&self, _agent: usize) -> Vec<f64> {
        vec![1.0]
    }

    fn n_agents(&self) -> usize {
        1
    }

    fn groups(&self) -> Vec<usize> {
        vec![0]
    }

    fn obs_dims(&self) -> Vec<usize> {
        vec![1]
    }

    fn n_actions(&self) -> usize {
        self.config.arm_means.len()
    }

    fn horizon(&self) -> usize {
        1
    }

    fn step_count(&self) -> usize {
        self.steps
    }

    fn positions(&self) -> Vec<[f64; 2]> {
        vec![[0.0, 0.0]]
    }

    fn comm_radius(&self) -> f64 {
        0.0
    }

    fn max_neighbors(&self) -> usize {
        1
    }
}
