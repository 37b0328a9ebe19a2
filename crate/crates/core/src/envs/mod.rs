//! Partially observable multi-agent gridworlds sharing one reset/step
//! contract.
//!
//! Grid actions are `0 up (y - 1)`, `1 down`, `2 left`, `3 right`, `4 stay`.
//! Grid observations are laid out as
//!
//! ```text
//! [x / (width - 1), y / (height - 1)]
//! patch: channel c, offset (dx, dy) at c·side² + (dy + r)·side + (dx + r)
//! group scalars
//! ```
//!
//! with view radius `r` and `side = 2r + 1`; cells outside the grid are set
//! in the wall channel (always channel 0). The agent itself is not drawn.

mod bandit;
mod corridor;
mod ctc;
pub mod grid;
mod pursuit;
mod surviving;

use serde::{Deserialize, Serialize};

use crate::agentgraph::{build_graph, AgentGraph};
use crate::Result;

pub use bandit::{Bandit, BanditConfig};
pub use corridor::{CorridorConfig, MemoryCorridor};
pub use ctc::{Color, Ctc, CtcConfig};
pub use pursuit::{Pursuit, PursuitConfig};
pub use surviving::{Surviving, SurvivingConfig};

/// Event counters accumulated over one step.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventCounts {
    pub food_eaten: u64,
    pub starvations: u64,
    pub captures: u64,
    pub treasures_collected: u64,
    pub treasures_banked: u64,
    pub goals_reached: u64,
    pub wrong_goals: u64,
}

impl EventCounts {
    pub fn add(&mut self, other: &EventCounts) {
        self.food_eaten += other.food_eaten;
        self.starvations += other.starvations;
        self.captures += other.captures;
        self.treasures_collected += other.treasures_collected;
        self.treasures_banked += other.treasures_banked;
        self.goals_reached += other.goals_reached;
        self.wrong_goals += other.wrong_goals;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub obs: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Episode over (the horizon is reached).
    pub done: bool,
    /// Agents whose part of the episode has ended; their later transitions
    /// carry no learning signal.
    pub agent_done: Vec<bool>,
    pub info: EventCounts,
}

/// Uniform contract over all environments.
pub trait Environment: Send {
    /// Restarts the episode from `seed` and returns initial observations.
    fn reset(&mut self, seed: u64) -> Result<Vec<Vec<f64>>>;
    fn step(&mut self, actions: &[usize]) -> Result<StepResult>;
    fn observe(&self, agent: usize) -> Vec<f64>;

    fn n_agents(&self) -> usize;
    fn groups(&self) -> Vec<usize>;
    fn obs_dims(&self) -> Vec<usize>;
    fn n_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn step_count(&self) -> usize;
    fn positions(&self) -> Vec<[f64; 2]>;
    fn comm_radius(&self) -> f64;
    fn max_neighbors(&self) -> usize;

    fn observe_all(&self) -> Vec<Vec<f64>> {
        (0..self.n_agents()).map(|i| self.observe(i)).collect()
    }

    /// Communication graph at the current step.
    fn graph(&self) -> Result<AgentGraph> {
        build_graph(&self.positions(), &self.groups(), self.comm_radius(), self.max_neighbors())
    }
}

/// Declarative environment description, tagged by `kind`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Surviving(SurvivingConfig),
    Pursuit(PursuitConfig),
    Ctc(CtcConfig),
    MemoryCorridor(CorridorConfig),
    Bandit(BanditConfig),
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvConfig::Surviving(c) => c.validate(),
            EnvConfig::Pursuit(c) => c.validate(),
            EnvConfig::Ctc(c) => c.validate(),
            EnvConfig::MemoryCorridor(c) => c.validate(),
            EnvConfig::Bandit(c) => c.validate(),
        }
    }

    /// Builds and resets an environment.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Environment>> {
        self.validate()?;
        let mut env: Box<dyn Environment> = match self {
            EnvConfig::Surviving(c) => Box::new(Surviving::new(c.clone())),
            EnvConfig::Pursuit(c) => Box::new(Pursuit::new(c.clone())),
            EnvConfig::Ctc(c) => Box::new(Ctc::new(c.clone())),
            EnvConfig::MemoryCorridor(c) => Box::new(MemoryCorridor::new(c.clone())),
            EnvConfig::Bandit(c) => Box::new(Bandit::new(c.clone())),
        };
        env.reset(seed)?;
        Ok(env)
    }

    /// Number of agents in the primary (scalable) group.
    pub fn scale(&self) -> usize {
        match self {
            EnvConfig::Surviving(c) => c.agents,
            EnvConfig::Pursuit(c) => c.predators,
            EnvConfig::Ctc(c) => c.hunters,
            EnvConfig::MemoryCorridor(c) => c.agents,
            EnvConfig::Bandit(_) => 1,
        }
    }

    /// Same configuration with the primary group resized to `agents`.
    pub fn with_scale(&self, agents: usize) -> EnvConfig {
        let mut out = self.clone();
        match &mut out {
            EnvConfig::Surviving(c) => c.agents = agents,
            EnvConfig::Pursuit(c) => c.predators = agents,
            EnvConfig::Ctc(c) => c.hunters = agents,
            EnvConfig::MemoryCorridor(c) => c.agents = agents,
            EnvConfig::Bandit(_) => {}
        }
        out
    }

    pub fn horizon(&self) -> usize {
        match self {
            EnvConfig::Surviving(c) => c.horizon,
            EnvConfig::Pursuit(c) => c.horizon,
            EnvConfig::Ctc(c) => c.horizon,
            EnvConfig::MemoryCorridor(c) => c.horizon,
            EnvConfig::Bandit(_) => 1,
        }
    }
}
