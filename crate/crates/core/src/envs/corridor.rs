use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{check_actions, delta, obs_len, Cell, Grid, Patch, GRID_ACTIONS};
use super::{Environment, EventCounts, StepResult};
use crate::{Error, Result};

/// Memory diagnostic. Agent `i` lives in row `i` of a `width x agents` grid
/// and starts in the middle column. Food sits at one end of each lane, drawn
/// per agent and episode, but shows up in the food channel only on the first
/// observation. Agents are frozen for the first `gate_steps` steps; after
/// that they move left or right (vertical moves do nothing). Reaching the
/// food end pays `goal_reward`, the other end `-wrong_penalty`; either way
/// the agent is finished for the rest of the episode.
///
/// Channels: wall, other agent, food. Scalars: gate open, finished.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorConfig {
    pub agents: usize,
    /// Odd lane length.
    pub width: usize,
    pub view_radius: usize,
    pub gate_steps: usize,
    pub horizon: usize,
    pub comm_radius: f64,
    pub max_neighbors: usize,
    pub goal_reward: f64,
    pub wrong_penalty: f64,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        Self {
            agents: 4,
            width: 5,
            view_radius: 2,
            gate_steps: 2,
            horizon: 6,
            comm_radius: 1.0,
            max_neighbors: 8,
            goal_reward: 1.0,
            wrong_penalty: 1.0,
        }
    }
}

impl CorridorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 || self.horizon == 0 {
            return Err(Error::config("corridor: agents and horizon must be positive"));
        }
        if self.width < 3 || self.width.is_multiple_of(2) {
            return Err(Error::config("corridor: width must be odd and at least 3"));
        }
        if self.view_radius < self.width / 2 {
            return Err(Error::config("corridor: the view must reach both lane ends from the start"));
        }
        Ok(())
    }
}

const CHANNELS: usize = 3;

#[derive(Clone, Debug)]
pub struct MemoryCorridor {
    pub config: CorridorConfig,
    grid: Grid,
    pub agents: Vec<Cell>,
    /// Food at the left end (column 0) when true.
    pub food_left: Vec<bool>,
    pub finished: Vec<bool>,
    steps: usize,
    rng: ChaCha8Rng,
}

impl MemoryCorridor {
    pub fn new(config: CorridorConfig) -> Self {
        Self {
            grid: Grid {
                width: config.width,
                height: config.agents,
            },
            agents: Vec::new(),
            food_left: Vec::new(),
            finished: Vec::new(),
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
            config,
        }
    }

    fn food_cell(&self, agent: usize) -> Cell {
        let x = if self.food_left[agent] { 0 } else { self.config.width as i64 - 1 };
        (x, agent as i64)
    }
}

impl Environment for MemoryCorridor {
    fn reset(&mut self, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.config.validate()?;
        self.grid.height = self.config.agents;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let mid = (self.config.width / 2) as i64;
        self.agents = (0..self.config.agents).map(|i| (mid, i as i64)).collect();
        self.food_left = (0..self.config.agents).map(|_| self.rng.random_bool(0.5)).collect();
        self.finished = vec![false; self.config.agents];
        self.steps = 0;
        Ok(self.observe_all())
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        let n = self.config.agents;
        check_actions(actions, n, GRID_ACTIONS)?;
        let mut rewards = vec![0.0; n];
        let mut info = EventCounts::default();
        if self.steps >= self.config.gate_steps {
            let last = self.config.width as i64 - 1;
            for i in 0..n {
                if self.finished[i] {
                    continue;
                }
                let (x, y) = self.agents[i];
                let nx = (x + delta(actions[i]).0).clamp(0, last);
                self.agents[i] = (nx, y);
                if nx == 0 || nx == last {
                    self.finished[i] = true;
                    if (nx == 0) == self.food_left[i] {
                        rewards[i] = self.config.goal_reward;
                        info.goals_reached += 1;
                    } else {
                        rewards[i] = -self.config.wrong_penalty;
                        info.wrong_goals += 1;
                    }
                }
            }
        }
        self.steps += 1;
        Ok(StepResult {
            obs: self.observe_all(),
            rewards,
            done: self.steps >= self.config.horizon,
            agent_done: self.finished.clone(),
            info,
        })
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        let me = self.agents[agent];
        let mut patch = Patch::new(self.config.view_radius, CHANNELS);
        patch.mark_outside(&self.grid, 0, me);
        for (j, &c) in self.agents.iter().enumerate() {
            if j != agent {
                patch.set(1, me, c, 1.0);
            }
        }
        if self.steps == 0 {
            patch.set(2, me, self.food_cell(agent), 1.0);
        }
        let mut obs = Vec::with_capacity(obs_len(self.config.view_radius, CHANNELS, 2));
        obs.extend(self.grid.normalized(me));
        obs.extend(patch.data);
        obs.push(if self.steps >= self.config.gate_steps { 1.0 } else { 0.0 });
        obs.push(if self.finished[agent] { 1.0 } else { 0.0 });
        obs
    }

    fn n_agents(&self) -> usize {
        self.config.agents
    }

    fn groups(&self) -> Vec<usize> {
        vec![0; self.config.agents]
    }

    fn obs_dims(&self) -> Vec<usize> {
        vec![obs_len(self.config.view_radius, CHANNELS, 2)]
    }

    fn n_actions(&self) -> usize {
        GRID_ACTIONS
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn step_count(&self) -> usize {
        self.steps
    }

    fn positions(&self) -> Vec<[f64; 2]> {
        self.agents.iter().map(|&(x, y)| [x as f64, y as f64]).collect()
    }

    fn comm_radius(&self) -> f64 {
        self.config.comm_radius
    }

    fn max_neighbors(&self) -> usize {
        self.config.max_neighbors
    }
}
