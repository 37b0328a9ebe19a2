use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{check_actions, obs_len, resolve_moves, Cell, Grid, Patch, GRID_ACTIONS};
use super::{Environment, EventCounts, StepResult};
use crate::{Error, Result};

/// Foraging under a hunger meter. Channels: wall, other agent, food (amount
/// divided by the pile size). Scalar: hunger divided by `max_hunger`.
///
/// Every step hunger drops by `hunger_decay`. An agent standing on food after
/// the move eats one unit (restoring `eat_restore`, reward `eat_reward`).
/// Below `hungry_threshold` the agent pays `hungry_penalty` per step; at zero
/// it starves (`-starve_penalty`) and respawns with full hunger. An emptied
/// pile is replaced by a fresh one on a random free cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurvivingConfig {
    pub width: usize,
    pub height: usize,
    pub agents: usize,
    pub food_piles: usize,
    pub pile_size: u32,
    pub view_radius: usize,
    pub comm_radius: f64,
    pub max_neighbors: usize,
    pub horizon: usize,
    pub max_hunger: f64,
    pub initial_hunger: f64,
    pub hunger_decay: f64,
    pub eat_restore: f64,
    pub eat_reward: f64,
    pub hungry_threshold: f64,
    pub hungry_penalty: f64,
    pub starve_penalty: f64,
}

impl Default for SurvivingConfig {
    fn default() -> Self {
        Self {
            width: 30,
            height: 30,
            agents: 100,
            food_piles: 40,
            pile_size: 3,
            view_radius: 3,
            comm_radius: 6.0,
            max_neighbors: 8,
            horizon: 200,
            max_hunger: 100.0,
            initial_hunger: 100.0,
            hunger_decay: 1.0,
            eat_restore: 40.0,
            eat_reward: 0.5,
            hungry_threshold: 50.0,
            hungry_penalty: 0.01,
            starve_penalty: 1.0,
        }
    }
}

impl SurvivingConfig {
    /// 8 agents on a 20 x 20 grid.
    pub fn small() -> Self {
        Self {
            width: 20,
            height: 20,
            agents: 8,
            food_piles: 8,
            horizon: 100,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 || self.width == 0 || self.height == 0 || self.horizon == 0 || self.pile_size == 0 {
            return Err(Error::config("surviving: agents, grid size, horizon and pile size must be positive"));
        }
        if self.agents + self.food_piles + 1 > self.width * self.height {
            return Err(Error::config(format!(
                "surviving: {} agents and {} piles do not fit a {}x{} grid",
                self.agents, self.food_piles, self.width, self.height
            )));
        }
        if !(self.max_hunger > 0.0) || !(self.initial_hunger > 0.0) || self.comm_radius < 0.0 {
            return Err(Error::config("surviving: hunger levels must be positive, comm radius non-negative"));
        }
        Ok(())
    }
}

const CHANNELS: usize = 3;

#[derive(Clone, Debug)]
pub struct Surviving {
    pub config: SurvivingConfig,
    grid: Grid,
    pub agents: Vec<Cell>,
    pub hunger: Vec<f64>,
    /// Food units per cell, row-major.
    pub food: Vec<u32>,
    steps: usize,
    rng: ChaCha8Rng,
}

impl Surviving {
    pub fn new(config: SurvivingConfig) -> Self {
        let grid = Grid {
            width: config.width,
            height: config.height,
        };
        Self {
            grid,
            agents: Vec::new(),
            hunger: Vec::new(),
            food: vec![0; grid.cells()],
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
            config,
        }
    }

    fn idx(&self, (x, y): Cell) -> usize {
        y as usize * self.grid.width + x as usize
    }

    pub fn food_at(&self, c: Cell) -> u32 {
        if self.grid.contains(c) {
            self.food[self.idx(c)]
        } else {
            0
        }
    }

    pub fn total_food(&self) -> u64 {
        self.food.iter().map(|&f| f as u64).sum()
    }

    /// Replaces the state with explicit positions, hunger levels and food.
    pub fn set_state(&mut self, agents: Vec<Cell>, hunger: Vec<f64>, food: &[(Cell, u32)]) -> Result<()> {
        if agents.len() != self.config.agents || hunger.len() != agents.len() {
            return Err(Error::config("surviving: state does not match the agent count"));
        }
        if agents.iter().any(|&c| !self.grid.contains(c)) || food.iter().any(|&(c, _)| !self.grid.contains(c)) {
            return Err(Error::config("surviving: position outside the grid"));
        }
        self.agents = agents;
        self.hunger = hunger;
        self.food.fill(0);
        for &(c, n) in food {
            let i = self.idx(c);
            self.food[i] = n;
        }
        Ok(())
    }

    fn spawn_pile(&mut self) -> Result<()> {
        let (agents, food, width) = (&self.agents, &self.food, self.grid.width);
        let c = self
            .grid
            .random_free(&mut self.rng, |c| food[c.1 as usize * width + c.0 as usize] == 0 && !agents.contains(&c))?;
        let i = self.idx(c);
        self.food[i] = self.config.pile_size;
        Ok(())
    }
}

impl Environment for Surviving {
    fn reset(&mut self, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.config.validate()?;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = self.grid.place(&mut self.rng, self.config.agents + self.config.food_piles, &[])?;
        self.agents = cells[..self.config.agents].to_vec();
        self.hunger = vec![self.config.initial_hunger.min(self.config.max_hunger); self.config.agents];
        self.food = vec![0; self.grid.cells()];
        for &c in &cells[self.config.agents..] {
            let i = self.idx(c);
            self.food[i] = self.config.pile_size;
        }
        self.steps = 0;
        Ok(self.observe_all())
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        check_actions(actions, self.config.agents, GRID_ACTIONS)?;
        let cfg = self.config.clone();
        self.agents = resolve_moves(&self.grid, &self.agents, actions, |_| false);
        let mut rewards = vec![0.0; cfg.agents];
        let mut info = EventCounts::default();
        for i in 0..cfg.agents {
            self.hunger[i] -= cfg.hunger_decay;
            let cell = self.idx(self.agents[i]);
            if self.food[cell] > 0 {
                self.food[cell] -= 1;
                self.hunger[i] = (self.hunger[i] + cfg.eat_restore).min(cfg.max_hunger);
                rewards[i] += cfg.eat_reward;
                info.food_eaten += 1;
                if self.food[cell] == 0 {
                    self.spawn_pile()?;
                }
            }
            if self.hunger[i] < cfg.hungry_threshold {
                rewards[i] -= cfg.hungry_penalty;
            }
            if self.hunger[i] <= 0.0 {
                rewards[i] -= cfg.starve_penalty;
                info.starvations += 1;
                let (agents, food, width) = (&self.agents, &self.food, self.grid.width);
                self.agents[i] = self
                    .grid
                    .random_free(&mut self.rng, |c| food[c.1 as usize * width + c.0 as usize] == 0 && !agents.contains(&c))?;
                self.hunger[i] = cfg.max_hunger;
            }
        }
        self.steps += 1;
        Ok(StepResult {
            obs: self.observe_all(),
            rewards,
            done: self.steps >= cfg.horizon,
            agent_done: vec![false; cfg.agents],
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
        let r = self.config.view_radius as i64;
        for dy in -r..=r {
            for dx in -r..=r {
                let f = self.food_at((me.0 + dx, me.1 + dy));
                if f > 0 {
                    patch.set(2, me, (me.0 + dx, me.1 + dy), f as f64 / self.config.pile_size as f64);
                }
            }
        }
        let mut obs = Vec::with_capacity(obs_len(self.config.view_radius, CHANNELS, 1));
        obs.extend(self.grid.normalized(me));
        obs.extend(patch.data);
        obs.push(self.hunger[agent] / self.config.max_hunger);
        obs
    }

    fn n_agents(&self) -> usize {
        self.config.agents
    }

    fn groups(&self) -> Vec<usize> {
        vec![0; self.config.agents]
    }

    fn obs_dims(&self) -> Vec<usize> {
        vec![obs_len(self.config.view_radius, CHANNELS, 1)]
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
