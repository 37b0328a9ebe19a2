use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{check_actions, delta, obs_len, resolve_moves, Cell, Grid, Patch, GRID_ACTIONS};
use super::{Environment, EventCounts, StepResult};
use crate::{Error, Result};

/// Predators (the learning agents) hunt scripted prey. Channels: wall,
/// other predator, prey. No scalars.
///
/// Order within a step: predators move (prey cells block them), every prey
/// locked in a closure is captured and respawns, then the remaining prey
/// flee. Each predator pays `step_cost` per step and earns
/// `capture_reward` for every capture it takes part in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitConfig {
    pub width: usize,
    pub height: usize,
    pub predators: usize,
    pub prey: usize,
    pub view_radius: usize,
    pub comm_radius: f64,
    pub max_neighbors: usize,
    pub horizon: usize,
    pub capture_reward: f64,
    pub step_cost: f64,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        Self {
            width: 20,
            height: 20,
            predators: 8,
            prey: 4,
            view_radius: 3,
            comm_radius: 6.0,
            max_neighbors: 8,
            horizon: 100,
            capture_reward: 1.0,
            step_cost: 0.01,
        }
    }
}

impl PursuitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.predators == 0 || self.width == 0 || self.height == 0 || self.horizon == 0 {
            return Err(Error::config("pursuit: predators, grid size and horizon must be positive"));
        }
        if self.predators + self.prey + 1 > self.width * self.height {
            return Err(Error::config(format!(
                "pursuit: {} predators and {} prey do not fit a {}x{} grid",
                self.predators, self.prey, self.width, self.height
            )));
        }
        if self.comm_radius < 0.0 {
            return Err(Error::config("pursuit: comm radius must be non-negative"));
        }
        Ok(())
    }
}

const CHANNELS: usize = 3;
const VON_NEUMANN: [Cell; 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

#[derive(Clone, Debug)]
pub struct Pursuit {
    pub config: PursuitConfig,
    grid: Grid,
    pub predators: Vec<Cell>,
    pub prey: Vec<Cell>,
    steps: usize,
    rng: ChaCha8Rng,
}

impl Pursuit {
    pub fn new(config: PursuitConfig) -> Self {
        Self {
            grid: Grid {
                width: config.width,
                height: config.height,
            },
            predators: Vec::new(),
            prey: Vec::new(),
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
            config,
        }
    }

    pub fn set_state(&mut self, predators: Vec<Cell>, prey: Vec<Cell>) -> Result<()> {
        if predators.len() != self.config.predators || prey.len() != self.config.prey {
            return Err(Error::config("pursuit: state does not match the configured counts"));
        }
        if predators.iter().chain(&prey).any(|&c| !self.grid.contains(c)) {
            return Err(Error::config("pursuit: position outside the grid"));
        }
        self.predators = predators;
        self.prey = prey;
        Ok(())
    }

    /// True when every von Neumann neighbour of the prey is a wall or a
    /// predator and at least one is a predator.
    pub fn closure_detect(&self, prey_id: usize) -> bool {
        let (x, y) = self.prey[prey_id];
        let mut predators = 0;
        for (dx, dy) in VON_NEUMANN {
            let c = (x + dx, y + dy);
            if self.predators.contains(&c) {
                predators += 1;
            } else if self.grid.contains(c) {
                return false;
            }
        }
        predators > 0
    }

    fn participants(&self, prey_id: usize) -> Vec<usize> {
        let (x, y) = self.prey[prey_id];
        (0..self.predators.len())
            .filter(|&i| {
                let (px, py) = self.predators[i];
                (px - x).abs() + (py - y).abs() == 1
            })
            .collect()
    }

    fn flee(&mut self, prey_id: usize) {
        let here = self.prey[prey_id];
        let nearest = |c: Cell| {
            self.predators
                .iter()
                .map(|p| (p.0 - c.0).abs() + (p.1 - c.1).abs())
                .min()
                .unwrap_or(i64::MAX)
        };
        let mut best = Vec::new();
        let mut best_d = i64::MIN;
        for a in 0..GRID_ACTIONS {
            let (dx, dy) = delta(a);
            let t = (here.0 + dx, here.1 + dy);
            let free = t == here
                || (self.grid.contains(t) && !self.predators.contains(&t) && !self.prey.contains(&t));
            if !free {
                continue;
            }
            let d = nearest(t);
            if d > best_d {
                best_d = d;
                best.clear();
            }
            if d == best_d {
                best.push(t);
            }
        }
        self.prey[prey_id] = best[self.rng.random_range(0..best.len())];
    }
}

impl Environment for Pursuit {
    fn reset(&mut self, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.config.validate()?;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = self.grid.place(&mut self.rng, self.config.predators + self.config.prey, &[])?;
        self.predators = cells[..self.config.predators].to_vec();
        self.prey = cells[self.config.predators..].to_vec();
        self.steps = 0;
        Ok(self.observe_all())
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        check_actions(actions, self.config.predators, GRID_ACTIONS)?;
        let prey = self.prey.clone();
        self.predators = resolve_moves(&self.grid, &self.predators, actions, |c| prey.contains(&c));
        let mut rewards = vec![-self.config.step_cost; self.config.predators];
        let mut info = EventCounts::default();
        let mut captured = vec![false; self.prey.len()];
        for p in 0..self.prey.len() {
            if self.closure_detect(p) {
                for i in self.participants(p) {
                    rewards[i] += self.config.capture_reward;
                }
                info.captures += 1;
                captured[p] = true;
            }
        }
        for (p, &was_captured) in captured.iter().enumerate() {
            if was_captured {
                let (pred, prey) = (&self.predators, &self.prey);
                self.prey[p] = self
                    .grid
                    .random_free(&mut self.rng, |c| !pred.contains(&c) && !prey.contains(&c))?;
            } else {
                self.flee(p);
            }
        }
        self.steps += 1;
        Ok(StepResult {
            obs: self.observe_all(),
            rewards,
            done: self.steps >= self.config.horizon,
            agent_done: vec![false; self.config.predators],
            info,
        })
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        let me = self.predators[agent];
        let mut patch = Patch::new(self.config.view_radius, CHANNELS);
        patch.mark_outside(&self.grid, 0, me);
        for (j, &c) in self.predators.iter().enumerate() {
            if j != agent {
                patch.set(1, me, c, 1.0);
            }
        }
        for &c in &self.prey {
            patch.set(2, me, c, 1.0);
        }
        let mut obs = Vec::with_capacity(obs_len(self.config.view_radius, CHANNELS, 0));
        obs.extend(self.grid.normalized(me));
        obs.extend(patch.data);
        obs
    }

    fn n_agents(&self) -> usize {
        self.config.predators
    }

    fn groups(&self) -> Vec<usize> {
        vec![0; self.config.predators]
    }

    fn obs_dims(&self) -> Vec<usize> {
        vec![obs_len(self.config.view_radius, CHANNELS, 0)]
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
        self.predators.iter().map(|&(x, y)| [x as f64, y as f64]).collect()
    }

    fn comm_radius(&self) -> f64 {
        self.config.comm_radius
    }

    fn max_neighbors(&self) -> usize {
        self.config.max_neighbors
    }
}
