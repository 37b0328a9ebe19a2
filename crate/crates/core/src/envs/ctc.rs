use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{check_actions, obs_len, resolve_moves, Cell, Grid, Patch, GRID_ACTIONS};
use super::{Environment, EventCounts, StepResult};
use crate::{Error, Result};

/// Cooperative treasure collection with three agent groups: hunters
/// (group 0), red banks (group 1) and blue banks (group 2). Agent ids are
/// hunters first, then red banks, then blue banks.
///
/// A hunter with empty hands picks up a treasure by standing on it; the
/// treasure immediately respawns elsewhere. A carrying hunter within one
/// cell (king move) of a bank of the matching colour deposits: the hunter
/// earns `hunter_share`, the lowest-id such bank earns `bank_share`.
///
/// Channels: wall, empty-handed hunter, hunter carrying red, hunter
/// carrying blue, red bank, blue bank, red treasure, blue treasure. Hunters
/// get two scalars (carrying red, carrying blue); banks get none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtcConfig {
    pub width: usize,
    pub height: usize,
    pub hunters: usize,
    pub red_banks: usize,
    pub blue_banks: usize,
    /// Treasures of each colour on the map at any time.
    pub treasures_per_color: usize,
    pub view_radius: usize,
    pub comm_radius: f64,
    pub max_neighbors: usize,
    pub horizon: usize,
    pub hunter_share: f64,
    pub bank_share: f64,
}

impl Default for CtcConfig {
    fn default() -> Self {
        Self {
            width: 24,
            height: 24,
            hunters: 20,
            red_banks: 10,
            blue_banks: 10,
            treasures_per_color: 8,
            view_radius: 3,
            comm_radius: 6.0,
            max_neighbors: 8,
            horizon: 100,
            hunter_share: 0.5,
            bank_share: 0.5,
        }
    }
}

impl CtcConfig {
    /// 8 hunters with 4 + 4 banks.
    pub fn small() -> Self {
        Self {
            hunters: 8,
            red_banks: 4,
            blue_banks: 4,
            treasures_per_color: 4,
            ..Self::default()
        }
    }

    pub fn agents(&self) -> usize {
        self.hunters + self.red_banks + self.blue_banks
    }

    pub fn validate(&self) -> Result<()> {
        if self.hunters == 0 || self.red_banks == 0 || self.blue_banks == 0 {
            return Err(Error::config("ctc: every group needs at least one agent"));
        }
        if self.width == 0 || self.height == 0 || self.horizon == 0 {
            return Err(Error::config("ctc: grid size and horizon must be positive"));
        }
        if self.agents() + 2 * self.treasures_per_color + 2 > self.width * self.height {
            return Err(Error::config(format!(
                "ctc: {} agents and {} treasures do not fit a {}x{} grid",
                self.agents(),
                2 * self.treasures_per_color,
                self.width,
                self.height
            )));
        }
        if self.comm_radius < 0.0 {
            return Err(Error::config("ctc: comm radius must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Color {
    Red,
    Blue,
}

const CHANNELS: usize = 8;

#[derive(Clone, Debug)]
pub struct Ctc {
    pub config: CtcConfig,
    grid: Grid,
    pub agents: Vec<Cell>,
    pub carrying: Vec<Option<Color>>,
    pub treasures: Vec<(Cell, Color)>,
    steps: usize,
    rng: ChaCha8Rng,
}

impl Ctc {
    pub fn new(config: CtcConfig) -> Self {
        Self {
            grid: Grid {
                width: config.width,
                height: config.height,
            },
            agents: Vec::new(),
            carrying: Vec::new(),
            treasures: Vec::new(),
            steps: 0,
            rng: ChaCha8Rng::seed_from_u64(0),
            config,
        }
    }

    pub fn group_of(&self, agent: usize) -> usize {
        if agent < self.config.hunters {
            0
        } else if agent < self.config.hunters + self.config.red_banks {
            1
        } else {
            2
        }
    }

    fn bank_color(&self, agent: usize) -> Option<Color> {
        match self.group_of(agent) {
            1 => Some(Color::Red),
            2 => Some(Color::Blue),
            _ => None,
        }
    }

    pub fn set_state(&mut self, agents: Vec<Cell>, carrying: Vec<Option<Color>>, treasures: Vec<(Cell, Color)>) -> Result<()> {
        if agents.len() != self.config.agents() || carrying.len() != self.config.hunters {
            return Err(Error::config("ctc: state does not match the configured counts"));
        }
        if agents.iter().chain(treasures.iter().map(|(c, _)| c)).any(|&c| !self.grid.contains(c)) {
            return Err(Error::config("ctc: position outside the grid"));
        }
        self.agents = agents;
        self.carrying = carrying;
        self.treasures = treasures;
        Ok(())
    }

    fn respawn_treasure(&mut self, color: Color) -> Result<()> {
        let (agents, treasures) = (&self.agents, &self.treasures);
        let c = self.grid.random_free(&mut self.rng, |c| {
            !agents.contains(&c) && !treasures.iter().any(|(t, _)| *t == c)
        })?;
        self.treasures.push((c, color));
        Ok(())
    }
}

impl Environment for Ctc {
    fn reset(&mut self, seed: u64) -> Result<Vec<Vec<f64>>> {
        self.config.validate()?;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.config.agents();
        let t = self.config.treasures_per_color;
        let cells = self.grid.place(&mut self.rng, n + 2 * t, &[])?;
        self.agents = cells[..n].to_vec();
        self.treasures = cells[n..]
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, if i < t { Color::Red } else { Color::Blue }))
            .collect();
        self.carrying = vec![None; self.config.hunters];
        self.steps = 0;
        Ok(self.observe_all())
    }

    fn step(&mut self, actions: &[usize]) -> Result<StepResult> {
        let n = self.config.agents();
        check_actions(actions, n, GRID_ACTIONS)?;
        self.agents = resolve_moves(&self.grid, &self.agents, actions, |_| false);
        let mut rewards = vec![0.0; n];
        let mut info = EventCounts::default();
        for h in 0..self.config.hunters {
            if self.carrying[h].is_none() {
                if let Some(k) = self.treasures.iter().position(|(c, _)| *c == self.agents[h]) {
                    let (_, color) = self.treasures.remove(k);
                    self.carrying[h] = Some(color);
                    info.treasures_collected += 1;
                    self.respawn_treasure(color)?;
                }
            }
            if let Some(color) = self.carrying[h] {
                let (hx, hy) = self.agents[h];
                let bank = (self.config.hunters..n).find(|&b| {
                    let (bx, by) = self.agents[b];
                    self.bank_color(b) == Some(color) && (bx - hx).abs() <= 1 && (by - hy).abs() <= 1
                });
                if let Some(b) = bank {
                    rewards[h] += self.config.hunter_share;
                    rewards[b] += self.config.bank_share;
                    info.treasures_banked += 1;
                    self.carrying[h] = None;
                }
            }
        }
        self.steps += 1;
        Ok(StepResult {
            obs: self.observe_all(),
            rewards,
            done: self.steps >= self.config.horizon,
            agent_done: vec![false; n],
            info,
        })
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        let me = self.agents[agent];
        let mut patch = Patch::new(self.config.view_radius, CHANNELS);
        patch.mark_outside(&self.grid, 0, me);
        for (j, &c) in self.agents.iter().enumerate() {
            if j == agent {
                continue;
            }
            let channel = match (self.group_of(j), self.carrying.get(j).copied().flatten()) {
                (0, None) => 1,
                (0, Some(Color::Red)) => 2,
                (0, Some(Color::Blue)) => 3,
                (1, _) => 4,
                _ => 5,
            };
            patch.set(channel, me, c, 1.0);
        }
        for &(c, color) in &self.treasures {
            patch.set(if color == Color::Red { 6 } else { 7 }, me, c, 1.0);
        }
        let hunter = agent < self.config.hunters;
        let mut obs = Vec::with_capacity(obs_len(self.config.view_radius, CHANNELS, 2));
        obs.extend(self.grid.normalized(me));
        obs.extend(patch.data);
        if hunter {
            obs.push(if self.carrying[agent] == Some(Color::Red) { 1.0 } else { 0.0 });
            obs.push(if self.carrying[agent] == Some(Color::Blue) { 1.0 } else { 0.0 });
        }
        obs
    }

    fn n_agents(&self) -> usize {
        self.config.agents()
    }

    fn groups(&self) -> Vec<usize> {
        (0..self.config.agents()).map(|i| self.group_of(i)).collect()
    }

    fn obs_dims(&self) -> Vec<usize> {
        let r = self.config.view_radius;
        vec![obs_len(r, CHANNELS, 2), obs_len(r, CHANNELS, 0), obs_len(r, CHANNELS, 0)]
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
