//! Grid mechanics shared by the gridworld environments.

use std::collections::HashMap;

use rand::Rng;

use crate::{Error, Result};

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;
pub const STAY: usize = 4;
pub const GRID_ACTIONS: usize = 5;

pub type Cell = (i64, i64);

/// Displacement of a grid action; `y` grows downwards.
pub fn delta(action: usize) -> Cell {
    match action {
        UP => (0, -1),
        DOWN => (0, 1),
        LEFT => (-1, 0),
        RIGHT => (1, 0),
        _ => (0, 0),
    }
}

pub fn check_actions(actions: &[usize], agents: usize, n_actions: usize) -> Result<()> {
    if actions.len() != agents {
        return Err(Error::config(format!(
            "{} actions for {agents} agents",
            actions.len()
        )));
    }
    match actions.iter().position(|&a| a >= n_actions) {
        Some(agent) => Err(Error::InvalidAction {
            agent,
            action: actions[agent],
        }),
        None => Ok(()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
}

impl Grid {
    pub fn contains(&self, (x, y): Cell) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    /// Position scaled into `[0, 1]` per axis.
    pub fn normalized(&self, (x, y): Cell) -> [f64; 2] {
        let scale = |v: i64, n: usize| if n > 1 { v as f64 / (n - 1) as f64 } else { 0.0 };
        [scale(x, self.width), scale(y, self.height)]
    }

    /// Uniformly random cell for which `free` holds.
    pub fn random_free<R: Rng + ?Sized>(&self, rng: &mut R, free: impl Fn(Cell) -> bool) -> Result<Cell> {
        let cells: Vec<Cell> = (0..self.height as i64)
            .flat_map(|y| (0..self.width as i64).map(move |x| (x, y)))
            .filter(|&c| free(c))
            .collect();
        if cells.is_empty() {
            return Err(Error::config("no free cell left on the grid"));
        }
        Ok(cells[rng.random_range(0..cells.len())])
    }

    /// `count` distinct uniformly random cells avoiding `taken`.
    pub fn place<R: Rng + ?Sized>(&self, rng: &mut R, count: usize, taken: &[Cell]) -> Result<Vec<Cell>> {
        let mut free: Vec<Cell> = (0..self.height as i64)
            .flat_map(|y| (0..self.width as i64).map(move |x| (x, y)))
            .filter(|c| !taken.contains(c))
            .collect();
        if free.len() < count {
            return Err(Error::config(format!(
                "cannot place {count} entities on {} free cells",
                free.len()
            )));
        }
        // Partial Fisher-Yates.
        for i in 0..count {
            let j = rng.random_range(i..free.len());
            free.swap(i, j);
        }
        free.truncate(count);
        Ok(free)
    }
}

/// Resolves simultaneous moves. A move into a wall, off the grid or into a
/// cell for which `blocked` holds fails. When several agents end up in one
/// cell, an agent that never left it keeps it, otherwise the lowest id wins;
/// losers stay where they were. Repeats until no cell is shared.
pub fn resolve_moves(grid: &Grid, current: &[Cell], actions: &[usize], blocked: impl Fn(Cell) -> bool) -> Vec<Cell> {
    let mut next: Vec<Cell> = current
        .iter()
        .zip(actions)
        .map(|(&(x, y), &a)| {
            let (dx, dy) = delta(a);
            let t = (x + dx, y + dy);
            if t != (x, y) && (!grid.contains(t) || blocked(t)) {
                (x, y)
            } else {
                t
            }
        })
        .collect();
    loop {
        let mut claims: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, &c) in next.iter().enumerate() {
            claims.entry(c).or_default().push(i);
        }
        let mut changed = false;
        for (cell, ids) in claims {
            if ids.len() < 2 {
                continue;
            }
            let winner = ids
                .iter()
                .copied()
                .find(|&i| current[i] == cell)
                .unwrap_or_else(|| *ids.iter().min().expect("nonempty"));
            for i in ids {
                if i != winner {
                    next[i] = current[i];
                    changed = true;
                }
            }
        }
        if !changed {
            return next;
        }
    }
}

/// Channel-major square patch centred on an agent:
/// index `c * side² + (dy + r) * side + (dx + r)` for offsets in `[-r, r]`.
#[derive(Clone, Debug)]
pub struct Patch {
    pub radius: i64,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Patch {
    pub fn new(radius: usize, channels: usize) -> Self {
        let side = 2 * radius + 1;
        Self {
            radius: radius as i64,
            channels,
            data: vec![0.0; channels * side * side],
        }
    }

    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    pub fn index(&self, channel: usize, dx: i64, dy: i64) -> Option<usize> {
        let r = self.radius;
        if channel >= self.channels || dx.abs() > r || dy.abs() > r {
            return None;
        }
        let side = self.side();
        Some(channel * side * side + (dy + r) as usize * side + (dx + r) as usize)
    }

    /// Writes `value` at the cell `target` relative to `centre`, if visible.
    pub fn set(&mut self, channel: usize, centre: Cell, target: Cell, value: f64) {
        if let Some(i) = self.index(channel, target.0 - centre.0, target.1 - centre.1) {
            self.data[i] = value;
        }
    }

    /// Marks every off-grid cell of the view in `channel`.
    pub fn mark_outside(&mut self, grid: &Grid, channel: usize, centre: Cell) {
        let r = self.radius;
        for dy in -r..=r {
            for dx in -r..=r {
                if !grid.contains((centre.0 + dx, centre.1 + dy)) {
                    let i = self.index(channel, dx, dy).expect("in range");
                    self.data[i] = 1.0;
                }
            }
        }
    }
}

/// Length of a grid observation: position, patch channels and scalars.
pub fn obs_len(view_radius: usize, channels: usize, scalars: usize) -> usize {
    let side = 2 * view_radius + 1;
    2 + channels * side * side + scalars
}
