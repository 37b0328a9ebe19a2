//! Time-varying proximity graph over agents and the per-agent neighbourhood
//! observation sets built from it.
//!
//! Group indices are zero-based (`0..K`). Every agent is its own neighbour.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Proximity graph at one timestep.
///
/// `adjacency[i]` lists the node indices of `G_i` in ascending order and
/// always contains `i`. Node ids are the agents' indices `0..n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentGraph {
    pub positions: Vec<[f64; 2]>,
    pub groups: Vec<usize>,
    pub adjacency: Vec<Vec<usize>>,
}

/// Chebyshev (king-move) distance.
pub fn chebyshev(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

/// Builds the graph: `(i, j)` is an edge iff their Chebyshev distance is at
/// most `radius`.
///
/// When a node has more than `max_neighbors` candidates (self excluded) it
/// keeps the nearest ones, ties going to the lower id. An edge survives only
/// if both endpoints keep each other, so the result stays symmetric and no
/// node exceeds the cap.
pub fn build_graph(
    positions: &[[f64; 2]],
    groups: &[usize],
    radius: f64,
    max_neighbors: usize,
) -> Result<AgentGraph> {
    if positions.len() != groups.len() {
        return Err(Error::config(format!(
            "{} positions but {} group labels",
            positions.len(),
            groups.len()
        )));
    }
    if !(radius >= 0.0) {
        return Err(Error::config(format!("radius must be non-negative, got {radius}")));
    }
    if positions.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::config("agent positions must be finite"));
    }
    let n = positions.len();
    let kept: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (chebyshev(positions[i], positions[j]), j))
                .filter(|&(d, _)| d <= radius)
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(max_neighbors);
            let mut ids: Vec<usize> = cand.into_iter().map(|(_, j)| j).collect();
            ids.sort_unstable();
            ids
        })
        .collect();

    let adjacency = (0..n)
        .map(|i| {
            let mut adj: Vec<usize> = kept[i]
                .iter()
                .copied()
                .filter(|&j| kept[j].binary_search(&i).is_ok())
                .collect();
            adj.push(i);
            adj.sort_unstable();
            adj
        })
        .collect();

    Ok(AgentGraph {
        positions: positions.to_vec(),
        groups: groups.to_vec(),
        adjacency,
    })
}

impl AgentGraph {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn group_count(&self) -> usize {
        self.groups.iter().map(|g| g + 1).max().unwrap_or(0)
    }

    /// Checks self-inclusion, symmetry and ordering.
    pub fn validate(&self) -> Result<()> {
        if self.adjacency.len() != self.groups.len() || self.positions.len() != self.groups.len() {
            return Err(Error::integrity("graph arrays have inconsistent lengths"));
        }
        for (i, adj) in self.adjacency.iter().enumerate() {
            if !adj.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::integrity(format!("neighbours of {i} are not sorted")));
            }
            if adj.binary_search(&i).is_err() {
                return Err(Error::integrity(format!("agent {i} is not its own neighbour")));
            }
            for &j in adj {
                if j >= self.len() || !self.are_neighbors(j, i) {
                    return Err(Error::integrity(format!("edge {i}-{j} is not symmetric")));
                }
            }
        }
        Ok(())
    }
}

/// One neighbour's entry in an [`ObservationSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborObservation {
    pub id: usize,
    pub group: usize,
    pub observation: Vec<f64>,
}

/// Observations of agent `self_id` and its neighbours at one timestep,
/// ordered by ascending id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub self_id: usize,
    pub timestep: usize,
    pub neighbors: Vec<NeighborObservation>,
}

impl ObservationSet {
    pub fn own(&self) -> &NeighborObservation {
        self.neighbors
            .iter()
            .find(|n| n.id == self.self_id)
            .expect("observation sets always contain their owner")
    }

    /// Entries belonging to group `k`.
    pub fn group(&self, k: usize) -> impl Iterator<Item = &NeighborObservation> {
        self.neighbors.iter().filter(move |n| n.group == k)
    }

    pub fn ids(&self) -> Vec<usize> {
        self.neighbors.iter().map(|n| n.id).collect()
    }
}

/// Assembles `O_i = {o_j : j ∈ G_i}` for every agent.
pub fn gather_observations(
    graph: &AgentGraph,
    all_obs: &[Vec<f64>],
    timestep: usize,
) -> Result<Vec<ObservationSet>> {
    if all_obs.len() != graph.len() {
        return Err(Error::integrity(format!(
            "observations for {} agents, graph has {}",
            all_obs.len(),
            graph.len()
        )));
    }
    let mut width_of_group: Vec<Option<usize>> = vec![None; graph.group_count()];
    for (i, o) in all_obs.iter().enumerate() {
        let g = graph.groups[i];
        match width_of_group[g] {
            None => width_of_group[g] = Some(o.len()),
            Some(w) if w != o.len() => {
                return Err(Error::integrity(format!(
                    "agent {i}: observation length {} differs from group {g} length {w}",
                    o.len()
                )))
            }
            _ => {}
        }
    }
    Ok((0..graph.len())
        .map(|i| ObservationSet {
            self_id: i,
            timestep,
            neighbors: graph
                .neighbors(i)
                .iter()
                .map(|&j| NeighborObservation {
                    id: j,
                    group: graph.groups[j],
                    observation: all_obs[j].clone(),
                })
                .collect(),
        })
        .collect())
}
