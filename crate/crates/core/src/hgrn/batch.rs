use crate::agentgraph::{AgentGraph, ObservationSet};
use crate::{Error, Result};

/// Packed network input: one row per agent, with neighbour lists expressed as
/// row indices (ascending, self included). Several environments or replay
/// segments are batched by concatenating their blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBatch {
    pub agent_ids: Vec<usize>,
    pub groups: Vec<usize>,
    pub obs: Vec<Vec<f64>>,
    pub neighbors: Vec<Vec<usize>>,
}

impl GraphBatch {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn from_graph(graph: &AgentGraph, obs: &[Vec<f64>]) -> Result<Self> {
        if obs.len() != graph.len() {
            return Err(Error::integrity(format!(
                "{} observations for a graph of {} agents",
                obs.len(),
                graph.len()
            )));
        }
        Ok(Self {
            agent_ids: (0..graph.len()).collect(),
            groups: graph.groups.clone(),
            obs: obs.to_vec(),
            neighbors: graph.adjacency.clone(),
        })
    }

    /// Rebuilds the packed form from per-agent observation sets. Rows are
    /// ordered by agent id; every referenced neighbour must own a set.
    pub fn from_observation_sets(sets: &[ObservationSet]) -> Result<Self> {
        let mut order: Vec<usize> = (0..sets.len()).collect();
        order.sort_by_key(|&i| sets[i].self_id);
        let ids: Vec<usize> = order.iter().map(|&i| sets[i].self_id).collect();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::integrity("duplicate observation set for one agent"));
        }
        let row_of = |id: usize| {
            ids.binary_search(&id)
                .map_err(|_| Error::integrity(format!("neighbour {id} has no observation set")))
        };
        let mut batch = GraphBatch {
            agent_ids: ids.clone(),
            groups: Vec::with_capacity(sets.len()),
            obs: Vec::with_capacity(sets.len()),
            neighbors: Vec::with_capacity(sets.len()),
        };
        for &i in &order {
            let set = &sets[i];
            let own = set
                .neighbors
                .iter()
                .find(|n| n.id == set.self_id)
                .ok_or_else(|| Error::integrity(format!("agent {} missing from its own set", set.self_id)))?;
            batch.groups.push(own.group);
            batch.obs.push(own.observation.clone());
            let mut rows = set
                .neighbors
                .iter()
                .map(|n| row_of(n.id))
                .collect::<Result<Vec<_>>>()?;
            rows.sort_unstable();
            rows.dedup();
            batch.neighbors.push(rows);
        }
        Ok(batch)
    }

    /// Concatenates independent blocks, shifting neighbour indices.
    pub fn concat(parts: &[GraphBatch]) -> Self {
        let mut out = GraphBatch {
            agent_ids: Vec::new(),
            groups: Vec::new(),
            obs: Vec::new(),
            neighbors: Vec::new(),
        };
        for p in parts {
            let off = out.len();
            out.agent_ids.extend_from_slice(&p.agent_ids);
            out.groups.extend_from_slice(&p.groups);
            out.obs.extend(p.obs.iter().cloned());
            out.neighbors
                .extend(p.neighbors.iter().map(|adj| adj.iter().map(|j| j + off).collect::<Vec<_>>()));
        }
        out
    }
}
