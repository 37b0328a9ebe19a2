//! Index bookkeeping that turns a [`GraphBatch`] into packed edge lists for
//! the attention layers.

use super::batch::GraphBatch;
use super::config::{CommMode, HgrnConfig};
use crate::{Error, Result};

/// Edges from the targets of one group to one source partition, packed as
/// contiguous per-target segments.
#[derive(Clone, Debug, Default)]
pub(crate) struct EdgeSet {
    /// `offsets[t]..offsets[t + 1]` are the edges of target `t`.
    pub offsets: Vec<usize>,
    /// Target position (within its group) of every edge.
    pub tgt_pos: Vec<usize>,
    /// Source position (within the partition) of every edge.
    pub src_pos: Vec<usize>,
    /// Batch row of every edge's source agent.
    pub src_rows: Vec<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct Plan {
    /// Batch rows of each group, ascending.
    pub rows_by_group: Vec<Vec<usize>>,
    /// Position of every batch row inside its group block.
    pub pos_in_group: Vec<usize>,
    /// Batch rows feeding each source partition, in partition order.
    pub partition_rows: Vec<Vec<usize>>,
    /// Maps batch row to its row in the group-ordered concatenation.
    pub restore: Vec<usize>,
    /// True when the group-ordered concatenation already is batch order.
    pub identity: bool,
    /// `layers[l][c][k]`: edges of layer `l` from targets in group `c` to
    /// partition `k`.
    pub layers: [Vec<Vec<EdgeSet>>; 2],
}

impl Plan {
    pub fn new(config: &HgrnConfig, batch: &GraphBatch) -> Result<Self> {
        let n = batch.len();
        let groups = config.group_count();
        if batch.obs.len() != n || batch.neighbors.len() != n || batch.agent_ids.len() != n {
            return Err(Error::integrity("graph batch columns have different lengths"));
        }
        let mut rows_by_group = vec![Vec::new(); groups];
        let mut pos_in_group = vec![0; n];
        for (row, &g) in batch.groups.iter().enumerate() {
            let block = rows_by_group.get_mut(g).ok_or_else(|| {
                Error::config(format!("agent group {g} outside the {groups} configured groups"))
            })?;
            if batch.obs[row].len() != config.obs_dims[g] {
                return Err(Error::config(format!(
                    "agent {} of group {g} has an observation of length {}, expected {}",
                    batch.agent_ids[row],
                    batch.obs[row].len(),
                    config.obs_dims[g]
                )));
            }
            pos_in_group[row] = block.len();
            block.push(row);
        }
        let mut group_offset = vec![0; groups];
        for g in 1..groups {
            group_offset[g] = group_offset[g - 1] + rows_by_group[g - 1].len();
        }
        let restore: Vec<usize> = (0..n)
            .map(|row| group_offset[batch.groups[row]] + pos_in_group[row])
            .collect();
        let identity = restore.iter().enumerate().all(|(i, &r)| i == r);

        let flat = config.comm == CommMode::Flat;
        let partition_rows = if flat {
            vec![rows_by_group.concat()]
        } else {
            rows_by_group.clone()
        };
        let partitions = partition_rows.len();
        // Position of a source row in its partition.
        let src_pos_of = |row: usize| {
            if flat {
                restore[row]
            } else {
                pos_in_group[row]
            }
        };
        let partition_of = |row: usize| if flat { 0 } else { batch.groups[row] };

        let build = |layer: usize| -> Result<Vec<Vec<EdgeSet>>> {
            let self_only = config.comm == CommMode::Off || (layer == 1 && !config.second_layer_comm);
            let mut out = Vec::with_capacity(groups);
            for (c, targets) in rows_by_group.iter().enumerate() {
                let mut sets = vec![
                    EdgeSet {
                        offsets: vec![0],
                        ..EdgeSet::default()
                    };
                    partitions
                ];
                for (t, &row) in targets.iter().enumerate() {
                    for &j in &batch.neighbors[row] {
                        if j >= n {
                            return Err(Error::integrity(format!(
                                "neighbour row {j} outside a batch of {n}"
                            )));
                        }
                        let keep = if self_only {
                            j == row
                        } else if config.comm == CommMode::SameGroup {
                            batch.groups[j] == c
                        } else {
                            true
                        };
                        if keep {
                            let es = &mut sets[partition_of(j)];
                            es.tgt_pos.push(t);
                            es.src_pos.push(src_pos_of(j));
                            es.src_rows.push(j);
                        }
                    }
                    for es in &mut sets {
                        es.offsets.push(es.src_pos.len());
                    }
                }
                out.push(sets);
            }
            Ok(out)
        };
        let layers = [build(0)?, build(1)?];
        Ok(Self {
            rows_by_group,
            pos_in_group,
            partition_rows,
            restore,
            identity,
            layers,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch() -> GraphBatch {
        GraphBatch {
            agent_ids: vec![0, 1, 2, 3],
            groups: vec![1, 0, 1, 0],
            obs: vec![vec![0.0; 2], vec![0.0; 3], vec![0.0; 2], vec![0.0; 3]],
            neighbors: vec![vec![0, 1, 2], vec![0, 1], vec![0, 2, 3], vec![2, 3]],
        }
    }

    fn config(comm: CommMode) -> HgrnConfig {
        HgrnConfig {
            obs_dims: vec![3, 2],
            comm,
            ..HgrnConfig::default()
        }
    }

    #[test]
    fn groups_and_restore_permutation() {
        let plan = Plan::new(&config(CommMode::Hierarchical), &batch()).unwrap();
        assert_eq!(plan.rows_by_group, vec![vec![1, 3], vec![0, 2]]);
        assert_eq!(plan.restore, vec![2, 0, 3, 1]);
        assert!(!plan.identity);
        // Targets of group 1 are rows 0 and 2; partition 1 is rows 0 and 2.
        let es = &plan.layers[0][1][1];
        assert_eq!(es.offsets, vec![0, 2, 4]);
        assert_eq!(es.src_rows, vec![0, 2, 0, 2]);
        assert_eq!(es.src_pos, vec![0, 1, 0, 1]);
        let es = &plan.layers[0][1][0];
        assert_eq!(es.src_rows, vec![1, 3]);
        assert_eq!(es.offsets, vec![0, 1, 2]);
    }

    #[test]
    fn comm_filters() {
        let off = Plan::new(&config(CommMode::Off), &batch()).unwrap();
        for layer in &off.layers {
            for (c, sets) in layer.iter().enumerate() {
                assert!(sets[1 - c].src_rows.is_empty());
                assert_eq!(sets[c].src_rows, off.rows_by_group[c]);
            }
        }
        let same = Plan::new(&config(CommMode::SameGroup), &batch()).unwrap();
        assert!(same.layers[0][0][1].src_rows.is_empty());
        assert!(same.layers[0][1][0].src_rows.is_empty());
        let flat = Plan::new(&config(CommMode::Flat), &batch()).unwrap();
        assert_eq!(flat.partition_rows, vec![vec![1, 3, 0, 2]]);
        assert_eq!(flat.layers[0][1][0].src_rows, vec![0, 1, 2, 0, 2, 3]);
        assert_eq!(flat.layers[0][1][0].src_pos, vec![2, 0, 3, 2, 3, 1]);
    }

    #[test]
    fn second_layer_self_only() {
        let cfg = HgrnConfig {
            second_layer_comm: false,
            ..config(CommMode::Hierarchical)
        };
        let plan = Plan::new(&cfg, &batch()).unwrap();
        assert_eq!(plan.layers[0][1][0].src_rows, vec![1, 3]);
        assert_eq!(plan.layers[1][1][1].src_rows, vec![0, 2]);
        assert!(plan.layers[1][1][0].src_rows.is_empty());
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut b = batch();
        b.groups[0] = 5;
        assert!(Plan::new(&config(CommMode::Hierarchical), &b).is_err());
        let mut b = batch();
        b.obs[0] = vec![0.0];
        assert!(Plan::new(&config(CommMode::Hierarchical), &b).is_err());
    }
}
