//! Modified hierarchical graph attention layer.
//!
//! For a target agent `i` of group `c` and a neighbour partition `k`:
//!
//! ```text
//! α^k_ij = softmax_{j ∈ G_i ∩ C^k} ( (W_K^k e_j)ᵀ (W_Q e_i) )
//! g^k_i  = Σ_j α^k_ij · W_V^k e_j
//! g_i    = W (g^1_i | … | g^K_i)
//! ```
//!
//! Every agent group owns its own copy of `W_Q`, `W_K^k`, `W_V^k` and `W`.
//! A partition without neighbours contributes a zero block to the
//! concatenation, so `W` always has `K · embed` input columns.

use rand::Rng;

use super::plan::EdgeSet;
use crate::diffcore::{softmax, Matrix, ParamId, ParamStore, Tape, Var};
use crate::{Error, Result};

/// Attention parameters of one layer for one target group.
#[derive(Clone, Debug)]
pub struct HgatLayer {
    pub w_q: ParamId,
    pub w_k: Vec<ParamId>,
    pub w_v: Vec<ParamId>,
    pub w_fuse: ParamId,
    pub embed_dim: usize,
    pub attn_dim: usize,
}

/// Result of [`HgatLayer::forward_graph`].
#[derive(Clone, Debug)]
pub struct GraphAttention {
    /// Fused messages, one row per target.
    pub output: Var,
    /// `weights[i][k]`: attention of target `i` over its partition-`k`
    /// neighbours, in neighbour-list order.
    pub weights: Vec<Vec<Vec<f64>>>,
}

/// Tape handles of one target group's attention, kept for introspection.
#[derive(Clone, Debug)]
pub(crate) struct PartitionTrace {
    pub weights: Option<Var>,
    pub aggregate: Var,
}

impl HgatLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        partitions: usize,
        embed_dim: usize,
        attn_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w_q = store.add_weight(format!("{name}.w_q"), attn_dim, embed_dim, rng)?;
        let mut w_k = Vec::with_capacity(partitions);
        let mut w_v = Vec::with_capacity(partitions);
        for k in 0..partitions {
            w_k.push(store.add_weight(format!("{name}.w_k{k}"), attn_dim, embed_dim, rng)?);
            w_v.push(store.add_weight(format!("{name}.w_v{k}"), embed_dim, embed_dim, rng)?);
        }
        let w_fuse = store.add_weight(format!("{name}.w_fuse"), embed_dim, partitions * embed_dim, rng)?;
        Ok(Self {
            w_q,
            w_k,
            w_v,
            w_fuse,
            embed_dim,
            attn_dim,
        })
    }

    pub fn partitions(&self) -> usize {
        self.w_k.len()
    }

    /// Attention weights of one query over keys tagged with their partition.
    /// Returns, per partition, the weights in the order the keys appear.
    pub fn attention(
        &self,
        store: &ParamStore,
        query: &[f64],
        keys: &[(Vec<f64>, usize)],
    ) -> Result<Vec<Vec<f64>>> {
        let q = matvec(store, self.w_q, query)?;
        let mut scores = vec![Vec::new(); self.partitions()];
        for (emb, k) in keys {
            let w_k = *self.w_k.get(*k).ok_or_else(|| {
                Error::config(format!("key partition {k} out of {}", self.partitions()))
            })?;
            let key = matvec(store, w_k, emb)?;
            scores[*k].push(key.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>());
        }
        Ok(scores.iter().map(|s| softmax(s)).collect())
    }

    /// Fuses per-partition weighted sums of `W_V^k e_j`.
    pub fn aggregate(
        &self,
        store: &ParamStore,
        weights: &[Vec<f64>],
        values: &[Vec<Vec<f64>>],
    ) -> Result<Vec<f64>> {
        if weights.len() != self.partitions() || values.len() != self.partitions() {
            return Err(Error::config(format!(
                "expected {} groups, got {} weight lists and {} value lists",
                self.partitions(),
                weights.len(),
                values.len()
            )));
        }
        let mut concat = Vec::with_capacity(self.partitions() * self.embed_dim);
        for k in 0..self.partitions() {
            if weights[k].len() != values[k].len() {
                return Err(Error::config(format!(
                    "group {k}: {} weights for {} values",
                    weights[k].len(),
                    values[k].len()
                )));
            }
            let mut g = vec![0.0; self.embed_dim];
            for (a, e) in weights[k].iter().zip(&values[k]) {
                let v = matvec(store, self.w_v[k], e)?;
                for (gi, vi) in g.iter_mut().zip(v) {
                    *gi += a * vi;
                }
            }
            concat.extend(g);
        }
        matvec(store, self.w_fuse, &concat)
    }

    /// Batched forward where every row of `embeddings` is a target and
    /// `neighbors[i]` lists the source rows of target `i`, each falling in
    /// partition `partition[j]`. Runs the same kernels as the network.
    pub fn forward_graph(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        embeddings: Var,
        partition: &[usize],
        neighbors: &[Vec<usize>],
    ) -> Result<GraphAttention> {
        let n = tape.value(embeddings).rows();
        if partition.len() != n || neighbors.len() != n {
            return Err(Error::config(format!(
                "{n} embeddings with {} partition labels and {} neighbour lists",
                partition.len(),
                neighbors.len()
            )));
        }
        let k_count = self.partitions();
        let mut members = vec![Vec::new(); k_count];
        let mut pos = vec![0; n];
        for (j, &k) in partition.iter().enumerate() {
            let m = members
                .get_mut(k)
                .ok_or_else(|| Error::config(format!("partition {k} out of {k_count}")))?;
            pos[j] = m.len();
            m.push(j);
        }
        let mut edges = vec![
            EdgeSet {
                offsets: vec![0],
                ..EdgeSet::default()
            };
            k_count
        ];
        for (t, adj) in neighbors.iter().enumerate() {
            for &j in adj {
                if j >= n {
                    return Err(Error::integrity(format!("neighbour row {j} outside {n} embeddings")));
                }
                let es = &mut edges[partition[j]];
                es.tgt_pos.push(t);
                es.src_pos.push(pos[j]);
                es.src_rows.push(j);
            }
            for es in &mut edges {
                es.offsets.push(es.src_pos.len());
            }
        }
        let sources = members
            .iter()
            .map(|rows| {
                if rows.is_empty() {
                    Ok(tape.constant(Matrix::zeros(1, self.embed_dim)))
                } else {
                    tape.gather_rows(embeddings, rows)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let (output, traces) = self.forward(tape, store, embeddings, &sources, &edges)?;
        let mut weights = vec![vec![Vec::new(); k_count]; n];
        for (k, (es, trace)) in edges.iter().zip(&traces).enumerate() {
            if let Some(w) = trace.weights {
                let w = tape.value(w).data();
                for t in 0..n {
                    weights[t][k] = w[es.offsets[t]..es.offsets[t + 1]].to_vec();
                }
            }
        }
        Ok(GraphAttention { output, weights })
    }

    /// Batched forward for the embeddings of one target group. `sources[k]`
    /// holds the embeddings of partition `k`; `edges[k]` indexes into both.
    pub(crate) fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        targets: Var,
        sources: &[Var],
        edges: &[EdgeSet],
    ) -> Result<(Var, Vec<PartitionTrace>)> {
        let n_targets = tape.value(targets).rows();
        let w_q = tape.param(store, self.w_q);
        let q = tape.matmul_t(targets, w_q)?;
        let mut parts = Vec::with_capacity(self.partitions());
        let mut traces = Vec::with_capacity(self.partitions());
        for (k, es) in edges.iter().enumerate() {
            if es.src_pos.is_empty() {
                let zero = tape.constant(Matrix::zeros(n_targets, self.embed_dim));
                parts.push(zero);
                traces.push(PartitionTrace {
                    weights: None,
                    aggregate: zero,
                });
                continue;
            }
            let w_k = tape.param(store, self.w_k[k]);
            let w_v = tape.param(store, self.w_v[k]);
            let keys_all = tape.matmul_t(sources[k], w_k)?;
            let vals_all = tape.matmul_t(sources[k], w_v)?;
            let keys = tape.gather_rows(keys_all, &es.src_pos)?;
            let vals = tape.gather_rows(vals_all, &es.src_pos)?;
            let q_e = tape.gather_rows(q, &es.tgt_pos)?;
            let scores = tape.row_dot(q_e, keys)?;
            let alpha = tape.segment_softmax(scores, &es.offsets)?;
            let g = tape.segment_weighted_sum(alpha, vals, &es.offsets)?;
            parts.push(g);
            traces.push(PartitionTrace {
                weights: Some(alpha),
                aggregate: g,
            });
        }
        let cat = tape.concat_cols(&parts)?;
        let w_fuse = tape.param(store, self.w_fuse);
        let fused = tape.matmul_t(cat, w_fuse)?;
        Ok((fused, traces))
    }
}

/// `W x` for a stored `[out, in]` weight.
pub(crate) fn matvec(store: &ParamStore, w: ParamId, x: &[f64]) -> Result<Vec<f64>> {
    let t = store.get(w);
    let (rows, cols) = t.matrix_shape();
    if cols != x.len() {
        return Err(Error::config(format!(
            "{} expects input length {cols}, got {}",
            t.name,
            x.len()
        )));
    }
    Ok((0..rows)
        .map(|r| {
            t.values[r * cols..(r + 1) * cols]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect())
}
