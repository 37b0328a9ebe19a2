use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::batch::GraphBatch;
use super::config::{HeadKind, HgrnConfig};
use super::hgat::{HgatLayer, PartitionTrace};
use super::plan::Plan;
use crate::agentgraph::ObservationSet;
use crate::diffcore::{softmax, GruCell, Linear, Matrix, Mlp, ParamStore, Tape, Var};
use crate::{Error, Result};

/// Recurrent core, or its feed-forward stand-in when memory is ablated.
#[derive(Clone, Debug)]
pub enum Memory {
    Gru(GruCell),
    FeedForward(Linear),
}

/// Learnable parameters of one agent group. Tensor names are prefixed with
/// `g{group}.`.
#[derive(Clone, Debug)]
pub struct HgrnParams {
    pub encoder: Mlp,
    pub hgat: [HgatLayer; 2],
    /// Projects `(e | g1 | g2)` into the memory input.
    pub proj: Linear,
    pub memory: Memory,
    pub head: Linear,
}

impl HgrnParams {
    fn new<R: Rng + ?Sized>(
        config: &HgrnConfig,
        group: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        let p = format!("g{group}");
        let e = config.embed_dim;
        let h = config.hidden_dim;
        let parts = config.source_partitions();
        let encoder = Mlp::new(
            store,
            &format!("{p}.encoder"),
            &[config.obs_dims[group], config.encoder_hidden, e],
            rng,
        )?;
        let hgat = [
            HgatLayer::new(store, &format!("{p}.hgat0"), parts, e, config.attn_dim, rng)?,
            HgatLayer::new(store, &format!("{p}.hgat1"), parts, e, config.attn_dim, rng)?,
        ];
        let proj = Linear::new(store, &format!("{p}.proj"), 3 * e, h, true, rng)?;
        let memory = if config.recurrent {
            Memory::Gru(GruCell::new(store, &format!("{p}.gru"), h, h, rng)?)
        } else {
            Memory::FeedForward(Linear::new(store, &format!("{p}.ff"), h, h, true, rng)?)
        };
        let head = Linear::new(store, &format!("{p}.head"), h, config.n_actions, true, rng)?;
        Ok(Self {
            encoder,
            hgat,
            proj,
            memory,
            head,
        })
    }
}

/// GRU hidden state of one agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentHiddenState {
    pub h: Vec<f64>,
}

/// Hidden states of all live agents, keyed by agent id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HiddenStates {
    pub states: BTreeMap<usize, AgentHiddenState>,
}

impl HiddenStates {
    /// Episode-start state: zero vectors for every listed agent.
    pub fn zeros(ids: impl IntoIterator<Item = usize>, dim: usize) -> Self {
        Self {
            states: ids
                .into_iter()
                .map(|id| (id, AgentHiddenState { h: vec![0.0; dim] }))
                .collect(),
        }
    }

    pub fn get(&self, id: usize) -> Option<&[f64]> {
        self.states.get(&id).map(|s| s.h.as_slice())
    }
}

/// One attended neighbour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionEntry {
    pub neighbor: usize,
    pub group: usize,
    pub weight: f64,
}

/// Attention and gate readout for one agent at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentIntrospection {
    pub agent: usize,
    pub group: usize,
    /// Per attention layer, every attended neighbour in ascending id order
    /// within each partition.
    pub layers: Vec<Vec<AttentionEntry>>,
    /// Mean reset-gate activation; absent without recurrent memory.
    pub reset_gate_mean: Option<f64>,
    /// Per layer and source partition, the share of the fused output's norm
    /// contributed by that partition's aggregate (`|W_k g^k| / Σ_k |W_k g^k|`).
    pub group_contribution: Vec<Vec<f64>>,
}

/// Tape handles produced by one network step over a batch (rows in batch
/// order).
#[derive(Debug)]
pub struct StepOutput {
    /// Q-values or policy logits, `n x actions`.
    pub output: Var,
    /// Next hidden state, `n x hidden`.
    pub hidden: Var,
    /// Reset-gate activations, `n x hidden`, when the memory is a GRU.
    pub reset_gate: Option<Var>,
    plan: Plan,
    traces: [Vec<Vec<PartitionTrace>>; 2],
}

/// Plain-value result of an evaluation-only forward pass.
#[derive(Clone, Debug)]
pub struct Inference {
    pub output: Matrix,
    pub hidden: Matrix,
    pub introspection: Option<Vec<AgentIntrospection>>,
}

/// Per-agent result of [`Hgrn::forward_sets`].
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub outputs: BTreeMap<usize, Vec<f64>>,
    pub hidden: HiddenStates,
    pub introspection: Vec<AgentIntrospection>,
}

/// Hierarchical graph recurrent network: one [`HgrnParams`] per agent group.
#[derive(Clone, Debug)]
pub struct Hgrn {
    pub config: HgrnConfig,
    pub groups: Vec<HgrnParams>,
}

impl Hgrn {
    pub fn new<R: Rng + ?Sized>(config: HgrnConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let groups = (0..config.group_count())
            .map(|g| HgrnParams::new(&config, g, store, rng))
            .collect::<Result<_>>()?;
        Ok(Self { config, groups })
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    pub fn zero_hidden(&self, agents: usize) -> Matrix {
        Matrix::zeros(agents, self.config.hidden_dim)
    }

    /// Records one step of the network for every row of `batch`.
    pub fn step(&self, tape: &mut Tape, store: &ParamStore, batch: &GraphBatch, hidden: Var) -> Result<StepOutput> {
        let plan = Plan::new(&self.config, batch)?;
        let n = batch.len();
        let hshape = tape.value(hidden).shape();
        if hshape != (n, self.config.hidden_dim) {
            return Err(Error::config(format!(
                "hidden state has shape {hshape:?}, expected ({n}, {})",
                self.config.hidden_dim
            )));
        }
        let present: Vec<usize> = (0..self.groups.len())
            .filter(|&c| !plan.rows_by_group[c].is_empty())
            .collect();
        // Absent groups get a placeholder; no edge ever indexes it.
        let placeholder = tape.constant(Matrix::zeros(1, self.config.embed_dim));

        let mut embed = vec![placeholder; self.groups.len()];
        for &c in &present {
            let rows = &plan.rows_by_group[c];
            let obs: Vec<&[f64]> = rows.iter().map(|&r| batch.obs[r].as_slice()).collect();
            let x = tape.constant(Matrix::from_rows(&obs, self.config.obs_dims[c])?);
            embed[c] = self.groups[c].encoder.forward(tape, store, x)?;
        }

        let mut traces: [Vec<Vec<PartitionTrace>>; 2] = [Vec::new(), Vec::new()];
        let mut layer_in = embed.clone();
        let mut layer_out = [vec![placeholder; self.groups.len()], vec![placeholder; self.groups.len()]];
        for layer in 0..2 {
            let sources = self.partition_sources(tape, &plan, &layer_in, &present)?;
            for c in 0..self.groups.len() {
                if plan.rows_by_group[c].is_empty() {
                    traces[layer].push(Vec::new());
                    continue;
                }
                let (g, trace) =
                    self.groups[c].hgat[layer].forward(tape, store, layer_in[c], &sources, &plan.layers[layer][c])?;
                layer_out[layer][c] = g;
                traces[layer].push(trace);
            }
            layer_in = layer_out[layer].clone();
        }

        let mut outs = Vec::with_capacity(present.len());
        let mut hiddens = Vec::with_capacity(present.len());
        let mut resets = Vec::with_capacity(present.len());
        for &c in &present {
            let params = &self.groups[c];
            let skip = tape.concat_cols(&[embed[c], layer_out[0][c], layer_out[1][c]])?;
            let x = params.proj.forward(tape, store, skip)?;
            let h_next = match &params.memory {
                Memory::Gru(gru) => {
                    let h_prev = if present.len() == 1 {
                        hidden
                    } else {
                        tape.gather_rows(hidden, &plan.rows_by_group[c])?
                    };
                    let step = gru.forward(tape, store, x, h_prev)?;
                    resets.push(step.reset);
                    step.hidden
                }
                Memory::FeedForward(ff) => {
                    let y = ff.forward(tape, store, x)?;
                    tape.relu(y)
                }
            };
            outs.push(params.head.forward(tape, store, h_next)?);
            hiddens.push(h_next);
        }
        let restore = |tape: &mut Tape, parts: &[Var]| -> Result<Var> {
            let cat = if parts.len() == 1 {
                parts[0]
            } else {
                tape.concat_rows(parts)?
            };
            if plan.identity {
                Ok(cat)
            } else {
                tape.gather_rows(cat, &plan.restore)
            }
        };
        let output = restore(tape, &outs)?;
        let hidden = restore(tape, &hiddens)?;
        let reset_gate = if resets.is_empty() {
            None
        } else {
            Some(restore(tape, &resets)?)
        };
        Ok(StepOutput {
            output,
            hidden,
            reset_gate,
            plan,
            traces,
        })
    }

    fn partition_sources(&self, tape: &mut Tape, plan: &Plan, per_group: &[Var], present: &[usize]) -> Result<Vec<Var>> {
        if plan.partition_rows.len() == per_group.len() {
            return Ok(per_group.to_vec());
        }
        let parts: Vec<Var> = present.iter().map(|&c| per_group[c]).collect();
        Ok(vec![if parts.len() == 1 {
            parts[0]
        } else {
            tape.concat_rows(&parts)?
        }])
    }

    /// Attention, gate and contribution readout for every batch row.
    pub fn introspect(
        &self,
        tape: &Tape,
        store: &ParamStore,
        batch: &GraphBatch,
        out: &StepOutput,
    ) -> Vec<AgentIntrospection> {
        let plan = &out.plan;
        let e = self.config.embed_dim;
        let reset = out.reset_gate.map(|v| tape.value(v));
        (0..batch.len())
            .map(|row| {
                let c = batch.groups[row];
                let t = plan.pos_in_group[row];
                let mut layers = Vec::with_capacity(2);
                let mut contribution = Vec::with_capacity(2);
                for l in 0..2 {
                    let mut entries = Vec::new();
                    let mut norms = Vec::new();
                    let fuse = store.get(self.groups[c].hgat[l].w_fuse);
                    let fuse_cols = fuse.matrix_shape().1;
                    for (k, (es, trace)) in plan.layers[l][c].iter().zip(&out.traces[l][c]).enumerate() {
                        if let Some(w) = trace.weights {
                            let w = tape.value(w);
                            for idx in es.offsets[t]..es.offsets[t + 1] {
                                let src = es.src_rows[idx];
                                entries.push(AttentionEntry {
                                    neighbor: batch.agent_ids[src],
                                    group: batch.groups[src],
                                    weight: w.data()[idx],
                                });
                            }
                        }
                        let g = tape.value(trace.aggregate).row(t);
                        let norm = (0..e)
                            .map(|r| {
                                let row = &fuse.values[r * fuse_cols + k * e..r * fuse_cols + (k + 1) * e];
                                row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>().powi(2)
                            })
                            .sum::<f64>()
                            .sqrt();
                        norms.push(norm);
                    }
                    let total: f64 = norms.iter().sum();
                    contribution.push(
                        norms
                            .iter()
                            .map(|v| if total > 0.0 { v / total } else { 0.0 })
                            .collect(),
                    );
                    layers.push(entries);
                }
                AgentIntrospection {
                    agent: batch.agent_ids[row],
                    group: c,
                    layers,
                    reset_gate_mean: reset.map(|m| m.row(row).iter().sum::<f64>() / m.cols() as f64),
                    group_contribution: contribution,
                }
            })
            .collect()
    }

    /// Evaluation-only forward pass over a packed batch.
    pub fn forward_batch(
        &self,
        store: &ParamStore,
        batch: &GraphBatch,
        hidden: &Matrix,
        with_introspection: bool,
    ) -> Result<Inference> {
        let mut tape = Tape::new();
        let h = tape.constant(hidden.clone());
        let out = self.step(&mut tape, store, batch, h)?;
        let introspection = with_introspection.then(|| self.introspect(&tape, store, batch, &out));
        Ok(Inference {
            output: tape.value(out.output).clone(),
            hidden: tape.value(out.hidden).clone(),
            introspection,
        })
    }

    /// Runs the network from per-agent observation sets. Every agent needs
    /// an entry in `hidden` (use [`HiddenStates::zeros`] at episode start).
    pub fn forward_sets(&self, store: &ParamStore, sets: &[ObservationSet], hidden: &HiddenStates) -> Result<ForwardOutput> {
        let batch = GraphBatch::from_observation_sets(sets)?;
        let mut h = Matrix::zeros(batch.len(), self.config.hidden_dim);
        for (row, &id) in batch.agent_ids.iter().enumerate() {
            let state = hidden
                .get(id)
                .ok_or_else(|| Error::integrity(format!("agent {id} has no hidden state")))?;
            if state.len() != self.config.hidden_dim {
                return Err(Error::config(format!(
                    "hidden state of agent {id} has length {}, expected {}",
                    state.len(),
                    self.config.hidden_dim
                )));
            }
            h.row_mut(row).copy_from_slice(state);
        }
        let inf = self.forward_batch(store, &batch, &h, true)?;
        let mut outputs = BTreeMap::new();
        let mut next = HiddenStates::default();
        for (row, &id) in batch.agent_ids.iter().enumerate() {
            outputs.insert(id, inf.output.row(row).to_vec());
            next.states.insert(
                id,
                AgentHiddenState {
                    h: inf.hidden.row(row).to_vec(),
                },
            );
        }
        Ok(ForwardOutput {
            outputs,
            hidden: next,
            introspection: inf.introspection.unwrap_or_default(),
        })
    }

    /// Action distributions from a policy-head network.
    pub fn actor_forward(&self, store: &ParamStore, sets: &[ObservationSet], hidden: &HiddenStates) -> Result<ForwardOutput> {
        if self.config.head != HeadKind::Policy {
            return Err(Error::config("actor_forward needs a network with a policy head"));
        }
        let mut out = self.forward_sets(store, sets, hidden)?;
        for logits in out.outputs.values_mut() {
            *logits = softmax(logits);
        }
        Ok(out)
    }
}

/// `softmax(q / alpha)`.
pub fn policy_from_q(q: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::config(format!("temperature must be positive, got {alpha}")));
    }
    let scaled: Vec<f64> = q.iter().map(|v| v / alpha).collect();
    Ok(softmax(&scaled))
}
