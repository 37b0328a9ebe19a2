//! Temporal-difference losses over batches of replay segments.
//!
//! Every loss unrolls the online network for `L` steps from the stored
//! initial hidden states and the target network for `L + 1` steps (the extra
//! step supplies the bootstrap value of the last transition). Shorter
//! segments are padded with their bootstrap observation and masked out.
//! Losses average over the active agent-steps of the batch; targets are
//! plain numbers, so no gradient reaches the target network.

use crate::diffcore::numeric::{log_softmax, log_sum_exp, softmax};
use crate::diffcore::{Matrix, ParamStore, Tape, Var};
use crate::hgrn::{GraphBatch, Hgrn};
use crate::training::entropy::action_entropy;
use crate::training::replay::TrajectorySegment;
use crate::{Error, Result};

/// `alpha * ln sum_a exp(q_a / alpha)`, evaluated as
/// `max + alpha * ln sum exp((q - max) / alpha)` so a single action returns
/// its value exactly and the result never drops below the max.
pub fn soft_value(q: &[f64], alpha: f64) -> f64 {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let shifted: Vec<f64> = q.iter().map(|v| (v - max) / alpha).collect();
    max + alpha * log_sum_exp(&shifted)
}

/// `sum_a pi(a) (q_a - alpha ln pi(a))`, skipping zero-probability actions.
pub fn expected_soft_value(q: &[f64], probs: &[f64], alpha: f64) -> f64 {
    q.iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&qa, &p)| p * (qa - alpha * p.ln()))
        .sum()
}

/// Segments aligned step by step: row blocks follow the order of the
/// sampled segments.
#[derive(Clone, Debug)]
pub struct SegmentBatch {
    /// `L + 1` packed inputs; index `L` holds the bootstrap observations.
    pub inputs: Vec<GraphBatch>,
    pub actions: Vec<Vec<usize>>,
    pub rewards: Vec<Vec<f64>>,
    /// Agent-step contributes to the loss.
    pub mask: Vec<Vec<bool>>,
    /// Agent-step's target includes the discounted next value.
    pub bootstrap: Vec<Vec<bool>>,
    pub init_hidden: Matrix,
    pub init_actor_hidden: Option<Matrix>,
    /// Number of masked-in agent-steps.
    pub count: usize,
}

impl SegmentBatch {
    pub fn new(segments: &[&TrajectorySegment]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::config("loss needs at least one segment"));
        }
        for s in segments {
            s.validate()?;
        }
        let steps = segments.iter().map(|s| s.len()).max().unwrap_or(0);
        let with_actor = segments[0].init_actor_hidden.is_some();
        if segments.iter().any(|s| s.init_actor_hidden.is_some() != with_actor) {
            return Err(Error::integrity("segments disagree on stored actor hidden states"));
        }
        let mut inputs = Vec::with_capacity(steps + 1);
        let mut actions = Vec::with_capacity(steps);
        let mut rewards = Vec::with_capacity(steps);
        let mut mask = Vec::with_capacity(steps);
        let mut bootstrap = Vec::with_capacity(steps);
        let mut count = 0;
        for t in 0..=steps {
            let parts: Vec<GraphBatch> = segments
                .iter()
                .map(|s| s.records.get(t).map_or_else(|| s.next.clone(), |r| r.graph.clone()))
                .collect();
            inputs.push(GraphBatch::concat(&parts));
            if t == steps {
                break;
            }
            let (mut a, mut r, mut m, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for s in segments {
                let n = s.agents();
                match s.records.get(t) {
                    Some(rec) => {
                        a.extend_from_slice(&rec.actions);
                        r.extend_from_slice(&rec.rewards);
                        m.extend_from_slice(&rec.active);
                        b.extend((0..n).map(|i| !rec.done && !rec.agent_done[i]));
                    }
                    None => {
                        a.extend(std::iter::repeat_n(0, n));
                        r.extend(std::iter::repeat_n(0.0, n));
                        m.extend(std::iter::repeat_n(false, n));
                        b.extend(std::iter::repeat_n(false, n));
                    }
                }
            }
            count += m.iter().filter(|&&x| x).count();
            actions.push(a);
            rewards.push(r);
            mask.push(m);
            bootstrap.push(b);
        }
        let stack = |get: &dyn Fn(&TrajectorySegment) -> &Matrix| -> Result<Matrix> {
            let rows: Vec<&[f64]> = segments.iter().flat_map(|s| {
                let m = get(s);
                (0..m.rows()).map(move |r| m.row(r))
            }).collect();
            Matrix::from_rows(&rows, get(segments[0]).cols())
        };
        let init_hidden = stack(&|s| &s.init_hidden)?;
        let init_actor_hidden = if with_actor {
            Some(stack(&|s| s.init_actor_hidden.as_ref().expect("checked above"))?)
        } else {
            None
        };
        if count == 0 {
            return Err(Error::integrity("sampled segments contain no active agent-step"));
        }
        Ok(Self {
            inputs,
            actions,
            rewards,
            mask,
            bootstrap,
            init_hidden,
            init_actor_hidden,
            count,
        })
    }

    pub fn steps(&self) -> usize {
        self.actions.len()
    }

    pub fn rows(&self) -> usize {
        self.init_hidden.rows()
    }

    fn mask_column(&self, t: usize, scale: f64) -> Matrix {
        let data = self.mask[t].iter().map(|&m| if m { scale } else { 0.0 }).collect();
        Matrix::from_vec(self.rows(), 1, data).expect("one entry per row")
    }

    fn active(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .flat_map(|(t, m)| m.iter().enumerate().filter(|(_, &a)| a).map(move |(i, _)| (t, i)))
    }
}

/// Records `steps` consecutive network steps and returns the per-step
/// outputs.
pub fn unroll(
    tape: &mut Tape,
    net: &Hgrn,
    store: &ParamStore,
    inputs: &[GraphBatch],
    init_hidden: &Matrix,
    steps: usize,
) -> Result<Vec<Var>> {
    let mut h = tape.constant(init_hidden.clone());
    let mut outs = Vec::with_capacity(steps);
    for input in &inputs[..steps] {
        let step = net.step(tape, store, input, h)?;
        outs.push(step.output);
        h = step.hidden;
    }
    Ok(outs)
}

/// Plain-number evaluation of `unroll`.
pub fn unroll_values(net: &Hgrn, store: &ParamStore, inputs: &[GraphBatch], init_hidden: &Matrix, steps: usize) -> Result<Vec<Matrix>> {
    let mut tape = Tape::new();
    let outs = unroll(&mut tape, net, store, inputs, init_hidden, steps)?;
    Ok(outs.into_iter().map(|v| tape.value(v).clone()).collect())
}

/// Scalar summaries of one loss evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    /// Mean policy entropy over the active agent-steps (0 for greedy losses).
    pub entropy: f64,
    pub count: usize,
}

/// Masked mean of `(Q(o_t, a_t) - y_t)^2`.
fn td_loss(tape: &mut Tape, batch: &SegmentBatch, q: &[Var], targets: &[Vec<f64>]) -> Result<Var> {
    let inv = 1.0 / batch.count as f64;
    let mut terms = Vec::with_capacity(q.len());
    for (t, &qt) in q.iter().enumerate() {
        let picked = tape.pick_cols(qt, &batch.actions[t])?;
        let y = tape.constant(Matrix::from_vec(batch.rows(), 1, targets[t].clone())?);
        let diff = tape.sub(picked, y)?;
        let sq = tape.square(diff);
        let m = tape.constant(batch.mask_column(t, inv));
        let masked = tape.mul(sq, m)?;
        terms.push(tape.sum_all(masked));
    }
    let stacked = tape.concat_rows(&terms)?;
    Ok(tape.sum_all(stacked))
}

/// `y_t = r_t + gamma * next_value(t + 1, i)` where bootstrapping applies.
fn targets(batch: &SegmentBatch, gamma: f64, next_value: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    (0..batch.steps())
        .map(|t| {
            (0..batch.rows())
                .map(|i| {
                    let r = batch.rewards[t][i];
                    if batch.mask[t][i] && batch.bootstrap[t][i] {
                        r + gamma * next_value(t + 1, i)
                    } else {
                        r
                    }
                })
                .collect()
        })
        .collect()
}

fn mean_entropy(batch: &SegmentBatch, probs: impl Fn(usize, usize) -> Vec<f64>) -> f64 {
    let total: f64 = batch.active().map(|(t, i)| action_entropy(&probs(t, i))).sum();
    total / batch.count as f64
}

/// Soft Q-learning loss: targets use `soft_value` of the target network.
pub fn soft_q_loss(
    tape: &mut Tape,
    net: &Hgrn,
    store: &ParamStore,
    target: &ParamStore,
    batch: &SegmentBatch,
    alpha: f64,
    gamma: f64,
) -> Result<(Var, LossStats)> {
    if !(alpha > 0.0) {
        return Err(Error::config(format!("temperature must be positive, got {alpha}")));
    }
    let steps = batch.steps();
    let next_q = unroll_values(net, target, &batch.inputs, &batch.init_hidden, steps + 1)?;
    let y = targets(batch, gamma, |t, i| soft_value(next_q[t].row(i), alpha));
    let q = unroll(tape, net, store, &batch.inputs, &batch.init_hidden, steps)?;
    let loss = td_loss(tape, batch, &q, &y)?;
    let entropy = mean_entropy(batch, |t, i| {
        let row: Vec<f64> = tape.value(q[t]).row(i).iter().map(|v| v / alpha).collect();
        softmax(&row)
    });
    let stats = LossStats {
        loss: tape.value(loss).scalar(),
        entropy,
        count: batch.count,
    };
    Ok((loss, stats))
}

/// Q-learning loss with greedy `max_a Q'` targets.
pub fn dqn_loss(
    tape: &mut Tape,
    net: &Hgrn,
    store: &ParamStore,
    target: &ParamStore,
    batch: &SegmentBatch,
    gamma: f64,
) -> Result<(Var, LossStats)> {
    let steps = batch.steps();
    let next_q = unroll_values(net, target, &batch.inputs, &batch.init_hidden, steps + 1)?;
    let y = targets(batch, gamma, |t, i| {
        next_q[t].row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    });
    let q = unroll(tape, net, store, &batch.inputs, &batch.init_hidden, steps)?;
    let loss = td_loss(tape, batch, &q, &y)?;
    let stats = LossStats {
        loss: tape.value(loss).scalar(),
        entropy: 0.0,
        count: batch.count,
    };
    Ok((loss, stats))
}

/// Policy-gradient surrogate `-mean[w_t * ln pi(a_t | o_t)]` with fixed
/// per-agent-step weights `w_t`.
pub fn actor_surrogate(
    tape: &mut Tape,
    actor: &Hgrn,
    actor_store: &ParamStore,
    batch: &SegmentBatch,
    init_hidden: &Matrix,
    weights: &[Vec<f64>],
) -> Result<Var> {
    let logits = unroll(tape, actor, actor_store, &batch.inputs, init_hidden, batch.steps())?;
    let inv = -1.0 / batch.count as f64;
    let mut terms = Vec::with_capacity(logits.len());
    for (t, &z) in logits.iter().enumerate() {
        let logp = tape.log_softmax_rows(z);
        let picked = tape.pick_cols(logp, &batch.actions[t])?;
        let w: Vec<f64> = (0..batch.rows())
            .map(|i| if batch.mask[t][i] { weights[t][i] * inv } else { 0.0 })
            .collect();
        let w = tape.constant(Matrix::from_vec(batch.rows(), 1, w)?);
        let weighted = tape.mul(picked, w)?;
        terms.push(tape.sum_all(weighted));
    }
    let stacked = tape.concat_rows(&terms)?;
    Ok(tape.sum_all(stacked))
}

/// Losses of one actor-critic update.
#[derive(Clone, Debug)]
pub struct SacLoss {
    pub critic: Var,
    pub actor: Var,
    pub stats: LossStats,
    pub actor_loss: f64,
}

/// Critic TD loss toward `r + gamma * E_pi'[Q' - alpha ln pi]` (exact
/// expectation over actions) and the actor surrogate weighted by
/// `Q(o_t, a_t) - alpha ln pi(a_t | o_t)`. The critic terms are recorded on
/// `critic_tape`, the actor terms on `actor_tape`.
#[allow(clippy::too_many_arguments)]
pub fn sac_losses(
    critic_tape: &mut Tape,
    actor_tape: &mut Tape,
    critic: &Hgrn,
    critic_store: &ParamStore,
    target: &ParamStore,
    actor: &Hgrn,
    actor_store: &ParamStore,
    batch: &SegmentBatch,
    alpha: f64,
    gamma: f64,
) -> Result<SacLoss> {
    if alpha < 0.0 {
        return Err(Error::config(format!("temperature must be non-negative, got {alpha}")));
    }
    let actor_hidden = batch
        .init_actor_hidden
        .as_ref()
        .ok_or_else(|| Error::integrity("actor-critic update needs stored actor hidden states"))?;
    let steps = batch.steps();
    let logits = unroll_values(actor, actor_store, &batch.inputs, actor_hidden, steps + 1)?;
    let log_probs: Vec<Vec<Vec<f64>>> = logits
        .iter()
        .map(|m| (0..m.rows()).map(|i| log_softmax(m.row(i))).collect())
        .collect();
    let probs = |t: usize, i: usize| -> Vec<f64> { log_probs[t][i].iter().map(|l| l.exp()).collect() };

    let next_q = unroll_values(critic, target, &batch.inputs, &batch.init_hidden, steps + 1)?;
    let y = targets(batch, gamma, |t, i| expected_soft_value(next_q[t].row(i), &probs(t, i), alpha));
    let q = unroll(critic_tape, critic, critic_store, &batch.inputs, &batch.init_hidden, steps)?;
    let critic_loss = td_loss(critic_tape, batch, &q, &y)?;

    let weights: Vec<Vec<f64>> = (0..steps)
        .map(|t| {
            let qt = critic_tape.value(q[t]);
            (0..batch.rows())
                .map(|i| {
                    let a = batch.actions[t][i];
                    qt.get(i, a) - alpha * log_probs[t][i][a]
                })
                .collect()
        })
        .collect();
    let actor_loss = actor_surrogate(actor_tape, actor, actor_store, batch, actor_hidden, &weights)?;
    let stats = LossStats {
        loss: critic_tape.value(critic_loss).scalar(),
        entropy: mean_entropy(batch, probs),
        count: batch.count,
    };
    Ok(SacLoss {
        critic: critic_loss,
        actor: actor_loss,
        actor_loss: actor_tape.value(actor_loss).scalar(),
        stats,
    })
}

#[cfg(test)]
mod tests;
