use proptest::prelude::*;

use super::*;
use crate::diffcore::check_gradients;
use crate::hgrn::{HeadKind, HgrnConfig};
use crate::training::testutil::{jitter_biases, mixed_segments, network, tiny_config};

// Runs a network over a segment's records and then its bootstrap
// observation, one segment at a time.
fn trace(net: &Hgrn, store: &ParamStore, seg: &TrajectorySegment, init: &Matrix) -> Vec<Matrix> {
    let mut h = init.clone();
    let mut out = Vec::new();
    for g in seg.records.iter().map(|r| &r.graph).chain(std::iter::once(&seg.next)) {
        let inf = net.forward_batch(store, g, &h, false).unwrap();
        out.push(inf.output);
        h = inf.hidden;
    }
    out
}

fn direct_soft_value(q: &[f64], alpha: f64) -> f64 {
    alpha * q.iter().map(|v| (v / alpha).exp()).sum::<f64>().ln()
}

fn direct_log_probs(z: &[f64]) -> Vec<f64> {
    let total: f64 = z.iter().map(|v| v.exp()).sum();
    z.iter().map(|v| v.exp() / total).map(f64::ln).collect()
}

enum Target {
    Soft(f64),
    Max,
}

fn td_oracle(net: &Hgrn, store: &ParamStore, target: &ParamStore, segs: &[TrajectorySegment], kind: Target, gamma: f64) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for seg in segs {
        let q = trace(net, store, seg, &seg.init_hidden);
        let qn = trace(net, target, seg, &seg.init_hidden);
        for (t, rec) in seg.records.iter().enumerate() {
            for i in 0..seg.agents() {
                if !rec.active[i] {
                    continue;
                }
                let mut y = rec.rewards[i];
                if !rec.done && !rec.agent_done[i] {
                    let next = qn[t + 1].row(i);
                    y += gamma
                        * match kind {
                            Target::Soft(alpha) => direct_soft_value(next, alpha),
                            Target::Max => next.iter().copied().fold(f64::MIN, f64::max),
                        };
                }
                total += (q[t].get(i, rec.actions[i]) - y).powi(2);
                count += 1;
            }
        }
    }
    total / count as f64
}

// Critic and actor losses of the actor-critic update, agent-step by
// agent-step.
#[allow(clippy::too_many_arguments)]
fn sac_oracle(
    critic: &Hgrn,
    cs: &ParamStore,
    target: &ParamStore,
    actor: &Hgrn,
    as_: &ParamStore,
    segs: &[TrajectorySegment],
    alpha: f64,
    gamma: f64,
) -> (f64, f64) {
    let (mut critic_total, mut actor_total, mut count) = (0.0, 0.0, 0usize);
    for seg in segs {
        let q = trace(critic, cs, seg, &seg.init_hidden);
        let qn = trace(critic, target, seg, &seg.init_hidden);
        let logits = trace(actor, as_, seg, seg.init_actor_hidden.as_ref().unwrap());
        for (t, rec) in seg.records.iter().enumerate() {
            for i in 0..seg.agents() {
                if !rec.active[i] {
                    continue;
                }
                let mut y = rec.rewards[i];
                if !rec.done && !rec.agent_done[i] {
                    let lp = direct_log_probs(logits[t + 1].row(i));
                    let v: f64 = (0..lp.len()).map(|a| lp[a].exp() * (qn[t + 1].get(i, a) - alpha * lp[a])).sum();
                    y += gamma * v;
                }
                let a = rec.actions[i];
                let qa = q[t].get(i, a);
                critic_total += (qa - y).powi(2);
                let lp = direct_log_probs(logits[t].row(i));
                actor_total -= (qa - alpha * lp[a]) * lp[a];
                count += 1;
            }
        }
    }
    (critic_total / count as f64, actor_total / count as f64)
}

fn refs(segs: &[TrajectorySegment]) -> Vec<&TrajectorySegment> {
    segs.iter().collect()
}

#[test]
fn soft_value_examples() {
    assert_eq!(soft_value(&[3.7], 1.0), 3.7);
    assert_eq!(soft_value(&[3.7], 0.37), 3.7);
    assert!((soft_value(&[0.0, 0.0], 1.0) - 2f64.ln()).abs() < 1e-12);
    let direct = 0.5 * (2f64.exp() + 4f64.exp() + 6f64.exp()).ln();
    assert!((soft_value(&[1.0, 2.0, 3.0], 0.5) - direct).abs() < 1e-12);
}

#[test]
fn soft_value_survives_small_temperatures() {
    let v = soft_value(&[1.0, 2.0, 3.0], 1e-4);
    assert!(v >= 3.0 && v - 3.0 < 1e-3);
    assert!(soft_value(&[1000.0, 999.0], 1e-3).is_finite());
}

#[test]
fn expected_value_closed_forms() {
    let c = 1.3;
    let v = expected_soft_value(&[c, c], &[0.5, 0.5], 1.0);
    assert!((v - (c + 2f64.ln())).abs() < 1e-12);
    let v = expected_soft_value(&[1.0, 3.0], &[0.25, 0.75], 0.0);
    assert!((v - 2.5).abs() < 1e-12);
    assert_eq!(expected_soft_value(&[1.0, 3.0], &[0.0, 1.0], 2.0), 3.0);
}

#[test]
fn empty_batch_is_rejected() {
    assert!(SegmentBatch::new(&[]).is_err());
}

#[test]
fn padding_and_masks_follow_segment_ends() {
    let cfg = tiny_config(vec![3, 2], HeadKind::QValues);
    let segs = mixed_segments(1, &cfg, false);
    let b = SegmentBatch::new(&refs(&segs)).unwrap();
    assert_eq!(b.steps(), 2);
    assert_eq!(b.inputs.len(), 3);
    assert_eq!(b.rows(), 7);
    // second segment has one record, so its block at step 1 is padding
    assert_eq!(&b.mask[1][2..5], &[false, false, false]);
    assert_eq!(b.inputs[1].obs[2..5], segs[1].next.obs[..]);
    assert_eq!(&b.bootstrap[0][2..5], &[false, false, false]);
    // agent 0 of the third segment finishes at step 0
    assert_eq!((b.mask[0][5], b.bootstrap[0][5]), (true, false));
    assert_eq!((b.mask[1][5], b.mask[1][6]), (false, true));
    assert_eq!(b.count, 2 + 3 + 2 + 2 + 1);
}

#[test]
fn zero_discount_reduces_to_mean_squared_q() {
    let cfg = tiny_config(vec![3], HeadKind::QValues);
    let (net, store) = network(cfg.clone(), 4);
    let mut segs = mixed_segments(2, &cfg, false);
    for s in &mut segs {
        for r in &mut s.records {
            r.rewards.iter_mut().for_each(|x| *x = 0.0);
        }
    }
    let batch = SegmentBatch::new(&refs(&segs)).unwrap();
    let mut tape = Tape::new();
    let (_, stats) = soft_q_loss(&mut tape, &net, &store, &store, &batch, 0.5, 0.0).unwrap();
    let (mut total, mut count) = (0.0, 0);
    for seg in &segs {
        let q = trace(&net, &store, seg, &seg.init_hidden);
        for (t, rec) in seg.records.iter().enumerate() {
            for i in (0..seg.agents()).filter(|&i| rec.active[i]) {
                total += q[t].get(i, rec.actions[i]).powi(2);
                count += 1;
            }
        }
    }
    assert!((stats.loss - total / count as f64).abs() < 1e-12);
}

// With all head weights zero the network outputs its head bias, so Q and
// the bootstrap value can be set by hand.
fn constant_network(bias: f64) -> (Hgrn, ParamStore) {
    let cfg = HgrnConfig {
        n_actions: 1,
        ..tiny_config(vec![2], HeadKind::QValues)
    };
    let (net, mut store) = network(cfg, 0);
    let head = &net.groups[0].head;
    store.get_mut(head.weight).values.iter_mut().for_each(|w| *w = 0.0);
    store.get_mut(head.bias.unwrap()).values = vec![bias];
    (net, store)
}

#[test]
fn hand_set_values_give_zero_error() {
    let (net, store) = constant_network(3.0);
    let (_, target) = constant_network(2.0);
    let graph = GraphBatch {
        agent_ids: vec![0],
        groups: vec![0],
        obs: vec![vec![0.1, 0.2]],
        neighbors: vec![vec![0]],
    };
    let seg = TrajectorySegment {
        records: vec![crate::training::replay::StepRecord {
            graph: graph.clone(),
            actions: vec![0],
            rewards: vec![1.0],
            active: vec![true],
            agent_done: vec![false],
            done: false,
        }],
        init_hidden: Matrix::zeros(1, 4),
        init_actor_hidden: None,
        next: graph,
    };
    let batch = SegmentBatch::new(&[&seg]).unwrap();
    let (_, soft) = soft_q_loss(&mut Tape::new(), &net, &store, &target, &batch, 0.7, 1.0).unwrap();
    assert!(soft.loss.abs() < 1e-24);
    let (_, greedy) = dqn_loss(&mut Tape::new(), &net, &store, &target, &batch, 1.0).unwrap();
    assert!(greedy.loss.abs() < 1e-24);
    // zero target with reward 1: (1 - Q)^2
    let (_, zero) = constant_network(0.0);
    let (_, d) = dqn_loss(&mut Tape::new(), &net, &store, &zero, &batch, 0.9).unwrap();
    assert!((d.loss - 4.0).abs() < 1e-12);
}

#[test]
fn soft_loss_matches_standalone_oracle() {
    for seed in 0..10 {
        let cfg = tiny_config(vec![3, 2], HeadKind::QValues);
        let (net, store) = network(cfg.clone(), seed);
        let (_, target) = network(cfg.clone(), seed + 100);
        let segs = mixed_segments(seed, &cfg, false);
        let batch = SegmentBatch::new(&refs(&segs)).unwrap();
        let (_, stats) = soft_q_loss(&mut Tape::new(), &net, &store, &target, &batch, 0.3, 0.9).unwrap();
        let expected = td_oracle(&net, &store, &target, &segs, Target::Soft(0.3), 0.9);
        assert!((stats.loss - expected).abs() < 1e-10, "seed {seed}: {} vs {expected}", stats.loss);
    }
}

#[test]
fn dqn_loss_matches_standalone_oracle() {
    for seed in 0..10 {
        let cfg = tiny_config(vec![3, 2], HeadKind::QValues);
        let (net, store) = network(cfg.clone(), seed);
        let (_, target) = network(cfg.clone(), seed + 100);
        let segs = mixed_segments(seed, &cfg, false);
        let batch = SegmentBatch::new(&refs(&segs)).unwrap();
        let (_, stats) = dqn_loss(&mut Tape::new(), &net, &store, &target, &batch, 0.9).unwrap();
        let expected = td_oracle(&net, &store, &target, &segs, Target::Max, 0.9);
        assert!((stats.loss - expected).abs() < 1e-10);
    }
}

#[test]
fn dqn_with_zero_discount_regresses_rewards() {
    let cfg = tiny_config(vec![3], HeadKind::QValues);
    let (net, store) = network(cfg.clone(), 1);
    let (_, target) = network(cfg.clone(), 2);
    let segs = mixed_segments(5, &cfg, false);
    let batch = SegmentBatch::new(&refs(&segs)).unwrap();
    let (_, a) = dqn_loss(&mut Tape::new(), &net, &store, &target, &batch, 0.0).unwrap();
    let (_, b) = dqn_loss(&mut Tape::new(), &net, &store, &store, &batch, 0.0).unwrap();
    assert_eq!(a.loss, b.loss);
}

#[test]
fn sac_losses_match_standalone_oracle() {
    for seed in 0..10 {
        let cfg = tiny_config(vec![3, 2], HeadKind::QValues);
        let acfg = HgrnConfig {
            head: HeadKind::Policy,
            ..cfg.clone()
        };
        let (critic, cs) = network(cfg.clone(), seed);
        let (_, target) = network(cfg.clone(), seed + 100);
        let (actor, as_) = network(acfg, seed + 200);
        let segs = mixed_segments(seed, &cfg, true);
        let batch = SegmentBatch::new(&refs(&segs)).unwrap();
        for alpha in [0.0, 0.4] {
            let out = sac_losses(
                &mut Tape::new(),
                &mut Tape::new(),
                &critic,
                &cs,
                &target,
                &actor,
                &as_,
                &batch,
                alpha,
                0.9,
            )
            .unwrap();
            let (c, a) = sac_oracle(&critic, &cs, &target, &actor, &as_, &segs, alpha, 0.9);
            assert!((out.stats.loss - c).abs() < 1e-10, "critic {} vs {c}", out.stats.loss);
            assert!((out.actor_loss - a).abs() < 1e-10, "actor {} vs {a}", out.actor_loss);
        }
    }
}

#[test]
fn soft_loss_entropy_is_mean_over_active_steps() {
    let cfg = tiny_config(vec![3], HeadKind::QValues);
    let (net, store) = network(cfg.clone(), 3);
    let segs = mixed_segments(3, &cfg, false);
    let batch = SegmentBatch::new(&refs(&segs)).unwrap();
    let alpha = 0.25;
    let (_, stats) = soft_q_loss(&mut Tape::new(), &net, &store, &store, &batch, alpha, 0.9).unwrap();
    let (mut total, mut count) = (0.0, 0);
    for seg in &segs {
        let q = trace(&net, &store, seg, &seg.init_hidden);
        for (t, rec) in seg.records.iter().enumerate() {
            for i in (0..seg.agents()).filter(|&i| rec.active[i]) {
                let lp = direct_log_probs(&q[t].row(i).iter().map(|v| v / alpha).collect::<Vec<_>>());
                total -= lp.iter().map(|l| l.exp() * l).sum::<f64>();
                count += 1;
            }
        }
    }
    assert!((stats.entropy - total / count as f64).abs() < 1e-10);
}

#[test]
fn loss_gradients_match_finite_differences() {
    for seed in 0..10 {
        let cfg = tiny_config(vec![3, 2], HeadKind::QValues);
        let (net, mut store) = network(cfg.clone(), seed);
        jitter_biases(&mut store, seed);
        let (_, target) = network(cfg.clone(), seed + 50);
        let segs = mixed_segments(seed, &cfg, false);
        let batch = SegmentBatch::new(&refs(&segs)).unwrap();
        let report = check_gradients(&mut store, 1e-5, 1e-6, |tape, s| {
            Ok(soft_q_loss(tape, &net, s, &target, &batch, 0.5, 0.9)?.0)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}

#[test]
fn actor_surrogate_gradients_match_finite_differences() {
    for seed in 0..10 {
        let cfg = tiny_config(vec![3, 2], HeadKind::Policy);
        let (actor, mut store) = network(cfg.clone(), seed);
        jitter_biases(&mut store, seed);
        let segs = mixed_segments(seed, &cfg, true);
        let batch = SegmentBatch::new(&refs(&segs)).unwrap();
        let weights: Vec<Vec<f64>> = (0..batch.steps())
            .map(|t| (0..batch.rows()).map(|i| ((t * 7 + i) as f64).sin()).collect())
            .collect();
        let init = batch.init_actor_hidden.clone().unwrap();
        let report = check_gradients(&mut store, 1e-5, 1e-6, |tape, s| {
            actor_surrogate(tape, &actor, s, &batch, &init, &weights)
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}

proptest! {
    #[test]
    fn soft_value_dominates_max(q in proptest::collection::vec(-50.0f64..50.0, 1..8), alpha in 1e-4f64..10.0) {
        let max = q.iter().copied().fold(f64::MIN, f64::max);
        let v = soft_value(&q, alpha);
        prop_assert!(v >= max);
        prop_assert!(v <= max + alpha * (q.len() as f64).ln() + 1e-9);
    }

    #[test]
    fn soft_value_approaches_max_at_low_temperature(q in proptest::collection::vec(-50.0f64..50.0, 1..8)) {
        let max = q.iter().copied().fold(f64::MIN, f64::max);
        prop_assert!((soft_value(&q, 1e-4) - max).abs() < 1e-3);
    }
}
