use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::plan::Plan;
use super::*;
use crate::agentgraph::{build_graph, gather_observations};
use crate::diffcore::{check_gradients, Matrix, ParamId, ParamStore, Tape};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

// Independent reference: row-major `W x` written out by hand.
fn mv(store: &ParamStore, id: ParamId, x: &[f64]) -> Vec<f64> {
    let t = store.get(id);
    let cols = x.len();
    assert_eq!(t.values.len() % cols, 0);
    let rows = t.values.len() / cols;
    let mut y = vec![0.0; rows];
    for r in 0..rows {
        for c in 0..cols {
            y[r] += t.values[r * cols + c] * x[c];
        }
    }
    y
}

fn direct_softmax(s: &[f64]) -> Vec<f64> {
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

fn small_config(obs_dims: Vec<usize>) -> HgrnConfig {
    HgrnConfig {
        obs_dims,
        n_actions: 3,
        encoder_hidden: 6,
        embed_dim: 5,
        attn_dim: 4,
        hidden_dim: 6,
        ..HgrnConfig::default()
    }
}

fn layer(seed: u64, partitions: usize, embed: usize, attn: usize) -> (ParamStore, HgatLayer) {
    let mut store = ParamStore::new();
    let l = HgatLayer::new(&mut store, "l", partitions, embed, attn, &mut rng(seed)).unwrap();
    (store, l)
}

#[test]
fn singleton_key_gets_full_weight() {
    let (store, l) = layer(0, 2, 4, 3);
    let w = l.attention(&store, &[0.3, -0.2, 0.5, 1.0], &[(vec![1.0, 2.0, 3.0, 4.0], 1)]).unwrap();
    assert!(w[0].is_empty());
    assert_eq!(w[1], vec![1.0]);
}

#[test]
fn identical_keys_share_weight_uniformly() {
    let (store, l) = layer(1, 1, 4, 3);
    let e = vec![0.1, 0.7, -0.4, 0.2];
    let keys: Vec<_> = (0..5).map(|_| (e.clone(), 0)).collect();
    let w = l.attention(&store, &[1.0, 0.0, -1.0, 0.5], &keys).unwrap();
    for v in &w[0] {
        assert!((v - 0.2).abs() < 1e-15);
    }
}

#[test]
fn attention_matches_direct_oracle() {
    let mut r = rng(2);
    let (store, l) = layer(2, 1, 4, 3);
    let query = rand_vec(&mut r, 4);
    let keys: Vec<_> = (0..3).map(|_| (rand_vec(&mut r, 4), 0)).collect();
    let q = mv(&store, l.w_q, &query);
    let scores: Vec<f64> = keys
        .iter()
        .map(|(e, _)| mv(&store, l.w_k[0], e).iter().zip(&q).map(|(a, b)| a * b).sum())
        .collect();
    let expected = direct_softmax(&scores);
    let got = l.attention(&store, &query, &keys).unwrap();
    for (a, b) in got[0].iter().zip(&expected) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn aggregate_cases() {
    let mut r = rng(3);
    let (store, l) = layer(3, 1, 3, 2);
    let e = rand_vec(&mut r, 3);
    let got = l.aggregate(&store, &[vec![1.0]], &[vec![e.clone()]]).unwrap();
    let expected = mv(&store, l.w_fuse, &mv(&store, l.w_v[0], &e));
    for (a, b) in got.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-14);
    }
    let zero = l.aggregate(&store, &[vec![0.5, 0.5]], &[vec![vec![0.0; 3]; 2]]).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
    assert!(l.aggregate(&store, &[vec![1.0], vec![1.0]], &[vec![e.clone()], vec![e]]).is_err());
}

#[test]
fn aggregate_two_groups_matches_concat_oracle() {
    let mut r = rng(4);
    let (store, l) = layer(4, 2, 3, 2);
    let vals = [vec![rand_vec(&mut r, 3), rand_vec(&mut r, 3)], vec![rand_vec(&mut r, 3)]];
    let weights = [vec![0.3, 0.7], vec![1.0]];
    let mut concat = Vec::new();
    for k in 0..2 {
        let mut g = vec![0.0; 3];
        for (a, e) in weights[k].iter().zip(&vals[k]) {
            let v = mv(&store, l.w_v[k], e);
            for d in 0..3 {
                g[d] += a * v[d];
            }
        }
        concat.extend(g);
    }
    let expected = mv(&store, l.w_fuse, &concat);
    let got = l.aggregate(&store, &weights, &vals).unwrap();
    for (a, b) in got.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-14);
    }
}

fn random_batch(r: &mut ChaCha8Rng, n: usize, obs_dims: &[usize], radius: f64) -> GraphBatch {
    let positions: Vec<[f64; 2]> = (0..n)
        .map(|_| [r.random_range(0..6) as f64, r.random_range(0..6) as f64])
        .collect();
    let groups: Vec<usize> = (0..n).map(|_| r.random_range(0..obs_dims.len())).collect();
    let graph = build_graph(&positions, &groups, radius, 8).unwrap();
    let obs: Vec<Vec<f64>> = groups.iter().map(|&g| rand_vec(r, obs_dims[g])).collect();
    GraphBatch::from_graph(&graph, &obs).unwrap()
}

// Plain GAT over one homogeneous neighbourhood, then the output transform.
fn reference_gat(store: &ParamStore, l: &HgatLayer, emb: &[Vec<f64>], neigh: &[usize], i: usize) -> Vec<f64> {
    let q = mv(store, l.w_q, &emb[i]);
    let scores: Vec<f64> = neigh
        .iter()
        .map(|&j| mv(store, l.w_k[0], &emb[j]).iter().zip(&q).map(|(a, b)| a * b).sum())
        .collect();
    let alpha = direct_softmax(&scores);
    let mut g = vec![0.0; l.embed_dim];
    for (a, &j) in alpha.iter().zip(neigh) {
        for (gd, vd) in g.iter_mut().zip(mv(store, l.w_v[0], &emb[j])) {
            *gd += a * vd;
        }
    }
    mv(store, l.w_fuse, &g)
}

#[test]
fn single_group_layer_equals_reference_gat() {
    for seed in 0..100 {
        let mut r = rng(100 + seed);
        let n = r.random_range(1..10);
        let cfg = small_config(vec![5]);
        let batch = random_batch(&mut r, n, &cfg.obs_dims, 2.0);
        let plan = Plan::new(&cfg, &batch).unwrap();
        let (store, l) = layer(seed, 1, 5, 4);
        let emb: Vec<Vec<f64>> = (0..n).map(|_| rand_vec(&mut r, 5)).collect();
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&emb, 5).unwrap());
        let (out, _) = l.forward(&mut tape, &store, x, &[x], &plan.layers[0][0]).unwrap();
        for i in 0..n {
            let expected = reference_gat(&store, &l, &emb, &batch.neighbors[i], i);
            for (a, b) in tape.value(out).row(i).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-10, "seed {seed}");
            }
        }
    }
}

#[test]
fn batched_layer_matches_per_agent_path_with_groups() {
    for seed in 0..20 {
        let mut r = rng(200 + seed);
        let cfg = small_config(vec![5, 5]);
        let batch = random_batch(&mut r, 9, &cfg.obs_dims, 2.0);
        let plan = Plan::new(&cfg, &batch).unwrap();
        let (store, l) = layer(seed, 2, 5, 4);
        let emb: Vec<Vec<f64>> = (0..9).map(|_| rand_vec(&mut r, 5)).collect();
        let mut tape = Tape::new();
        let per_group: Vec<_> = plan
            .rows_by_group
            .iter()
            .map(|rows| {
                if rows.is_empty() {
                    tape.constant(Matrix::zeros(1, 5))
                } else {
                    let m: Vec<&[f64]> = rows.iter().map(|&i| emb[i].as_slice()).collect();
                    tape.constant(Matrix::from_rows(&m, 5).unwrap())
                }
            })
            .collect();
        for (c, rows) in plan.rows_by_group.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let (out, _) = l
                .forward(&mut tape, &store, per_group[c], &per_group, &plan.layers[0][c])
                .unwrap();
            for (t, &i) in rows.iter().enumerate() {
                let keys: Vec<_> = batch.neighbors[i].iter().map(|&j| (emb[j].clone(), batch.groups[j])).collect();
                let w = l.attention(&store, &emb[i], &keys).unwrap();
                let mut values = vec![Vec::new(); 2];
                for &j in &batch.neighbors[i] {
                    values[batch.groups[j]].push(emb[j].clone());
                }
                let expected = l.aggregate(&store, &w, &values).unwrap();
                for (a, b) in tape.value(out).row(t).iter().zip(&expected) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}

fn network(cfg: HgrnConfig, seed: u64) -> (Hgrn, ParamStore) {
    let mut store = ParamStore::new();
    let net = Hgrn::new(cfg, &mut store, &mut rng(seed)).unwrap();
    (net, store)
}

fn q_of(net: &Hgrn, store: &ParamStore, batch: &GraphBatch, hidden: &Matrix) -> Matrix {
    net.forward_batch(store, batch, hidden, false).unwrap().output
}

// Agents 0 - 1 - 2 on a line: 0 and 2 are two hops apart.
fn line_batch(obs: [Vec<f64>; 3]) -> GraphBatch {
    let graph = build_graph(&[[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]], &[0, 0, 0], 2.0, 8).unwrap();
    GraphBatch::from_graph(&graph, &obs).unwrap()
}

#[test]
fn two_hop_field() {
    let mut r = rng(5);
    let base = [rand_vec(&mut r, 4), rand_vec(&mut r, 4), rand_vec(&mut r, 4)];
    let mut moved = base.clone();
    moved[2] = rand_vec(&mut r, 4);
    let (a, b) = (line_batch(base), line_batch(moved));
    let h = Matrix::zeros(3, 6);

    let (net, store) = network(small_config(vec![4]), 6);
    let (qa, qb) = (q_of(&net, &store, &a, &h), q_of(&net, &store, &b, &h));
    assert_ne!(qa.row(0), qb.row(0));

    let cfg = HgrnConfig {
        second_layer_comm: false,
        ..small_config(vec![4])
    };
    let (net, store) = network(cfg, 6);
    let (qa, qb) = (q_of(&net, &store, &a, &h), q_of(&net, &store, &b, &h));
    assert_eq!(qa.row(0), qb.row(0));
    assert_ne!(qa.row(1), qb.row(1));
}

#[test]
fn comm_off_ignores_neighbours() {
    let mut r = rng(7);
    let cfg = HgrnConfig {
        comm: CommMode::Off,
        ..small_config(vec![4, 3])
    };
    let (net, store) = network(cfg.clone(), 8);
    for _ in 0..10 {
        let batch = random_batch(&mut r, 8, &cfg.obs_dims, 3.0);
        let mut other = batch.clone();
        for i in 1..8 {
            other.obs[i] = rand_vec(&mut r, cfg.obs_dims[other.groups[i]]);
        }
        let h = Matrix::zeros(8, 6);
        assert_eq!(q_of(&net, &store, &batch, &h).row(0), q_of(&net, &store, &other, &h).row(0));
    }
}

#[test]
fn feed_forward_memory_ignores_history() {
    let mut r = rng(9);
    let cfg = HgrnConfig {
        recurrent: false,
        ..small_config(vec![4])
    };
    let (net, store) = network(cfg.clone(), 10);
    let batch = random_batch(&mut r, 5, &cfg.obs_dims, 2.0);
    let h1 = Matrix::zeros(5, 6);
    let h2 = Matrix::from_vec(5, 6, rand_vec(&mut r, 30)).unwrap();
    assert_eq!(q_of(&net, &store, &batch, &h1), q_of(&net, &store, &batch, &h2));

    let (net, store) = network(small_config(vec![4]), 10);
    assert_ne!(q_of(&net, &store, &batch, &h1), q_of(&net, &store, &batch, &h2));
}

#[test]
fn isolated_agent_is_deterministic_and_self_contained() {
    let (net, store) = network(small_config(vec![2]), 11);
    let graph = build_graph(&[[0.0, 0.0], [9.0, 9.0]], &[0, 0], 2.0, 8).unwrap();
    let h = Matrix::zeros(2, 6);
    let a = GraphBatch::from_graph(&graph, &[vec![0.5, -0.5], vec![1.0, 1.0]]).unwrap();
    let b = GraphBatch::from_graph(&graph, &[vec![0.5, -0.5], vec![-3.0, 2.0]]).unwrap();
    let qa = q_of(&net, &store, &a, &h);
    assert_eq!(qa, q_of(&net, &store, &a, &h));
    assert_eq!(qa.row(0), q_of(&net, &store, &b, &h).row(0));
}

#[test]
fn neighbour_order_does_not_change_outputs() {
    for seed in 0..20 {
        let mut r = rng(300 + seed);
        let cfg = small_config(vec![4, 3]);
        let (net, store) = network(cfg.clone(), seed);
        let positions: Vec<[f64; 2]> = (0..7).map(|_| [r.random_range(0..5) as f64, r.random_range(0..5) as f64]).collect();
        let groups: Vec<usize> = (0..7).map(|_| r.random_range(0..2)).collect();
        let graph = build_graph(&positions, &groups, 2.0, 8).unwrap();
        let obs: Vec<Vec<f64>> = groups.iter().map(|&g| rand_vec(&mut r, cfg.obs_dims[g])).collect();
        let sets = gather_observations(&graph, &obs, 0).unwrap();
        let hidden = HiddenStates::zeros(0..7, 6);
        let base = net.forward_sets(&store, &sets, &hidden).unwrap();

        let mut shuffled = sets.clone();
        shuffled.shuffle(&mut r);
        for s in &mut shuffled {
            s.neighbors.shuffle(&mut r);
        }
        let other = net.forward_sets(&store, &shuffled, &hidden).unwrap();
        assert_eq!(base.outputs, other.outputs);
        assert_eq!(base.hidden, other.hidden);
    }
}

#[test]
fn missing_hidden_state_is_an_integrity_error() {
    let (net, store) = network(small_config(vec![2]), 12);
    let graph = build_graph(&[[0.0, 0.0], [1.0, 0.0]], &[0, 0], 2.0, 8).unwrap();
    let sets = gather_observations(&graph, &[vec![0.0, 1.0], vec![1.0, 0.0]], 3).unwrap();
    let err = net.forward_sets(&store, &sets, &HiddenStates::zeros([0], 6)).unwrap_err();
    assert!(matches!(err, crate::Error::Integrity(_)));
}

#[test]
fn introspection_reports_normalised_attention() {
    let mut r = rng(13);
    let cfg = small_config(vec![4, 3]);
    let (net, store) = network(cfg.clone(), 14);
    let batch = random_batch(&mut r, 10, &cfg.obs_dims, 2.0);
    let inf = net.forward_batch(&store, &batch, &Matrix::zeros(10, 6), true).unwrap();
    for (row, rec) in inf.introspection.unwrap().iter().enumerate() {
        assert_eq!(rec.agent, row);
        for entries in &rec.layers {
            assert_eq!(entries.len(), batch.neighbors[row].len());
            for k in 0..2 {
                let ws: Vec<f64> = entries.iter().filter(|e| e.group == k).map(|e| e.weight).collect();
                if !ws.is_empty() {
                    assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
        let m = rec.reset_gate_mean.unwrap();
        assert!(m > 0.0 && m < 1.0);
        for share in &rec.group_contribution {
            assert!((share.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn policy_from_q_cases() {
    let p = policy_from_q(&[2.0; 4], 0.3).unwrap();
    assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
    let p = policy_from_q(&[1.0, 3.0, 2.0], 1e-6).unwrap();
    assert!((p[1] - 1.0).abs() < 1e-12);
    let p = policy_from_q(&[1.0, 2.0, 3.0], 0.5).unwrap();
    let z: f64 = [2.0f64, 4.0, 6.0].iter().map(|v| v.exp()).sum();
    for (a, q) in p.iter().zip([2.0f64, 4.0, 6.0]) {
        assert!((a - q.exp() / z).abs() < 1e-15);
    }
    assert!(policy_from_q(&[1.0], 0.0).is_err());
    assert!(policy_from_q(&[1.0], -1.0).is_err());
}

fn actor_config() -> HgrnConfig {
    HgrnConfig {
        head: HeadKind::Policy,
        ..small_config(vec![3])
    }
}

#[test]
fn actor_forward_requires_policy_head() {
    let (net, store) = network(small_config(vec![3]), 15);
    let graph = build_graph(&[[0.0, 0.0]], &[0], 1.0, 8).unwrap();
    let sets = gather_observations(&graph, &[vec![0.0; 3]], 0).unwrap();
    assert!(net.actor_forward(&store, &sets, &HiddenStates::zeros([0], 6)).is_err());
}

#[test]
fn zero_policy_head_is_uniform() {
    let (net, mut store) = network(actor_config(), 16);
    let head = net.groups[0].head.clone();
    store.get_mut(head.weight).values.fill(0.0);
    let graph = build_graph(&[[0.0, 0.0], [1.0, 1.0]], &[0, 0], 1.0, 8).unwrap();
    let sets = gather_observations(&graph, &[vec![0.2, 0.1, -0.3], vec![1.0, 0.0, 0.5]], 0).unwrap();
    let out = net.actor_forward(&store, &sets, &HiddenStates::zeros(0..2, 6)).unwrap();
    for p in out.outputs.values() {
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }
}

#[test]
fn actor_distributions_are_normalised() {
    for seed in 0..1000 {
        let mut r = rng(seed);
        let (net, store) = network(actor_config(), seed);
        let batch = random_batch(&mut r, 3, &[3], 2.0);
        let hidden = Matrix::from_vec(3, 6, rand_vec(&mut r, 18)).unwrap();
        let logits = net.forward_batch(&store, &batch, &hidden, false).unwrap().output;
        for row in 0..3 {
            let p = crate::diffcore::softmax(logits.row(row));
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

fn perturb_params(store: &mut ParamStore, r: &mut ChaCha8Rng) {
    for t in store.tensors_mut() {
        for v in &mut t.values {
            *v = r.random_range(-0.8..0.8);
        }
    }
}

#[test]
fn full_network_gradients_match_finite_differences() {
    for seed in 0..6 {
        let mut r = rng(400 + seed);
        let cfg = HgrnConfig {
            obs_dims: vec![3, 2],
            n_actions: 3,
            encoder_hidden: 4,
            embed_dim: 3,
            attn_dim: 2,
            hidden_dim: 4,
            head: HeadKind::Policy,
            ..HgrnConfig::default()
        };
        let (net, mut store) = network(cfg.clone(), seed);
        perturb_params(&mut store, &mut r);
        let batch = random_batch(&mut r, 5, &cfg.obs_dims, 2.0);
        let h0 = Matrix::from_vec(5, 4, rand_vec(&mut r, 20)).unwrap();
        let actions: Vec<usize> = (0..5).map(|_| r.random_range(0..3)).collect();
        let report = check_gradients(&mut store, 1e-5, 1e-6, |tape, store| {
            let h = tape.constant(h0.clone());
            let s1 = net.step(tape, store, &batch, h)?;
            let s2 = net.step(tape, store, &batch, s1.hidden)?;
            let logp = tape.log_softmax_rows(s2.output);
            let picked = tape.pick_cols(logp, &actions)?;
            Ok(tape.mean_all(picked))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "seed {seed}: {report:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_attention_weights_sum_to_one(seed in any::<u64>(), keys in 1usize..9) {
        let mut r = rng(seed);
        let (store, l) = layer(seed, 3, 4, 3);
        let query = rand_vec(&mut r, 4);
        let ks: Vec<_> = (0..keys).map(|_| (rand_vec(&mut r, 4).iter().map(|v| v * 20.0).collect(), r.random_range(0..3))).collect();
        for w in l.attention(&store, &query, &ks).unwrap() {
            if !w.is_empty() {
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn forward_graph_matches_per_agent_path() {
    for seed in 0..20 {
        let mut r = rng(600 + seed);
        let n = r.random_range(1..9);
        let partition: Vec<usize> = (0..n).map(|_| r.random_range(0..3)).collect();
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut adj: Vec<usize> = (0..n).filter(|&j| j == i || r.random_bool(0.4)).collect();
                adj.shuffle(&mut r);
                adj
            })
            .collect();
        let (store, l) = layer(seed, 3, 4, 3);
        let emb: Vec<Vec<f64>> = (0..n).map(|_| rand_vec(&mut r, 4)).collect();
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&emb, 4).unwrap());
        let out = l.forward_graph(&mut tape, &store, x, &partition, &neighbors).unwrap();
        for i in 0..n {
            let keys: Vec<_> = neighbors[i].iter().map(|&j| (emb[j].clone(), partition[j])).collect();
            let w = l.attention(&store, &emb[i], &keys).unwrap();
            let mut values = vec![Vec::new(); 3];
            for &j in &neighbors[i] {
                values[partition[j]].push(emb[j].clone());
            }
            for (a, b) in w.iter().flatten().zip(out.weights[i].iter().flatten()) {
                assert!((a - b).abs() < 1e-12);
            }
            let expected = l.aggregate(&store, &w, &values).unwrap();
            for (a, b) in tape.value(out.output).row(i).iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
