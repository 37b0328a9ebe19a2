use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{Matrix, ParamStore};
use crate::hgrn::{GraphBatch, HeadKind, Hgrn, HgrnConfig};
use crate::training::replay::{StepRecord, TrajectorySegment};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tiny_config(obs_dims: Vec<usize>, head: HeadKind) -> HgrnConfig {
    HgrnConfig {
        obs_dims,
        n_actions: 3,
        encoder_hidden: 5,
        embed_dim: 4,
        attn_dim: 3,
        hidden_dim: 4,
        head,
        ..HgrnConfig::default()
    }
}

pub fn network(config: HgrnConfig, seed: u64) -> (Hgrn, ParamStore) {
    let mut store = ParamStore::new();
    let net = Hgrn::new(config, &mut store, &mut rng(seed)).unwrap();
    (net, store)
}

/// Random graph over `n` agents; neighbour lists are symmetric and include
/// the agent itself.
pub fn random_graph<R: Rng>(r: &mut R, n: usize, obs_dims: &[usize]) -> GraphBatch {
    let groups: Vec<usize> = (0..n).map(|_| r.random_range(0..obs_dims.len())).collect();
    let mut neighbors: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for i in 0..n {
        for j in i + 1..n {
            if r.random_bool(0.5) {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    for adj in &mut neighbors {
        adj.sort_unstable();
    }
    GraphBatch {
        agent_ids: (0..n).collect(),
        obs: groups
            .iter()
            .map(|&g| (0..obs_dims[g]).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect(),
        groups,
        neighbors,
    }
}

/// Segment of `len` random transitions. The last record ends the episode
/// when `done` is set; agent 0 finishes early at the first step when
/// `agent0_done` is set.
pub fn random_segment<R: Rng>(
    r: &mut R,
    n: usize,
    len: usize,
    config: &HgrnConfig,
    done: bool,
    agent0_done: bool,
    with_actor: bool,
) -> TrajectorySegment {
    let mut finished = vec![false; n];
    let records = (0..len)
        .map(|t| {
            let active: Vec<bool> = finished.iter().map(|f| !f).collect();
            let agent_done: Vec<bool> = (0..n).map(|i| agent0_done && i == 0 && t == 0).collect();
            for (f, d) in finished.iter_mut().zip(&agent_done) {
                *f |= *d;
            }
            StepRecord {
                graph: random_graph(r, n, &config.obs_dims),
                actions: (0..n).map(|_| r.random_range(0..config.n_actions)).collect(),
                rewards: (0..n).map(|_| r.random_range(-1.0..1.0)).collect(),
                active,
                agent_done,
                done: done && t + 1 == len,
            }
        })
        .collect();
    let hidden = |r: &mut R| {
        let data = (0..n * config.hidden_dim).map(|_| r.random_range(-0.5..0.5)).collect();
        Matrix::from_vec(n, config.hidden_dim, data).unwrap()
    };
    let init_hidden = hidden(r);
    let init_actor_hidden = with_actor.then(|| hidden(r));
    TrajectorySegment {
        records,
        init_hidden,
        init_actor_hidden,
        next: random_graph(r, n, &config.obs_dims),
    }
}

/// Segments of mixed lengths and endings, for loss oracles.
pub fn mixed_segments(seed: u64, config: &HgrnConfig, with_actor: bool) -> Vec<TrajectorySegment> {
    let mut r = rng(seed);
    vec![
        random_segment(&mut r, 2, 2, config, false, false, with_actor),
        random_segment(&mut r, 3, 1, config, true, false, with_actor),
        random_segment(&mut r, 2, 2, config, false, true, with_actor),
    ]
}

/// Moves zero-initialised biases off the ReLU kink, where finite
/// differences see a one-sided slope.
pub fn jitter_biases(store: &mut ParamStore, seed: u64) {
    let mut r = rng(seed ^ 0xb1a5);
    for t in store.tensors_mut().iter_mut().filter(|t| t.name.ends_with(".bias")) {
        t.values.iter_mut().for_each(|v| *v = r.random_range(-0.2..0.2));
    }
}
