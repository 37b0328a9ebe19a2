//! Shared fixtures for the criterion benchmarks.

use hgrn_core::envs::{CtcConfig, EnvConfig, SurvivingConfig};
use hgrn_core::hgrn::{GraphBatch, HeadKind};
use hgrn_core::training::TrainConfig;
use hgrn_core::{Hgrn, ParamStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn surviving_small() -> EnvConfig {
    EnvConfig::Surviving(SurvivingConfig::small())
}

pub fn ctc_small() -> EnvConfig {
    EnvConfig::Ctc(CtcConfig::small())
}

/// Default-size Q network for `env` plus the batch of its first observation.
pub fn network_and_batch(env: &EnvConfig) -> (Hgrn, ParamStore, GraphBatch) {
    let e = env.build(0).expect("valid preset");
    let config = TrainConfig::default().network_config(e.obs_dims(), e.n_actions(), HeadKind::QValues);
    let mut store = ParamStore::new();
    let net = Hgrn::new(config, &mut store, &mut ChaCha8Rng::seed_from_u64(0)).expect("valid network");
    let batch = GraphBatch::from_graph(&e.graph().expect("graph"), &e.observe_all()).expect("batch");
    (net, store, batch)
}
