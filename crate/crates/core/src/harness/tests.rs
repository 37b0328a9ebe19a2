use std::fs;

use super::*;
use crate::envs::{CorridorConfig, SurvivingConfig};
use crate::training::{Learner, NetworkSizes};

fn small_net() -> NetworkSizes {
    NetworkSizes {
        encoder_hidden: 8,
        embed_dim: 8,
        attn_dim: 4,
        hidden_dim: 8,
    }
}

fn surviving() -> EnvConfig {
    EnvConfig::Surviving(SurvivingConfig {
        horizon: 15,
        ..SurvivingConfig::small()
    })
}

fn quick_spec(dir: &Path, seeds: Vec<u64>) -> ExperimentSpec {
    ExperimentSpec {
        seeds,
        eval_episodes: 3,
        output_dir: dir.to_path_buf(),
        ..ExperimentSpec::new(
            EnvConfig::MemoryCorridor(CorridorConfig::default()),
            TrainConfig {
                network: small_net(),
                batch_size: 4,
                learning_starts: 8,
                total_steps: 40,
                ..TrainConfig::default()
            },
        )
    }
}

fn random_checkpoint(env: &EnvConfig, seed: u64) -> Checkpoint {
    let e = env.build(0).unwrap();
    let cfg = TrainConfig {
        network: small_net(),
        seed,
        ..TrainConfig::default()
    };
    Learner::new(cfg, e.obs_dims(), e.n_actions()).unwrap().checkpoint(0.05).unwrap()
}

#[test]
fn spec_parses_with_defaults() {
    let spec = ExperimentSpec::from_toml_str(
        "output_dir = \"out\"\n[env]\nkind = \"surviving\"\nagents = 6\n[train]\nalgorithm = \"sac_hgrn\"\n",
    )
    .unwrap();
    assert_eq!(spec.seeds, vec![0, 1, 2]);
    assert_eq!(spec.eval_episodes, 200);
    assert!(!spec.greedy);
    assert_eq!(spec.env.scale(), 6);
    assert_eq!(spec.train.algorithm, crate::training::Algorithm::SacHgrn);
}

#[test]
fn unknown_keys_are_rejected_at_every_level() {
    for text in [
        "typo = 1\n[env]\nkind = \"bandit\"\n",
        "[env]\nkind = \"bandit\"\narms = 3\n",
        "[env]\nkind = \"bandit\"\n[train]\nlearning_rate = 0.1\n",
        "[env]\nkind = \"bandit\"\n[train.network]\nwidth = 3\n",
        "[env]\nkind = \"nowhere\"\n",
    ] {
        let err = ExperimentSpec::from_toml_str(text).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{text}: {err}");
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = quick_spec(dir.path(), vec![1, 2]);
    assert!(base.validate().is_ok());
    let dup = ExperimentSpec {
        seeds: vec![3, 1, 3],
        ..base.clone()
    };
    assert!(dup.validate().unwrap_err().to_string().contains("seed 3"));
    let no_eval = ExperimentSpec {
        eval_episodes: 0,
        ..base.clone()
    };
    assert!(no_eval.validate().is_err());
    let mut bad_train = base.clone();
    bad_train.train.gamma = 2.0;
    assert!(bad_train.validate().is_err());
    // validation happens before anything touches the disk
    let nested = dir.path().join("never");
    let bad = ExperimentSpec {
        output_dir: nested.clone(),
        ..bad_train
    };
    assert!(run_training(&bad).is_err());
    assert!(!nested.exists());
}

#[test]
fn zero_repetitions_write_only_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = quick_spec(dir.path(), vec![]);
    let summary = run_training(&spec).unwrap();
    assert!(summary.runs.is_empty());
    let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries, vec![std::ffi::OsString::from(MANIFEST_FILE)]);
    assert_eq!(ExperimentSpec::from_manifest(&summary.manifest).unwrap(), spec);
}

#[test]
fn unwritable_output_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain-file");
    fs::write(&file, b"x").unwrap();
    let spec = quick_spec(&file.join("sub"), vec![0]);
    let err = run_training(&spec).unwrap_err();
    assert!(err.to_string().contains("not writable"), "{err}");
}

#[test]
fn seeds_get_separate_artifacts_and_reruns_match() {
    let dir = tempfile::tempdir().unwrap();
    let spec = quick_spec(&dir.path().join("a"), vec![4, 9]);
    let summary = run_training(&spec).unwrap();
    assert_eq!(summary.runs.len(), 2);
    let streams: Vec<Vec<u8>> = summary.runs.iter().map(|r| fs::read(&r.metrics).unwrap()).collect();
    assert!(!streams[0].is_empty());
    assert_ne!(streams[0], streams[1]);
    for run in &summary.runs {
        Checkpoint::load(&run.checkpoint).unwrap();
        // updates at steps 8, 12, ..., 40
        assert_eq!(read_metrics(&run.metrics).unwrap().len(), 9);
    }

    // re-execute from the manifest into a second directory
    let mut again = ExperimentSpec::from_manifest(&summary.manifest).unwrap();
    again.output_dir = dir.path().join("b");
    let rerun = run_training(&again).unwrap();
    for (a, b) in summary.runs.iter().zip(&rerun.runs) {
        assert_eq!(fs::read(&a.metrics).unwrap(), fs::read(&b.metrics).unwrap());
        assert_eq!(fs::read(&a.checkpoint).unwrap(), fs::read(&b.checkpoint).unwrap());
    }
}

#[test]
fn evaluation_reports_are_recomputable_from_their_logs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        transfer_scales: vec![2, 4],
        ..quick_spec(dir.path(), vec![0])
    };
    let summary = run_training(&spec).unwrap();
    let evals = evaluate_runs(&spec, &summary).unwrap();
    let run_dir = &summary.runs[0].dir;
    let logged = read_episode_log(File::open(run_dir.join(EVAL_EPISODES_FILE)).unwrap()).unwrap();
    let report = &evals[0].report;
    assert_eq!(logged.len(), 3);
    assert_eq!(EvalReport::from_log(report.agents, report.greedy, logged), *report);
    let on_disk: EvalReport = serde_json::from_slice(&fs::read(run_dir.join(EVAL_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk.mean, report.mean);
    assert_eq!(on_disk.std, report.std);
    assert_eq!(evals[0].transfer.len(), 2);
    assert!(evals[0].transfer.iter().all(|t| t.report.is_some()));
}

#[test]
fn random_weights_give_a_finite_report() {
    let env = surviving();
    let ckpt = random_checkpoint(&env, 0);
    let report = run_eval(&ckpt, &env, 4, false, 1).unwrap();
    assert_eq!(report.episodes, 4);
    assert!(report.mean.is_finite() && report.std.is_finite());
    assert!(report.log.iter().all(|e| e.steps == 15));
    let random = run_random(&env, 4, 1).unwrap();
    assert!(random.mean.is_finite());
}

#[test]
fn single_episode_has_zero_std() {
    let env = surviving();
    let ckpt = random_checkpoint(&env, 1);
    for greedy in [false, true] {
        let report = run_eval(&ckpt, &env, 1, greedy, 3).unwrap();
        assert_eq!(report.std, 0.0);
        assert_eq!(report.mean, report.log[0].reward);
    }
}

#[test]
fn evaluation_is_seeded() {
    let env = surviving();
    let ckpt = random_checkpoint(&env, 2);
    let a = run_eval(&ckpt, &env, 2, false, 7).unwrap();
    let b = run_eval(&ckpt, &env, 2, false, 7).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.log, b.log);
}

#[test]
fn shape_mismatch_names_the_tensor() {
    let ckpt = random_checkpoint(&surviving(), 0);
    let corridor = EnvConfig::MemoryCorridor(CorridorConfig::default());
    let err = run_eval(&ckpt, &corridor, 1, false, 0).unwrap_err().to_string();
    assert!(err.contains("critic.g0.encoder.0.weight"), "{err}");

    let wider = EnvConfig::Surviving(SurvivingConfig {
        view_radius: 2,
        ..SurvivingConfig::small()
    });
    let err = run_eval(&ckpt, &wider, 1, false, 0).unwrap_err().to_string();
    assert!(err.contains("critic.g0.encoder.0.weight"), "{err}");
}

#[test]
fn transfer_at_the_training_scale_matches_eval() {
    let env = surviving();
    let ckpt = random_checkpoint(&env, 3);
    let base = run_eval(&ckpt, &env, 2, false, 5).unwrap();
    let t = run_transfer(&ckpt, &env, &[env.scale()], 2, false, 5);
    assert_eq!(t[0].report.as_ref(), Some(&base));
}

#[test]
fn transfer_reports_each_scale_separately() {
    let env = surviving();
    let ckpt = random_checkpoint(&env, 4);
    let t = run_transfer(&ckpt, &env, &[4, 1000, 16], 2, false, 5);
    assert_eq!(t.iter().map(|r| r.agents).collect::<Vec<_>>(), vec![4, 1000, 16]);
    assert!(t[0].report.as_ref().is_some_and(|r| r.agents == 4 && r.mean.is_finite()));
    assert!(t[1].report.is_none() && t[1].error.as_ref().is_some_and(|e| e.contains("fit")));
    assert!(t[2].report.as_ref().is_some_and(|r| r.agents == 16 && r.mean.is_finite()));
}

#[test]
fn introspection_follows_the_communication_graph() {
    let env = EnvConfig::Surviving(SurvivingConfig {
        agents: 8,
        width: 8,
        height: 8,
        food_piles: 4,
        comm_radius: 3.0,
        horizon: 20,
        ..SurvivingConfig::small()
    });
    let ckpt = random_checkpoint(&env, 5);
    let trace = dump_introspection(&ckpt, &env, 11, 2, false).unwrap();
    assert_eq!(trace.len(), 20);
    let mut saw_neighbor = false;
    for rec in &trace {
        saw_neighbor |= rec.neighbors.len() > 1;
        assert!(rec.neighbors.contains(&2));
        assert_eq!(rec.layers.len(), 2);
        for layer in &rec.layers {
            let mut attended: Vec<usize> = layer.iter().map(|e| e.neighbor).collect();
            attended.sort_unstable();
            assert_eq!(attended, rec.neighbors, "step {}", rec.step);
            let total: f64 = layer.iter().map(|e| e.weight).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        let gate = rec.reset_gate_mean.unwrap();
        assert!((0.0..=1.0).contains(&gate));
    }
    assert!(saw_neighbor);
}

#[test]
fn isolated_agent_attends_only_to_itself() {
    let env = EnvConfig::Surviving(SurvivingConfig {
        comm_radius: 0.0,
        horizon: 10,
        ..SurvivingConfig::small()
    });
    let ckpt = random_checkpoint(&env, 6);
    let trace = dump_introspection(&ckpt, &env, 3, 5, true).unwrap();
    for rec in &trace {
        assert_eq!(rec.neighbors, vec![5]);
        for layer in &rec.layers {
            assert_eq!(layer.len(), 1);
            assert_eq!(layer[0].neighbor, 5);
            assert_eq!(layer[0].weight, 1.0);
        }
    }
}

#[test]
fn introspection_rejects_unknown_agents() {
    let env = surviving();
    let ckpt = random_checkpoint(&env, 0);
    assert!(dump_introspection(&ckpt, &env, 0, 8, false).is_err());
}

#[test]
fn sweep_trains_each_temperature_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let spec = quick_spec(dir.path(), vec![0]);
    let points = run_sweep(&spec, &[0.2, 0.8]).unwrap();
    assert_eq!(points.len(), 2);
    let ln5 = 5f64.ln();
    assert!((points[0].target_entropy - 0.2 * ln5).abs() < 1e-12);
    assert!((points[1].target_entropy - 0.8 * ln5).abs() < 1e-12);
    assert!(points.iter().all(|p| p.final_alpha > 0.0 && p.tail_entropy.is_finite()));
    let lines = fs::read_to_string(dir.path().join("sweep.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 2);
    assert!(dir.path().join("p_alpha-0.2").join(MANIFEST_FILE).exists());
}
