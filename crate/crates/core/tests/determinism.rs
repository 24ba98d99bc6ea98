//! Reproducibility contracts: identical seeds give identical results, and a
//! snapshot-resume run is indistinguishable from an uninterrupted one.

mod common;

use common::{desk_config, prepared_grid};
use entromap::chain::{
    run_chain, run_ensemble, ChainConfig, ChainRunner,
};
use entromap::validators::ValidatorConfig;

#[test]
fn same_seed_gives_bit_identical_traces() {
    let (prepared, schema) = prepared_grid(6, 6, 3, 0.6, 9);
    let cfg = desk_config(300, 2, 1234);
    let vcfg = ValidatorConfig::for_seed(&prepared.seed_map, cfg.validators).unwrap();

    let a = run_ensemble(
        &prepared.seed_map,
        &prepared.graph,
        &schema,
        cfg.metrics.weighting,
        &cfg.proposal,
        vcfg,
        cfg.chain,
    )
    .unwrap();
    let b = run_ensemble(
        &prepared.seed_map,
        &prepared.graph,
        &schema,
        cfg.metrics.weighting,
        &cfg.proposal,
        vcfg,
        cfg.chain,
    )
    .unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.trace, y.trace, "traces must match bit for bit");
        assert_eq!(x.final_map.assignment(), y.final_map.assignment());
    }
}

#[test]
fn different_chains_and_seeds_differ() {
    let (prepared, schema) = prepared_grid(6, 6, 3, 0.6, 9);
    let cfg = desk_config(300, 2, 1234);
    let vcfg = ValidatorConfig::for_seed(&prepared.seed_map, cfg.validators).unwrap();
    let outcomes = run_ensemble(
        &prepared.seed_map,
        &prepared.graph,
        &schema,
        cfg.metrics.weighting,
        &cfg.proposal,
        vcfg,
        cfg.chain,
    )
    .unwrap();
    assert_ne!(
        outcomes[0].trace.values, outcomes[1].trace.values,
        "distinct chains must explore distinct trajectories"
    );

    let other_seed = run_chain(
        &prepared.seed_map,
        &prepared.graph,
        &schema,
        cfg.metrics.weighting,
        &cfg.proposal,
        vcfg,
        ChainConfig {
            base_seed: 999,
            ..cfg.chain
        },
        0,
    )
    .unwrap();
    assert_ne!(other_seed.values, outcomes[0].trace.values);
}

#[test]
fn snapshot_resume_equals_straight_through() {
    let (prepared, schema) = prepared_grid(6, 6, 3, 0.6, 9);
    let cfg = desk_config(100, 1, 77);
    let vcfg = ValidatorConfig::for_seed(&prepared.seed_map, cfg.validators).unwrap();

    // Straight-through run of 100 steps.
    let full = run_chain(
        &prepared.seed_map,
        &prepared.graph,
        &schema,
        cfg.metrics.weighting,
        &cfg.proposal,
        vcfg,
        cfg.chain,
        0,
    )
    .unwrap();

    // 50 steps, snapshot (serialized through JSON), resume, 50 more.
    let mut runner = ChainRunner::new(
        &prepared.seed_map,
        &prepared.graph,
        &schema,
        cfg.metrics.weighting,
        &cfg.proposal,
        vcfg,
        cfg.chain,
        0,
    )
    .unwrap();
    for _ in 0..50 {
        runner.step().unwrap();
    }
    let snapshot = runner.snapshot();
    let json = serde_json::to_string(&snapshot).unwrap();
    let restored = serde_json::from_str(&json).unwrap();
    assert_eq!(snapshot, restored);
    drop(runner);

    let resumed = ChainRunner::resume(
        &prepared.seed_map,
        &prepared.graph,
        &schema,
        cfg.metrics.weighting,
        &cfg.proposal,
        vcfg,
        cfg.chain,
        restored,
    )
    .unwrap()
    .run()
    .unwrap();

    assert_eq!(resumed.trace, full, "resume must replay the same chain");
}

#[test]
fn markov_property_next_state_depends_only_on_current() {
    // Stepping a fresh runner twice from the same snapshot produces the
    // same successor state both times.
    let (prepared, schema) = prepared_grid(5, 5, 2, 0.5, 3);
    let cfg = desk_config(60, 1, 5);
    let vcfg = ValidatorConfig::for_seed(&prepared.seed_map, cfg.validators).unwrap();
    let mut runner = ChainRunner::new(
        &prepared.seed_map,
        &prepared.graph,
        &schema,
        cfg.metrics.weighting,
        &cfg.proposal,
        vcfg,
        cfg.chain,
        0,
    )
    .unwrap();
    for _ in 0..20 {
        runner.step().unwrap();
    }
    let snap = runner.snapshot();
    runner.step().unwrap();
    let next_assignment = runner.current().assignment().to_vec();

    let mut replay = ChainRunner::resume(
        &prepared.seed_map,
        &prepared.graph,
        &schema,
        cfg.metrics.weighting,
        &cfg.proposal,
        vcfg,
        cfg.chain,
        snap,
    )
    .unwrap();
    replay.step().unwrap();
    assert_eq!(replay.current().assignment(), next_assignment.as_slice());
}
