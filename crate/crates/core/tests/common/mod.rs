//! Shared fixtures for the integration suites.

use entromap::config::EngineConfig;
use entromap::metrics::GroupSchema;
use entromap::pipeline::{prepare_region, PreparedRegion};
use entromap::synth::{generate, SynthParams};

/// Synthetic grid region, prepared for chain execution.
pub fn prepared_grid(
    rows: usize,
    cols: usize,
    n_districts: usize,
    level: f64,
    seed: u64,
) -> (PreparedRegion, GroupSchema) {
    let schema = GroupSchema::default();
    let region = generate(
        &SynthParams {
            rows,
            cols,
            n_districts,
            segregation_level: level,
            seed,
        },
        &schema,
    )
    .expect("synth fixture");
    let prepared = prepare_region(&region.units, &region.districts, &schema).expect("prepare");
    (prepared, schema)
}

/// Desk-scale config: small chains that finish in milliseconds.
pub fn desk_config(steps: u64, n_chains: u32, base_seed: u64) -> EngineConfig {
    let mut cfg = EngineConfig::default();
    cfg.chain.steps = steps;
    cfg.chain.n_chains = n_chains;
    cfg.chain.base_seed = base_seed;
    cfg
}

/// 1×z strip of unit squares, one district per unit, with the given group
/// counts per unit. The fastest way to pin exact district tallies.
#[allow(dead_code)]
pub fn strip_map(
    tallies: &[Vec<u64>],
    labels: &[&str],
) -> (entromap::partition::DistrictMap, GroupSchema) {
    use entromap::geometry::{rect, HistoricalDistrict, SpatialUnit};
    use std::collections::BTreeMap;

    let schema = GroupSchema::new(labels.iter().map(|s| s.to_string()).collect()).unwrap();
    let units: Vec<SpatialUnit> = tallies
        .iter()
        .enumerate()
        .map(|(i, counts)| {
            let pops: BTreeMap<String, u64> = labels
                .iter()
                .map(|l| l.to_string())
                .zip(counts.iter().copied())
                .collect();
            SpatialUnit::new(
                format!("u{i:03}"),
                rect(i as f64, 0.0, i as f64 + 1.0, 1.0),
                pops,
            )
        })
        .collect();
    let districts: Vec<HistoricalDistrict> = tallies
        .iter()
        .enumerate()
        .map(|(i, _)| {
            HistoricalDistrict::new(
                format!("D{i:03}"),
                None,
                rect(i as f64, 0.0, i as f64 + 1.0, 1.0),
            )
        })
        .collect();
    let prepared = prepare_region(&units, &districts, &schema).unwrap();
    (prepared.seed_map, schema)
}
