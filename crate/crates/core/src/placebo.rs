//! Placebo control: shuffle demographic counts across units within each
//! group, then re-run the pipeline on the spatially scrambled data. The
//! region-wide totals stay fixed; only the spatial arrangement changes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chain::{stream_rng, ChainRunner, EntropyTrace};
use crate::config::EngineConfig;
use crate::error::Result;
use crate::geometry::{build_crosswalk, HistoricalDistrict, SpatialUnit};
use crate::metrics::region_entropy;
use crate::pipeline::prepare_with_crosswalk;
use crate::validators::ValidatorConfig;

/// ChaCha stream ids for placebo work sit far away from chain ids
/// (chains use streams 0..n_chains).
const SHUFFLE_STREAM_BASE: u64 = 1 << 63;
const PLACEBO_CHAIN_STREAM_BASE: u64 = 1 << 62;

/// Permute each group's per-unit counts uniformly across units, keeping
/// geometries and ids in place. Per-group region totals are conserved
/// exactly; unit totals are recomputed.
pub fn shuffle_within_groups(units: &[SpatialUnit], rng_seed: u64) -> Vec<SpatialUnit> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    shuffle_within_groups_rng(units, &mut rng)
}

pub fn shuffle_within_groups_rng<R: Rng>(units: &[SpatialUnit], rng: &mut R) -> Vec<SpatialUnit> {
    let labels: std::collections::BTreeSet<&str> = units
        .iter()
        .flat_map(|u| u.populations.keys().map(|s| s.as_str()))
        .collect();
    let mut columns: Vec<(String, Vec<u64>)> = Vec::with_capacity(labels.len());
    for label in labels {
        let mut col: Vec<u64> = units.iter().map(|u| u.count(label)).collect();
        col.shuffle(rng);
        columns.push((label.to_string(), col));
    }
    units
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let pops = columns
                .iter()
                .map(|(label, col)| (label.clone(), col[i]))
                .collect();
            u.with_populations(pops)
        })
        .collect()
}

/// One placebo replicate: the shuffled data's own baseline plus the chain
/// run on that data.
#[derive(Debug, Clone)]
pub struct PlaceboOutcome {
    pub replicate: u32,
    pub baseline: f64,
    pub trace: EntropyTrace,
}

/// Run `n_placebos` placebo replicates. Each replicate shuffles the data
/// (one shared shuffle across replicates when `shared_shuffle` is set),
/// recomputes the seed map's baseline entropy, and runs one chain.
/// Deterministic per (base_seed, replicate index).
pub fn run_placebo(
    units: &[SpatialUnit],
    districts: &[HistoricalDistrict],
    config: &EngineConfig,
    n_placebos: u32,
    shared_shuffle: bool,
) -> Result<Vec<PlaceboOutcome>> {
    if n_placebos == 0 {
        return Ok(Vec::new());
    }
    // Geometry does not change under shuffling, so the 50%-rule crosswalk is
    // computed once; only empty-district removal can differ per replicate.
    let base_crosswalk = build_crosswalk(units, districts)?;
    let schema = &config.metrics.groups;

    (0..n_placebos)
        .into_par_iter()
        .map(|replicate| -> Result<PlaceboOutcome> {
            let shuffle_idx = if shared_shuffle { 0 } else { replicate as u64 };
            let mut shuffle_rng =
                stream_rng(config.chain.base_seed, SHUFFLE_STREAM_BASE | shuffle_idx);
            let shuffled = shuffle_within_groups_rng(units, &mut shuffle_rng);

            let prepared = prepare_with_crosswalk(&base_crosswalk, &shuffled, schema)?;
            let baseline =
                region_entropy(&prepared.seed_map, schema, config.metrics.weighting)?.h;

            let validator_cfg =
                ValidatorConfig::for_seed(&prepared.seed_map, config.validators)?;
            let mut runner = ChainRunner::new(
                &prepared.seed_map,
                &prepared.graph,
                schema,
                config.metrics.weighting,
                &config.proposal,
                validator_cfg,
                config.chain,
                replicate,
            )?;
            runner.override_rng_stream(PLACEBO_CHAIN_STREAM_BASE | replicate as u64);
            let outcome = runner.run()?;
            Ok(PlaceboOutcome {
                replicate,
                baseline,
                trace: outcome.trace,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rect;
    use std::collections::BTreeMap;

    fn unit(id: &str, x: f64, counts: &[(&str, u64)]) -> SpatialUnit {
        let pops: BTreeMap<String, u64> = counts
            .iter()
            .map(|(l, c)| (l.to_string(), *c))
            .collect();
        SpatialUnit::new(id, rect(x, 0.0, x + 1.0, 1.0), pops)
    }

    #[test]
    fn single_unit_shuffle_is_identity() {
        let units = vec![unit("a", 0.0, &[("GA", 3), ("GB", 7)])];
        let out = shuffle_within_groups(&units, 1);
        assert_eq!(out, units);
    }

    #[test]
    fn per_group_totals_are_conserved() {
        let units = vec![
            unit("a", 0.0, &[("GA", 3), ("GB", 7)]),
            unit("b", 1.0, &[("GA", 11), ("GB", 0)]),
            unit("c", 2.0, &[("GA", 5), ("GB", 2)]),
        ];
        for seed in 0..50 {
            let out = shuffle_within_groups(&units, seed);
            for label in ["GA", "GB"] {
                let before: u64 = units.iter().map(|u| u.count(label)).sum();
                let after: u64 = out.iter().map(|u| u.count(label)).sum();
                assert_eq!(before, after, "label {label}, seed {seed}");
            }
            for (orig, shuf) in units.iter().zip(&out) {
                assert_eq!(orig.id, shuf.id);
                assert_eq!(orig.geometry, shuf.geometry);
                let expected_total: u64 = shuf.populations.values().sum();
                assert_eq!(shuf.total, expected_total);
            }
        }
    }

    #[test]
    fn two_unit_permutation_is_roughly_fair() {
        // Counts (10, 20) either stay or swap; over many seeds each order
        // should appear about half the time.
        let units = vec![
            unit("a", 0.0, &[("GA", 10)]),
            unit("b", 1.0, &[("GA", 20)]),
        ];
        let mut stayed = 0usize;
        let n = 1000;
        for seed in 0..n {
            let out = shuffle_within_groups(&units, seed);
            match (out[0].count("GA"), out[1].count("GA")) {
                (10, 20) => stayed += 1,
                (20, 10) => {}
                other => panic!("unexpected counts {other:?}"),
            }
        }
        let freq = stayed as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.05, "identity frequency {freq}");
    }

    #[test]
    fn shuffles_are_deterministic_per_seed() {
        let units: Vec<SpatialUnit> = (0..30)
            .map(|i| unit(&format!("u{i:02}"), i as f64, &[("GA", i as u64), ("GB", 100 - i as u64)]))
            .collect();
        let a = shuffle_within_groups(&units, 7);
        let b = shuffle_within_groups(&units, 7);
        let c = shuffle_within_groups(&units, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
