//! Synthetic region generator: a grid of unit squares with planted district
//! boundaries separating group concentrations. Used for tests and demos.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use geo::unary_union;

use crate::error::{Error, Result};
use crate::geometry::{rect, HistoricalDistrict, SpatialUnit};
use crate::metrics::GroupSchema;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub rows: usize,
    pub cols: usize,
    pub n_districts: usize,
    /// 0 = fully mixed (every unit identical), 1 = fully siloed (each
    /// district one group).
    pub segregation_level: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthRegion {
    pub units: Vec<SpatialUnit>,
    pub districts: Vec<HistoricalDistrict>,
}

/// Generate a rows×cols grid of unit squares. Districts are contiguous
/// snake-order runs of near-equal size; district d concentrates group
/// `d mod k` with weight `segregation_level`, mixing uniformly otherwise.
/// Unit totals vary randomly; counts are deterministic per seed.
pub fn generate(params: &SynthParams, schema: &GroupSchema) -> Result<SynthRegion> {
    let SynthParams {
        rows,
        cols,
        n_districts,
        segregation_level,
        seed,
    } = *params;
    if n_districts < 2 {
        return Err(Error::Config(format!(
            "need at least 2 districts, got {n_districts}"
        )));
    }
    if rows * cols < n_districts {
        return Err(Error::Config(format!(
            "{rows}x{cols} grid cannot hold {n_districts} districts"
        )));
    }
    if !(0.0..=1.0).contains(&segregation_level) {
        return Err(Error::Config(format!(
            "segregation_level must be in [0, 1], got {segregation_level}"
        )));
    }

    let k = schema.k();
    let total_cells = rows * cols;
    let base = total_cells / n_districts;
    let remainder = total_cells % n_districts;

    // Snake order keeps each district's run of cells rook-connected.
    let mut district_of_cell = vec![0u32; total_cells];
    let mut cell_order = Vec::with_capacity(total_cells);
    for r in 0..rows {
        if r % 2 == 0 {
            for c in 0..cols {
                cell_order.push(r * cols + c);
            }
        } else {
            for c in (0..cols).rev() {
                cell_order.push(r * cols + c);
            }
        }
    }
    let mut cursor = 0usize;
    for d in 0..n_districts {
        let size = base + usize::from(d < remainder);
        for _ in 0..size {
            district_of_cell[cell_order[cursor]] = d as u32;
            cursor += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut units = Vec::with_capacity(total_cells);
    for r in 0..rows {
        for c in 0..cols {
            let cell = r * cols + c;
            let d = district_of_cell[cell] as usize;
            let dominant = d % k;
            let total: u64 = rng.random_range(800..=1200);
            let weights: Vec<f64> = (0..k)
                .map(|j| {
                    let uniform = (1.0 - segregation_level) / k as f64;
                    if j == dominant {
                        uniform + segregation_level
                    } else {
                        uniform
                    }
                })
                .collect();
            let counts = apportion(total, &weights);
            let pops: BTreeMap<String, u64> = schema
                .labels()
                .iter()
                .cloned()
                .zip(counts)
                .collect();
            units.push(SpatialUnit::new(
                format!("S{r:03}{c:03}"),
                rect(c as f64, r as f64, c as f64 + 1.0, r as f64 + 1.0),
                pops,
            ));
        }
    }

    let mut districts = Vec::with_capacity(n_districts);
    for d in 0..n_districts {
        let members: Vec<_> = (0..total_cells)
            .filter(|&cell| district_of_cell[cell] == d as u32)
            .map(|cell| &units[cell].geometry)
            .collect();
        let geometry = unary_union(members);
        districts.push(HistoricalDistrict::new(format!("D{d:02}"), None, geometry));
    }

    Ok(SynthRegion { units, districts })
}

/// Largest-remainder rounding of `total`·`weights` to integer counts that
/// sum to `total` exactly.
fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let raw: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<u64> = raw.iter().map(|r| r.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut leftovers: Vec<(usize, f64)> = raw
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r - r.floor()))
        .collect();
    leftovers.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for i in 0..(total - assigned) as usize {
        counts[leftovers[i % leftovers.len()].0] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::baseline_entropy;
    use crate::metrics::Weighting;
    use crate::pipeline::prepare_region;

    fn schema() -> GroupSchema {
        GroupSchema::default()
    }

    #[test]
    fn counts_sum_to_total() {
        for total in [800u64, 997, 1200] {
            for level in [0.0, 0.3, 0.8, 1.0] {
                let w: Vec<f64> = (0..8)
                    .map(|j| {
                        let u = (1.0 - level) / 8.0;
                        if j == 2 {
                            u + level
                        } else {
                            u
                        }
                    })
                    .collect();
                let counts = apportion(total, &w);
                assert_eq!(counts.iter().sum::<u64>(), total);
            }
        }
    }

    #[test]
    fn fully_siloed_counts_are_one_hot() {
        let w = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(apportion(1000, &w), vec![0, 0, 1000, 0]);
    }

    #[test]
    fn parameter_validation() {
        let s = schema();
        let bad = |rows, cols, n, level| {
            generate(
                &SynthParams {
                    rows,
                    cols,
                    n_districts: n,
                    segregation_level: level,
                    seed: 0,
                },
                &s,
            )
            .is_err()
        };
        assert!(bad(2, 2, 1, 0.5));
        assert!(bad(1, 3, 4, 0.5));
        assert!(bad(3, 3, 2, 1.5));
    }

    #[test]
    fn deterministic_per_seed() {
        let p = SynthParams {
            rows: 4,
            cols: 4,
            n_districts: 3,
            segregation_level: 0.6,
            seed: 42,
        };
        let a = generate(&p, &schema()).unwrap();
        let b = generate(&p, &schema()).unwrap();
        assert_eq!(a.units, b.units);
        let c = generate(&SynthParams { seed: 43, ..p }, &schema()).unwrap();
        assert_ne!(a.units, c.units);
    }

    #[test]
    fn round_trips_through_the_pipeline() {
        let p = SynthParams {
            rows: 5,
            cols: 5,
            n_districts: 3,
            segregation_level: 0.5,
            seed: 7,
        };
        let region = generate(&p, &schema()).unwrap();
        let prepared = prepare_region(&region.units, &region.districts, &schema()).unwrap();
        // Every unit lands in its planted district (full containment).
        assert_eq!(prepared.seed_map.z(), 3);
        assert_eq!(prepared.graph.node_count(), 25);
        assert!(prepared.crosswalk.excluded.is_empty());
    }

    #[test]
    fn mixed_level_zero_has_near_zero_baseline() {
        let p = SynthParams {
            rows: 6,
            cols: 6,
            n_districts: 4,
            segregation_level: 0.0,
            seed: 11,
        };
        let region = generate(&p, &schema()).unwrap();
        let prepared = prepare_region(&region.units, &region.districts, &schema()).unwrap();
        let h = baseline_entropy(&prepared.seed_map, &schema(), Weighting::PopulationWeighted)
            .unwrap();
        assert!(h >= 0.0);
        assert!(h < 1e-4, "expected near-zero baseline, got {h}");
    }

    #[test]
    fn siloed_level_one_has_baseline_exactly_one() {
        let p = SynthParams {
            rows: 6,
            cols: 6,
            n_districts: 4,
            segregation_level: 1.0,
            seed: 11,
        };
        let region = generate(&p, &schema()).unwrap();
        let prepared = prepare_region(&region.units, &region.districts, &schema()).unwrap();
        let h = baseline_entropy(&prepared.seed_map, &schema(), Weighting::PopulationWeighted)
            .unwrap();
        assert_eq!(h, 1.0);
    }
}
