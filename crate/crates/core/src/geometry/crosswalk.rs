//! Crosswalk from historical district polygons to modern spatial units.
//!
//! A unit is kept iff at least half of its area falls inside the district
//! layer as a whole; kept units are assigned to the district with the
//! largest single overlap, ties broken by smallest label.

use std::collections::{BTreeMap, BTreeSet};

use geo::{unary_union, Area, MultiPolygon};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{intersection_area, sanitize, HistoricalDistrict, SpatialUnit};

/// Minimum fraction of a unit's area that must lie inside the district
/// layer for the unit to participate.
pub const MIN_UNION_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Crosswalk {
    /// unit id → district label, for every kept unit.
    pub assignment: BTreeMap<String, String>,
    /// Units dropped by the union-overlap rule or by empty-district removal.
    pub excluded: BTreeSet<String>,
    /// (unit id, district label) → overlap fraction, for every positive overlap.
    pub overlap_fractions: BTreeMap<(String, String), f64>,
    /// unit id → fraction of the unit inside the union of all districts.
    pub union_fractions: BTreeMap<String, f64>,
}

impl Crosswalk {
    /// Distinct assigned district labels.
    pub fn labels(&self) -> BTreeSet<String> {
        self.assignment.values().cloned().collect()
    }

    /// Largest single-district overlap fraction for a unit (0 if none).
    pub fn best_fraction(&self, unit_id: &str) -> f64 {
        self.overlap_fractions
            .range((unit_id.to_string(), String::new())..)
            .take_while(|((uid, _), _)| uid == unit_id)
            .map(|(_, &f)| f)
            .fold(0.0, f64::max)
    }

    pub fn union_fraction(&self, unit_id: &str) -> f64 {
        self.union_fractions.get(unit_id).copied().unwrap_or(0.0)
    }
}

/// Compute the crosswalk for a region. Deterministic: identical inputs give
/// identical output regardless of the parallel schedule.
pub fn build_crosswalk(
    units: &[SpatialUnit],
    districts: &[HistoricalDistrict],
) -> Result<Crosswalk> {
    if units.is_empty() {
        return Err(Error::Contract("build_crosswalk: empty unit list".into()));
    }
    if districts.is_empty() {
        return Err(Error::Contract(
            "build_crosswalk: empty district list".into(),
        ));
    }

    let mut cleaned: Vec<(&str, MultiPolygon<f64>)> = Vec::with_capacity(districts.len());
    let mut seen = BTreeSet::new();
    for d in districts {
        if !seen.insert(d.label.as_str()) {
            return Err(Error::Contract(format!(
                "duplicate district label `{}`",
                d.label
            )));
        }
        cleaned.push((d.label.as_str(), sanitize(&d.label, d.geometry.clone())?));
    }
    // Argmax ties break to the lexicographically smallest label.
    cleaned.sort_by(|a, b| a.0.cmp(b.0));

    let district_union: MultiPolygon<f64> = unary_union(cleaned.iter().map(|(_, g)| g));

    struct UnitResult {
        id: String,
        union_fraction: f64,
        fractions: Vec<(String, f64)>,
        assigned: Option<String>,
    }

    let results: Vec<UnitResult> = units
        .par_iter()
        .map(|unit| -> Result<UnitResult> {
            let geom = sanitize(&unit.id, unit.geometry.clone())?;
            let area = geom.unsigned_area();
            if area <= 0.0 {
                return Err(Error::geometry(&unit.id, "zero-area unit"));
            }
            let mut fractions: Vec<(String, f64)> = Vec::new();
            let mut best: Option<(&str, f64)> = None;
            for (label, dgeom) in &cleaned {
                let overlap = intersection_area(&geom, dgeom);
                if overlap <= 0.0 {
                    continue;
                }
                let frac = (overlap / area).clamp(0.0, 1.0);
                fractions.push((label.to_string(), frac));
                match best {
                    Some((_, f)) if f >= frac => {}
                    _ => best = Some((label, frac)),
                }
            }
            let union_fraction =
                (intersection_area(&geom, &district_union) / area).clamp(0.0, 1.0);
            let assigned = if union_fraction >= MIN_UNION_FRACTION {
                best.map(|(label, _)| label.to_string())
            } else {
                None
            };
            Ok(UnitResult {
                id: unit.id.clone(),
                union_fraction,
                fractions,
                assigned,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cw = Crosswalk::default();
    for r in results {
        for (label, frac) in r.fractions {
            cw.overlap_fractions.insert((r.id.clone(), label), frac);
        }
        cw.union_fractions.insert(r.id.clone(), r.union_fraction);
        match r.assigned {
            Some(label) => {
                cw.assignment.insert(r.id, label);
            }
            None => {
                cw.excluded.insert(r.id);
            }
        }
    }

    if cw.assignment.is_empty() {
        return Err(Error::Region(
            "all units excluded by the crosswalk overlap rule".into(),
        ));
    }
    Ok(cw)
}

/// Remove districts whose assigned population is zero, moving their units
/// to the excluded set.
pub fn drop_empty_districts(crosswalk: &Crosswalk, units: &[SpatialUnit]) -> Result<Crosswalk> {
    let by_id: BTreeMap<&str, &SpatialUnit> =
        units.iter().map(|u| (u.id.as_str(), u)).collect();

    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for (unit_id, label) in &crosswalk.assignment {
        let unit = by_id.get(unit_id.as_str()).ok_or_else(|| {
            Error::Contract(format!("crosswalk references unknown unit `{unit_id}`"))
        })?;
        *totals.entry(label.as_str()).or_insert(0) += unit.total;
    }
    let empty: BTreeSet<&str> = totals
        .iter()
        .filter(|(_, &t)| t == 0)
        .map(|(&label, _)| label)
        .collect();
    if empty.is_empty() {
        return Ok(crosswalk.clone());
    }

    let mut out = crosswalk.clone();
    let moved: Vec<String> = out
        .assignment
        .iter()
        .filter(|(_, label)| empty.contains(label.as_str()))
        .map(|(unit_id, _)| unit_id.clone())
        .collect();
    for unit_id in moved {
        out.assignment.remove(&unit_id);
        out.excluded.insert(unit_id);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rect;

    fn unit(id: &str, min_x: f64, min_y: f64, side: f64, pop: u64) -> SpatialUnit {
        let mut pops = BTreeMap::new();
        pops.insert("G".to_string(), pop);
        SpatialUnit::new(id, rect(min_x, min_y, min_x + side, min_y + side), pops)
    }

    fn district(label: &str, min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> HistoricalDistrict {
        HistoricalDistrict::new(label, None, rect(min_x, min_y, max_x, max_y))
    }

    #[test]
    fn fully_contained_unit_is_assigned() {
        let units = vec![unit("u1", 1.0, 1.0, 1.0, 10)];
        let districts = vec![district("D7", 0.0, 0.0, 4.0, 4.0)];
        let cw = build_crosswalk(&units, &districts).unwrap();
        assert_eq!(cw.assignment.get("u1").unwrap(), "D7");
        assert!((cw.union_fraction("u1") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn below_half_union_overlap_is_excluded() {
        // Unit [0,1]^2; district covers x in [0.6, 1] → fraction 0.40.
        let units = vec![unit("u1", 0.0, 0.0, 1.0, 10)];
        let districts = vec![district("D1", 0.6, 0.0, 1.0, 1.0)];
        let cw = build_crosswalk(&units, &districts);
        // All units excluded → region error.
        assert!(matches!(cw, Err(Error::Region(_))));

        // Same layout with a second, kept unit to observe the exclusion.
        let units = vec![unit("u1", 0.0, 0.0, 1.0, 10), unit("u2", 0.6, 0.0, 0.4, 5)];
        let cw = build_crosswalk(&units, &districts).unwrap();
        assert!(cw.excluded.contains("u1"));
        assert!((cw.union_fraction("u1") - 0.40).abs() < 1e-9);
        assert_eq!(cw.assignment.get("u2").unwrap(), "D1");
    }

    #[test]
    fn argmax_assignment_with_union_above_half() {
        // Unit [0,1]^2. A covers x in [0,0.30), B covers x in (0.65, 1].
        // Fractions: A 0.30, B 0.35, union 0.65 → assigned to B.
        let units = vec![unit("u1", 0.0, 0.0, 1.0, 10)];
        let districts = vec![
            district("A", 0.0, 0.0, 0.30, 1.0),
            district("B", 0.65, 0.0, 1.0, 1.0),
        ];
        let cw = build_crosswalk(&units, &districts).unwrap();
        assert_eq!(cw.assignment.get("u1").unwrap(), "B");
        assert!((cw.union_fraction("u1") - 0.65).abs() < 1e-9);
        assert!((cw.overlap_fractions[&("u1".into(), "A".into())] - 0.30).abs() < 1e-9);
        assert!((cw.overlap_fractions[&("u1".into(), "B".into())] - 0.35).abs() < 1e-9);
    }

    #[test]
    fn argmax_tie_breaks_to_smallest_label() {
        let units = vec![unit("u1", 0.0, 0.0, 1.0, 10)];
        let districts = vec![
            district("Z", 0.0, 0.0, 0.5, 1.0),
            district("B", 0.5, 0.0, 1.0, 1.0),
        ];
        let cw = build_crosswalk(&units, &districts).unwrap();
        assert_eq!(cw.assignment.get("u1").unwrap(), "B");
    }

    #[test]
    fn partition_of_units_is_complete() {
        let units = vec![
            unit("u1", 0.0, 0.0, 1.0, 10),
            unit("u2", 1.0, 0.0, 1.0, 10),
            unit("u3", 9.0, 9.0, 1.0, 10),
        ];
        let districts = vec![district("D1", 0.0, 0.0, 2.0, 1.0)];
        let cw = build_crosswalk(&units, &districts).unwrap();
        assert_eq!(cw.assignment.len() + cw.excluded.len(), units.len());
    }

    #[test]
    fn zero_area_unit_is_a_geometry_error() {
        let mut pops = BTreeMap::new();
        pops.insert("G".to_string(), 1u64);
        let degenerate = SpatialUnit::new("u1", rect(0.0, 0.0, 0.0, 1.0), pops);
        let districts = vec![district("D1", 0.0, 0.0, 2.0, 1.0)];
        let err = build_crosswalk(&[degenerate], &districts).unwrap_err();
        assert!(matches!(err, Error::Geometry { .. }));
    }

    #[test]
    fn empty_district_is_dropped_and_units_excluded() {
        let units = vec![
            unit("u1", 0.0, 0.0, 1.0, 10),
            unit("u2", 1.0, 0.0, 1.0, 0),
        ];
        let districts = vec![
            district("D1", 0.0, 0.0, 1.0, 1.0),
            district("D2", 1.0, 0.0, 2.0, 1.0),
        ];
        let cw = build_crosswalk(&units, &districts).unwrap();
        assert_eq!(cw.labels().len(), 2);
        let dropped = drop_empty_districts(&cw, &units).unwrap();
        assert_eq!(dropped.labels().len(), 1);
        assert!(dropped.excluded.contains("u2"));
        assert_eq!(dropped.assignment.len() + dropped.excluded.len(), units.len());
    }

    #[test]
    fn drop_empty_is_identity_when_no_empty_districts() {
        let units = vec![unit("u1", 0.0, 0.0, 1.0, 10), unit("u2", 1.0, 0.0, 1.0, 5)];
        let districts = vec![
            district("D1", 0.0, 0.0, 1.0, 1.0),
            district("D2", 1.0, 0.0, 2.0, 1.0),
        ];
        let cw = build_crosswalk(&units, &districts).unwrap();
        let dropped = drop_empty_districts(&cw, &units).unwrap();
        assert_eq!(dropped, cw);
    }

    #[test]
    fn deterministic_output() {
        let units: Vec<SpatialUnit> = (0..20)
            .map(|i| unit(&format!("u{i:02}"), (i % 5) as f64, (i / 5) as f64, 1.0, 7))
            .collect();
        let districts = vec![
            district("D1", 0.0, 0.0, 2.4, 4.0),
            district("D2", 2.4, 0.0, 5.0, 4.0),
        ];
        let a = build_crosswalk(&units, &districts).unwrap();
        let b = build_crosswalk(&units, &districts).unwrap();
        assert_eq!(a, b);
    }
}
