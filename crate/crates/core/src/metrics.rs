//! Segregation and compactness measures: district entropy, the region
//! entropy index, and Polsby-Popper.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use geo::{unary_union, Area, Euclidean, Length, MultiPolygon};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::DistrictMap;

/// Default population groups: the seven census race responses plus Hispanic
/// as its own additive count, k = 8.
pub const DEFAULT_GROUP_LABELS: [&str; 8] = [
    "White",
    "Black",
    "Asian",
    "AIAN",
    "NHPI",
    "Other",
    "TwoOrMore",
    "Hispanic",
];

/// Ordered list of population group labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSchema {
    labels: Vec<String>,
}

impl GroupSchema {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Config(format!(
                "group schema needs at least two labels, got {}",
                labels.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Config(format!("duplicate group label `{l}`")));
            }
        }
        Ok(GroupSchema { labels })
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

impl Default for GroupSchema {
    fn default() -> Self {
        GroupSchema {
            labels: DEFAULT_GROUP_LABELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// How the within-district mean entropy is weighted when forming the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// H̄ = Σᵢ (nᵢ/N)·hᵢ. Homogeneous regions score exactly 0. Default.
    #[default]
    PopulationWeighted,
    /// H̄ = (1/z)·Σᵢ (nᵢ/N)·hᵢ, retaining the extra 1/z factor. Kept for
    /// auditability against outputs computed that way.
    LiteralPaper,
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "population_weighted" => Ok(Weighting::PopulationWeighted),
            "literal_paper" => Ok(Weighting::LiteralPaper),
            other => Err(Error::Config(format!(
                "unknown weighting `{other}` (expected population_weighted or literal_paper)"
            ))),
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weighting::PopulationWeighted => write!(f, "population_weighted"),
            Weighting::LiteralPaper => write!(f, "literal_paper"),
        }
    }
}

/// Region entropy decomposition. All entropies in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    /// District label → within-district entropy hᵢ.
    pub h_per_district: BTreeMap<String, f64>,
    /// Entropy of the region treated as a single district.
    pub h_hat: f64,
    /// Weighted mean of the hᵢ (per the chosen weighting).
    pub h_bar: f64,
    /// The index H = (Ĥ − H̄)/Ĥ, dimensionless in [0, 1].
    pub h: f64,
}

/// Shannon entropy −Σ pⱼ ln pⱼ of a proportion vector, with 0·ln 0 = 0.
/// The proportions must sum to 1 within 1e-9.
pub fn district_entropy(proportions: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for &p in proportions {
        if !(-1e-12..=1.0 + 1e-12).contains(&p) {
            return Err(Error::Contract(format!("proportion {p} outside [0, 1]")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "proportions sum to {sum}, expected 1"
        )));
    }
    Ok(entropy_terms(proportions.iter().copied()))
}

fn entropy_terms(proportions: impl Iterator<Item = f64>) -> f64 {
    proportions
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

fn entropy_of_counts(groups: &[u64], total: u64) -> f64 {
    let n = total as f64;
    entropy_terms(groups.iter().map(|&g| g as f64 / n))
}

/// Region entropy index over a district map's tallies.
///
/// Ĥ is computed on region-total proportions, H̄ as the weighted mean of the
/// per-district entropies, and H = (Ĥ − H̄)/Ĥ. A single-group region has
/// Ĥ = 0 and the index undefined.
pub fn region_entropy(
    map: &DistrictMap,
    schema: &GroupSchema,
    weighting: Weighting,
) -> Result<EntropyResult> {
    let k = schema.k();
    if map.group_count() != k {
        return Err(Error::Contract(format!(
            "map has {} groups per tally, schema has {k}",
            map.group_count()
        )));
    }

    let mut region_groups = vec![0u64; k];
    let mut region_total = 0u64;
    for t in map.tallies() {
        for (r, g) in region_groups.iter_mut().zip(&t.groups) {
            *r += g;
        }
        region_total += t.total;
    }
    if region_total == 0 {
        return Err(Error::Region("region has zero population".into()));
    }

    let h_hat = entropy_of_counts(&region_groups, region_total);
    if h_hat == 0.0 {
        return Err(Error::DegenerateRegion(
            "region-wide entropy is zero (single-group region); index undefined".into(),
        ));
    }

    let n = region_total as f64;
    let mut h_per_district = BTreeMap::new();
    let mut weighted_sum = 0.0;
    for (i, t) in map.tallies().iter().enumerate() {
        let h_i = if t.total == 0 {
            0.0
        } else {
            entropy_of_counts(&t.groups, t.total)
        };
        h_per_district.insert(map.label(i as u32).to_string(), h_i);
        weighted_sum += (t.total as f64 / n) * h_i;
    }
    let h_bar = match weighting {
        Weighting::PopulationWeighted => weighted_sum,
        Weighting::LiteralPaper => weighted_sum / map.z() as f64,
    };
    let h = (h_hat - h_bar) / h_hat;

    Ok(EntropyResult {
        h_per_district,
        h_hat,
        h_bar,
        h,
    })
}

/// Isoperimetric compactness 4πA/P²: 1 for a circle, less for anything else.
/// Multipolygons use total area and total boundary length (holes included).
pub fn polsby_popper(geometry: &MultiPolygon<f64>) -> Result<f64> {
    let area = geometry.unsigned_area();
    let mut perimeter = 0.0;
    for poly in geometry {
        perimeter += Euclidean.length(poly.exterior());
        for ring in poly.interiors() {
            perimeter += Euclidean.length(ring);
        }
    }
    if perimeter <= 0.0 {
        return Err(Error::geometry("polygon", "zero-perimeter geometry"));
    }
    Ok(4.0 * std::f64::consts::PI * area / (perimeter * perimeter))
}

/// Dissolve each district's member units into one geometry.
pub fn dissolve_districts(
    map: &DistrictMap,
    unit_geometries: &[MultiPolygon<f64>],
) -> Result<Vec<MultiPolygon<f64>>> {
    if unit_geometries.len() != map.assignment().len() {
        return Err(Error::Contract(format!(
            "geometry list has {} entries for {} graph nodes",
            unit_geometries.len(),
            map.assignment().len()
        )));
    }
    let mut dissolved = Vec::with_capacity(map.z());
    for d in 0..map.z() as u32 {
        let members: Vec<&MultiPolygon<f64>> = map
            .assignment()
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == d)
            .map(|(n, _)| &unit_geometries[n])
            .collect();
        if members.is_empty() {
            return Err(Error::geometry(
                map.label(d),
                "cannot dissolve an empty district",
            ));
        }
        let geom = unary_union(members);
        if geom.unsigned_area() <= 0.0 {
            return Err(Error::geometry(map.label(d), "dissolve produced no area"));
        }
        dissolved.push(geom);
    }
    Ok(dissolved)
}

/// Minimum and mean Polsby-Popper across the map's dissolved districts.
pub fn compactness_audit(
    map: &DistrictMap,
    unit_geometries: &[MultiPolygon<f64>],
) -> Result<(f64, f64)> {
    let dissolved = dissolve_districts(map, unit_geometries)?;
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    for (d, geom) in dissolved.iter().enumerate() {
        let pp = polsby_popper(geom).map_err(|_| {
            Error::geometry(map.label(d as u32), "zero-perimeter dissolved district")
        })?;
        min = min.min(pp);
        sum += pp;
    }
    Ok((min, sum / dissolved.len() as f64))
}
