//! Region geometry: spatial units, historical districts, overlap areas,
//! crosswalk construction, and rook adjacency.
//!
//! All coordinates are treated as planar in area-true units; callers are
//! responsible for projecting inputs before ingestion.

pub mod adjacency;
pub mod crosswalk;
pub mod intersection;

pub use adjacency::{build_adjacency, AdjacencyGraph};
pub use crosswalk::{build_crosswalk, drop_empty_districts, Crosswalk};
pub use intersection::intersection_area;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use geo::{MakeValid, MultiPolygon, Polygon, Validation};

use crate::error::{Error, Result};

/// Marker used in audit output for units not assigned to any district.
pub const EXCLUDED_LABEL: &str = "EXCLUDED";

/// One atomic spatial unit (e.g. a census block group): geometry plus
/// per-group population counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialUnit {
    pub id: String,
    pub geometry: MultiPolygon<f64>,
    pub populations: BTreeMap<String, u64>,
    /// Sum of the per-group counts. Derived, never read from input.
    pub total: u64,
}

impl SpatialUnit {
    pub fn new(
        id: impl Into<String>,
        geometry: impl Into<MultiPolygon<f64>>,
        populations: BTreeMap<String, u64>,
    ) -> Self {
        let total = populations.values().sum();
        SpatialUnit {
            id: id.into(),
            geometry: geometry.into(),
            populations,
            total,
        }
    }

    /// Count for one group label; absent labels count zero.
    pub fn count(&self, label: &str) -> u64 {
        self.populations.get(label).copied().unwrap_or(0)
    }

    /// Replace the population counts, recomputing the total.
    pub fn with_populations(&self, populations: BTreeMap<String, u64>) -> Self {
        SpatialUnit::new(self.id.clone(), self.geometry.clone(), populations)
    }
}

/// Appraisal grade carried as metadata only; never used in computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grade {
    A,
    B,
    C,
    D,
}

impl FromStr for Grade {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "A" | "a" => Ok(Grade::A),
            "B" | "b" => Ok(Grade::B),
            "C" | "c" => Ok(Grade::C),
            "D" | "d" => Ok(Grade::D),
            other => Err(format!("unknown grade `{other}` (expected A, B, C, or D)")),
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Grade::A => 'A',
            Grade::B => 'B',
            Grade::C => 'C',
            Grade::D => 'D',
        };
        write!(f, "{c}")
    }
}

/// A district polygon from the historical map being tested.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalDistrict {
    pub label: String,
    pub grade: Option<Grade>,
    pub geometry: MultiPolygon<f64>,
}

impl HistoricalDistrict {
    pub fn new(
        label: impl Into<String>,
        grade: Option<Grade>,
        geometry: impl Into<MultiPolygon<f64>>,
    ) -> Self {
        HistoricalDistrict {
            label: label.into(),
            grade,
            geometry: geometry.into(),
        }
    }
}

/// Validate a geometry, attempting one repair pass for self-intersections.
/// Unrepairable geometry is a hard error naming the offending id.
pub(crate) fn sanitize(id: &str, geometry: MultiPolygon<f64>) -> Result<MultiPolygon<f64>> {
    if geometry.is_valid() {
        return Ok(geometry);
    }
    let repaired = geometry
        .make_valid()
        .map_err(|e| Error::geometry(id, format!("unrepairable geometry: {e}")))?;
    if repaired.is_valid() {
        Ok(repaired)
    } else {
        Err(Error::geometry(id, "geometry still invalid after repair"))
    }
}

/// Convenience for tests and the synthetic generator: an axis-aligned
/// rectangle as a MultiPolygon.
pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> MultiPolygon<f64> {
    let poly: Polygon<f64> = geo::Rect::new(
        geo::coord! { x: min_x, y: min_y },
        geo::coord! { x: max_x, y: max_y },
    )
    .to_polygon();
    MultiPolygon::new(vec![poly])
}
