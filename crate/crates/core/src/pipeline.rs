//! Region preparation: crosswalk → empty-district removal → chain graph →
//! seed map. Shared by the CLI driver, the placebo runner, and tests.

use geo::MultiPolygon;

use crate::error::{Error, Result};
use crate::geometry::{
    build_adjacency, build_crosswalk, drop_empty_districts, AdjacencyGraph, Crosswalk,
    HistoricalDistrict, SpatialUnit,
};
use crate::metrics::GroupSchema;
use crate::partition::DistrictMap;

/// Everything a chain needs: the final crosswalk, the graph over assigned
/// units, the seed map, and node-aligned unit geometries for the
/// compactness audit.
#[derive(Debug, Clone)]
pub struct PreparedRegion {
    pub crosswalk: Crosswalk,
    pub graph: AdjacencyGraph,
    pub seed_map: DistrictMap,
    pub unit_geometries: Vec<MultiPolygon<f64>>,
}

pub fn prepare_region(
    units: &[SpatialUnit],
    districts: &[HistoricalDistrict],
    schema: &GroupSchema,
) -> Result<PreparedRegion> {
    let crosswalk = build_crosswalk(units, districts)?;
    prepare_with_crosswalk(&crosswalk, units, schema)
}

/// Finish preparation from a precomputed crosswalk. The crosswalk depends
/// only on geometry, so callers that re-tabulate populations (the placebo
/// shuffler) can reuse it across replicates.
pub fn prepare_with_crosswalk(
    crosswalk: &Crosswalk,
    units: &[SpatialUnit],
    schema: &GroupSchema,
) -> Result<PreparedRegion> {
    let crosswalk = drop_empty_districts(crosswalk, units)?;
    if crosswalk.assignment.is_empty() {
        return Err(Error::Region("every district is empty".into()));
    }
    let assigned: Vec<SpatialUnit> = units
        .iter()
        .filter(|u| crosswalk.assignment.contains_key(&u.id))
        .cloned()
        .collect();
    let graph = build_adjacency(&assigned)?;
    let seed_map = DistrictMap::from_crosswalk(&crosswalk, &graph, units, schema)?;
    let by_id: std::collections::BTreeMap<&str, &SpatialUnit> =
        assigned.iter().map(|u| (u.id.as_str(), u)).collect();
    let unit_geometries = graph
        .ids()
        .iter()
        .map(|id| by_id[id.as_str()].geometry.clone())
        .collect();
    Ok(PreparedRegion {
        crosswalk,
        graph,
        seed_map,
        unit_geometries,
    })
}
