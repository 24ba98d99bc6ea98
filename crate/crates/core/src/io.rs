//! File interchange: GeoJSON region input, CSV/JSON artifacts out.
//!
//! Every CSV artifact starts with `# engine_version:` and `# config_hash:`
//! comment lines; JSON artifacts carry the same fields inline.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use geojson::{Feature, FeatureCollection, GeoJson};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map as JsonMap, Value as JsonValue};

use crate::chain::{ChainConfig, EntropyTrace};
use crate::diagnostics::{CompactnessAudit, EnsembleReport};
use crate::error::{Error, Result};
use crate::geometry::{
    AdjacencyGraph, Crosswalk, Grade, HistoricalDistrict, SpatialUnit, EXCLUDED_LABEL,
};
use crate::metrics::GroupSchema;
use crate::partition::DistrictMap;
use crate::placebo::PlaceboOutcome;

pub const BLOCKS_FILE: &str = "blocks.geojson";
pub const DISTRICTS_FILE: &str = "districts.geojson";

/// Provenance stamped into every output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileMeta {
    pub engine_version: String,
    pub config_hash: String,
}

impl FileMeta {
    pub fn new(config_hash: impl Into<String>) -> Self {
        FileMeta {
            engine_version: crate::ENGINE_VERSION.to_string(),
            config_hash: config_hash.into(),
        }
    }

    fn comment_header(&self) -> String {
        format!(
            "# engine_version: {}\n# config_hash: {}\n",
            self.engine_version, self.config_hash
        )
    }

    fn foreign_members(&self) -> JsonMap<String, JsonValue> {
        let mut m = JsonMap::new();
        m.insert(
            "engine_version".into(),
            JsonValue::String(self.engine_version.clone()),
        );
        m.insert(
            "config_hash".into(),
            JsonValue::String(self.config_hash.clone()),
        );
        m
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// GeoJSON input
// ---------------------------------------------------------------------------

/// Read `blocks.geojson` and `districts.geojson` from a region directory.
pub fn read_region(
    dir: &Path,
    schema: &GroupSchema,
) -> Result<(Vec<SpatialUnit>, Vec<HistoricalDistrict>)> {
    let units = read_blocks(&dir.join(BLOCKS_FILE), schema)?;
    let districts = read_districts(&dir.join(DISTRICTS_FILE))?;
    Ok((units, districts))
}

pub fn read_blocks(path: &Path, schema: &GroupSchema) -> Result<Vec<SpatialUnit>> {
    let fc = read_feature_collection(path)?;
    let file = path.display().to_string();
    let mut units = Vec::with_capacity(fc.features.len());
    for (idx, feature) in fc.features.iter().enumerate() {
        let id = prop_string(feature, "id").ok_or_else(|| {
            Error::ingest(&file, format!("feature {idx}: missing string property `id`"))
        })?;
        let mut populations = BTreeMap::new();
        for label in schema.labels() {
            let count = prop_count(feature, label).ok_or_else(|| {
                Error::ingest(
                    &file,
                    format!("feature {idx} (`{id}`): missing or non-integer group property `{label}`"),
                )
            })?;
            populations.insert(label.clone(), count);
        }
        // `total` must be present per the file contract; the engine derives
        // its own total as the sum of the configured group counts.
        prop_count(feature, "total").ok_or_else(|| {
            Error::ingest(
                &file,
                format!("feature {idx} (`{id}`): missing or non-integer property `total`"),
            )
        })?;
        let geometry = feature_multipolygon(feature, &file, idx)?;
        units.push(SpatialUnit::new(id, geometry, populations));
    }
    if units.is_empty() {
        return Err(Error::ingest(&file, "no features"));
    }
    Ok(units)
}

pub fn read_districts(path: &Path) -> Result<Vec<HistoricalDistrict>> {
    let fc = read_feature_collection(path)?;
    let file = path.display().to_string();
    let mut districts = Vec::with_capacity(fc.features.len());
    for (idx, feature) in fc.features.iter().enumerate() {
        let label = prop_string(feature, "label").ok_or_else(|| {
            Error::ingest(&file, format!("feature {idx}: missing string property `label`"))
        })?;
        let grade = match prop_string(feature, "grade") {
            Some(g) => Some(g.parse::<Grade>().map_err(|e| {
                Error::ingest(&file, format!("feature {idx} (`{label}`): {e}"))
            })?),
            None => None,
        };
        let geometry = feature_multipolygon(feature, &file, idx)?;
        districts.push(HistoricalDistrict::new(label, grade, geometry));
    }
    if districts.is_empty() {
        return Err(Error::ingest(&file, "no features"));
    }
    Ok(districts)
}

fn read_feature_collection(path: &Path) -> Result<FeatureCollection> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::ingest(&file, format!("cannot read file: {e}")))?;
    let gj: GeoJson = text
        .parse()
        .map_err(|e| Error::ingest(&file, format!("invalid GeoJSON: {e}")))?;
    match gj {
        GeoJson::FeatureCollection(fc) => Ok(fc),
        _ => Err(Error::ingest(&file, "expected a FeatureCollection")),
    }
}

fn prop_string(feature: &Feature, key: &str) -> Option<String> {
    match feature.property(key) {
        Some(JsonValue::String(s)) => Some(s.clone()),
        Some(JsonValue::Number(n)) => Some(n.to_string()),
        _ => None,
    }
}

fn prop_count(feature: &Feature, key: &str) -> Option<u64> {
    match feature.property(key) {
        Some(JsonValue::Number(n)) => {
            if let Some(u) = n.as_u64() {
                Some(u)
            } else {
                // Accept integral floats (GIS exports often write 12.0).
                n.as_f64()
                    .filter(|f| *f >= 0.0 && f.fract() == 0.0)
                    .map(|f| f as u64)
            }
        }
        _ => None,
    }
}

fn feature_multipolygon(
    feature: &Feature,
    file: &str,
    idx: usize,
) -> Result<geo::MultiPolygon<f64>> {
    let geometry = feature
        .geometry
        .as_ref()
        .ok_or_else(|| Error::ingest(file, format!("feature {idx}: missing geometry")))?;
    let geom: geo::Geometry<f64> = geometry.value.clone().try_into().map_err(|e| {
        Error::ingest(file, format!("feature {idx}: cannot convert geometry: {e}"))
    })?;
    match geom {
        geo::Geometry::Polygon(p) => Ok(geo::MultiPolygon::new(vec![p])),
        geo::Geometry::MultiPolygon(mp) => Ok(mp),
        other => Err(Error::ingest(
            file,
            format!(
                "feature {idx}: expected Polygon or MultiPolygon, got {}",
                geometry_kind(&other)
            ),
        )),
    }
}

fn geometry_kind(g: &geo::Geometry<f64>) -> &'static str {
    match g {
        geo::Geometry::Point(_) => "Point",
        geo::Geometry::Line(_) => "Line",
        geo::Geometry::LineString(_) => "LineString",
        geo::Geometry::Polygon(_) => "Polygon",
        geo::Geometry::MultiPoint(_) => "MultiPoint",
        geo::Geometry::MultiLineString(_) => "MultiLineString",
        geo::Geometry::MultiPolygon(_) => "MultiPolygon",
        _ => "unsupported geometry",
    }
}

// ---------------------------------------------------------------------------
// GeoJSON output (synthetic regions)
// ---------------------------------------------------------------------------

/// Write a region directory in the same schema `read_region` consumes.
pub fn write_region(
    dir: &Path,
    units: &[SpatialUnit],
    districts: &[HistoricalDistrict],
    meta: &FileMeta,
) -> Result<()> {
    fs::create_dir_all(dir)?;

    let block_features: Vec<Feature> = units
        .iter()
        .map(|u| {
            let mut props = JsonMap::new();
            props.insert("id".into(), json!(u.id));
            for (label, count) in &u.populations {
                props.insert(label.clone(), json!(count));
            }
            props.insert("total".into(), json!(u.total));
            Feature {
                bbox: None,
                geometry: Some(geojson::Geometry::new(geojson::GeometryValue::from(&u.geometry))),
                id: None,
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect();
    write_feature_collection(&dir.join(BLOCKS_FILE), block_features, meta)?;

    let district_features: Vec<Feature> = districts
        .iter()
        .map(|d| {
            let mut props = JsonMap::new();
            props.insert("label".into(), json!(d.label));
            if let Some(grade) = d.grade {
                props.insert("grade".into(), json!(grade.to_string()));
            }
            Feature {
                bbox: None,
                geometry: Some(geojson::Geometry::new(geojson::GeometryValue::from(&d.geometry))),
                id: None,
                properties: Some(props),
                foreign_members: None,
            }
        })
        .collect();
    write_feature_collection(&dir.join(DISTRICTS_FILE), district_features, meta)
}

fn write_feature_collection(path: &Path, features: Vec<Feature>, meta: &FileMeta) -> Result<()> {
    let fc = FeatureCollection {
        bbox: None,
        features,
        foreign_members: Some(meta.foreign_members()),
    };
    write_atomic(path, &GeoJson::FeatureCollection(fc).to_string())
}

// ---------------------------------------------------------------------------
// Ingest artifacts
// ---------------------------------------------------------------------------

/// Audit CSV: unit_id, assigned label (or EXCLUDED), union fraction, best
/// single-district fraction.
pub fn write_crosswalk_csv(path: &Path, crosswalk: &Crosswalk, meta: &FileMeta) -> Result<()> {
    let mut out = meta.comment_header();
    out.push_str("unit_id,assigned,union_fraction,best_fraction\n");
    let mut ids: Vec<&String> = crosswalk
        .assignment
        .keys()
        .chain(crosswalk.excluded.iter())
        .collect();
    ids.sort();
    for id in ids {
        let assigned = crosswalk
            .assignment
            .get(id)
            .map(String::as_str)
            .unwrap_or(EXCLUDED_LABEL);
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            id,
            assigned,
            crosswalk.union_fraction(id),
            crosswalk.best_fraction(id)
        ));
    }
    write_atomic(path, &out)
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    engine_version: String,
    config_hash: String,
    nodes: Vec<String>,
    edges: Vec<(u32, u32)>,
    shared_perimeter: Vec<f64>,
}

pub fn write_graph_json(path: &Path, graph: &AdjacencyGraph, meta: &FileMeta) -> Result<()> {
    let file = GraphFile {
        engine_version: meta.engine_version.clone(),
        config_hash: meta.config_hash.clone(),
        nodes: graph.ids().to_vec(),
        edges: graph.edges().to_vec(),
        shared_perimeter: (0..graph.edge_count())
            .map(|i| graph.shared_perimeter(i))
            .collect(),
    };
    write_atomic(path, &serde_json::to_string_pretty(&file)?)
}

pub fn read_graph_json(path: &Path) -> Result<AdjacencyGraph> {
    let text = fs::read_to_string(path)?;
    let file: GraphFile = serde_json::from_str(&text)?;
    AdjacencyGraph::from_parts(file.nodes, file.edges, file.shared_perimeter)
}

/// The seed assignment: unit_id, district_label.
pub fn write_seed_map_csv(
    path: &Path,
    graph: &AdjacencyGraph,
    map: &DistrictMap,
    meta: &FileMeta,
) -> Result<()> {
    let mut out = meta.comment_header();
    out.push_str("unit_id,district_label\n");
    for node in 0..graph.node_count() as u32 {
        out.push_str(&format!(
            "{},{}\n",
            graph.id(node),
            map.label(map.district_of(node))
        ));
    }
    write_atomic(path, &out)
}

// ---------------------------------------------------------------------------
// Traces and manifest
// ---------------------------------------------------------------------------

pub fn trace_file_name(chain_id: u32) -> String {
    format!("chain_{chain_id:04}.csv")
}

/// One CSV per chain: step, H. Values print in shortest round-trip form so
/// re-reading reproduces the exact f64.
pub fn write_trace_csv(
    path: &Path,
    trace: &EntropyTrace,
    cfg: &ChainConfig,
    meta: &FileMeta,
) -> Result<()> {
    let mut out = meta.comment_header();
    out.push_str(&format!("# chain_id: {}\n", trace.chain_id));
    out.push_str(&format!("# base_seed: {}\n", trace.seed));
    out.push_str(&format!("# accept_count: {}\n", trace.accept_count));
    out.push_str(&format!("# reject_count: {}\n", trace.reject_count));
    out.push_str("step,H\n");
    for (i, v) in trace.values.iter().enumerate() {
        out.push_str(&format!("{},{}\n", trace.step_of(i, cfg), v));
    }
    write_atomic(path, &out)
}

pub fn read_trace_csv(path: &Path) -> Result<EntropyTrace> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut chain_id = None;
    let mut seed = None;
    let mut accept_count = 0;
    let mut reject_count = 0;
    let mut values = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "chain_id" => chain_id = value.parse().ok(),
                    "base_seed" => seed = value.parse().ok(),
                    "accept_count" => accept_count = value.parse().unwrap_or(0),
                    "reject_count" => reject_count = value.parse().unwrap_or(0),
                    _ => {}
                }
            }
            continue;
        }
        if line.is_empty() || line.starts_with("step,") {
            continue;
        }
        let (_, h) = line
            .split_once(',')
            .ok_or_else(|| Error::ingest(&file, format!("bad trace row `{line}`")))?;
        values.push(
            h.parse::<f64>()
                .map_err(|_| Error::ingest(&file, format!("bad entropy value `{h}`")))?,
        );
    }
    Ok(EntropyTrace {
        chain_id: chain_id.ok_or_else(|| Error::ingest(&file, "missing # chain_id header"))?,
        seed: seed.ok_or_else(|| Error::ingest(&file, "missing # base_seed header"))?,
        values,
        accept_count,
        reject_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainManifest {
    pub chain_id: u32,
    pub stream: u64,
    pub accept_count: u64,
    pub reject_count: u64,
    pub acceptance_rate: f64,
    pub n_values: usize,
}

/// Everything needed to regenerate the report from trace files alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub engine_version: String,
    pub config_hash: String,
    pub region: String,
    pub weighting: String,
    pub base_seed: u64,
    pub n_chains: u32,
    pub steps: u64,
    pub burn_in_steps: u64,
    pub thinning: u64,
    pub baseline: f64,
    pub chains: Vec<ChainManifest>,
    pub compactness: Option<CompactnessAudit>,
}

pub fn write_manifest(path: &Path, manifest: &EnsembleManifest) -> Result<()> {
    write_atomic(path, &serde_json::to_string_pretty(manifest)?)
}

pub fn read_manifest(path: &Path) -> Result<EnsembleManifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    engine_version: &'a str,
    config_hash: &'a str,
    region: &'a str,
    #[serde(flatten)]
    report: &'a EnsembleReport,
}

pub fn write_report_json(
    path: &Path,
    region: &str,
    report: &EnsembleReport,
    meta: &FileMeta,
) -> Result<()> {
    let file = ReportFile {
        engine_version: &meta.engine_version,
        config_hash: &meta.config_hash,
        region,
        report,
    };
    write_atomic(path, &serde_json::to_string_pretty(&file)?)
}

/// One row per region in the summary-table column order:
/// baseline, mean, absolute difference, t, p.
pub fn write_report_csv(
    path: &Path,
    region: &str,
    report: &EnsembleReport,
    meta: &FileMeta,
) -> Result<()> {
    let mut out = meta.comment_header();
    out.push_str("region,baseline,mean,abs_difference,t_value,p_value\n");
    out.push_str(&format!(
        "{},{:.6},{:.6},{:.6},{:.4},{}\n",
        region,
        report.baseline,
        report.ensemble_mean,
        report.abs_difference,
        report.t_value,
        report.p_display,
    ));
    write_atomic(path, &out)
}

pub fn write_rhat_csv(
    path: &Path,
    region: &str,
    report: &EnsembleReport,
    meta: &FileMeta,
) -> Result<()> {
    let mut out = meta.comment_header();
    out.push_str("region,r_hat,sqrt_r_hat,converged\n");
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    out.push_str(&format!(
        "{},{},{},{}\n",
        region,
        fmt(report.r_hat),
        fmt(report.sqrt_r_hat),
        report
            .converged
            .map(|c| c.to_string())
            .unwrap_or_default(),
    ));
    write_atomic(path, &out)
}

/// Placebo audit: per replicate, its own baseline against its own chain
/// distribution (central 95% bounds included).
pub fn write_placebo_baselines_csv(
    path: &Path,
    outcomes: &[PlaceboOutcome],
    meta: &FileMeta,
) -> Result<()> {
    let mut out = meta.comment_header();
    out.push_str("replicate,baseline,chain_mean,q025,q975,within_central_95\n");
    for o in outcomes {
        let mean = o.trace.values.iter().sum::<f64>() / o.trace.values.len().max(1) as f64;
        let q025 = crate::diagnostics::quantile(&o.trace.values, 0.025);
        let q975 = crate::diagnostics::quantile(&o.trace.values, 0.975);
        let within = o.baseline >= q025 && o.baseline <= q975;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            o.replicate, o.baseline, mean, q025, q975, within
        ));
    }
    write_atomic(path, &out)
}
