//! End-to-end command-line driver: ingest → crosswalk → ensemble →
//! diagnostics → reports, plus the synthetic-region generator and the
//! placebo control.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use entromap::chain::{baseline_entropy, run_ensemble_partial, ChainOutcome, MapDumpConfig};
use entromap::config::EngineConfig;
use entromap::diagnostics::{summarize, CompactnessAudit};
use entromap::io::{self, FileMeta};
use entromap::metrics::compactness_audit;
use entromap::pipeline::{prepare_region, PreparedRegion};
use entromap::placebo::run_placebo;
use entromap::synth::{generate, SynthParams};
use entromap::validators::ValidatorConfig;
use entromap::Error as EngineError;

#[derive(Parser)]
#[command(name = "entromap", version, about = "Ensemble map sampling and segregation scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crosswalk a region's GeoJSON inputs into chain-ready artifacts.
    Ingest {
        /// Directory containing blocks.geojson and districts.geojson.
        #[arg(long)]
        region: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Flat key = value config file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the full pipeline and write traces plus reports.
    Run {
        #[arg(long)]
        region: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override chain.n_chains.
        #[arg(long)]
        chains: Option<u32>,
        /// Override chain.steps.
        #[arg(long)]
        steps: Option<u64>,
        /// Override chain.base_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Export every retained map as CSV under <out>/maps/.
        #[arg(long)]
        dump_maps: bool,
        /// Validate config and inputs, then stop before sampling.
        #[arg(long)]
        dry_run: bool,
    },
    /// Placebo control: shuffle counts within each group, one chain per
    /// replicate, each scored against its own baseline.
    Placebo {
        #[arg(long)]
        region: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        replicates: u32,
        /// One shared shuffle for all replicates instead of one per replicate.
        #[arg(long)]
        shared_shuffle: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Generate a synthetic grid region with planted district boundaries.
    Synth {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        /// Number of planted districts.
        #[arg(long)]
        districts: usize,
        /// Planted segregation level in [0, 1].
        #[arg(long)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate report files from an existing run directory.
    Report {
        /// A directory previously written by `run`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    init_thread_pool();
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<EngineError>() {
                Some(EngineError::StuckChain { .. }) => 2,
                Some(EngineError::DegenerateRegion(_)) => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

/// ENSEMBLE_THREADS caps the rayon worker pool.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("ENSEMBLE_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn dispatch() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest { region, out, config } => {
            let cfg = load_config(config.as_deref(), None, None, None)?;
            cmd_ingest(&region, &out, &cfg)
        }
        Command::Run {
            region,
            out,
            config,
            chains,
            steps,
            seed,
            dump_maps,
            dry_run,
        } => {
            let cfg = load_config(config.as_deref(), chains, steps, seed)?;
            cmd_run(&region, &out, &cfg, dump_maps, dry_run)
        }
        Command::Placebo {
            region,
            out,
            config,
            replicates,
            shared_shuffle,
            seed,
            steps,
        } => {
            let cfg = load_config(config.as_deref(), None, steps, seed)?;
            cmd_placebo(&region, &out, &cfg, replicates, shared_shuffle)
        }
        Command::Synth {
            rows,
            cols,
            districts,
            level,
            seed,
            out,
        } => cmd_synth(rows, cols, districts, level, seed, &out),
        Command::Report { out } => cmd_report(&out),
    }
}

/// File config (or defaults) with CLI overrides layered on top.
fn load_config(
    path: Option<&Path>,
    chains: Option<u32>,
    steps: Option<u64>,
    seed: Option<u64>,
) -> Result<EngineConfig> {
    let mut cfg = match path {
        Some(p) => EngineConfig::from_file(p)
            .with_context(|| format!("loading config {}", p.display()))?,
        None => EngineConfig::default(),
    };
    if let Some(n) = chains {
        cfg.chain.n_chains = n;
    }
    if let Some(s) = steps {
        cfg.chain.steps = s;
    }
    if let Some(s) = seed {
        cfg.chain.base_seed = s;
    }
    cfg.proposal.rng_seed = cfg.chain.base_seed;
    cfg.validate().map_err(anyhow::Error::from)?;
    Ok(cfg)
}

fn region_name(region: &Path) -> String {
    region
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "region".to_string())
}

fn load_region(region: &Path, cfg: &EngineConfig) -> Result<PreparedRegion> {
    let (units, districts) = io::read_region(region, &cfg.metrics.groups)?;
    let prepared = prepare_region(&units, &districts, &cfg.metrics.groups)?;
    Ok(prepared)
}

fn write_ingest_artifacts(out: &Path, prepared: &PreparedRegion, meta: &FileMeta) -> Result<()> {
    std::fs::create_dir_all(out)?;
    io::write_crosswalk_csv(&out.join("crosswalk.csv"), &prepared.crosswalk, meta)?;
    io::write_graph_json(&out.join("graph.json"), &prepared.graph, meta)?;
    io::write_seed_map_csv(
        &out.join("seed_map.csv"),
        &prepared.graph,
        &prepared.seed_map,
        meta,
    )?;
    Ok(())
}

fn cmd_ingest(region: &Path, out: &Path, cfg: &EngineConfig) -> Result<()> {
    let prepared = load_region(region, cfg)?;
    let meta = FileMeta::new(cfg.config_hash());
    write_ingest_artifacts(out, &prepared, &meta)?;
    println!(
        "ingested {}: {} units assigned, {} excluded, {} districts, {} graph edges",
        region_name(region),
        prepared.crosswalk.assignment.len(),
        prepared.crosswalk.excluded.len(),
        prepared.seed_map.z(),
        prepared.graph.edge_count(),
    );
    println!("artifacts written to {}", out.display());
    Ok(())
}

fn cmd_run(
    region: &Path,
    out: &Path,
    cfg: &EngineConfig,
    dump_maps: bool,
    dry_run: bool,
) -> Result<()> {
    let name = region_name(region);
    let prepared = load_region(region, cfg)?;
    let meta = FileMeta::new(cfg.config_hash());
    let schema = &cfg.metrics.groups;
    let weighting = cfg.metrics.weighting;

    let baseline = baseline_entropy(&prepared.seed_map, schema, weighting)?;
    let validator_cfg = ValidatorConfig::for_seed(&prepared.seed_map, cfg.validators)?;
    let seed_audit = compactness_audit(&prepared.seed_map, &prepared.unit_geometries)?;

    if dry_run {
        println!(
            "dry run ok: {} units, {} districts, baseline H = {baseline:.6}, s0 = {:.3}",
            prepared.graph.node_count(),
            prepared.seed_map.z(),
            validator_cfg.s0,
        );
        return Ok(());
    }

    write_ingest_artifacts(out, &prepared, &meta)?;

    let dump = dump_maps.then(|| MapDumpConfig {
        dir: out.join("maps"),
        engine_version: meta.engine_version.clone(),
        config_hash: meta.config_hash.clone(),
    });
    let results = run_ensemble_partial(
        &prepared.seed_map,
        &prepared.graph,
        schema,
        weighting,
        &cfg.proposal,
        validator_cfg,
        cfg.chain,
        dump.as_ref(),
    );

    // Persist every completed trace before surfacing any chain error.
    let mut outcomes: Vec<ChainOutcome> = Vec::new();
    let mut first_error: Option<EngineError> = None;
    for result in results {
        match result {
            Ok(outcome) => {
                io::write_trace_csv(
                    &out.join(io::trace_file_name(outcome.trace.chain_id)),
                    &outcome.trace,
                    &cfg.chain,
                    &meta,
                )?;
                outcomes.push(outcome);
            }
            Err(e) => first_error = first_error.or(Some(e)),
        }
    }

    let audit = if outcomes.is_empty() {
        None
    } else {
        let ends = outcomes
            .iter()
            .map(|o| compactness_audit(&o.final_map, &prepared.unit_geometries))
            .collect::<entromap::Result<Vec<_>>>()?;
        Some(CompactnessAudit::from_ends(seed_audit, &ends))
    };

    let manifest = io::EnsembleManifest {
        engine_version: meta.engine_version.clone(),
        config_hash: meta.config_hash.clone(),
        region: name.clone(),
        weighting: weighting.to_string(),
        base_seed: cfg.chain.base_seed,
        n_chains: cfg.chain.n_chains,
        steps: cfg.chain.steps,
        burn_in_steps: cfg.chain.burn_in_steps(),
        thinning: cfg.chain.thinning,
        baseline,
        chains: outcomes
            .iter()
            .map(|o| io::ChainManifest {
                chain_id: o.trace.chain_id,
                stream: o.trace.chain_id as u64,
                accept_count: o.trace.accept_count,
                reject_count: o.trace.reject_count,
                acceptance_rate: o.trace.acceptance_rate(),
                n_values: o.trace.values.len(),
            })
            .collect(),
        compactness: audit,
    };
    io::write_manifest(&out.join("manifest.json"), &manifest)?;

    if let Some(err) = first_error {
        eprintln!(
            "ensemble aborted: {} of {} chains completed; partial traces kept in {}",
            outcomes.len(),
            cfg.chain.n_chains,
            out.display()
        );
        return Err(err.into());
    }

    let traces: Vec<_> = outcomes.iter().map(|o| o.trace.clone()).collect();
    let total_steps: u64 = cfg.chain.steps * cfg.chain.n_chains as u64;
    let retained: usize = traces.iter().map(|t| t.values.len()).sum();
    let mean_acceptance =
        traces.iter().map(|t| t.acceptance_rate()).sum::<f64>() / traces.len() as f64;
    println!(
        "{total_steps} proposal steps across {} chains; {retained} retained entropy values; \
         mean acceptance rate {mean_acceptance:.3}",
        cfg.chain.n_chains
    );
    let report = summarize(&traces, baseline, audit)?;
    write_reports(out, &name, &report, &meta)?;
    print_report(&name, &report);
    println!("report written to {}", out.join("report.json").display());
    Ok(())
}

fn write_reports(
    out: &Path,
    name: &str,
    report: &entromap::diagnostics::EnsembleReport,
    meta: &FileMeta,
) -> Result<()> {
    io::write_report_json(&out.join("report.json"), name, report, meta)?;
    io::write_report_csv(&out.join("report.csv"), name, report, meta)?;
    io::write_rhat_csv(&out.join("rhat.csv"), name, report, meta)?;
    Ok(())
}

fn print_report(name: &str, report: &entromap::diagnostics::EnsembleReport) {
    println!(
        "{name}: baseline = {:.6}, ensemble mean = {:.6}, |AD| = {:.6}, t = {:.4}, p = {}",
        report.baseline, report.ensemble_mean, report.abs_difference, report.t_value,
        report.p_display,
    );
    match (report.r_hat, report.converged) {
        (Some(r), Some(c)) => println!(
            "R = {r:.4} ({}converged at 1.2), {} samples over {} chains",
            if c { "" } else { "NOT " },
            report.n_samples,
            report.n_chains
        ),
        _ => println!(
            "R not computed (single chain); {} samples",
            report.n_samples
        ),
    }
    if let Some(a) = &report.compactness {
        println!(
            "compactness audit: seed min/mean = {:.4}/{:.4}, end min/mean = {:.4}/{:.4} → {}",
            a.seed_min,
            a.seed_mean,
            a.end_min,
            a.end_mean,
            if a.pass { "pass" } else { "FAIL" }
        );
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PlaceboManifest {
    engine_version: String,
    config_hash: String,
    region: String,
    base_seed: u64,
    replicates: u32,
    shared_shuffle: bool,
    steps: u64,
}

fn cmd_placebo(
    region: &Path,
    out: &Path,
    cfg: &EngineConfig,
    replicates: u32,
    shared_shuffle: bool,
) -> Result<()> {
    let name = region_name(region);
    let (units, districts) = io::read_region(region, &cfg.metrics.groups)?;
    let outcomes = run_placebo(&units, &districts, cfg, replicates, shared_shuffle)?;
    let meta = FileMeta::new(cfg.config_hash());
    std::fs::create_dir_all(out)?;
    for o in &outcomes {
        io::write_trace_csv(
            &out.join(format!("placebo_{:04}.csv", o.replicate)),
            &o.trace,
            &cfg.chain,
            &meta,
        )?;
    }
    io::write_placebo_baselines_csv(&out.join("placebo_baselines.csv"), &outcomes, &meta)?;
    let manifest = PlaceboManifest {
        engine_version: meta.engine_version.clone(),
        config_hash: meta.config_hash.clone(),
        region: name.clone(),
        base_seed: cfg.chain.base_seed,
        replicates,
        shared_shuffle,
        steps: cfg.chain.steps,
    };
    std::fs::write(
        out.join("placebo_manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    let within = outcomes
        .iter()
        .filter(|o| {
            let q025 = entromap::diagnostics::quantile(&o.trace.values, 0.025);
            let q975 = entromap::diagnostics::quantile(&o.trace.values, 0.975);
            o.baseline >= q025 && o.baseline <= q975
        })
        .count();
    println!(
        "{name}: {within}/{} placebo baselines inside their own central 95%",
        outcomes.len()
    );
    println!("placebo outputs written to {}", out.display());
    Ok(())
}

fn cmd_synth(
    rows: usize,
    cols: usize,
    districts: usize,
    level: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let cfg = EngineConfig::default();
    let params = SynthParams {
        rows,
        cols,
        n_districts: districts,
        segregation_level: level,
        seed,
    };
    let region = generate(&params, &cfg.metrics.groups)?;
    // Stamp outputs with a hash of the generator parameters.
    let desc =
        format!("synth rows={rows} cols={cols} districts={districts} level={level} seed={seed}");
    let meta = FileMeta::new(entromap::config::hash_string(&desc));
    io::write_region(out, &region.units, &region.districts, &meta)?;
    println!(
        "synthetic region written to {}: {} units, {} districts, level {level}",
        out.display(),
        region.units.len(),
        region.districts.len()
    );
    Ok(())
}

fn cmd_report(out: &Path) -> Result<()> {
    let manifest = io::read_manifest(&out.join("manifest.json"))
        .with_context(|| format!("reading manifest from {}", out.display()))?;
    let mut traces = Vec::with_capacity(manifest.chains.len());
    for cm in &manifest.chains {
        traces.push(io::read_trace_csv(&out.join(io::trace_file_name(cm.chain_id)))?);
    }
    let meta = FileMeta {
        engine_version: entromap::ENGINE_VERSION.to_string(),
        config_hash: manifest.config_hash.clone(),
    };
    let report = summarize(&traces, manifest.baseline, manifest.compactness)?;
    write_reports(out, &manifest.region, &report, &meta)?;
    print_report(&manifest.region, &report);
    Ok(())
}
