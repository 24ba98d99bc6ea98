//! Markov chain execution: burn-in, thinning, the validation loop, entropy
//! recording, and parallel multi-chain orchestration.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AdjacencyGraph;
use crate::metrics::{region_entropy, GroupSchema, Weighting};
use crate::partition::DistrictMap;
use crate::proposal::{ProposalConfig, Proposer};
use crate::validators::{check, validate, ValidatorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub steps: u64,
    /// Fraction of steps discarded from the front of the chain.
    pub burn_in_fraction: f64,
    /// Record entropy at every `thinning`-th step after burn-in.
    pub thinning: u64,
    pub n_chains: u32,
    pub base_seed: u64,
    /// Abort a chain after this many rejections in a row.
    pub max_consecutive_rejects: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            steps: 10_000,
            burn_in_fraction: 0.10,
            thinning: 5,
            n_chains: 100,
            base_seed: 0,
            max_consecutive_rejects: 10_000,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("chain.steps must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::Config(format!(
                "chain.burn_in_fraction must be in [0, 1), got {}",
                self.burn_in_fraction
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("chain.thinning must be positive".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::Config("chain.n_chains must be positive".into()));
        }
        if self.max_consecutive_rejects == 0 {
            return Err(Error::Config(
                "chain.max_consecutive_rejects must be positive".into(),
            ));
        }
        if self.retained_len() < 2 {
            return Err(Error::Config(format!(
                "steps/burn-in/thinning leave {} retained samples, need at least 2",
                self.retained_len()
            )));
        }
        Ok(())
    }

    /// Steps discarded before recording starts. The small epsilon keeps
    /// exact products like 10000 × 0.1 from rounding up.
    pub fn burn_in_steps(&self) -> u64 {
        let raw = (self.steps as f64 * self.burn_in_fraction - 1e-9).ceil();
        raw.max(0.0) as u64
    }

    /// Number of retained samples: floor((steps − burn_in)/thinning).
    pub fn retained_len(&self) -> u64 {
        (self.steps - self.burn_in_steps()) / self.thinning
    }
}

/// Retained entropy values for one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTrace {
    pub chain_id: u32,
    /// Base seed of the ensemble; the chain's stream id is `chain_id`.
    pub seed: u64,
    pub values: Vec<f64>,
    pub accept_count: u64,
    pub reject_count: u64,
}

impl EntropyTrace {
    pub fn acceptance_rate(&self) -> f64 {
        let total = self.accept_count + self.reject_count;
        if total == 0 {
            0.0
        } else {
            self.accept_count as f64 / total as f64
        }
    }

    /// Chain step at which the i-th retained value was recorded.
    pub fn step_of(&self, i: usize, cfg: &ChainConfig) -> u64 {
        cfg.burn_in_steps() + (i as u64 + 1) * cfg.thinning
    }
}

/// A finished chain: its trace plus the final map for the compactness audit.
#[derive(Debug, Clone)]
pub struct ChainOutcome {
    pub trace: EntropyTrace,
    pub final_map: DistrictMap,
}

/// Everything needed to continue a chain exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSnapshot {
    pub chain_id: u32,
    pub step: u64,
    pub assignment: Vec<u32>,
    pub values: Vec<f64>,
    pub accept_count: u64,
    pub reject_count: u64,
    pub consecutive_rejects: u64,
    pub rejected_lower_bound: u64,
    pub rejected_std: u64,
    pub accepted_after_burn_in: u64,
    /// ChaCha word position; restores the RNG bit-exactly.
    pub rng_word_pos: u128,
}

/// Independent per-chain RNG: one base seed, one ChaCha stream per chain.
pub fn stream_rng(base_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(stream);
    rng
}

/// Optional per-retained-map CSV export.
#[derive(Debug, Clone)]
pub struct MapDumpConfig {
    pub dir: PathBuf,
    pub engine_version: String,
    pub config_hash: String,
}

/// One Markov chain over a shared immutable graph. Strictly sequential;
/// distinct chains never share state.
pub struct ChainRunner<'a> {
    graph: &'a AdjacencyGraph,
    schema: &'a GroupSchema,
    weighting: Weighting,
    proposer: Proposer,
    validator_cfg: ValidatorConfig,
    cfg: ChainConfig,
    chain_id: u32,
    rng: ChaCha8Rng,
    current: DistrictMap,
    values: Vec<f64>,
    accept_count: u64,
    reject_count: u64,
    consecutive_rejects: u64,
    rejected_lower_bound: u64,
    rejected_std: u64,
    accepted_after_burn_in: u64,
    dump: Option<MapDumpConfig>,
}

impl<'a> ChainRunner<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        seed_map: &DistrictMap,
        graph: &'a AdjacencyGraph,
        schema: &'a GroupSchema,
        weighting: Weighting,
        proposal_cfg: &ProposalConfig,
        validator_cfg: ValidatorConfig,
        chain_cfg: ChainConfig,
        chain_id: u32,
    ) -> Result<Self> {
        chain_cfg.validate()?;
        if seed_map.step_index() != 0 {
            return Err(Error::Contract("seed map must be at step 0".into()));
        }
        if !validate(seed_map, &validator_cfg) {
            return Err(Error::Contract(
                "seed map does not pass the validators".into(),
            ));
        }
        Ok(ChainRunner {
            graph,
            schema,
            weighting,
            proposer: Proposer::new(*proposal_cfg),
            validator_cfg,
            cfg: chain_cfg,
            chain_id,
            rng: stream_rng(chain_cfg.base_seed, chain_id as u64),
            current: seed_map.clone(),
            values: Vec::with_capacity(chain_cfg.retained_len() as usize),
            accept_count: 0,
            reject_count: 0,
            consecutive_rejects: 0,
            rejected_lower_bound: 0,
            rejected_std: 0,
            accepted_after_burn_in: 0,
            dump: None,
        })
    }

    /// Rebuild a runner from a snapshot; continuing it reproduces the
    /// uninterrupted run bit for bit.
    #[allow(clippy::too_many_arguments)]
    pub fn resume(
        seed_map: &DistrictMap,
        graph: &'a AdjacencyGraph,
        schema: &'a GroupSchema,
        weighting: Weighting,
        proposal_cfg: &ProposalConfig,
        validator_cfg: ValidatorConfig,
        chain_cfg: ChainConfig,
        snapshot: ChainSnapshot,
    ) -> Result<Self> {
        let mut runner = ChainRunner::new(
            seed_map,
            graph,
            schema,
            weighting,
            proposal_cfg,
            validator_cfg,
            chain_cfg,
            snapshot.chain_id,
        )?;
        runner.current = seed_map.with_assignment(snapshot.assignment, snapshot.step)?;
        runner.rng.set_word_pos(snapshot.rng_word_pos);
        runner.values = snapshot.values;
        runner.accept_count = snapshot.accept_count;
        runner.reject_count = snapshot.reject_count;
        runner.consecutive_rejects = snapshot.consecutive_rejects;
        runner.rejected_lower_bound = snapshot.rejected_lower_bound;
        runner.rejected_std = snapshot.rejected_std;
        runner.accepted_after_burn_in = snapshot.accepted_after_burn_in;
        Ok(runner)
    }

    pub fn set_map_dump(&mut self, dump: MapDumpConfig) {
        self.dump = Some(dump);
    }

    /// Re-seed this runner onto a different ChaCha stream (the placebo
    /// runner keeps its streams disjoint from ensemble chains). Only valid
    /// before the first step.
    pub fn override_rng_stream(&mut self, stream: u64) {
        debug_assert_eq!(self.current.step_index(), 0, "stream change mid-chain");
        self.rng = stream_rng(self.cfg.base_seed, stream);
    }

    pub fn snapshot(&self) -> ChainSnapshot {
        ChainSnapshot {
            chain_id: self.chain_id,
            step: self.current.step_index(),
            assignment: self.current.assignment().to_vec(),
            values: self.values.clone(),
            accept_count: self.accept_count,
            reject_count: self.reject_count,
            consecutive_rejects: self.consecutive_rejects,
            rejected_lower_bound: self.rejected_lower_bound,
            rejected_std: self.rejected_std,
            accepted_after_burn_in: self.accepted_after_burn_in,
            rng_word_pos: self.rng.get_word_pos(),
        }
    }

    pub fn current(&self) -> &DistrictMap {
        &self.current
    }

    pub fn steps_done(&self) -> u64 {
        self.current.step_index()
    }

    /// One proposal step: propose, validate, accept or keep the prior state,
    /// then record entropy if this step is retained.
    pub fn step(&mut self) -> Result<()> {
        let candidate = self.proposer.propose(&self.current, self.graph, &mut self.rng);
        let outcome = check(&candidate, &self.validator_cfg);
        let past_burn_in = candidate.step_index() > self.cfg.burn_in_steps();
        if outcome.passed() {
            self.current = candidate;
            self.accept_count += 1;
            self.consecutive_rejects = 0;
            if past_burn_in {
                self.accepted_after_burn_in += 1;
            }
        } else {
            self.current.set_step_index(candidate.step_index());
            self.reject_count += 1;
            self.consecutive_rejects += 1;
            if outcome.failed_lower_bound() {
                self.rejected_lower_bound += 1;
            }
            if outcome.failed_std() {
                self.rejected_std += 1;
            }
            if self.consecutive_rejects >= self.cfg.max_consecutive_rejects {
                return Err(self.stuck());
            }
        }

        let t = self.current.step_index();
        let burn_in = self.cfg.burn_in_steps();
        if t > burn_in && (t - burn_in).is_multiple_of(self.cfg.thinning) {
            let entropy = region_entropy(&self.current, self.schema, self.weighting)?;
            self.values.push(entropy.h);
            if let Some(dump) = &self.dump {
                self.write_map_csv(dump, t)?;
            }
        }
        Ok(())
    }

    fn stuck(&self) -> Error {
        Error::StuckChain {
            chain_id: self.chain_id,
            consecutive_rejects: self.consecutive_rejects,
            rejected_lower_bound: self.rejected_lower_bound,
            rejected_std: self.rejected_std,
        }
    }

    /// Run to completion and emit the trace plus the final map.
    pub fn run(mut self) -> Result<ChainOutcome> {
        while self.current.step_index() < self.cfg.steps {
            self.step()?;
        }
        if self.accepted_after_burn_in == 0 {
            return Err(self.stuck());
        }
        debug_assert_eq!(self.values.len() as u64, self.cfg.retained_len());
        Ok(ChainOutcome {
            trace: EntropyTrace {
                chain_id: self.chain_id,
                seed: self.cfg.base_seed,
                values: self.values,
                accept_count: self.accept_count,
                reject_count: self.reject_count,
            },
            final_map: self.current,
        })
    }

    fn write_map_csv(&self, dump: &MapDumpConfig, step: u64) -> Result<()> {
        use std::io::Write;
        let dir = dump.dir.join(format!("chain_{:04}", self.chain_id));
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("step_{step:08}.csv"));
        let mut out = String::new();
        out.push_str(&format!("# engine_version: {}\n", dump.engine_version));
        out.push_str(&format!("# config_hash: {}\n", dump.config_hash));
        out.push_str("unit_id,district_label\n");
        for node in 0..self.graph.node_count() as u32 {
            out.push_str(&format!(
                "{},{}\n",
                self.graph.id(node),
                self.current.label(self.current.district_of(node))
            ));
        }
        let mut f = std::fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }
}

/// Run one chain and return its trace.
#[allow(clippy::too_many_arguments)]
pub fn run_chain(
    seed_map: &DistrictMap,
    graph: &AdjacencyGraph,
    schema: &GroupSchema,
    weighting: Weighting,
    proposal_cfg: &ProposalConfig,
    validator_cfg: ValidatorConfig,
    chain_cfg: ChainConfig,
    chain_id: u32,
) -> Result<EntropyTrace> {
    run_chain_outcome(
        seed_map,
        graph,
        schema,
        weighting,
        proposal_cfg,
        validator_cfg,
        chain_cfg,
        chain_id,
    )
    .map(|o| o.trace)
}

/// Run one chain and return its trace and final map.
#[allow(clippy::too_many_arguments)]
pub fn run_chain_outcome(
    seed_map: &DistrictMap,
    graph: &AdjacencyGraph,
    schema: &GroupSchema,
    weighting: Weighting,
    proposal_cfg: &ProposalConfig,
    validator_cfg: ValidatorConfig,
    chain_cfg: ChainConfig,
    chain_id: u32,
) -> Result<ChainOutcome> {
    ChainRunner::new(
        seed_map,
        graph,
        schema,
        weighting,
        proposal_cfg,
        validator_cfg,
        chain_cfg,
        chain_id,
    )?
    .run()
}

/// Run every chain of the ensemble in parallel. Chain i draws from ChaCha
/// stream i of the base seed; results come back in chain-id order no matter
/// how the workers are scheduled.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble_partial(
    seed_map: &DistrictMap,
    graph: &AdjacencyGraph,
    schema: &GroupSchema,
    weighting: Weighting,
    proposal_cfg: &ProposalConfig,
    validator_cfg: ValidatorConfig,
    chain_cfg: ChainConfig,
    dump: Option<&MapDumpConfig>,
) -> Vec<Result<ChainOutcome>> {
    (0..chain_cfg.n_chains)
        .into_par_iter()
        .map(|chain_id| {
            let mut runner = ChainRunner::new(
                seed_map,
                graph,
                schema,
                weighting,
                proposal_cfg,
                validator_cfg,
                chain_cfg,
                chain_id,
            )?;
            if let Some(d) = dump {
                runner.set_map_dump(d.clone());
            }
            runner.run()
        })
        .collect()
}

/// Like [`run_ensemble_partial`] but failing fast on the first chain error.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    seed_map: &DistrictMap,
    graph: &AdjacencyGraph,
    schema: &GroupSchema,
    weighting: Weighting,
    proposal_cfg: &ProposalConfig,
    validator_cfg: ValidatorConfig,
    chain_cfg: ChainConfig,
) -> Result<Vec<ChainOutcome>> {
    run_ensemble_partial(
        seed_map,
        graph,
        schema,
        weighting,
        proposal_cfg,
        validator_cfg,
        chain_cfg,
        None,
    )
    .into_iter()
    .collect()
}

/// Entropy of the untouched crosswalked historical map.
pub fn baseline_entropy(
    seed_map: &DistrictMap,
    schema: &GroupSchema,
    weighting: Weighting,
) -> Result<f64> {
    Ok(region_entropy(seed_map, schema, weighting)?.h)
}
