//! Engine configuration: a single flat key = value document, with CLI
//! overrides applied on top.
//!
//! Grammar: one `key = value` pair per line; blank lines and lines starting
//! with `#` are ignored; later duplicates win. Unknown keys are errors.

use serde::{Deserialize, Serialize};

use crate::chain::ChainConfig;
use crate::error::{Error, Result};
use crate::metrics::{GroupSchema, Weighting};
use crate::proposal::ProposalConfig;
use crate::validators::ValidatorParams;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub weighting: Weighting,
    pub groups: GroupSchema,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EngineConfig {
    pub proposal: ProposalConfig,
    pub validators: ValidatorParams,
    pub chain: ChainConfig,
    pub metrics: MetricsConfig,
}

impl EngineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = EngineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            cfg.apply_kv(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        EngineConfig::parse(&text)
    }

    /// Set one configuration key. CLI flags funnel through here too.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{value}` for {key}")))
        }
        match key {
            "proposal.max_chunk_size" => self.proposal.max_chunk_size = num(key, value)?,
            "proposal.enforce_contiguity" => self.proposal.enforce_contiguity = num(key, value)?,
            "validators.min_population" => self.validators.min_population = num(key, value)?,
            "validators.std_lower_factor" => self.validators.std_lower_factor = num(key, value)?,
            "validators.std_upper_factor" => self.validators.std_upper_factor = num(key, value)?,
            "metrics.weighting" => self.metrics.weighting = value.parse()?,
            "metrics.groups" => {
                let labels: Vec<String> = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                self.metrics.groups = GroupSchema::new(labels)?;
            }
            "chain.steps" => self.chain.steps = num(key, value)?,
            "chain.burn_in_fraction" => self.chain.burn_in_fraction = num(key, value)?,
            "chain.thinning" => self.chain.thinning = num(key, value)?,
            "chain.n_chains" => self.chain.n_chains = num(key, value)?,
            "chain.base_seed" => self.chain.base_seed = num(key, value)?,
            "chain.max_consecutive_rejects" => {
                self.chain.max_consecutive_rejects = num(key, value)?
            }
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        if self.proposal.max_chunk_size == 0 {
            return Err(Error::Config(
                "proposal.max_chunk_size must be at least 1".into(),
            ));
        }
        if !(self.validators.std_lower_factor > 0.0
            && self.validators.std_lower_factor < 1.0
            && self.validators.std_upper_factor > 1.0)
        {
            return Err(Error::Config(format!(
                "validator std factors must satisfy 0 < lower < 1 < upper, got [{}, {}]",
                self.validators.std_lower_factor, self.validators.std_upper_factor
            )));
        }
        Ok(())
    }

    /// Canonical listing of every key, sorted, one per line. The config hash
    /// is computed over this, so it is stable across runs and formats.
    pub fn canonical_string(&self) -> String {
        let groups = self.metrics.groups.labels().join(",");
        let pairs = [
            ("chain.base_seed", self.chain.base_seed.to_string()),
            (
                "chain.burn_in_fraction",
                self.chain.burn_in_fraction.to_string(),
            ),
            (
                "chain.max_consecutive_rejects",
                self.chain.max_consecutive_rejects.to_string(),
            ),
            ("chain.n_chains", self.chain.n_chains.to_string()),
            ("chain.steps", self.chain.steps.to_string()),
            ("chain.thinning", self.chain.thinning.to_string()),
            ("metrics.groups", groups),
            ("metrics.weighting", self.metrics.weighting.to_string()),
            (
                "proposal.enforce_contiguity",
                self.proposal.enforce_contiguity.to_string(),
            ),
            (
                "proposal.max_chunk_size",
                self.proposal.max_chunk_size.to_string(),
            ),
            (
                "validators.min_population",
                self.validators.min_population.to_string(),
            ),
            (
                "validators.std_lower_factor",
                self.validators.std_lower_factor.to_string(),
            ),
            (
                "validators.std_upper_factor",
                self.validators.std_upper_factor.to_string(),
            ),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// FNV-1a hash of the canonical listing, as 16 hex digits.
    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.canonical_string().as_bytes()))
    }
}

/// FNV-1a hex digest of an arbitrary string; used to stamp outputs whose
/// provenance is not an [`EngineConfig`] (e.g. generator parameters).
pub fn hash_string(s: &str) -> String {
    format!("{:016x}", fnv1a64(s.as_bytes()))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
