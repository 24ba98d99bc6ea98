//! Ensemble sampling over spatial district maps.
//!
//! The engine crosswalks a historical district layer onto modern spatial
//! units, runs chunk-flip Markov chains over the unit adjacency graph to
//! generate plausible counterfactual maps, scores every retained map with a
//! region-wide entropy segregation index, and tests the historical baseline
//! against the generated distribution.
//!
//! Pipeline: [`io::read_region`] → [`pipeline::prepare_region`] →
//! [`chain::run_ensemble`] → [`diagnostics::summarize`].

pub mod chain;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod partition;
pub mod pipeline;
pub mod placebo;
pub mod proposal;
pub mod synth;
pub mod validators;

pub use error::{Error, Result};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
