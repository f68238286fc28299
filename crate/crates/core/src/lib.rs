//! Experience-score-driven reranking on a synthetic long-tail search
//! simulator.

pub mod config;
pub mod error;
pub mod grpo;
pub mod io;
pub mod metrics;
mod nn;
pub mod ordering;
pub mod pipeline;
pub mod plackett_luce;
pub mod policy;
pub mod scorer;
pub mod seed;
pub mod simulator;
pub mod types;

pub use error::{Error, Result};
