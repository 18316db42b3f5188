//! Core engine for moral-epistemic agent simulation.
//!
//! The crate models agents that justify claims by elaborating *trust
//! lattices* (DAGs of statements grounded in anchors such as beliefs and
//! accepted authorities), filter and weigh evidence through virtue and bias
//! dials, revise beliefs under a minimal-change rule with configurable
//! stickiness, and interact over a social network where framing-gated
//! sharing, homophily rewiring, and tribe formation produce measurable
//! polarization. A lexicon profiler maps free text onto moral-foundation
//! signatures and matches it against bundled tribe templates.
//!
//! Modules:
//! - [`world`] — claims, ground-truth facts, sources, evidence, streams
//! - [`moral`] — foundation/domain profiles, game primitives, salience, alarm
//! - [`lattice`] — trust lattices: elaboration, evaluation, revision, archive
//! - [`agent`] — virtue/bias operators, path choice, belief formation
//! - [`tribes`] — propagation, homophily, tribe detection, polarization
//! - [`profiler`] — lexicon scoring, tribe templates, document reports
//! - [`scenario`] — scenario configs, population building, run outputs
//!
//! Every operation is deterministic for a fixed seed: randomness flows
//! through counter-derived ChaCha streams (see [`seeds`]) and all maps are
//! ordered.

pub mod agent;
pub mod lattice;
pub mod moral;
pub mod profiler;
pub mod scenario;
pub mod seeds;
pub mod tribes;
pub mod world;

use thiserror::Error;

/// Crate-wide error type.
///
/// `Validation` and `Config` variants indicate bad inputs (rejected before
/// any output is produced); the rest are runtime failures.
#[derive(Debug, Error)]
pub enum Error {
    /// A config or world failed validation; the message names the offending key.
    #[error("invalid config: {0}")]
    Config(String),
    /// A referenced id does not exist.
    #[error("unknown {kind} id: {id}")]
    UnknownId { kind: &'static str, id: String },
    /// A numeric field is outside its documented range.
    #[error("field {field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    /// A lattice operation received cyclic input.
    #[error("lattice contains a cycle involving {0}")]
    CyclicLattice(String),
    /// An operation requiring candidates received none.
    #[error("empty candidate set for {0}")]
    EmptyCandidates(&'static str),
    /// I/O failure while reading or writing run artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error is an input-validation failure (CLI exit code 2)
    /// rather than a runtime failure (exit code 1).
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::UnknownId { .. } | Error::OutOfRange { .. }
        )
    }
}
