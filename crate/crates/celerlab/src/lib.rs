//! Token routing and mechanism toolkit for payment state channel networks.
//!
//! The crate simulates a network of bi-directional payment channels in
//! discrete time slots. Each node keeps per-destination debt queues and a
//! per-channel imbalance counter; routers decide how many tokens move over
//! each directed link in a slot. Three router families are provided:
//!
//! * [`dbr`] — balanced backpressure routing driven by congestion-plus-imbalance
//!   link weights, with an exact small-instance reference solver,
//! * [`baseline`] — path-based routers (balance-aware shortest path and
//!   landmark routing) for comparison,
//! * [`oracle`] — a static-flow router built from a feasibility witness of the
//!   throughput region.
//!
//! [`engine`] ties a traffic model, a router, and the network state into a
//! deterministic slot loop and reports per-slot metrics plus stability and
//! balance verdicts. [`oracle`] also exposes the throughput-region
//! feasibility checker itself. [`econ`] implements the staking-economy
//! primitives: a reverse second-score auction for crowd-lent liquidity,
//! proportional lock-time mining rewards, and hash-ring guardian assignment
//! with fee splitting.
//!
//! Everything is deterministic: all randomness flows from an explicit
//! [`traffic::SplitMix64`] seed, and all collections iterate in a fixed order.
//! The `celerlab` binary exposes the batch CLI; the `examples/` directory
//! shows one runnable scenario per capability.

pub mod baseline;
pub mod cli;
pub mod config;
pub mod dbr;
pub mod econ;
pub mod engine;
pub mod formats;
pub mod net;
pub mod oracle;
mod simplex;
pub mod traffic;

pub use engine::{RunSummary, SimReport, Simulation, SlotMetrics};
pub use net::{ArrivalLedger, NetworkState, RoutingDecision, Topology};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, topology, or input file.
    #[error("config error: {0}")]
    Config(String),
    /// A routing decision violated a network constraint (router bug).
    #[error("infeasible decision: {0}")]
    Infeasible(net::Violation),
    /// Token conservation broke during a run (engine bug).
    #[error("conservation audit failed: {0}")]
    Conservation(String),
    /// Problem instance exceeds a configured size bound.
    #[error("instance too large: {0}")]
    SizeBound(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for bad input, 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::SizeBound(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Infeasible(_) | Error::Conservation(_) => 3,
        }
    }
}
