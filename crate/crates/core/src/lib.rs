//! Discrete-event simulation of causal networks of two-level clocks.
//!
//! Excited nodes decay irreversibly and emit signals along directed arcs;
//! resonant signals re-excite ground-state detectors. Observable time
//! numbers exist only as labels formed at detectors by pairing an
//! absorption with a standard-clock pulse.
//!
//! - [`quantum`]: levels, lifetimes, absorption and decay
//! - [`entropy`]: per-decay entropy ledger
//! - [`network`]: nodes, arcs, clocks, CEN/SEN classification
//! - [`engine`]: the event loop and trace
//! - [`chronology`]: triplets, time labels, timelines
//! - [`io`]: network documents, JSONL traces, CSV reports

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chronology;
pub mod engine;
pub mod entropy;
pub mod io;
pub mod network;
pub mod quantum;

pub use engine::{simulate, Engine, EngineError, EventKind, EventTrace, Mode, RunConfig, RunResult, SimEvent};
pub use network::{validate_network, Network};
