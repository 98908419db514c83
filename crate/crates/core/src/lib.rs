//! Parallel Glauber dynamics on weighted independent sets.
//!
//! This crate simulates and analyzes a discrete-time Markov chain over the
//! independent sets of a graph, where each vertex carries its own fugacity
//! and an independent *update set* of vertices refreshes in every slot. It
//! provides:
//!
//! - bitmask graphs (`n <= 64`) with generators, edge-list I/O, and
//!   independent-set enumeration ([`graph`]);
//! - the dynamics itself: update-set distributions, single-slot stepping,
//!   seeded trajectory simulation, and the exact one-step transition
//!   probability ([`dynamics`]);
//! - ground truth on small graphs: the product-form stationary distribution,
//!   dense transition matrices, detailed balance, and exact mixing times
//!   ([`exact`]);
//! - coupled chains under shared randomness, with exact adjacent-pair drift
//!   and coalescence experiments ([`coupling`]);
//! - calculators for every mixing-time bound, each reporting its
//!   applicability condition ([`bounds`], [`cube`]).

pub mod bounds;
pub mod coupling;
pub mod cube;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod graph;

pub use error::Error;
pub use graph::{Config, Graph, GraphKind};

pub type Result<T> = std::result::Result<T, Error>;
