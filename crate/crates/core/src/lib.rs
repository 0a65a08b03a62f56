//! Compressive phase retrieval with sparse-graph codes.
//!
//! A `K`-sparse complex vector `x ∈ Cⁿ` is recovered, up to one global phase,
//! from magnitude-only measurements `y = |Ax|`. The measurement matrix is the
//! row tensor product of a four-row trigonometric modulation block with the
//! adjacency matrix of a random bipartite graph whose left degrees follow a
//! truncated harmonic law. Decoding is a peeling ("ball coloring") process:
//! a bin whose active neighbours are all known except one reveals the last
//! one through a guess-and-check solve of its four magnitude equations.
//!
//! Modules:
//!
//! * [`signal`]: sparse signals, seeds, global-phase-invariant error metrics.
//! * [`graph`]: degree distributions, the degree-cap selector and graph sampling.
//! * [`measurement`]: trigonometric rows and magnitude simulation.
//! * [`peeling`]: the guess-and-check solver and the coloring decoder.
//! * [`density`]: density evolution, fixed points and error-floor bounds.
//! * [`init`]: active-sensing and known-support seeding.
//! * [`twolayer`]: a linear sparse-graph compressive-sensing codec composed
//!   with a deterministic magnitude-to-phase layer.
//!
//! Signal indices are 1-based (`1..=n`); bin indices are 0-based positions in
//! the observation vector.
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod density;
pub mod error;
pub mod graph;
pub mod init;
pub mod measurement;
pub mod peeling;
pub mod signal;
pub mod twolayer;

pub use error::{Error, Result};
pub use signal::{Complex, RngSeed, SparseSignal};
