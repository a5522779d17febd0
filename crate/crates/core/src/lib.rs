//! Exact analysis of small finite Markov chains.
//!
//! Kernels and generators live in [`chain`], metrics in [`metric`], optimal
//! transport, Ollivier curvature and sectional certificates in [`transport`],
//! relative entropy and the contraction constant in [`entropy`]. [`bounds`]
//! turns these into decay curves, [`models`] builds the standard families and
//! [`coupling_sim`] estimates coalescence tails by Monte Carlo.

pub mod bounds;
pub mod chain;
pub mod cli;
pub mod coupling_sim;
pub mod entropy;
pub mod error;
pub mod metric;
pub mod models;
pub mod spec;
pub mod transport;

pub use error::{Error, Result};
