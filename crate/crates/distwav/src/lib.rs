//! Distributed nonparametric regression under per-machine bit budgets.
//!
//! The library simulates `m` machines that each observe a shard of a random
//! design regression sample, estimate wavelet coefficients of the unknown
//! regression function locally, quantize them to finite-bit strings, and ship
//! them to a central machine that aggregates and (optionally) selects a
//! resolution level by a modified Lepski rule. A theory module provides the
//! matching minimax reference quantities and a harness runs seeded Monte
//! Carlo sweeps that verify the predicted risk exponents.
//!
//! Start with the `examples/` directory: each example exercises one
//! capability end to end. The `distwav` binary exposes the same flows as
//! subcommands driven by a TOML config.

pub mod bitcodec;
pub mod error;
pub mod harness;
pub mod lepski;
pub mod protocol;
pub mod rng;
pub mod schedule;
pub mod wavelet;

pub use error::{Error, Result};
pub mod cli;
pub mod config;
pub mod signal;
pub mod theory;
pub mod transcript;
