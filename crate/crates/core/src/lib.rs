//! Additive energies of subsets of discrete cubes.
//!
//! The exponent `t_n` is the smallest `t` with `E(A) <= |A|^t` for every
//! `A` inside `{0, ..., n-1}^d` and every `d`. It equals `4 / q_n`, where
//! `q_n` is the largest `q` for which `||f^||_4 <= ||f||_q` holds for all
//! real `f` supported on an interval of length `n`. This crate computes
//! energies exactly, evaluates both sides of that inequality in
//! double-double precision, builds and checks explicit violations
//! (each a certified lower bound on `t_n`), and searches for extremal
//! functions numerically.

pub mod certificates;
pub mod cli;
pub mod continuum;
pub mod dd;
pub mod decimal;
pub mod discrete;
pub mod error;
pub mod experiments;
pub mod optimizer;
pub mod selftest;

pub use error::{Error, Result};

/// Version string recorded in run manifests.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
