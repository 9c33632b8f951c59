//! Symbolic and numeric toolkit for paracontact metric geometry.
//!
//! The crate is layered bottom-up:
//!
//! - [`symexpr`]: canonical symbolic scalar expressions;
//! - [`tensorcalc`]: charts, tensor fields, metrics;
//! - [`geometry`]: Levi-Civita connection, curvature, Lie and exterior calculus, pullbacks;
//! - [`paracontact`]: structure validators, the `h` operator, identity checks, flat diagnostics;
//! - [`catalog`]: built-in example structures;
//! - [`obstruction`]: residual minimization over parametrized structure families;
//! - [`io`], [`document`] and [`commands`]: structure files, report documents and CLI command logic.

pub mod symexpr;
pub mod tensorcalc;
pub mod geometry;
pub mod paracontact;
pub mod catalog;
pub mod obstruction;
pub mod io;
pub mod document;
pub mod commands;
