//! Topological degree of circle maps versus the nonlocal threshold integral
//! `δ ∬_{|φ(s)-φ(t)|>δ} ds dt / |s-t|²`, for piecewise-linear phase functions.
//!
//! The crate covers:
//!
//! * [`plfn`]: piecewise-linear functions, phase extensions, degree.
//! * [`intervals`]: exact measure algebra on finite interval unions.
//! * [`levels`]: discretized level sets, satisfied indices and their witnesses.
//! * [`integral`]: the threshold integral in closed form plus quadrature and
//!   Monte Carlo oracles.
//! * [`structure`]: canonical intervals, terminal intervals, the left/right
//!   growth chains, logarithmic-singularity witnesses and the degree bound.
//! * [`generators`]: deterministic test families.
//! * [`lemmas`]: executable checks of the structural lemmas.
//! * [`corpus`]: the standard test corpus.
//! * [`cli`]: the `deglab` command line.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod generators;
pub mod integral;
pub mod intervals;
pub mod io;
pub mod lemmas;
pub mod levels;
pub mod plfn;
pub mod structure;
pub mod sum;

pub use error::{Error, Result};
pub use exec::Exec;
pub use integral::{IntegralRequest, IntegralResult, Method, Square};
pub use intervals::IntervalSet;
pub use levels::{decompose, LevelDecomposition};
pub use plfn::{Interval, PLFunction, PhaseFunction};
