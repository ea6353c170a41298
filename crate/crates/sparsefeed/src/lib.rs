//! Deterministic pseudo-distributed simulation of sparsified stochastic
//! gradient methods with error feedback and Nesterov acceleration.
//!
//! The library simulates P workers inside one process. Each round, every
//! worker draws a stochastic gradient, corrects it with its accumulated
//! compression error, sparsifies the result, and the averaged sparse
//! messages drive the iterate update. Three families are provided:
//!
//! - `s_sgd_ef` — sparsified SGD with error feedback, plus its baselines
//!   (non-compressed parallel SGD, naive sparsified SGD, top-k with EF);
//! - `s_snag_ef` — the accelerated variant with two message channels and
//!   three cumulative error vectors, plus deterministic NAG;
//! - `reg_s_snag_ef` — recursive regularization for nonconvex objectives.
//!
//! Everything is replayable: randomness flows from streams keyed by
//! `(seed, round, worker, channel)`, so traces are bitwise reproducible and
//! independent of worker evaluation order.
//!
//! Entry points:
//! - [`objectives`] builds finite-sum problems (synthetic quadratic,
//!   multinomial logistic regression, a smooth nonconvex test objective);
//! - [`simulator::run_experiment`] runs a configured experiment to a
//!   [`trace::Trace`];
//! - [`diagnostics`] verifies the checkable properties the methods rest on
//!   (unbiasedness, second moments, memory orthogonality and scaling,
//!   NAG/momentum equivalence);
//! - [`report`] writes metrics CSVs, sweep summaries, and plot data.
//!
//! See `examples/` for one runnable program per capability, and the
//! `sparsefeed` binary for the `run` / `sweep` / `validate` / `compare`
//! subcommands.

// `!(x > 0.0)` guards reject NaN along with the out-of-range values;
// `x <= 0.0` would let NaN through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compression;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod objectives;
pub mod optimizers;
pub mod report;
pub mod rng;
pub mod simulator;
pub mod trace;
pub(crate) mod vecops;

pub use error::{Error, Result};
