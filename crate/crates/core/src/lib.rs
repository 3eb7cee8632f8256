//! Adversarial network-trace search for congestion-control testing.
//!
//! The pieces, bottom up:
//!
//! - [`env`]: traces, bounds, and the integer-vector encoding.
//! - [`score`]: the reference/target gap and use-case scoring.
//! - [`sim`]: a seeded packet-level link simulator with toy CC models.
//! - [`exec`]: repeated execution, median aggregation, external executors.
//! - [`optim`]: GA, epsilon-greedy, BO and random search.
//! - [`pls`]: budgeted re-evaluation of the optimizer's top candidates.
//! - [`experiment`]: configuration and the end-to-end pipeline.

pub mod env;
pub mod exec;
pub mod experiment;
pub mod optim;
pub mod pls;
pub mod rng;
pub mod score;
pub mod sim;
pub mod stats;
