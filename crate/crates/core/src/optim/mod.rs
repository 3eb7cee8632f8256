//! Search strategies over [`TraceVector`]s.
//!
//! All optimizers implement the same propose/observe state machine and are
//! driven by [`run`], which owns the budget. Strategies never see traces or
//! executors, only vectors and the scores reported back for them.

mod bo;
mod eps;
mod forest;
mod ga;
pub mod operators;
mod rg;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Bounds, TraceVector};

pub use bo::{BayesOpt, BoConfig};
pub use eps::{EpsConfig, EpsilonGreedy, Step};
pub use forest::{Forest, ForestConfig};
pub use ga::{GaConfig, Genetic};
pub use operators::{crossover_at, two_point_crossover, uniform_mutation};
pub use rg::RandomSearch;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("crossover needs vectors of length at least 2, got {0}")]
    TooShort(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// One scored proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub vector: TraceVector,
    pub score: f64,
    /// Underlying executions behind the score.
    pub repetitions: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Evaluations(usize),
    WallClockMs(u64),
}

impl Budget {
    pub fn validate(&self) -> Result<(), OptimError> {
        match *self {
            Budget::Evaluations(0) | Budget::WallClockMs(0) => {
                Err(OptimError::InvalidConfig("budget must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Result of asking the objective for a score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub score: f64,
    pub repetitions: u32,
}

/// What optimizers maximise.
pub trait Objective {
    /// `Err` marks the proposal as skipped; it still counts against the budget.
    fn score(&mut self, vector: &TraceVector) -> Result<Scored, String>;
}

impl<F: FnMut(&TraceVector) -> f64> Objective for F {
    fn score(&mut self, vector: &TraceVector) -> Result<Scored, String> {
        Ok(Scored { score: self(vector), repetitions: 1 })
    }
}

pub trait Optimizer {
    fn name(&self) -> &'static str;
    fn propose(&mut self) -> TraceVector;
    /// Reports the outcome for the vector last proposed; `None` if skipped.
    fn observe(&mut self, vector: TraceVector, score: Option<f64>);
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub evaluations: Vec<Evaluation>,
    /// Objective calls made, including skipped ones.
    pub calls: usize,
    pub skipped: usize,
}

impl History {
    pub fn best(&self) -> Option<&Evaluation> {
        // Earliest wins ties.
        self.evaluations.iter().fold(None, |best: Option<&Evaluation>, e| match best {
            Some(b) if b.score >= e.score => Some(b),
            _ => Some(e),
        })
    }

    pub fn len(&self) -> usize {
        self.evaluations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.evaluations.is_empty()
    }
}

/// Drives `optimizer` against `objective` until the budget is spent.
pub fn run(optimizer: &mut dyn Optimizer, objective: &mut dyn Objective, budget: Budget) -> History {
    let start = Instant::now();
    let mut history = History::default();
    loop {
        let exhausted = match budget {
            Budget::Evaluations(n) => history.calls >= n,
            Budget::WallClockMs(ms) => start.elapsed() >= Duration::from_millis(ms),
        };
        if exhausted {
            break;
        }
        let vector = optimizer.propose();
        history.calls += 1;
        match objective.score(&vector) {
            Ok(s) => {
                history.evaluations.push(Evaluation { vector: vector.clone(), score: s.score, repetitions: s.repetitions });
                optimizer.observe(vector, Some(s.score));
            }
            Err(reason) => {
                log::warn!("{}: proposal {} skipped: {reason}", optimizer.name(), history.calls - 1);
                history.skipped += 1;
                optimizer.observe(vector, None);
            }
        }
    }
    history
}

/// A scored vector plus its evaluation order, used for deterministic
/// tie-breaking (earlier wins).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Member {
    pub vector: TraceVector,
    pub score: f64,
    pub order: usize,
}

impl Member {
    /// Whether `self` ranks strictly ahead of `other`.
    pub fn beats(&self, other: &Member) -> bool {
        self.score > other.score || (self.score == other.score && self.order < other.order)
    }
}

pub(crate) fn sort_members(members: &mut [Member]) {
    members.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.order.cmp(&b.order)));
}

/// Which strategy to run, with its settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Ga(#[serde(default)] GaConfig),
    Eps(#[serde(default)] EpsConfig),
    Bo(#[serde(default)] BoConfig),
    Rg,
}

impl OptimizerConfig {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::Ga(_) => "ga",
            OptimizerConfig::Eps(_) => "eps",
            OptimizerConfig::Bo(_) => "bo",
            OptimizerConfig::Rg => "rg",
        }
    }

    pub fn build(&self, bounds: Bounds, seed: u64) -> Result<Box<dyn Optimizer>, OptimError> {
        Ok(match self {
            OptimizerConfig::Ga(c) => Box::new(Genetic::new(bounds, c.clone(), seed)?),
            OptimizerConfig::Eps(c) => Box::new(EpsilonGreedy::new(bounds, c.clone(), seed)?),
            OptimizerConfig::Bo(c) => Box::new(BayesOpt::new(bounds, c.clone(), seed)?),
            OptimizerConfig::Rg => Box::new(RandomSearch::new(bounds, seed)),
        })
    }
}

pub fn run_ga(objective: &mut dyn Objective, bounds: &Bounds, cfg: &GaConfig, budget: Budget, seed: u64) -> Result<History, OptimError> {
    Ok(run(&mut Genetic::new(bounds.clone(), cfg.clone(), seed)?, objective, budget))
}

pub fn run_eps(objective: &mut dyn Objective, bounds: &Bounds, cfg: &EpsConfig, budget: Budget, seed: u64) -> Result<History, OptimError> {
    Ok(run(&mut EpsilonGreedy::new(bounds.clone(), cfg.clone(), seed)?, objective, budget))
}

pub fn run_bo(objective: &mut dyn Objective, bounds: &Bounds, cfg: &BoConfig, budget: Budget, seed: u64) -> Result<History, OptimError> {
    Ok(run(&mut BayesOpt::new(bounds.clone(), cfg.clone(), seed)?, objective, budget))
}

pub fn run_rg(objective: &mut dyn Objective, bounds: &Bounds, budget: Budget, seed: u64) -> History {
    run(&mut RandomSearch::new(bounds.clone(), seed), objective, budget)
}
