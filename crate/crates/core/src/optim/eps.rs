use rand::Rng;
use serde::{Deserialize, Serialize};

use super::operators::uniform_mutation;
use super::{sort_members, Member, OptimError, Optimizer};
use crate::env::{Bounds, TraceVector};
use crate::rng::{seeded, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsConfig {
    /// Probability of a fresh uniform sample instead of mutating an elite.
    pub epsilon: f64,
    pub elite_capacity: usize,
    /// Per-coordinate resampling probability on exploit steps.
    pub mutation_prob: f64,
}

impl Default for EpsConfig {
    fn default() -> Self {
        Self { epsilon: 0.3, elite_capacity: 10, mutation_prob: 0.3 }
    }
}

impl EpsConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if !(0.0..=1.0).contains(&self.epsilon) || !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(OptimError::InvalidConfig("epsilon and mutation_prob must be in [0, 1]".into()));
        }
        if self.elite_capacity == 0 {
            return Err(OptimError::InvalidConfig("elite_capacity must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Explore,
    /// Mutation of the elite member with this evaluation order.
    Exploit(usize),
}

/// Epsilon-greedy search over a bounded elite set.
pub struct EpsilonGreedy {
    bounds: Bounds,
    cfg: EpsConfig,
    rng: StreamRng,
    elite: Vec<Member>,
    observed: usize,
    steps: Vec<Step>,
}

impl EpsilonGreedy {
    pub fn new(bounds: Bounds, cfg: EpsConfig, seed: u64) -> Result<Self, OptimError> {
        cfg.validate()?;
        Ok(Self { bounds, cfg, rng: seeded(seed), elite: Vec::new(), observed: 0, steps: Vec::new() })
    }

    pub fn elite(&self) -> impl Iterator<Item = (&TraceVector, f64)> {
        self.elite.iter().map(|m| (&m.vector, m.score))
    }

    pub fn elite_len(&self) -> usize {
        self.elite.len()
    }

    /// What each proposal so far was.
    pub fn steps(&self) -> &[Step] {
        &self.steps
    }
}

impl Optimizer for EpsilonGreedy {
    fn name(&self) -> &'static str {
        "eps"
    }

    fn propose(&mut self) -> TraceVector {
        // An empty elite set has nothing to exploit.
        if self.elite.is_empty() || self.rng.random_bool(self.cfg.epsilon) {
            self.steps.push(Step::Explore);
            return self.bounds.sample_vector(&mut self.rng);
        }
        let parent = &self.elite[self.rng.random_range(0..self.elite.len())];
        self.steps.push(Step::Exploit(parent.order));
        uniform_mutation(&parent.vector, &self.bounds, self.cfg.mutation_prob, &mut self.rng)
    }

    fn observe(&mut self, vector: TraceVector, score: Option<f64>) {
        if let Some(score) = score {
            self.elite.push(Member { vector, score, order: self.observed });
            sort_members(&mut self.elite);
            self.elite.truncate(self.cfg.elite_capacity);
        }
        self.observed += 1;
    }
}
