use serde::{Deserialize, Serialize};

use super::forest::{Forest, ForestConfig};
use super::{OptimError, Optimizer};
use crate::env::{Bounds, TraceVector};
use crate::rng::{seeded, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    pub surrogate_trees: usize,
    pub lcb_kappa: f64,
    pub warmup_samples: usize,
    /// Uniform candidates scored by the acquisition function per step.
    pub pool_size: usize,
    pub min_samples_leaf: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self { surrogate_trees: 50, lcb_kappa: 1.96, warmup_samples: 20, pool_size: 500, min_samples_leaf: 3 }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if self.warmup_samples == 0 || self.pool_size == 0 || self.surrogate_trees == 0 {
            return Err(OptimError::InvalidConfig("warmup_samples, pool_size and surrogate_trees must be positive".into()));
        }
        if !(self.lcb_kappa >= 0.0) {
            return Err(OptimError::InvalidConfig("lcb_kappa must be non-negative".into()));
        }
        Ok(())
    }
}

/// Bayesian optimisation with a tree-ensemble surrogate. Proposals minimise
/// the lower confidence bound of the negated score,
/// `-mean(x) - kappa * std(x)`, over a pool of uniform candidates.
pub struct BayesOpt {
    bounds: Bounds,
    cfg: BoConfig,
    rng: StreamRng,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    surrogate_steps: usize,
}

impl BayesOpt {
    pub fn new(bounds: Bounds, cfg: BoConfig, seed: u64) -> Result<Self, OptimError> {
        cfg.validate()?;
        Ok(Self { bounds, cfg, rng: seeded(seed), xs: Vec::new(), ys: Vec::new(), surrogate_steps: 0 })
    }

    /// Proposals that came from the surrogate rather than uniform sampling.
    pub fn surrogate_steps(&self) -> usize {
        self.surrogate_steps
    }

    fn features(&self, v: &TraceVector) -> Vec<f64> {
        // Scale to [0, 1] so no coordinate dominates by range.
        v.values()
            .iter()
            .zip(self.bounds.lower().iter().zip(self.bounds.upper()))
            .map(|(&x, (&l, &u))| if u > l { (x - l) as f64 / (u - l) as f64 } else { 0.0 })
            .collect()
    }

    fn forest_config(&self) -> ForestConfig {
        ForestConfig { trees: self.cfg.surrogate_trees, min_samples_leaf: self.cfg.min_samples_leaf, ..ForestConfig::default() }
    }
}

/// Index of the pool entry with the smallest `-mean - kappa * std`; first
/// wins ties.
pub fn lcb_argmin(forest: &Forest, pool: &[Vec<f64>], kappa: f64) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, x) in pool.iter().enumerate() {
        let (m, s) = forest.predict(x);
        let lcb = -m - kappa * s;
        if lcb < best.1 {
            best = (i, lcb);
        }
    }
    best.0
}

impl Optimizer for BayesOpt {
    fn name(&self) -> &'static str {
        "bo"
    }

    fn propose(&mut self) -> TraceVector {
        let degenerate = self.ys.iter().all(|&y| y == self.ys[0]);
        if self.ys.len() < self.cfg.warmup_samples || self.ys.is_empty() || degenerate {
            return self.bounds.sample_vector(&mut self.rng);
        }
        let forest = Forest::fit(&self.xs, &self.ys, &self.forest_config(), &mut self.rng);
        let pool: Vec<TraceVector> = (0..self.cfg.pool_size).map(|_| self.bounds.sample_vector(&mut self.rng)).collect();
        let feats: Vec<Vec<f64>> = pool.iter().map(|v| self.features(v)).collect();
        let i = lcb_argmin(&forest, &feats, self.cfg.lcb_kappa);
        self.surrogate_steps += 1;
        pool.into_iter().nth(i).expect("pool index")
    }

    fn observe(&mut self, vector: TraceVector, score: Option<f64>) {
        if let Some(s) = score {
            self.xs.push(self.features(&vector));
            self.ys.push(s);
        }
    }
}
