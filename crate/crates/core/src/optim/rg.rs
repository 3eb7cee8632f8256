use super::Optimizer;
use crate::env::{Bounds, TraceVector};
use crate::rng::{seeded, StreamRng};

/// Independent uniform sampling; the baseline.
pub struct RandomSearch {
    bounds: Bounds,
    rng: StreamRng,
}

impl RandomSearch {
    pub fn new(bounds: Bounds, seed: u64) -> Self {
        Self { bounds, rng: seeded(seed) }
    }
}

impl Optimizer for RandomSearch {
    fn name(&self) -> &'static str {
        "rg"
    }

    fn propose(&mut self) -> TraceVector {
        self.bounds.sample_vector(&mut self.rng)
    }

    fn observe(&mut self, _vector: TraceVector, _score: Option<f64>) {}
}
