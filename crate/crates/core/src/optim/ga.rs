use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::operators::{tournament, two_point_crossover, uniform_mutation};
use super::{sort_members, Member, OptimError, Optimizer};
use crate::env::{Bounds, TraceVector};
use crate::rng::{seeded, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub mut_prob: f64,
    pub elitism_count: usize,
    pub tournament_size: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self { population_size: 20, mut_prob: 0.1, elitism_count: 1, tournament_size: 2 }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        if self.population_size < 2 {
            return Err(OptimError::InvalidConfig("population_size must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.mut_prob) {
            return Err(OptimError::InvalidConfig("mut_prob must be in [0, 1]".into()));
        }
        if self.elitism_count >= self.population_size {
            return Err(OptimError::InvalidConfig("elitism_count must be below population_size".into()));
        }
        if self.tournament_size == 0 {
            return Err(OptimError::InvalidConfig("tournament_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Generational GA: tournament selection, two-point crossover, uniform
/// mutation, with the best `elitism_count` members carried over unevaluated.
pub struct Genetic {
    bounds: Bounds,
    cfg: GaConfig,
    rng: StreamRng,
    /// Last completed generation.
    current: Vec<Member>,
    /// Generation being assembled.
    next: Vec<Member>,
    pending: VecDeque<TraceVector>,
    observed: usize,
    generation: usize,
}

impl Genetic {
    pub fn new(bounds: Bounds, cfg: GaConfig, seed: u64) -> Result<Self, OptimError> {
        cfg.validate()?;
        if bounds.len() < 2 {
            return Err(OptimError::TooShort(bounds.len()));
        }
        Ok(Self {
            bounds,
            cfg,
            rng: seeded(seed),
            current: Vec::new(),
            next: Vec::new(),
            pending: VecDeque::new(),
            observed: 0,
            generation: 0,
        })
    }

    /// Completed generations so far, counting the one in progress.
    pub fn generation(&self) -> usize {
        self.generation
    }

    fn start_generation(&mut self) {
        if self.generation > 0 {
            self.current = std::mem::take(&mut self.next);
        }
        self.generation += 1;
        let pop = self.cfg.population_size;

        if self.current.len() < 2 {
            // Initial population, or too many skipped proposals to breed from.
            self.next = self.current.clone();
            for _ in self.current.len()..pop {
                let v = self.bounds.sample_vector(&mut self.rng);
                self.pending.push_back(v);
            }
            return;
        }

        sort_members(&mut self.current);
        self.next = self.current.iter().take(self.cfg.elitism_count).cloned().collect();
        let wanted = pop - self.next.len();
        let mut children = Vec::with_capacity(wanted + 1);
        while children.len() < wanted {
            let a = tournament(&self.current, self.cfg.tournament_size, &mut self.rng).vector.clone();
            let b = tournament(&self.current, self.cfg.tournament_size, &mut self.rng).vector.clone();
            let (c1, c2) = two_point_crossover(&a, &b, &mut self.rng).expect("same-length parents");
            children.push(uniform_mutation(&c1, &self.bounds, self.cfg.mut_prob, &mut self.rng));
            children.push(uniform_mutation(&c2, &self.bounds, self.cfg.mut_prob, &mut self.rng));
        }
        children.truncate(wanted);
        self.pending.extend(children);
    }
}

impl Optimizer for Genetic {
    fn name(&self) -> &'static str {
        "ga"
    }

    fn propose(&mut self) -> TraceVector {
        if self.pending.is_empty() {
            self.start_generation();
        }
        self.pending.pop_front().expect("generation has offspring")
    }

    fn observe(&mut self, vector: TraceVector, score: Option<f64>) {
        if let Some(score) = score {
            self.next.push(Member { vector, score, order: self.observed });
        }
        self.observed += 1;
    }
}
