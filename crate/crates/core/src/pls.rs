//! Post-learning selection: spend a re-evaluation budget on the optimizer's
//! top candidates and return the one with the highest observed mean.
//!
//! Every algorithm here talks to the world through a sampler
//! `FnMut(arm) -> Option<f64>`: each call consumes one unit of budget and
//! returns a fresh noisy observation, or `None` if the evaluation failed
//! (the unit is still spent). Arms are indices into the candidate list.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::TraceVector;
use crate::optim::Evaluation;
use crate::stats::RunningStats;

/// Survivor count at or below which elimination stops.
pub const MRE_FINAL_SURVIVORS: usize = 5;
/// Observations per candidate before OCBA or TRE start allocating.
pub const WARMUP_SAMPLES: usize = 2;
pub const OCBA_VARIANCE_FLOOR: f64 = 1e-6;
pub const OCBA_DELTA_FLOOR: f64 = 1e-6;
pub const OCBA_DEFAULT_STEP: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlsError {
    #[error("no candidates")]
    NoCandidates,
    #[error("{algorithm} needs a budget of at least {needed} for {candidates} candidates, got {budget}")]
    InsufficientBudget { algorithm: PlsAlgorithm, needed: usize, budget: usize, candidates: usize },
    #[error("unknown selection algorithm `{0}`")]
    UnknownAlgorithm(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlsAlgorithm {
    SimpleMax,
    RoundRobin,
    Ocba,
    Tre,
    Mre,
}

impl PlsAlgorithm {
    pub const BUDGETED: [PlsAlgorithm; 4] = [PlsAlgorithm::RoundRobin, PlsAlgorithm::Ocba, PlsAlgorithm::Tre, PlsAlgorithm::Mre];

    pub fn name(self) -> &'static str {
        match self {
            PlsAlgorithm::SimpleMax => "simple_max",
            PlsAlgorithm::RoundRobin => "round_robin",
            PlsAlgorithm::Ocba => "ocba",
            PlsAlgorithm::Tre => "tre",
            PlsAlgorithm::Mre => "mre",
        }
    }

    /// Smallest budget the algorithm accepts for `n` candidates.
    pub fn min_budget(self, n: usize) -> usize {
        match self {
            PlsAlgorithm::SimpleMax => 0,
            PlsAlgorithm::RoundRobin => 1,
            PlsAlgorithm::Mre => n,
            PlsAlgorithm::Ocba | PlsAlgorithm::Tre => WARMUP_SAMPLES * n,
        }
    }

    fn check(self, n: usize, budget: usize) -> Result<(), PlsError> {
        if n == 0 {
            return Err(PlsError::NoCandidates);
        }
        let needed = self.min_budget(n);
        if budget < needed {
            return Err(PlsError::InsufficientBudget { algorithm: self, needed, budget, candidates: n });
        }
        Ok(())
    }
}

impl fmt::Display for PlsAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlsAlgorithm {
    type Err = PlsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "simple_max" | "simplemax" => PlsAlgorithm::SimpleMax,
            "round_robin" | "rr" => PlsAlgorithm::RoundRobin,
            "ocba" => PlsAlgorithm::Ocba,
            "tre" => PlsAlgorithm::Tre,
            "mre" => PlsAlgorithm::Mre,
            other => return Err(PlsError::UnknownAlgorithm(other.to_string())),
        })
    }
}

/// Outcome of a budgeted selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best: usize,
    pub stats: Vec<RunningStats>,
    /// Sampler calls made, successful or not.
    pub used: usize,
}

/// Bookkeeping shared by all algorithms.
struct Arms<'a> {
    stats: Vec<RunningStats>,
    used: usize,
    budget: usize,
    sampler: &'a mut dyn FnMut(usize) -> Option<f64>,
}

impl<'a> Arms<'a> {
    fn new(n: usize, budget: usize, sampler: &'a mut dyn FnMut(usize) -> Option<f64>) -> Self {
        Self { stats: vec![RunningStats::new(); n], used: 0, budget, sampler }
    }

    fn remaining(&self) -> usize {
        self.budget - self.used
    }

    /// Returns false once the budget is spent.
    fn pull(&mut self, arm: usize) -> bool {
        if self.used >= self.budget {
            return false;
        }
        self.used += 1;
        if let Some(x) = (self.sampler)(arm) {
            self.stats[arm].push(x);
        }
        true
    }

    fn mean(&self, arm: usize) -> f64 {
        self.stats[arm].mean().unwrap_or(f64::NEG_INFINITY)
    }

    /// Highest observed mean among `arms`; earlier arm wins ties.
    fn best_of(&self, arms: impl IntoIterator<Item = usize>) -> usize {
        let mut best: Option<(usize, f64)> = None;
        for a in arms {
            let m = self.mean(a);
            if best.is_none_or(|(_, bm)| m > bm) {
                best = Some((a, m));
            }
        }
        best.expect("non-empty arm set").0
    }

    /// Cycle over `arms` in order until the budget is spent.
    fn cycle(&mut self, arms: &[usize]) {
        if arms.is_empty() {
            return;
        }
        let mut j = 0;
        while self.pull(arms[j % arms.len()]) {
            j += 1;
        }
    }

    /// Up to `per_arm` round-robin passes over all arms, stopping early if
    /// the budget runs out mid-pass.
    fn warmup(&mut self, per_arm: usize) {
        let n = self.stats.len();
        for _ in 0..per_arm {
            for a in 0..n {
                if !self.pull(a) {
                    return;
                }
            }
        }
    }

    /// Sort `arms` by descending mean, earlier index first on ties.
    fn rank(&self, arms: &mut [usize]) {
        arms.sort_by(|&a, &b| self.mean(b).total_cmp(&self.mean(a)).then(a.cmp(&b)));
    }

    fn finish(self, best: usize) -> Selection {
        Selection { best, stats: self.stats, used: self.used }
    }
}

/// Index of the highest single observed score; earlier entry wins ties.
pub fn simple_max(scores: &[f64]) -> Result<usize, PlsError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(PlsError::NoCandidates)
}

/// Equal split: `budget / n` each, the first `budget % n` arms one extra.
pub fn round_robin(n: usize, budget: usize, sampler: &mut dyn FnMut(usize) -> Option<f64>) -> Result<Selection, PlsError> {
    PlsAlgorithm::RoundRobin.check(n, budget)?;
    let mut arms = Arms::new(n, budget, sampler);
    arms.cycle(&(0..n).collect::<Vec<_>>());
    let best = arms.best_of(0..n);
    Ok(arms.finish(best))
}

/// Multi-round elimination. Each round evaluates every survivor once and
/// drops the `floor(k/2)` lowest cumulative means; once at most
/// [`MRE_FINAL_SURVIVORS`] remain the rest of the budget cycles over them.
pub fn mre_select(n: usize, budget: usize, sampler: &mut dyn FnMut(usize) -> Option<f64>) -> Result<Selection, PlsError> {
    PlsAlgorithm::Mre.check(n, budget)?;
    let mut arms = Arms::new(n, budget, sampler);
    let survivors = mre_rounds(&mut arms, n, |_| {});
    arms.cycle(&survivors);
    let best = arms.best_of(survivors.iter().copied());
    Ok(arms.finish(best))
}

/// Survivor counts after each completed elimination round, for inspection.
pub fn mre_schedule(n: usize, budget: usize, sampler: &mut dyn FnMut(usize) -> Option<f64>) -> Result<Vec<usize>, PlsError> {
    PlsAlgorithm::Mre.check(n, budget)?;
    let mut arms = Arms::new(n, budget, sampler);
    let mut counts = vec![n];
    mre_rounds(&mut arms, n, |k| counts.push(k));
    Ok(counts)
}

fn mre_rounds(arms: &mut Arms<'_>, n: usize, mut on_round: impl FnMut(usize)) -> Vec<usize> {
    let mut survivors: Vec<usize> = (0..n).collect();
    while survivors.len() > MRE_FINAL_SURVIVORS {
        if arms.remaining() < survivors.len() {
            // Round cannot complete; the caller cycles what is left.
            break;
        }
        for &a in &survivors {
            arms.pull(a);
        }
        let drop = survivors.len() / 2;
        let mut ranked = survivors.clone();
        arms.rank(&mut ranked);
        ranked.truncate(ranked.len() - drop);
        // Keep original order so cycling is deterministic by index.
        ranked.sort_unstable();
        survivors = ranked;
        on_round(survivors.len());
    }
    survivors
}

/// Two-round elimination: two samples each, keep the top quarter, cycle.
pub fn tre_select(n: usize, budget: usize, sampler: &mut dyn FnMut(usize) -> Option<f64>) -> Result<Selection, PlsError> {
    PlsAlgorithm::Tre.check(n, budget)?;
    Ok(tre_inner(n, budget, sampler))
}

fn tre_inner(n: usize, budget: usize, sampler: &mut dyn FnMut(usize) -> Option<f64>) -> Selection {
    let mut arms = Arms::new(n, budget, sampler);
    arms.warmup(WARMUP_SAMPLES);
    let mut ranked: Vec<usize> = (0..n).collect();
    arms.rank(&mut ranked);
    ranked.truncate(n.div_ceil(4));
    ranked.sort_unstable();
    arms.cycle(&ranked);
    let best = arms.best_of(ranked.iter().copied());
    arms.finish(best)
}

/// Optimal computing budget allocation: after a two-sample warm-up, each
/// step spreads `step` more samples so that the running allocation tracks
///
/// ```text
/// N_i / N_j = (s_i / d_i)^2 / (s_j / d_j)^2        i, j != b
/// N_b       = s_b * sqrt(sum_{i != b} (N_i / s_i)^2)
/// ```
///
/// where `b` is the current best, `s` the sample standard deviation and
/// `d_i = mean_b - mean_i`. Variances and gaps are floored to keep the
/// ratios finite for deterministic or tied arms.
pub fn ocba_select(
    n: usize,
    budget: usize,
    step: usize,
    sampler: &mut dyn FnMut(usize) -> Option<f64>,
) -> Result<Selection, PlsError> {
    PlsAlgorithm::Ocba.check(n, budget)?;
    Ok(ocba_inner(n, budget, step, sampler))
}

fn ocba_inner(n: usize, budget: usize, step: usize, sampler: &mut dyn FnMut(usize) -> Option<f64>) -> Selection {
    let step = step.max(1);
    let mut arms = Arms::new(n, budget, sampler);
    arms.warmup(WARMUP_SAMPLES);
    let active: Vec<usize> = (0..n).filter(|&a| arms.stats[a].count() > 0).collect();
    while arms.remaining() > 0 && !active.is_empty() {
        let delta = step.min(arms.remaining());
        let extra = ocba_allocation(&arms.stats, &active, delta);
        for (k, &a) in active.iter().enumerate() {
            for _ in 0..extra[k] {
                arms.pull(a);
            }
        }
    }
    let best = if active.is_empty() { 0 } else { arms.best_of(active.iter().copied()) };
    arms.finish(best)
}

/// Splits `delta` new samples over `active` arms in proportion to each arm's
/// shortfall against its OCBA target for the enlarged total. Returns exactly
/// `delta` samples in total.
pub fn ocba_allocation(stats: &[RunningStats], active: &[usize], delta: usize) -> Vec<usize> {
    let k = active.len();
    let means: Vec<f64> = active.iter().map(|&a| stats[a].mean().unwrap_or(f64::NEG_INFINITY)).collect();
    let sd: Vec<f64> = active
        .iter()
        .map(|&a| stats[a].variance().unwrap_or(0.0).max(OCBA_VARIANCE_FLOOR).sqrt())
        .collect();
    let counts: Vec<f64> = active.iter().map(|&a| stats[a].count() as f64).collect();

    let mut b = 0;
    for i in 1..k {
        if means[i] > means[b] {
            b = i;
        }
    }
    let mut ratio = vec![0.0; k];
    for i in 0..k {
        if i != b {
            let gap = (means[b] - means[i]).max(OCBA_DELTA_FLOOR);
            ratio[i] = (sd[i] / gap).powi(2);
        }
    }
    let sum_sq: f64 = (0..k).filter(|&i| i != b).map(|i| (ratio[i] / sd[i]).powi(2)).sum();
    ratio[b] = if k == 1 { 1.0 } else { sd[b] * sum_sq.sqrt() };

    let total: f64 = counts.iter().sum::<f64>() + delta as f64;
    let ratio_sum: f64 = ratio.iter().sum();
    let mut shortfall: Vec<f64> = (0..k).map(|i| (total * ratio[i] / ratio_sum - counts[i]).max(0.0)).collect();
    let short_sum: f64 = shortfall.iter().sum();
    if !(short_sum > 0.0) || !short_sum.is_finite() {
        shortfall = vec![1.0; k];
    }
    largest_remainder(&shortfall, delta)
}

/// Integer apportionment of `total` proportional to `weights`; ties in the
/// fractional parts go to the lower index.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

/// Runs `algorithm` with its strict budget preconditions.
pub fn select(
    algorithm: PlsAlgorithm,
    n: usize,
    budget: usize,
    sampler: &mut dyn FnMut(usize) -> Option<f64>,
) -> Result<Selection, PlsError> {
    match algorithm {
        PlsAlgorithm::SimpleMax => simple_max_selection(n),
        PlsAlgorithm::RoundRobin => round_robin(n, budget, sampler),
        PlsAlgorithm::Mre => mre_select(n, budget, sampler),
        PlsAlgorithm::Tre => tre_select(n, budget, sampler),
        PlsAlgorithm::Ocba => ocba_select(n, budget, OCBA_DEFAULT_STEP, sampler),
    }
}

fn simple_max_selection(n: usize) -> Result<Selection, PlsError> {
    if n == 0 {
        return Err(PlsError::NoCandidates);
    }
    // Candidates arrive sorted by observed score, so the first is the max.
    Ok(Selection { best: 0, stats: vec![RunningStats::new(); n], used: 0 })
}

/// Like [`select`], but when the budget cannot cover a full two-sample
/// warm-up, OCBA and TRE run as many round-robin warm-up passes as the budget
/// allows instead of refusing. Used by the benchmark, which sweeps budgets
/// below `2n`.
pub fn select_budget_limited(
    algorithm: PlsAlgorithm,
    n: usize,
    budget: usize,
    sampler: &mut dyn FnMut(usize) -> Option<f64>,
) -> Result<Selection, PlsError> {
    if n == 0 {
        return Err(PlsError::NoCandidates);
    }
    match algorithm {
        PlsAlgorithm::Tre if budget < WARMUP_SAMPLES * n => Ok(tre_inner(n, budget, sampler)),
        PlsAlgorithm::Ocba if budget < WARMUP_SAMPLES * n => Ok(ocba_inner(n, budget, OCBA_DEFAULT_STEP, sampler)),
        _ => select(algorithm, n, budget, sampler),
    }
}

/// A trace under re-evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: usize,
    pub vector: TraceVector,
    /// Score the optimizer observed for this trace.
    pub observed: f64,
    pub stats: RunningStats,
}

/// Top `n` distinct vectors from an optimizer history, best first. Ties keep
/// history order; a duplicate vector keeps its best observation.
pub fn top_candidates(history: &[Evaluation], n: usize) -> Vec<Candidate> {
    let mut order: Vec<usize> = (0..history.len()).collect();
    order.sort_by(|&a, &b| history[b].score.total_cmp(&history[a].score).then(a.cmp(&b)));
    let mut out: Vec<Candidate> = Vec::with_capacity(n);
    for i in order {
        if out.len() == n {
            break;
        }
        let e = &history[i];
        if out.iter().any(|c| c.vector == e.vector) {
            continue;
        }
        out.push(Candidate { id: i, vector: e.vector.clone(), observed: e.score, stats: RunningStats::new() });
    }
    out
}

/// Selection over the optimizer's top candidates. SimpleMax returns the
/// highest observed score without sampling; the others re-evaluate through
/// `evaluate`, whose observations replace (not extend) the optimizer's.
pub fn select_candidate(
    algorithm: PlsAlgorithm,
    mut candidates: Vec<Candidate>,
    budget: usize,
    evaluate: &mut dyn FnMut(&TraceVector) -> Option<f64>,
) -> Result<(Candidate, usize), PlsError> {
    if candidates.is_empty() {
        return Err(PlsError::NoCandidates);
    }
    if algorithm == PlsAlgorithm::SimpleMax {
        let scores: Vec<f64> = candidates.iter().map(|c| c.observed).collect();
        let i = simple_max(&scores)?;
        return Ok((candidates.swap_remove(i), 0));
    }
    let vectors: Vec<TraceVector> = candidates.iter().map(|c| c.vector.clone()).collect();
    let mut sampler = |arm: usize| evaluate(&vectors[arm]);
    let sel = select_budget_limited(algorithm, candidates.len(), budget, &mut sampler)?;
    for (c, s) in candidates.iter_mut().zip(sel.stats) {
        c.stats = s;
    }
    Ok((candidates.swap_remove(sel.best), sel.used))
}

/// Monte-Carlo harness: arms with true means drawn uniformly from
/// `[0, 100)` and Gaussian observation noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStudy {
    pub arms: usize,
    pub trials: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for GaussianStudy {
    fn default() -> Self {
        Self { arms: 50, trials: 2000, sigma: 20.0, seed: 0 }
    }
}

/// What the study scores: a selection algorithm, or the true-argmax oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StudyArm {
    Oracle,
    Algorithm(PlsAlgorithm),
}

impl fmt::Display for StudyArm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StudyArm::Oracle => f.write_str("oracle"),
            StudyArm::Algorithm(a) => a.fmt(f),
        }
    }
}

impl GaussianStudy {
    /// True mean of the pick in each trial.
    ///
    /// Trial `t` draws its means from stream `(seed, 0, t)` and arm `i`'s
    /// noise from stream `(seed, 1 + i, t)`, so the `k`-th observation of an
    /// arm is the same number whichever algorithm asks for it and per-trial
    /// results for different algorithms are paired.
    pub fn run(&self, arm: StudyArm, budget: usize) -> Result<Vec<f64>, PlsError> {
        match arm {
            StudyArm::Oracle => self.run_with(|means, _| {
                Ok((0..means.len()).fold(0, |b, i| if means[i] > means[b] { i } else { b }))
            }),
            StudyArm::Algorithm(PlsAlgorithm::SimpleMax) => self.run_with(|means, sampler| {
                // One observation each, then the single best.
                let obs: Vec<f64> = (0..means.len()).map(|i| sampler(i).unwrap_or(f64::NEG_INFINITY)).collect();
                simple_max(&obs)
            }),
            StudyArm::Algorithm(a) => {
                self.run_with(|means, sampler| Ok(select_budget_limited(a, means.len(), budget, sampler)?.best))
            }
        }
    }

    /// True mean of the pick in each trial for an arbitrary selection rule,
    /// which sees the true means only so oracles can be expressed.
    pub fn run_with(
        &self,
        mut pick: impl FnMut(&[f64], &mut dyn FnMut(usize) -> Option<f64>) -> Result<usize, PlsError>,
    ) -> Result<Vec<f64>, PlsError> {
        let noise = Normal::new(0.0, self.sigma.max(0.0)).expect("finite sigma");
        (0..self.trials)
            .map(|t| {
                let mut rng = crate::rng::stream(self.seed, 0, t as u64);
                let means: Vec<f64> = (0..self.arms).map(|_| rng.random_range(0.0..100.0)).collect();
                let mut streams: Vec<_> =
                    (0..self.arms).map(|i| crate::rng::stream(self.seed, 1 + i as u64, t as u64)).collect();
                let mut sampler = |i: usize| Some(means[i] + noise.sample(&mut streams[i]));
                let chosen = pick(&means, &mut sampler)?;
                Ok(means[chosen])
            })
            .collect()
    }

    /// Mean and standard error of the selected true means.
    pub fn summarize(values: &[f64]) -> (f64, f64) {
        let mut s = RunningStats::new();
        values.iter().for_each(|&v| s.push(v));
        let mean = s.mean().unwrap_or(f64::NAN);
        let se = s.std_dev().map(|d| d / (values.len() as f64).sqrt()).unwrap_or(0.0);
        (mean, se)
    }
}
