//! Repeated execution of reference and target on one trace, aggregation into
//! a score, and the executor implementations.
//!
//! Seeds come from [`run_seed`]:
//!
//! ```text
//! seed = master + (phase << 56) + (index << 20) + repetition   (wrapping)
//! ```
//!
//! with one phase per pipeline stage ([`Phase`]). While `index < 2^36` and
//! `repetition < 2^20`, seeds of different phases never coincide, so final
//! reevaluations never reuse a learning-phase seed.

mod external;

use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Trace;
use crate::score::{eq1_score, median, Party, PerfSummary, Run, ScoreError, ScoreSpec};
use crate::sim::{capacity_oracle, simulate, CcKind, SimConfig, SimError};
use crate::stats::RunningStats;

pub use external::{parse_result, ExternalExecutor, RESULT_KEYS};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{0}")]
    Unsupported(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("command exited with status {code:?}: {stderr}")]
    NonZeroExit { code: Option<i32>, stderr: String },
    #[error("command timed out after {ms} ms")]
    Timeout { ms: u64 },
    #[error("result file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("{failed} of {total} {run} repetitions failed")]
    TooManyFailures { run: Run, failed: usize, total: usize },
    #[error("invalid config: {0}")]
    Config(String),
}

/// Runs one protocol (or a pair sharing the link) on one trace.
pub trait Executor: Sync {
    fn run(&self, trace: &Trace, run: Run, seed: u64) -> Result<PerfSummary, ExecError>;

    /// True when the seed cannot change the outcome.
    fn is_deterministic(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Not a sender: the trace's available bandwidth.
    CapacityOracle,
    Reno,
    Vegas,
    BbrLike,
}

impl Protocol {
    pub fn cc(self) -> Option<CcKind> {
        match self {
            Protocol::CapacityOracle => None,
            Protocol::Reno => Some(CcKind::Reno),
            Protocol::Vegas => Some(CcKind::Vegas),
            Protocol::BbrLike => Some(CcKind::BbrLike),
        }
    }
}

/// The built-in simulator as an executor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimExecutor {
    pub reference: Protocol,
    pub target: Protocol,
    #[serde(default)]
    pub competitor: Option<Protocol>,
    #[serde(default)]
    pub sim: SimConfig,
}

impl SimExecutor {
    pub fn new(reference: Protocol, target: Protocol) -> Self {
        Self { reference, target, competitor: None, sim: SimConfig::default() }
    }

    pub fn with_jitter(mut self, sigma_ms: f64) -> Self {
        self.sim.jitter_sigma_ms = sigma_ms;
        self
    }

    fn protocol(&self, party: Party) -> Result<Protocol, ExecError> {
        match party {
            Party::Reference => Ok(self.reference),
            Party::Target => Ok(self.target),
            Party::Competitor => self.competitor.ok_or_else(|| ExecError::Config("no competitor protocol configured".into())),
        }
    }

    fn sender(&self, party: Party) -> Result<CcKind, ExecError> {
        self.protocol(party)?
            .cc()
            .ok_or_else(|| ExecError::Unsupported(format!("the {party} is the capacity oracle and cannot share a link")))
    }
}

impl Executor for SimExecutor {
    fn run(&self, trace: &Trace, run: Run, seed: u64) -> Result<PerfSummary, ExecError> {
        match run {
            Run::Solo(p) => match self.protocol(p)?.cc() {
                None => Ok(capacity_oracle(trace)),
                Some(cc) => Ok(simulate(trace, &[cc], seed, &self.sim)?.flows[0].perf),
            },
            Run::Shared { measured, against } => {
                let models = [self.sender(measured)?, self.sender(against)?];
                Ok(simulate(trace, &models, seed, &self.sim)?.flows[0].perf)
            }
        }
    }

    fn is_deterministic(&self) -> bool {
        self.sim.is_deterministic()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Optimizer = 1,
    Selection = 2,
    Final = 3,
}

pub fn run_seed(master: u64, phase: Phase, index: u64, repetition: u32) -> u64 {
    master
        .wrapping_add((phase as u64) << 56)
        .wrapping_add(index << 20)
        .wrapping_add(u64::from(repetition))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub repetitions: u32,
    pub max_concurrent: usize,
    pub score_spec: ScoreSpec,
    /// Use a single repetition when the executor is deterministic.
    #[serde(default = "yes")]
    pub collapse_deterministic: bool,
    pub master_seed: u64,
}

fn yes() -> bool {
    true
}

pub const DEFAULT_REPETITIONS: u32 = 5;

impl EvalConfig {
    pub fn new(score_spec: ScoreSpec, master_seed: u64) -> Self {
        Self { repetitions: DEFAULT_REPETITIONS, max_concurrent: 1, score_spec, collapse_deterministic: true, master_seed }
    }

    pub fn validate(&self) -> Result<(), ExecError> {
        if self.repetitions == 0 {
            return Err(ExecError::Config("repetitions must be at least 1".into()));
        }
        if self.max_concurrent == 0 {
            return Err(ExecError::Config("max_concurrent must be at least 1".into()));
        }
        self.score_spec.validate()?;
        Ok(())
    }

    pub fn effective_repetitions(&self, executor: &dyn Executor) -> u32 {
        if self.collapse_deterministic && executor.is_deterministic() {
            1
        } else {
            self.repetitions
        }
    }
}

/// One executor invocation and what came of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: Run,
    pub repetition: u32,
    pub seed: u64,
    pub perf: Option<PerfSummary>,
    pub error: Option<String>,
}

/// The outcome of scoring one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    /// Median of the reference role's per-run metric.
    pub reference_score: f64,
    pub target_score: f64,
    pub score: f64,
    /// Repetitions requested per role.
    pub repetitions: u32,
    pub runs: Vec<RunRecord>,
}

impl Assessment {
    pub fn executor_runs(&self) -> usize {
        self.runs.len()
    }
}

/// Runs `jobs` on up to `max_concurrent` threads; results come back in job
/// order whatever the schedule.
fn run_all(
    executor: &dyn Executor,
    trace: &Trace,
    jobs: &[(Run, u64)],
    max_concurrent: usize,
) -> Vec<Result<PerfSummary, ExecError>> {
    if max_concurrent <= 1 || jobs.len() <= 1 {
        return jobs.iter().map(|&(run, seed)| executor.run(trace, run, seed)).collect();
    }
    let next = Mutex::new(0usize);
    let slots: Vec<Mutex<Option<Result<PerfSummary, ExecError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..max_concurrent.min(jobs.len()) {
            s.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("job counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(&(run, seed)) = jobs.get(i) else { break };
                let r = executor.run(trace, run, seed);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("result slot").expect("every job ran")).collect()
}

/// Scores `trace`: each required run is repeated, per-role metrics are
/// reduced to medians, and the medians are compared.
///
/// `index` distinguishes calls within a phase so each gets fresh seeds.
pub fn evaluate(
    trace: &Trace,
    cfg: &EvalConfig,
    executor: &dyn Executor,
    phase: Phase,
    index: u64,
) -> Result<Assessment, ExecError> {
    cfg.validate()?;
    trace.check().map_err(SimError::from)?;
    let reps = cfg.effective_repetitions(executor);
    let (ref_run, tgt_run) = cfg.score_spec.role_runs();
    let mut jobs = Vec::with_capacity(2 * reps as usize);
    for (role, run) in [ref_run, tgt_run].into_iter().enumerate() {
        for rep in 0..reps {
            jobs.push((role, run, rep, run_seed(cfg.master_seed, phase, index, rep)));
        }
    }
    let calls: Vec<(Run, u64)> = jobs.iter().map(|&(_, run, _, seed)| (run, seed)).collect();
    let results = run_all(executor, trace, &calls, cfg.max_concurrent);

    let mut runs = Vec::with_capacity(jobs.len());
    let mut metrics: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (&(role, run, rep, seed), result) in jobs.iter().zip(results) {
        let record = match result.and_then(|p| Ok((p, cfg.score_spec.role_metric(run, &p, trace)?))) {
            Ok((perf, m)) => {
                metrics[role].push(m);
                RunRecord { run, repetition: rep, seed, perf: Some(perf), error: None }
            }
            Err(e) => {
                log::warn!("{run} repetition {rep} (seed {seed}) failed: {e}");
                RunRecord { run, repetition: rep, seed, perf: None, error: Some(e.to_string()) }
            }
        };
        runs.push(record);
    }
    for (role, run) in [(0, ref_run), (1, tgt_run)] {
        let failed = reps as usize - metrics[role].len();
        if 2 * failed > reps as usize {
            return Err(ExecError::TooManyFailures { run, failed, total: reps as usize });
        }
    }
    let reference = median(&metrics[0])?;
    let target = median(&metrics[1])?;
    Ok(Assessment {
        reference_score: reference,
        target_score: target,
        score: eq1_score(reference, target, cfg.score_spec.direction),
        repetitions: reps,
        runs,
    })
}

/// Independent re-scoring of a chosen trace with final-phase seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reevaluation {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single round.
    pub std_dev: f64,
    pub rounds: usize,
    pub scores: Vec<f64>,
    pub executor_runs: usize,
}

pub fn reevaluate_final(trace: &Trace, cfg: &EvalConfig, executor: &dyn Executor, rounds: usize) -> Result<Reevaluation, ExecError> {
    if rounds == 0 {
        return Err(ExecError::Config("reevaluation needs at least one round".into()));
    }
    let mut stats = RunningStats::new();
    let mut scores = Vec::with_capacity(rounds);
    let mut executor_runs = 0;
    for r in 0..rounds {
        let a = evaluate(trace, cfg, executor, Phase::Final, r as u64)?;
        stats.push(a.score);
        scores.push(a.score);
        executor_runs += a.executor_runs();
    }
    Ok(Reevaluation {
        mean: stats.mean().unwrap_or(0.0),
        std_dev: stats.std_dev().unwrap_or(0.0),
        rounds,
        scores,
        executor_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Interval;
    use crate::score::UseCase;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn trace() -> Trace {
        Trace::new(vec![Interval::new(30, 20, 1500), Interval::new(5, 60, 1000)], 100, None)
    }

    fn cfg(reps: u32) -> EvalConfig {
        EvalConfig { repetitions: reps, ..EvalConfig::new(ScoreSpec::new(UseCase::Uc1Capacity), 9) }
    }

    /// Target throughput grows with the repetition index; the first
    /// `fail_target` target calls fail.
    struct Scripted {
        fail_target: usize,
        calls: AtomicUsize,
    }

    impl Executor for Scripted {
        fn run(&self, _trace: &Trace, run: Run, seed: u64) -> Result<PerfSummary, ExecError> {
            let rep = seed & 0xfffff;
            match run {
                Run::Solo(Party::Reference) => Ok(PerfSummary { throughput_mbps: 100.0, ..PerfSummary::default() }),
                _ => {
                    if self.calls.fetch_add(1, Ordering::SeqCst) < self.fail_target {
                        return Err(ExecError::Unsupported("scripted failure".into()));
                    }
                    Ok(PerfSummary { throughput_mbps: 10.0 * (rep + 1) as f64, ..PerfSummary::default() })
                }
            }
        }
    }

    #[test]
    fn single_repetition_matches_single_run() {
        let ex = SimExecutor::new(Protocol::CapacityOracle, Protocol::Reno);
        let a = evaluate(&trace(), &cfg(5), &ex, Phase::Optimizer, 0).unwrap();
        assert_eq!(a.repetitions, 1);
        let t = ex.run(&trace(), Run::Solo(Party::Target), 0).unwrap().throughput_mbps;
        let r = capacity_oracle(&trace()).throughput_mbps;
        assert_eq!(a.score, eq1_score(r, t, crate::score::Direction::HigherBetter));
        assert!(a.score > 0.0 && a.score <= 1.0);
    }

    #[test]
    fn failures_up_to_half_are_tolerated() {
        let cfg = |r| EvalConfig { master_seed: 0, ..cfg(r) };
        let ex = Scripted { fail_target: 2, calls: AtomicUsize::new(0) };
        let a = evaluate(&trace(), &cfg(5), &ex, Phase::Optimizer, 0).unwrap();
        // Reps 2, 3, 4 survive: 30, 40, 50 -> median 40.
        assert_eq!(a.target_score, 40.0);
        assert_eq!(a.runs.iter().filter(|r| r.error.is_some()).count(), 2);
        let ex = Scripted { fail_target: 3, calls: AtomicUsize::new(0) };
        let e = evaluate(&trace(), &cfg(5), &ex, Phase::Optimizer, 0).unwrap_err();
        assert!(matches!(e, ExecError::TooManyFailures { failed: 3, total: 5, .. }), "{e}");
    }

    #[test]
    fn concurrent_equals_sequential() {
        let ex = SimExecutor::new(Protocol::CapacityOracle, Protocol::Reno).with_jitter(4.0);
        let seq = evaluate(&trace(), &cfg(5), &ex, Phase::Optimizer, 3).unwrap();
        let par = evaluate(&trace(), &EvalConfig { max_concurrent: 4, ..cfg(5) }, &ex, Phase::Optimizer, 3).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.repetitions, 5);
    }

    #[test]
    fn seed_phases_are_disjoint() {
        let mut seen = std::collections::HashSet::new();
        for phase in [Phase::Optimizer, Phase::Selection, Phase::Final] {
            for index in [0u64, 1, 299, (1 << 36) - 1] {
                for rep in [0u32, 1, 4, (1 << 20) - 1] {
                    assert!(seen.insert(run_seed(u64::MAX - 5, phase, index, rep)));
                }
            }
        }
    }

    #[test]
    fn reevaluation_rounds() {
        let ex = SimExecutor::new(Protocol::CapacityOracle, Protocol::Vegas);
        assert!(reevaluate_final(&trace(), &cfg(3), &ex, 0).is_err());
        let learn = evaluate(&trace(), &cfg(3), &ex, Phase::Optimizer, 0).unwrap();
        let re = reevaluate_final(&trace(), &cfg(3), &ex, 4).unwrap();
        assert_eq!(re.mean, learn.score);
        assert_eq!(re.std_dev, 0.0);
        assert_eq!(re.executor_runs, 8);
    }

    #[test]
    fn oracle_cannot_share() {
        let ex = SimExecutor::new(Protocol::CapacityOracle, Protocol::Reno);
        let c = EvalConfig { repetitions: 1, ..EvalConfig::new(ScoreSpec::new(UseCase::Uc1Fairness), 0) };
        assert!(matches!(evaluate(&trace(), &c, &ex, Phase::Optimizer, 0), Err(ExecError::TooManyFailures { .. })));
    }
}
