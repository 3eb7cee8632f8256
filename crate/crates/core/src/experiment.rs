//! Configuration and the end-to-end pipeline: optimizer search, post-learning
//! selection over its top candidates, and independent reevaluation of the
//! winner. Also the helpers behind the `bench-pls`, `replay` and `validate`
//! subcommands.
//!
//! Output files, all under the configured output directory:
//!
//! - `history.csv`: one row per optimizer proposal,
//!   `iteration,score,repetitions,trace_file,reference_score,target_score,eq1_score,use_case`
//!   (score columns empty for skipped proposals).
//! - `traces/iter_NNNNN.trace`: every proposed trace, named in the history.
//! - `winner.trace`: the selected trace.
//! - `report.json`: budgets, run counts, scores, seeds and the config.
//! - `events.csv`: written by `replay --events`.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{validate, Bounds, EnvError, Layout, ParamRanges, Trace, TraceVector};
use crate::exec::{
    evaluate, reevaluate_final, run_seed, EvalConfig, ExecError, Executor, ExternalExecutor, Phase, Protocol, Reevaluation,
    SimExecutor,
};
use crate::optim::{self, Budget, Objective, OptimError, OptimizerConfig, Scored};
use crate::pls::{select_candidate, top_candidates, GaussianStudy, PlsAlgorithm, PlsError, StudyArm};
use crate::score::{Direction, PerfSummary, Run, ScoreSpec, UseCase};
use crate::sim::{events_csv, simulate, SimConfig};

pub const HISTORY_FILE: &str = "history.csv";
pub const WINNER_FILE: &str = "winner.trace";
pub const REPORT_FILE: &str = "report.json";
pub const EVENTS_FILE: &str = "events.csv";
pub const TRACES_DIR: &str = "traces";
pub const HISTORY_HEADER: &str = "iteration,score,repetitions,trace_file,reference_score,target_score,eq1_score,use_case";
pub const BENCH_HEADER: &str = "budget,algorithm,mean_true_score,stderr";
pub const DEFAULT_BENCH_BUDGETS: [usize; 5] = [50, 100, 150, 200, 250];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Pls(#[from] PlsError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("every optimizer proposal failed to evaluate")]
    NoEvaluations,
}

impl ExperimentError {
    /// Errors the user fixes by editing the config or input files.
    pub fn is_config(&self) -> bool {
        matches!(self, ExperimentError::Config(_) | ExperimentError::Env(_))
    }
}

impl From<OptimError> for ExperimentError {
    fn from(e: OptimError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlsConfig {
    pub algorithm: PlsAlgorithm,
    pub top_n: usize,
    /// Share of the total budget spent on selection; ignored by SimpleMax.
    pub budget_fraction: f64,
}

impl Default for PlsConfig {
    fn default() -> Self {
        Self { algorithm: PlsAlgorithm::Mre, top_n: 25, budget_fraction: 0.10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExecutorConfig {
    Simulator {
        reference: Protocol,
        target: Protocol,
        #[serde(default)]
        competitor: Option<Protocol>,
        #[serde(default)]
        jitter_sigma_ms: f64,
        /// Cap on simulated time for sized transfers.
        #[serde(default)]
        max_duration_ms: Option<u64>,
    },
    External {
        command: String,
        timeout_ms: u64,
        #[serde(default)]
        work_dir: Option<PathBuf>,
    },
}

impl ExecutorConfig {
    pub fn build(&self) -> Result<Box<dyn Executor>, ExperimentError> {
        match self {
            ExecutorConfig::Simulator { .. } => Ok(Box::new(self.simulator().expect("simulator config"))),
            ExecutorConfig::External { command, timeout_ms, work_dir } => {
                let ex = ExternalExecutor { command: command.clone(), timeout_ms: *timeout_ms, work_dir: work_dir.clone() };
                ex.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
                Ok(Box::new(ex))
            }
        }
    }

    pub fn simulator(&self) -> Option<SimExecutor> {
        match *self {
            ExecutorConfig::Simulator { reference, target, competitor, jitter_sigma_ms, max_duration_ms } => {
                let mut sim = SimConfig { jitter_sigma_ms, ..SimConfig::default() };
                if let Some(ms) = max_duration_ms {
                    sim.max_duration_ms = ms;
                }
                Some(SimExecutor { reference, target, competitor, sim })
            }
            ExecutorConfig::External { .. } => None,
        }
    }
}

fn default_repetitions() -> u32 {
    crate::exec::DEFAULT_REPETITIONS
}

fn default_final_rounds() -> usize {
    5
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Number of trace intervals.
    pub intervals: usize,
    #[serde(default)]
    pub bounds: ParamRanges,
    pub optimizer: OptimizerConfig,
    pub budget: Budget,
    #[serde(default)]
    pub pls: PlsConfig,
    pub score: UseCase,
    /// Overrides the use case's natural direction.
    #[serde(default)]
    pub direction: Option<Direction>,
    pub executor: ExecutorConfig,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default = "yes")]
    pub collapse_deterministic: bool,
    #[serde(default = "one")]
    pub max_concurrent: usize,
    #[serde(default = "default_final_rounds")]
    pub final_rounds: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    /// Reno against the capacity oracle on the simulator, GA, 300
    /// evaluations.
    fn default() -> Self {
        Self {
            seed: 0,
            intervals: 4,
            bounds: ParamRanges::default(),
            optimizer: OptimizerConfig::Ga(Default::default()),
            budget: Budget::Evaluations(300),
            pls: PlsConfig::default(),
            score: UseCase::Uc1Capacity,
            direction: None,
            executor: ExecutorConfig::Simulator {
                reference: Protocol::CapacityOracle,
                target: Protocol::Reno,
                competitor: None,
                jitter_sigma_ms: 0.0,
                max_duration_ms: None,
            },
            repetitions: default_repetitions(),
            collapse_deterministic: true,
            max_concurrent: 1,
            final_rounds: default_final_rounds(),
            output_dir: PathBuf::from("advgen-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn score_spec(&self) -> ScoreSpec {
        let mut spec = ScoreSpec::new(self.score);
        if let Some(d) = self.direction {
            spec.direction = d;
        }
        spec
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            repetitions: self.repetitions,
            max_concurrent: self.max_concurrent,
            score_spec: self.score_spec(),
            collapse_deterministic: self.collapse_deterministic,
            master_seed: self.seed,
        }
    }

    pub fn bounds(&self) -> Result<Bounds, ExperimentError> {
        Bounds::uniform(self.intervals, &self.bounds).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Selection budget for an evaluation budget; the optimizer gets the rest.
    pub fn pls_budget(&self, total: usize) -> usize {
        if self.pls.algorithm == PlsAlgorithm::SimpleMax {
            0
        } else {
            (total as f64 * self.pls.budget_fraction).round() as usize
        }
    }

    /// Budget handed to the optimizer.
    pub fn optimizer_budget(&self) -> Budget {
        match self.budget {
            Budget::Evaluations(n) => Budget::Evaluations(n - self.pls_budget(n)),
            Budget::WallClockMs(ms) => {
                let f = if self.pls.algorithm == PlsAlgorithm::SimpleMax { 0.0 } else { self.pls.budget_fraction };
                Budget::WallClockMs(((ms as f64) * (1.0 - f)).round().max(1.0) as u64)
            }
        }
    }

    /// Checks everything that can be checked before running anything.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let cfg = |m: String| Err(ExperimentError::Config(m));
        let bounds = self.bounds()?;
        self.budget.validate()?;
        self.optimizer.build(bounds, self.seed)?;
        self.score_spec().validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.eval_config().validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.executor.build()?;
        if let ExecutorConfig::Simulator { jitter_sigma_ms, .. } = self.executor {
            if !(jitter_sigma_ms >= 0.0 && jitter_sigma_ms.is_finite()) {
                return cfg(format!("jitter_sigma_ms must be finite and >= 0, got {jitter_sigma_ms}"));
            }
        }
        let p = &self.pls;
        if p.top_n == 0 {
            return cfg("pls.top_n must be at least 1".into());
        }
        if p.algorithm != PlsAlgorithm::SimpleMax && !(p.budget_fraction > 0.0 && p.budget_fraction < 1.0) {
            return cfg(format!("pls.budget_fraction must be in (0, 1), got {}", p.budget_fraction));
        }
        if self.final_rounds == 0 {
            return cfg("final_rounds must be at least 1".into());
        }
        if let Budget::Evaluations(n) = self.budget {
            let pls = self.pls_budget(n);
            if n - pls == 0 {
                return cfg(format!("budget {n} leaves nothing for the optimizer"));
            }
            if p.algorithm != PlsAlgorithm::SimpleMax && pls == 0 {
                return cfg(format!("budget {n} x fraction {} rounds to no selection budget", p.budget_fraction));
            }
            if p.algorithm == PlsAlgorithm::Mre && pls < p.top_n {
                return cfg(format!("mre needs a selection budget of at least top_n = {}, got {pls}", p.top_n));
            }
        }
        Ok(())
    }
}

/// One optimizer proposal as logged in the history file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub trace_file: String,
    pub vector: TraceVector,
    /// `(score, repetitions, reference_score, target_score)`, absent if skipped.
    pub outcome: Option<(f64, u32, f64, f64)>,
}

pub fn history_csv(rows: &[HistoryRow], use_case: &str) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for r in rows {
        match r.outcome {
            Some((score, reps, rs, ts)) => {
                s.push_str(&format!("{},{score},{reps},{},{rs},{ts},{score},{use_case}\n", r.iteration, r.trace_file))
            }
            None => s.push_str(&format!("{},,,{},,,,{use_case}\n", r.iteration, r.trace_file)),
        }
    }
    s
}

struct Recorder<'a> {
    layout: Layout,
    cfg: EvalConfig,
    executor: &'a dyn Executor,
    traces_dir: PathBuf,
    rows: Vec<HistoryRow>,
    runs: usize,
}

impl Objective for Recorder<'_> {
    fn score(&mut self, vector: &TraceVector) -> Result<Scored, String> {
        let iteration = self.rows.len();
        let name = format!("{TRACES_DIR}/iter_{iteration:05}.trace");
        let mut row = HistoryRow { iteration, trace_file: name, vector: vector.clone(), outcome: None };
        let result = (|| {
            let trace = self.layout.decode(vector).map_err(|e| e.to_string())?;
            trace.write(self.traces_dir.join(format!("iter_{iteration:05}.trace"))).map_err(|e| e.to_string())?;
            let a = evaluate(&trace, &self.cfg, self.executor, Phase::Optimizer, iteration as u64).map_err(|e| e.to_string())?;
            self.runs += a.executor_runs();
            Ok(a)
        })();
        let out = result.map(|a| {
            row.outcome = Some((a.score, a.repetitions, a.reference_score, a.target_score));
            Scored { score: a.score, repetitions: a.repetitions }
        });
        self.rows.push(row);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub optimizer: usize,
    pub selection: usize,
    #[serde(rename = "final")]
    pub final_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub total: Budget,
    pub optimizer: Budget,
    pub optimizer_calls: usize,
    pub optimizer_skipped: usize,
    /// Selection budget in evaluations (one evaluation = one score sample).
    pub selection_budget: usize,
    pub selection_evaluations: usize,
    pub final_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerReport {
    pub iteration: usize,
    pub observed_score: f64,
    /// Mean of the selection-phase samples, if any were taken.
    pub selection_mean: Option<f64>,
    pub selection_samples: u64,
    pub vector: TraceVector,
    pub trace_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub master: u64,
    pub optimizer: u64,
    pub scheme: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub optimizer: String,
    pub selection: PlsAlgorithm,
    pub use_case: String,
    pub budget: BudgetReport,
    pub executor_runs: RunCounts,
    pub best_observed_score: f64,
    pub winner: WinnerReport,
    pub reevaluated: Reevaluation,
    pub seeds: SeedReport,
    pub config: ExperimentConfig,
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Runs the whole pipeline and writes its outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    cfg.validate()?;
    let executor = cfg.executor.build()?;
    let eval_cfg = cfg.eval_config();
    let bounds = cfg.bounds()?;
    let layout = bounds.layout();
    let out = &cfg.output_dir;
    let traces_dir = out.join(TRACES_DIR);
    std::fs::create_dir_all(&traces_dir)?;

    let mut optimizer = cfg.optimizer.build(bounds, cfg.seed)?;
    let mut recorder =
        Recorder { layout, cfg: eval_cfg.clone(), executor: executor.as_ref(), traces_dir, rows: Vec::new(), runs: 0 };
    let opt_budget = cfg.optimizer_budget();
    let history = optim::run(optimizer.as_mut(), &mut recorder, opt_budget);
    let use_case = cfg.score.name();
    write_file(&out.join(HISTORY_FILE), &history_csv(&recorder.rows, use_case))?;
    let best = history.best().ok_or(ExperimentError::NoEvaluations)?.clone();
    log::info!("optimizer: {} calls, {} skipped, best observed {}", history.calls, history.skipped, best.score);

    let selection_budget = match cfg.budget {
        Budget::Evaluations(n) => cfg.pls_budget(n),
        Budget::WallClockMs(_) => {
            // Keep the configured split in evaluation terms.
            let f = cfg.pls.budget_fraction;
            if cfg.pls.algorithm == PlsAlgorithm::SimpleMax { 0 } else { (history.calls as f64 * f / (1.0 - f)).round() as usize }
        }
    };
    let mut candidates = top_candidates(&history.evaluations, cfg.pls.top_n);
    let mut algorithm = cfg.pls.algorithm;
    if algorithm != PlsAlgorithm::SimpleMax && selection_budget == 0 {
        log::warn!("no selection budget; falling back to simple_max");
        algorithm = PlsAlgorithm::SimpleMax;
    }
    if algorithm == PlsAlgorithm::Mre && candidates.len() > selection_budget {
        candidates.truncate(selection_budget);
    }
    let mut selection_runs = 0;
    let mut index = 0u64;
    let mut sample = |v: &TraceVector| -> Option<f64> {
        let i = index;
        index += 1;
        let trace = layout.decode(v).ok()?;
        match evaluate(&trace, &eval_cfg, executor.as_ref(), Phase::Selection, i) {
            Ok(a) => {
                selection_runs += a.executor_runs();
                Some(a.score)
            }
            Err(e) => {
                log::warn!("selection sample {i} failed: {e}");
                None
            }
        }
    };
    let (winner, used) = select_candidate(algorithm, candidates, selection_budget, &mut sample)?;
    let winner_trace = layout.decode(&winner.vector)?;
    winner_trace.write(out.join(WINNER_FILE))?;

    let reevaluated = reevaluate_final(&winner_trace, &eval_cfg, executor.as_ref(), cfg.final_rounds)?;
    let report = ExperimentReport {
        optimizer: cfg.optimizer.name().to_string(),
        selection: algorithm,
        use_case: use_case.to_string(),
        budget: BudgetReport {
            total: cfg.budget,
            optimizer: opt_budget,
            optimizer_calls: history.calls,
            optimizer_skipped: history.skipped,
            selection_budget,
            selection_evaluations: used,
            final_rounds: cfg.final_rounds,
        },
        executor_runs: RunCounts { optimizer: recorder.runs, selection: selection_runs, final_: reevaluated.executor_runs },
        best_observed_score: best.score,
        winner: WinnerReport {
            iteration: winner.id,
            observed_score: winner.observed,
            selection_mean: winner.stats.mean(),
            selection_samples: winner.stats.count(),
            vector: winner.vector.clone(),
            trace_file: WINNER_FILE.to_string(),
        },
        reevaluated,
        seeds: SeedReport {
            master: cfg.seed,
            optimizer: cfg.seed,
            scheme: "run seed = master + (phase << 56) + (index << 20) + repetition; phases optimizer=1, selection=2, final=3"
                .to_string(),
        },
        config: cfg.clone(),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| ExperimentError::Config(e.to_string()))?;
    write_file(&out.join(REPORT_FILE), &(json + "\n"))?;
    Ok(report)
}

/// What `replay` recomputes for a saved trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutput {
    /// One run of each role with the first final-phase seed.
    pub runs: Vec<(Run, PerfSummary)>,
    /// Same rounds and seeds as the experiment's final reevaluation.
    pub reevaluated: Reevaluation,
    pub events_file: Option<PathBuf>,
}

/// Re-runs a saved trace under `cfg`'s executor and scoring. With
/// `events_dir`, the target-role run is simulated again with event logging
/// and written to `events.csv` there.
pub fn replay(trace_path: &Path, cfg: &ExperimentConfig, events_dir: Option<&Path>) -> Result<ReplayOutput, ExperimentError> {
    let trace = read_trace(trace_path)?;
    let executor = cfg.executor.build()?;
    let eval_cfg = cfg.eval_config();
    eval_cfg.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
    if cfg.final_rounds == 0 {
        return Err(ExperimentError::Config("final_rounds must be at least 1".into()));
    }
    let seed = run_seed(cfg.seed, Phase::Final, 0, 0);
    let (ref_run, tgt_run) = eval_cfg.score_spec.role_runs();
    let mut runs = Vec::new();
    for run in [ref_run, tgt_run] {
        runs.push((run, executor.run(&trace, run, seed)?));
    }
    let reevaluated = reevaluate_final(&trace, &eval_cfg, executor.as_ref(), cfg.final_rounds)?;
    let events_file = match events_dir {
        None => None,
        Some(dir) => {
            let sim = cfg
                .executor
                .simulator()
                .ok_or_else(|| ExperimentError::Config("event logs need the simulator executor".into()))?;
            let models = match tgt_run {
                Run::Solo(p) => vec![party_cc(&sim, p)?],
                Run::Shared { measured, against } => vec![party_cc(&sim, measured)?, party_cc(&sim, against)?],
            };
            let sim_cfg = SimConfig { log_events: true, ..sim.sim.clone() };
            let result = simulate(&trace, &models, seed, &sim_cfg).map_err(ExecError::from)?;
            std::fs::create_dir_all(dir)?;
            let path = dir.join(EVENTS_FILE);
            write_file(&path, &events_csv(&result.events))?;
            Some(path)
        }
    };
    Ok(ReplayOutput { runs, reevaluated, events_file })
}

fn party_cc(sim: &SimExecutor, party: crate::score::Party) -> Result<crate::sim::CcKind, ExperimentError> {
    use crate::score::Party;
    let p = match party {
        Party::Reference => Some(sim.reference),
        Party::Target => Some(sim.target),
        Party::Competitor => sim.competitor,
    };
    p.and_then(Protocol::cc).ok_or_else(|| ExperimentError::Config(format!("the {party} has no packet-level model to log")))
}

fn read_trace(path: &Path) -> Result<Trace, ExperimentError> {
    let trace = Trace::read(path).map_err(|e| match e {
        EnvError::Io(e) => ExperimentError::Config(format!("cannot read {}: {e}", path.display())),
        other => ExperimentError::Config(format!("{}: {other}", path.display())),
    })?;
    trace.check()?;
    Ok(trace)
}

/// Checks a trace file parses, meets the intrinsic invariants, and lies in
/// `ranges` (with one interval range per trace interval).
pub fn validate_trace_file(path: &Path, ranges: &ParamRanges) -> Result<Trace, ExperimentError> {
    let trace = read_trace(path)?;
    let ranges = ParamRanges { data_kb: trace.data_kb.map(|_| ranges.data_kb.unwrap_or(crate::env::Range::new(0, i64::from(u32::MAX)))), ..*ranges };
    let bounds = Bounds::uniform(trace.intervals.len(), &ranges)?;
    validate(&trace, &bounds)?;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub budget: usize,
    pub algorithm: String,
    pub mean_true_score: f64,
    pub stderr: f64,
}

/// The selection study over each budget: oracle, SimpleMax and every
/// budgeted algorithm.
pub fn bench_pls(budgets: &[usize], study: &GaussianStudy) -> Result<Vec<BenchRow>, PlsError> {
    let mut arms = vec![StudyArm::Oracle, StudyArm::Algorithm(PlsAlgorithm::SimpleMax)];
    arms.extend(PlsAlgorithm::BUDGETED.map(StudyArm::Algorithm));
    let mut rows = Vec::new();
    for &budget in budgets {
        for &arm in &arms {
            let values = study.run(arm, budget)?;
            let (mean, se) = GaussianStudy::summarize(&values);
            rows.push(BenchRow { budget, algorithm: arm.to_string(), mean_true_score: mean, stderr: se });
        }
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BENCH_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{:.6},{:.6}\n", r.budget, r.algorithm, r.mean_true_score, r.stderr));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig { output_dir: PathBuf::from("/nonexistent"), ..ExperimentConfig::default() }
    }

    #[test]
    fn budget_split() {
        let c = base();
        assert_eq!(c.pls_budget(300), 30);
        assert_eq!(c.optimizer_budget(), Budget::Evaluations(270));
        let c = ExperimentConfig { pls: PlsConfig { algorithm: PlsAlgorithm::SimpleMax, ..PlsConfig::default() }, ..base() };
        assert_eq!(c.optimizer_budget(), Budget::Evaluations(300));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            ExperimentConfig { intervals: 0, ..base() },
            ExperimentConfig { pls: PlsConfig { budget_fraction: 1.0, ..PlsConfig::default() }, ..base() },
            ExperimentConfig { pls: PlsConfig { top_n: 0, ..PlsConfig::default() }, ..base() },
            ExperimentConfig { pls: PlsConfig { top_n: 40, ..PlsConfig::default() }, ..base() },
            ExperimentConfig { final_rounds: 0, ..base() },
            ExperimentConfig { repetitions: 0, ..base() },
            ExperimentConfig { budget: Budget::Evaluations(0), ..base() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(ExperimentError::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn toml_round_trip_and_unknown_keys() {
        let text = r#"
seed = 3
intervals = 2
output_dir = "out"
score = { kind = "uc1_capacity" }

[budget]
evaluations = 60

[optimizer]
name = "ga"
population_size = 10

[executor]
kind = "simulator"
reference = "capacity_oracle"
target = "vegas"
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.budget, Budget::Evaluations(60));
        assert_eq!(c.pls, PlsConfig::default());
        assert!(matches!(c.optimizer, OptimizerConfig::Ga(ref g) if g.population_size == 10));
        let back = ExperimentConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        for typo in ["seeed = 1\n", "[optimizer]\nname = \"ga\"\npop = 3\n"] {
            let t = text.replace("seed = 3\n", &format!("seed = 3\n{typo}"));
            assert!(ExperimentConfig::from_toml(&t).is_err(), "{typo}");
        }
    }

    #[test]
    fn bench_rows() {
        let study = GaussianStudy { trials: 20, ..GaussianStudy::default() };
        let rows = bench_pls(&DEFAULT_BENCH_BUDGETS, &study).unwrap();
        assert_eq!(rows.len(), 5 * 6);
        let csv = bench_csv(&rows);
        assert_eq!(csv.lines().next(), Some(BENCH_HEADER));
        assert_eq!(csv.lines().count(), 31);
    }
}
