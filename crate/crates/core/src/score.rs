//! Scoring: the relative performance gap between a reference and a target,
//! and the per-use-case mapping from raw run measurements to the two scalars
//! that feed it.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Trace;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("missing required run {0}")]
    MissingRun(Run),
    #[error("run {0} reported no completion time")]
    MissingCompletion(Run),
    #[error("zero delay with t_coeff < 1")]
    ZeroDelay,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("median of empty list")]
    Empty,
}

/// Measurements from one execution of one protocol on one trace.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerfSummary {
    pub throughput_mbps: f64,
    /// Mean one-way packet delay.
    pub mean_delay_ms: f64,
    pub completion_time_ms: Option<f64>,
    pub bytes_delivered: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// Which protocol a run measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Reference,
    Target,
    /// Third-party flow used by the fairness regression case.
    Competitor,
}

/// One kind of execution: a protocol alone on the link, or a protocol's
/// measurements while it shares the link with another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Run {
    Solo(Party),
    Shared { measured: Party, against: Party },
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Reference => "reference",
            Party::Target => "target",
            Party::Competitor => "competitor",
        })
    }
}

impl fmt::Display for Run {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Run::Solo(p) => write!(f, "solo:{p}"),
            Run::Shared { measured, against } => write!(f, "shared:{measured}:{against}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultipathMetric {
    /// Flow completion time, lower is better.
    Fct,
    Throughput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UseCase {
    /// Target throughput against the link's available bandwidth.
    Uc1Capacity,
    /// Reference throughput alone vs. while sharing with the target.
    Uc1Fairness,
    /// Weighted throughput/delay score of reference vs. target.
    Uc2Weighted {
        t_coeff: f64,
        /// Throughput normaliser; defaults to the trace's mean bandwidth.
        #[serde(default)]
        tau_max: Option<f64>,
        /// Delay normaliser; defaults to the trace's minimum one-way latency.
        #[serde(default)]
        d_min: Option<f64>,
    },
    /// Competitor throughput next to the reference vs. next to the target.
    Uc2Fairness,
    /// Reference run on one link vs. target run on two.
    Uc3Multipath { metric: MultipathMetric },
}

impl UseCase {
    pub fn name(&self) -> &'static str {
        match self {
            UseCase::Uc1Capacity => "uc1_capacity",
            UseCase::Uc1Fairness => "uc1_fairness",
            UseCase::Uc2Weighted { .. } => "uc2_weighted",
            UseCase::Uc2Fairness => "uc2_fairness",
            UseCase::Uc3Multipath { .. } => "uc3_multipath",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSpec {
    pub use_case: UseCase,
    pub direction: Direction,
}

impl ScoreSpec {
    /// Use case with its natural metric direction.
    pub fn new(use_case: UseCase) -> Self {
        let direction = match use_case {
            UseCase::Uc3Multipath { metric: MultipathMetric::Fct } => Direction::LowerBetter,
            _ => Direction::HigherBetter,
        };
        Self { use_case, direction }
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        if let UseCase::Uc2Weighted { t_coeff, tau_max, d_min } = self.use_case {
            if !(0.0..=1.0).contains(&t_coeff) {
                return Err(ScoreError::InvalidParameter(format!("t_coeff {t_coeff} outside [0, 1]")));
            }
            if tau_max.is_some_and(|x| x <= 0.0) || d_min.is_some_and(|x| x <= 0.0) {
                return Err(ScoreError::InvalidParameter("tau_max and d_min must be positive".into()));
            }
        }
        Ok(())
    }

    /// The runs supplying the reference-role and target-role scalars.
    pub fn role_runs(&self) -> (Run, Run) {
        use Party::*;
        match self.use_case {
            UseCase::Uc1Capacity | UseCase::Uc2Weighted { .. } | UseCase::Uc3Multipath { .. } => {
                (Run::Solo(Reference), Run::Solo(Target))
            }
            UseCase::Uc1Fairness => (Run::Solo(Reference), Run::Shared { measured: Reference, against: Target }),
            UseCase::Uc2Fairness => (
                Run::Shared { measured: Competitor, against: Reference },
                Run::Shared { measured: Competitor, against: Target },
            ),
        }
    }

    /// Scalar a single run contributes to its role.
    pub fn role_metric(&self, run: Run, perf: &PerfSummary, trace: &Trace) -> Result<f64, ScoreError> {
        match self.use_case {
            UseCase::Uc1Capacity | UseCase::Uc1Fairness | UseCase::Uc2Fairness => Ok(perf.throughput_mbps),
            UseCase::Uc2Weighted { t_coeff, tau_max, d_min } => {
                let tau_max = tau_max.unwrap_or_else(|| trace.mean_bandwidth_mbps());
                let d_min = d_min.unwrap_or_else(|| f64::from(trace.min_latency_ms()));
                weighted_perf(perf, t_coeff, tau_max, d_min)
            }
            UseCase::Uc3Multipath { metric: MultipathMetric::Fct } => {
                perf.completion_time_ms.ok_or(ScoreError::MissingCompletion(run))
            }
            UseCase::Uc3Multipath { metric: MultipathMetric::Throughput } => Ok(perf.throughput_mbps),
        }
    }
}

/// Relative gap between reference and target, in `[-1, 1]`. Positive means
/// the target did worse. Both zero scores 0.
pub fn eq1_score(reference: f64, target: f64, direction: Direction) -> f64 {
    let denom = reference.max(target);
    if denom == 0.0 {
        return 0.0;
    }
    match direction {
        Direction::HigherBetter => (reference - target) / denom,
        Direction::LowerBetter => (target - reference) / denom,
    }
}

/// `t_coeff * min(tau/tau_max, 1) + (1 - t_coeff) * min(d_min/d, 1)`.
pub fn weighted_perf(p: &PerfSummary, t_coeff: f64, tau_max: f64, d_min: f64) -> Result<f64, ScoreError> {
    if !(0.0..=1.0).contains(&t_coeff) {
        return Err(ScoreError::InvalidParameter(format!("t_coeff {t_coeff} outside [0, 1]")));
    }
    if tau_max <= 0.0 || d_min <= 0.0 {
        return Err(ScoreError::InvalidParameter("tau_max and d_min must be positive".into()));
    }
    let rel_tput = (p.throughput_mbps / tau_max).min(1.0);
    if t_coeff == 1.0 {
        return Ok(rel_tput);
    }
    if p.mean_delay_ms <= 0.0 {
        return Err(ScoreError::ZeroDelay);
    }
    let rel_delay = (d_min / p.mean_delay_ms).min(1.0);
    Ok(t_coeff * rel_tput + (1.0 - t_coeff) * rel_delay)
}

/// Measurements from a set of runs on one trace, at most one per [`Run`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutputs(Vec<(Run, PerfSummary)>);

impl RunOutputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, run: Run, perf: PerfSummary) {
        match self.0.iter_mut().find(|(r, _)| *r == run) {
            Some(slot) => slot.1 = perf,
            None => self.0.push((run, perf)),
        }
    }

    pub fn with(mut self, run: Run, perf: PerfSummary) -> Self {
        self.insert(run, perf);
        self
    }

    pub fn get(&self, run: Run) -> Option<&PerfSummary> {
        self.0.iter().find(|(r, _)| *r == run).map(|(_, p)| p)
    }
}

/// Maps run outputs to `(reference_score, target_score)`.
pub fn uc_scores(spec: &ScoreSpec, outputs: &RunOutputs, trace: &Trace) -> Result<(f64, f64), ScoreError> {
    let (ref_run, tgt_run) = spec.role_runs();
    let r = outputs.get(ref_run).ok_or(ScoreError::MissingRun(ref_run))?;
    let t = outputs.get(tgt_run).ok_or(ScoreError::MissingRun(tgt_run))?;
    Ok((spec.role_metric(ref_run, r, trace)?, spec.role_metric(tgt_run, t, trace)?))
}

pub fn median(values: &[f64]) -> Result<f64, ScoreError> {
    if values.is_empty() {
        return Err(ScoreError::Empty);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Medians per role first, then the gap between them.
pub fn median_score(reference: &[f64], target: &[f64], direction: Direction) -> Result<(f64, f64, f64), ScoreError> {
    let r = median(reference)?;
    let t = median(target)?;
    Ok((r, t, eq1_score(r, t, direction)))
}
