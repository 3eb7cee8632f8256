//! Executor that shells out to a user command, e.g. a wrapper around a real
//! emulator.
//!
//! The command template may use `{trace}`, `{output}`, `{seed}` and `{run}`.
//! The command must write a result file at `{output}`:
//!
//! ```text
//! throughput_mbps=<real>
//! mean_delay_ms=<real>
//! fct_ms=<real>          (optional)
//! ```

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{ExecError, Executor};
use crate::env::Trace;
use crate::score::{PerfSummary, Run};

pub const RESULT_KEYS: [&str; 3] = ["throughput_mbps", "mean_delay_ms", "fct_ms"];

const POLL: Duration = Duration::from_millis(5);

static NEXT_FILE: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalExecutor {
    pub command: String,
    pub timeout_ms: u64,
    /// Where trace and result files go; the system temp dir if unset.
    #[serde(default)]
    pub work_dir: Option<PathBuf>,
}

impl ExternalExecutor {
    pub fn new(command: impl Into<String>, timeout_ms: u64) -> Self {
        Self { command: command.into(), timeout_ms, work_dir: None }
    }

    pub fn validate(&self) -> Result<(), ExecError> {
        for p in ["{trace}", "{output}"] {
            if !self.command.contains(p) {
                return Err(ExecError::Config(format!("command template lacks {p}")));
            }
        }
        if self.timeout_ms == 0 {
            return Err(ExecError::Config("timeout_ms must be positive".into()));
        }
        Ok(())
    }

    /// Runs the command against an existing trace file.
    pub fn run_file(&self, trace_path: &Path, output_path: &Path, run: Run, seed: u64) -> Result<PerfSummary, ExecError> {
        self.validate()?;
        let cmd = self
            .command
            .replace("{trace}", &trace_path.display().to_string())
            .replace("{output}", &output_path.display().to_string())
            .replace("{seed}", &seed.to_string())
            .replace("{run}", &run.to_string());
        let stderr_path = output_path.with_extension("stderr");
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(File::create(&stderr_path)?)
            .spawn()?;
        let start = Instant::now();
        let status = loop {
            if let Some(s) = child.try_wait()? {
                break s;
            }
            if start.elapsed() >= Duration::from_millis(self.timeout_ms) {
                let _ = child.kill();
                let _ = child.wait();
                let _ = std::fs::remove_file(&stderr_path);
                return Err(ExecError::Timeout { ms: self.timeout_ms });
            }
            std::thread::sleep(POLL);
        };
        let stderr = std::fs::read_to_string(&stderr_path).unwrap_or_default();
        let _ = std::fs::remove_file(&stderr_path);
        if !status.success() {
            return Err(ExecError::NonZeroExit { code: status.code(), stderr: stderr.trim().to_string() });
        }
        let text = std::fs::read_to_string(output_path)
            .map_err(|e| ExecError::Parse { line: 0, message: format!("cannot read {}: {e}", output_path.display()) })?;
        parse_result(&text)
    }
}

impl Executor for ExternalExecutor {
    fn run(&self, trace: &Trace, run: Run, seed: u64) -> Result<PerfSummary, ExecError> {
        let dir = self.work_dir.clone().unwrap_or_else(std::env::temp_dir);
        std::fs::create_dir_all(&dir)?;
        let n = NEXT_FILE.fetch_add(1, Ordering::Relaxed);
        let stem = format!("advgen-{}-{n}", std::process::id());
        let trace_path = dir.join(format!("{stem}.trace"));
        let output_path = dir.join(format!("{stem}.result"));
        trace.write(&trace_path).map_err(|e| ExecError::Config(e.to_string()))?;
        let r = self.run_file(&trace_path, &output_path, run, seed);
        let _ = std::fs::remove_file(&trace_path);
        let _ = std::fs::remove_file(&output_path);
        r
    }
}

/// Parses a result file. Every line must be `key=value` with a known key;
/// the error names the first offending line.
pub fn parse_result(text: &str) -> Result<PerfSummary, ExecError> {
    let err = |line: usize, message: String| ExecError::Parse { line, message };
    let mut values: [Option<f64>; 3] = [None; 3];
    let body = text.strip_suffix('\n').unwrap_or(text);
    for (i, line) in body.split('\n').enumerate() {
        let n = i + 1;
        let (key, value) = line.split_once('=').ok_or_else(|| err(n, format!("expected key=value, found `{line}`")))?;
        let slot = RESULT_KEYS.iter().position(|k| *k == key).ok_or_else(|| err(n, format!("unknown key `{key}`")))?;
        if values[slot].is_some() {
            return Err(err(n, format!("duplicate key `{key}`")));
        }
        let v: f64 = value.parse().map_err(|_| err(n, format!("`{value}` is not a number")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(err(n, format!("`{key}` must be finite and non-negative")));
        }
        values[slot] = Some(v);
    }
    let [Some(throughput_mbps), Some(mean_delay_ms), fct] = values else {
        return Err(err(0, "throughput_mbps and mean_delay_ms are required".into()));
    };
    Ok(PerfSummary { throughput_mbps, mean_delay_ms, completion_time_ms: fct, bytes_delivered: 0 })
}
