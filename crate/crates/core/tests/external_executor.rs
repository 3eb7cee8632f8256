use std::time::Instant;

use advgen::env::{Interval, Trace};
use advgen::exec::{evaluate, EvalConfig, ExecError, Executor, ExternalExecutor, Phase};
use advgen::score::{Party, Run, ScoreSpec, UseCase};

fn trace() -> Trace {
    Trace::new(vec![Interval::new(10, 20, 1000)], 50, None)
}

fn script(dir: &tempfile::TempDir, body: &str) -> String {
    let path = dir.path().join("stub.sh");
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    format!("sh {} {{trace}} {{output}} {{seed}} {{run}}", path.display())
}

#[test]
fn stub_reports_fixed_metrics() {
    let dir = tempfile::tempdir().unwrap();
    // The stub checks it was handed a readable trace before answering.
    let cmd = script(&dir, "head -1 \"$1\" | grep -q duration_ms || exit 3\nprintf 'throughput_mbps=10.0\\nmean_delay_ms=25.0\\n' > \"$2\"");
    let ex = ExternalExecutor { work_dir: Some(dir.path().to_path_buf()), ..ExternalExecutor::new(cmd, 5000) };
    let p = ex.run(&trace(), Run::Solo(Party::Target), 1).unwrap();
    assert_eq!((p.throughput_mbps, p.mean_delay_ms), (10.0, 25.0));
}

#[test]
fn placeholders_are_substituted() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(&dir, "printf \"throughput_mbps=$3\\nmean_delay_ms=1\\n\" > \"$2\"\necho \"$4\" > \"$2.run\"");
    let ex = ExternalExecutor { work_dir: Some(dir.path().to_path_buf()), ..ExternalExecutor::new(cmd, 5000) };
    let t = dir.path().join("t.trace");
    trace().write(&t).unwrap();
    let out = dir.path().join("r.result");
    let p = ex.run_file(&t, &out, Run::Solo(Party::Reference), 42).unwrap();
    assert_eq!(p.throughput_mbps, 42.0);
    assert_eq!(std::fs::read_to_string(dir.path().join("r.result.run")).unwrap(), "solo:reference\n");
}

#[test]
fn slow_command_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(&dir, "sleep 5");
    let ex = ExternalExecutor { work_dir: Some(dir.path().to_path_buf()), ..ExternalExecutor::new(cmd, 200) };
    let start = Instant::now();
    let e = ex.run(&trace(), Run::Solo(Party::Target), 0).unwrap_err();
    assert!(matches!(e, ExecError::Timeout { ms: 200 }), "{e}");
    assert!(start.elapsed().as_millis() < 3000);
}

#[test]
fn malformed_output_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(&dir, "printf 'throughput_mbps=10.0\\nmean_delay_ms: 25\\n' > \"$2\"");
    let ex = ExternalExecutor { work_dir: Some(dir.path().to_path_buf()), ..ExternalExecutor::new(cmd, 5000) };
    let e = ex.run(&trace(), Run::Solo(Party::Target), 0).unwrap_err();
    assert!(matches!(e, ExecError::Parse { line: 2, .. }), "{e}");
    assert!(e.to_string().contains("line 2"));
}

#[test]
fn nonzero_exit_is_its_own_error() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(&dir, "echo boom >&2; exit 7");
    let ex = ExternalExecutor { work_dir: Some(dir.path().to_path_buf()), ..ExternalExecutor::new(cmd, 5000) };
    match ex.run(&trace(), Run::Solo(Party::Target), 0).unwrap_err() {
        ExecError::NonZeroExit { code, stderr } => {
            assert_eq!(code, Some(7));
            assert_eq!(stderr, "boom");
        }
        e => panic!("{e}"),
    }
}

#[test]
fn template_must_name_trace_and_output() {
    let ex = ExternalExecutor::new("run-emulator {trace}", 1000);
    assert!(matches!(ex.validate(), Err(ExecError::Config(_))));
}

#[test]
fn evaluates_through_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cmd = script(
        &dir,
        "case \"$4\" in solo:reference) t=40 ;; *) t=10 ;; esac\nprintf \"throughput_mbps=$t\\nmean_delay_ms=5\\n\" > \"$2\"",
    );
    let ex = ExternalExecutor { work_dir: Some(dir.path().to_path_buf()), ..ExternalExecutor::new(cmd, 5000) };
    let cfg = EvalConfig { repetitions: 3, max_concurrent: 3, ..EvalConfig::new(ScoreSpec::new(UseCase::Uc1Capacity), 0) };
    let a = evaluate(&trace(), &cfg, &ex, Phase::Optimizer, 0).unwrap();
    assert_eq!(a.score, 0.75);
    assert_eq!(a.executor_runs(), 6);
    // Only the scratch script is left behind.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}
