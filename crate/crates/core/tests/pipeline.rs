use std::path::{Path, PathBuf};
use std::process::Command;

use advgen::env::Trace;
use advgen::experiment::{
    replay, run_experiment, ExecutorConfig, ExperimentConfig, ExperimentError, PlsConfig, HISTORY_HEADER,
};
use advgen::optim::Budget;
use advgen::pls::PlsAlgorithm;

fn small(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        seed: 11,
        intervals: 3,
        budget: Budget::Evaluations(100),
        pls: PlsConfig { top_n: 10, ..PlsConfig::default() },
        output_dir: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_advgen"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(name)
}

#[test]
fn budget_is_split_and_counted() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { budget: Budget::Evaluations(300), pls: PlsConfig::default(), ..small(tmp.path()) };
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.budget.optimizer_calls, 270);
    assert_eq!(r.budget.selection_budget, 30);
    assert_eq!(r.budget.selection_evaluations, 30);
    // Deterministic simulator: one reference and one target run per evaluation.
    assert_eq!(r.executor_runs.optimizer, 2 * 270);
    assert_eq!(r.executor_runs.selection, 2 * 30);
    assert_eq!(r.executor_runs.final_, 2 * cfg.final_rounds);
    let history = std::fs::read_to_string(tmp.path().join("history.csv")).unwrap();
    assert_eq!(history.lines().next(), Some(HISTORY_HEADER));
    assert_eq!(history.lines().count(), 271);
    assert_eq!(std::fs::read_dir(tmp.path().join("traces")).unwrap().count(), 270);
}

#[test]
fn simple_max_gives_the_whole_budget_to_the_optimizer() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        pls: PlsConfig { algorithm: PlsAlgorithm::SimpleMax, budget_fraction: 0.0, ..PlsConfig::default() },
        ..small(tmp.path())
    };
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.budget.optimizer_calls, 100);
    assert_eq!(r.executor_runs.selection, 0);
    assert_eq!(r.winner.observed_score, r.best_observed_score);
}

#[test]
fn deterministic_run_reproduces_bytes_and_scores() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_experiment(&small(a.path())).unwrap();
    let rb = run_experiment(&small(b.path())).unwrap();
    for f in ["history.csv", "winner.trace"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(ra.reevaluated, rb.reevaluated);
    // Nothing is noisy, so every final round repeats the learning-phase score.
    assert!(ra.reevaluated.scores.iter().all(|&s| s == ra.winner.observed_score));
    assert_eq!(ra.reevaluated.std_dev, 0.0);
    assert!(ra.reevaluated.mean > 0.0 && ra.reevaluated.mean <= 1.0);
}

#[test]
fn winner_round_trips_and_replays_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let r = run_experiment(&cfg).unwrap();
    let winner = Trace::read(tmp.path().join("winner.trace")).unwrap();
    let bounds = cfg.bounds().unwrap();
    let v = bounds.layout().encode(&winner).unwrap();
    assert_eq!(v, r.winner.vector);
    bounds.validate_vector(&v).unwrap();
    assert_eq!(Trace::parse(&winner.to_file_string()).unwrap(), winner);
    let rep = replay(&tmp.path().join("winner.trace"), &cfg, None).unwrap();
    assert_eq!(rep.reevaluated.mean, r.reevaluated.mean);
    assert!(rep.events_file.is_none());
}

#[test]
fn config_errors_stop_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let cfg = ExperimentConfig { pls: PlsConfig { top_n: 0, ..PlsConfig::default() }, ..small(&out) };
    let e = run_experiment(&cfg).unwrap_err();
    assert!(e.is_config(), "{e}");
    assert!(!out.exists());
}

#[test]
fn failing_external_executor_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        executor: ExecutorConfig::External { command: "exit 3 # {trace} {output}".into(), timeout_ms: 5000, work_dir: None },
        budget: Budget::Evaluations(20),
        pls: PlsConfig { algorithm: PlsAlgorithm::SimpleMax, budget_fraction: 0.0, ..PlsConfig::default() },
        repetitions: 1,
        ..small(tmp.path())
    };
    let e = run_experiment(&cfg).unwrap_err();
    assert!(matches!(e, ExperimentError::NoEvaluations), "{e}");
    let history = std::fs::read_to_string(tmp.path().join("history.csv")).unwrap();
    assert!(history.lines().nth(1).unwrap().starts_with("0,,,traces/iter_00000.trace,"));
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let typo = tmp.path().join("typo.toml");
    let text = std::fs::read_to_string(fixture("configs/smoke.toml")).unwrap().replace("seed = 7", "seed = 7\nsed = 8");
    std::fs::write(&typo, text).unwrap();
    let st = bin().args(["run", typo.to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stderr).contains("sed"));

    let missing = bin().args(["validate", "/definitely/not/here.trace"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let broken = tmp.path().join("broken.toml");
    std::fs::write(
        &broken,
        format!(
            "seed = 1\nintervals = 2\noutput_dir = \"{}\"\nscore = {{ kind = \"uc1_capacity\" }}\nrepetitions = 1\n\
             [budget]\nevaluations = 5\n[optimizer]\nname = \"rg\"\n[pls]\nalgorithm = \"simple_max\"\nbudget_fraction = 0.0\n\
             [executor]\nkind = \"external\"\ncommand = \"false {{trace}} {{output}}\"\ntimeout_ms = 5000\n",
            tmp.path().join("out").display()
        ),
    )
    .unwrap();
    let st = bin().args(["run", broken.to_str().unwrap()]).output().unwrap();
    assert_eq!(st.status.code(), Some(2), "{}", String::from_utf8_lossy(&st.stderr));
}

#[test]
fn cli_bench_pls_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bench.csv");
    let st = bin().args(["bench-pls", "--trials", "50", "--out", out.to_str().unwrap()]).status().unwrap();
    assert!(st.success());
    let csv = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "budget,algorithm,mean_true_score,stderr");
    assert_eq!(lines.len(), 1 + 5 * 6);
    assert_eq!(lines.iter().filter(|l| l.contains(",oracle,")).count(), 5);
}

#[test]
fn cli_replay_matches_documented_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = fixture("fixtures/step.trace");
    let st = bin().args(["validate", trace.to_str().unwrap()]).output().unwrap();
    assert!(st.status.success());
    assert_eq!(String::from_utf8_lossy(&st.stdout), "ok: 3 intervals, 5000 ms\n");
    let out = bin().args(["replay", trace.to_str().unwrap(), "--events", "--out", tmp.path().to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let target = stdout.lines().find(|l| l.starts_with("solo:target,")).unwrap();
    let tput: f64 = target.split(',').nth(1).unwrap().parse().unwrap();
    assert!((tput - 13.0632).abs() < 1e-9, "{target}");
    let reference = stdout.lines().find(|l| l.starts_with("solo:reference,")).unwrap();
    assert!(reference.starts_with("solo:reference,17,"), "{reference}");
    let events = std::fs::read_to_string(tmp.path().join("events.csv")).unwrap();
    assert_eq!(events.lines().next(), Some("time_ms,event,packet_id,flow_id"));
    assert!(events.lines().count() > 1000);
}
