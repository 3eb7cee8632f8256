mod common;

use advgen::env::{Interval, Trace};
use advgen::sim::{capacity_oracle, events_csv, simulate, CcKind, EventKind, SimConfig, EVENTS_HEADER};

fn constant(bw: u32, lat: u32, dur: u32, buffer: u32) -> Trace {
    Trace::new(vec![Interval::new(bw, lat, dur)], buffer, None)
}

#[test]
fn vegas_settles_on_a_constant_link() {
    let cfg = SimConfig { sample_cwnd: true, ..SimConfig::default() };
    let r = simulate(&constant(20, 20, 10_000, 1000), &[CcKind::Vegas], 0, &cfg).unwrap();
    let tail: Vec<f64> = r.flows[0].cwnd_samples[7500..].iter().map(|s| s.1).collect();
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().cloned().fold(0.0, f64::max);
    assert!(hi - lo <= 2.0, "cwnd wandered over [{lo}, {hi}]");
    // 20 Mbps * 40 ms is ~67 packets in flight; vegas adds 2..4 queued.
    assert!((60.0..=80.0).contains(&lo), "{lo}");
    assert_eq!(r.counters.dropped, 0);
}

#[test]
fn bbr_like_fills_a_constant_link() {
    let cfg = SimConfig { log_events: true, ..SimConfig::default() };
    let trace = constant(50, 20, 10_000, 2000);
    let r = simulate(&trace, &[CcKind::BbrLike], 0, &cfg).unwrap();
    let delivered_after = r.events.iter().filter(|e| e.kind == EventKind::Deliver && e.time_ms >= 3000).count();
    let mbps = delivered_after as f64 * 12_000.0 / (7000.0 * 1000.0);
    let oracle = capacity_oracle(&trace).throughput_mbps;
    assert!(mbps >= 0.8 * oracle, "{mbps} vs {oracle}");
}

#[test]
fn reno_fills_a_deep_buffer() {
    let trace = constant(50, 20, 10_000, 2000);
    let r = simulate(&trace, &[CcKind::Reno], 0, &SimConfig::default()).unwrap();
    assert!(r.flows[0].perf.throughput_mbps > 40.0, "{:?}", r.flows[0].perf);
}

#[test]
fn models_fall_short_of_oracle_on_bursty_traces() {
    let trace = Trace::new(
        vec![Interval::new(90, 10, 800), Interval::new(3, 80, 1200), Interval::new(60, 30, 900)],
        40,
        None,
    );
    let oracle = capacity_oracle(&trace).throughput_mbps;
    for m in CcKind::MODELS {
        let p = simulate(&trace, &[m], 0, &SimConfig::default()).unwrap().flows[0].perf;
        assert!(p.throughput_mbps < oracle, "{m:?}");
        assert!(p.throughput_mbps > 0.0, "{m:?}");
        assert!(p.mean_delay_ms >= 10.0, "{m:?}");
    }
}

#[test]
fn fuzz_slice_holds_invariants() {
    for i in 0..20 {
        let trace = common::fuzz_trace(11, i);
        for m in CcKind::MODELS {
            common::fuzz_case(&trace, m, i, if i % 2 == 0 { 0.0 } else { 3.0 }).unwrap_or_else(|e| panic!("trace {i} {m:?}: {e}"));
        }
    }
}

#[test]
fn two_flow_runs_hold_invariants() {
    let cfg = SimConfig { log_events: true, jitter_sigma_ms: 2.0, ..SimConfig::default() };
    for i in 0..10 {
        let trace = common::fuzz_trace(12, i);
        let r = simulate(&trace, &[CcKind::Reno, CcKind::BbrLike], i, &cfg).unwrap();
        common::check_invariants(&trace, &r).unwrap();
    }
}

#[test]
fn event_csv_shape() {
    let cfg = SimConfig { log_events: true, ..SimConfig::default() };
    let r = simulate(&constant(12, 5, 50, 10), &[CcKind::Reno], 0, &cfg).unwrap();
    let csv = events_csv(&r.events);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(EVENTS_HEADER));
    assert_eq!(lines.next(), Some("0,send,0,0"));
    assert_eq!(lines.next(), Some("0,enqueue,0,0"));
    assert_eq!(csv.lines().count(), r.events.len() + 1);
}
