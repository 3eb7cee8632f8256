#![allow(dead_code)]

use std::collections::HashMap;

use advgen::env::{sample_uniform, Bounds, ParamRanges, Range, Trace};
use advgen::rng;
use advgen::sim::{capacity_oracle, simulate, CcKind, EventKind, SimConfig, SimResult};

/// Short random traces: K=3 intervals, durations 200..=1500 ms, small
/// buffers so drops, timeouts and reordering all occur.
pub fn fuzz_trace(seed: u64, index: u64) -> Trace {
    let ranges = ParamRanges {
        bandwidth_mbps: Range::new(1, 100),
        latency_ms: Range::new(0, 100),
        duration_ms: Range::new(200, 1500),
        buffer_packets: Range::new(1, 300),
        data_kb: None,
    };
    let bounds = Bounds::uniform(3, &ranges).unwrap();
    sample_uniform(&bounds, &mut rng::stream(seed, 0xf022, index))
}

/// Checks every simulator invariant that can be read off one logged run.
pub fn check_invariants(trace: &Trace, r: &SimResult) -> Result<(), String> {
    let c = &r.counters;
    if c.max_queue > u64::from(trace.buffer_packets) {
        return Err(format!("queue reached {} > buffer {}", c.max_queue, trace.buffer_packets));
    }
    if !(c.delivered <= c.dequeued && c.dequeued <= c.enqueued && c.enqueued <= c.sent) {
        return Err(format!("conservation chain broken: {c:?}"));
    }
    if c.dropped != c.enqueue_attempts - c.enqueued {
        return Err(format!("drops {} != attempts {} - enqueues {}", c.dropped, c.enqueue_attempts, c.enqueued));
    }

    // Replay the log: queue depth after every event, causal order, latency floor.
    let mut depth: i64 = 0;
    let mut send: HashMap<u64, u64> = HashMap::new();
    let mut deq: HashMap<u64, u64> = HashMap::new();
    let mut last_t = 0;
    let mut n_deliver = 0u64;
    for e in &r.events {
        if e.time_ms < last_t {
            return Err(format!("event log goes back in time at {e:?}"));
        }
        last_t = e.time_ms;
        match e.kind {
            EventKind::Send => {
                if send.insert(e.packet_id, e.time_ms).is_some() {
                    return Err(format!("packet id {} sent twice", e.packet_id));
                }
            }
            EventKind::Enqueue => {
                depth += 1;
                if depth > i64::from(trace.buffer_packets) {
                    return Err(format!("queue depth {depth} at {e:?}"));
                }
            }
            EventKind::Dequeue => {
                depth -= 1;
                if !send.contains_key(&e.packet_id) {
                    return Err(format!("dequeue before send: {e:?}"));
                }
                deq.insert(e.packet_id, e.time_ms);
            }
            EventKind::Deliver => {
                n_deliver += 1;
                let (Some(&s), Some(&d)) = (send.get(&e.packet_id), deq.get(&e.packet_id)) else {
                    return Err(format!("delivered a packet never sent or dequeued: {e:?}"));
                };
                let floor = u64::from(trace.interval_at(d).latency_ms);
                if e.time_ms - s < floor {
                    return Err(format!("packet {} took {} ms < latency {floor}", e.packet_id, e.time_ms - s));
                }
            }
            _ => {}
        }
        if depth < 0 {
            return Err(format!("negative queue depth at {e:?}"));
        }
    }
    if n_deliver != c.delivered {
        return Err("logged deliveries disagree with counters".into());
    }
    let oracle = capacity_oracle(trace).bytes_delivered;
    let got: u64 = r.flows.iter().map(|f| f.perf.bytes_delivered).sum();
    if got > oracle {
        return Err(format!("delivered {got} bytes > oracle {oracle}"));
    }
    Ok(())
}

/// Runs one fuzz case (logged, plus a rerun for determinism).
pub fn fuzz_case(trace: &Trace, model: CcKind, seed: u64, jitter: f64) -> Result<(), String> {
    let cfg = SimConfig { log_events: true, jitter_sigma_ms: jitter, ..SimConfig::default() };
    let a = simulate(trace, &[model], seed, &cfg).map_err(|e| e.to_string())?;
    check_invariants(trace, &a)?;
    let b = simulate(trace, &[model], seed, &cfg).map_err(|e| e.to_string())?;
    if a != b {
        return Err("rerun differs".into());
    }
    Ok(())
}
