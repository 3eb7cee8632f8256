//! Packet-level simulation of one bottleneck link driven by a trace.
//!
//! Time advances in 1 ms ticks. Within a tick the order is: packets due at
//! the receiver arrive, ACKs due at senders arrive, retransmission timers
//! fire, senders transmit into the drop-tail queue, and finally the link
//! receives its bandwidth grant and drains the queue head-first. A dequeued
//! packet reaches the receiver after the one-way latency in force at dequeue
//! time, plus optional non-negative Gaussian jitter. Jitter never reorders: a
//! packet arrives no earlier than the one dequeued before it. ACKs travel
//! back over an uncongested path with the latency in force when they are
//! sent.
//!
//! The link budget is kept in bits: each ms adds `bandwidth_mbps * 1000`
//! bits and a 1500-byte packet costs 12000, so no rounding accumulates. An
//! idle link banks at most one packet's worth.

pub mod cc;
pub mod transport;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Trace};
use crate::rng;
use crate::score::PerfSummary;
pub use cc::{bbr_like, reno, vegas, CcKind, CongestionControl};
use transport::{AckOutcome, Receiver, Sender, SenderStats};

pub const MTU_BYTES: u64 = 1500;
pub const PACKET_BITS: u64 = MTU_BYTES * 8;
/// Event log CSV header.
pub const EVENTS_HEADER: &str = "time_ms,event,packet_id,flow_id";

const JITTER_STREAM: u64 = 0x6a17;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid trace: {0}")]
    Trace(#[from] EnvError),
    #[error("expected 1 or 2 flows, got {0}")]
    Flows(usize),
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Standard deviation of the per-packet service jitter; 0 disables it.
    pub jitter_sigma_ms: f64,
    pub log_events: bool,
    /// Record every flow's cwnd once per ms.
    pub sample_cwnd: bool,
    /// Cap on simulated time when the trace carries a transfer size.
    pub max_duration_ms: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { jitter_sigma_ms: 0.0, log_events: false, sample_cwnd: false, max_duration_ms: 600_000 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.jitter_sigma_ms >= 0.0 && self.jitter_sigma_ms.is_finite()) {
            return Err(SimError::Config(format!("jitter_sigma_ms must be finite and >= 0, got {}", self.jitter_sigma_ms)));
        }
        if self.max_duration_ms == 0 {
            return Err(SimError::Config("max_duration_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.jitter_sigma_ms == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Send,
    Enqueue,
    Drop,
    Dequeue,
    Deliver,
    Ack,
    Rto,
    Dupack,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Send => "send",
            EventKind::Enqueue => "enqueue",
            EventKind::Drop => "drop",
            EventKind::Dequeue => "dequeue",
            EventKind::Deliver => "deliver",
            EventKind::Ack => "ack",
            EventKind::Rto => "rto",
            EventKind::Dupack => "dupack",
        })
    }
}

/// For `ack` and `dupack` the packet is the one whose arrival triggered the
/// ACK; for `rto` it is the last transmission of the packet that timed out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub time_ms: u64,
    pub kind: EventKind,
    pub packet_id: u64,
    pub flow: usize,
}

pub fn events_csv(events: &[Event]) -> String {
    let mut s = String::with_capacity(EVENTS_HEADER.len() + 1 + events.len() * 20);
    s.push_str(EVENTS_HEADER);
    s.push('\n');
    for e in events {
        s.push_str(&format!("{},{},{},{}\n", e.time_ms, e.kind, e.packet_id, e.flow));
    }
    s
}

/// Link-level totals over all flows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub sent: u64,
    pub enqueue_attempts: u64,
    pub enqueued: u64,
    pub dropped: u64,
    pub dequeued: u64,
    pub delivered: u64,
    pub max_queue: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub model: &'static str,
    pub perf: PerfSummary,
    pub sender: SenderStats,
    /// `(time_ms, cwnd)` once per ms when sampling is on.
    pub cwnd_samples: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub flows: Vec<FlowResult>,
    pub events: Vec<Event>,
    pub counters: Counters,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    id: u64,
    flow: usize,
    seq: u64,
    sent_at: u64,
}

struct Flow {
    sender: Sender,
    receiver: Receiver,
    model: &'static str,
    cwnd_samples: Vec<(u64, f64)>,
}

fn packets_for(data_kb: u32) -> u64 {
    (u64::from(data_kb) * 1000).div_ceil(MTU_BYTES)
}

/// Runs one or two flows over `trace`. Two flows share the queue, taking
/// turns one packet at a time when both can send in the same ms.
pub fn simulate(trace: &Trace, models: &[CcKind], seed: u64, cfg: &SimConfig) -> Result<SimResult, SimError> {
    trace.check()?;
    cfg.validate()?;
    if models.is_empty() || models.len() > 2 {
        return Err(SimError::Flows(models.len()));
    }
    let total = trace.data_kb.map(packets_for);
    let mut flows: Vec<Flow> = models
        .iter()
        .map(|m| Flow { sender: Sender::new(m.build(), total), receiver: Receiver::new(total), model: m.name(), cwnd_samples: Vec::new() })
        .collect();
    let end = match total {
        None => trace.total_duration_ms(),
        Some(_) => cfg.max_duration_ms,
    };
    let buffer = u64::from(trace.buffer_packets);
    let mut jitter = (!cfg.is_deterministic()).then(|| {
        (rng::stream(seed, JITTER_STREAM, 0), Normal::new(0.0, cfg.jitter_sigma_ms).expect("validated sigma"))
    });

    let mut events = Vec::new();
    let mut log = |time_ms: u64, kind: EventKind, packet_id: u64, flow: usize| {
        if cfg.log_events {
            events.push(Event { time_ms, kind, packet_id, flow });
        }
    };
    let mut c = Counters::default();
    let mut queue: VecDeque<Packet> = VecDeque::new();
    // (arrival, packet id, packet); ids are unique so ties never compare the payload.
    let mut in_flight: BinaryHeap<Reverse<(u64, u64, usize, u64, u64)>> = BinaryHeap::new();
    // (arrival, order, flow, ack number, trigger seq, trigger id)
    let mut acks: BinaryHeap<Reverse<(u64, u64, usize, u64, u64, u64)>> = BinaryHeap::new();
    let mut ack_order = 0u64;
    let mut next_id = 0u64;
    let mut tokens = 0u64;
    let mut last_jittered = 0u64;
    let mut t = 0u64;

    while t < end {
        let iv = *trace.interval_at(t);
        let latency = u64::from(iv.latency_ms);

        while let Some(&Reverse((at, id, flow, seq, sent_at))) = in_flight.peek() {
            if at > t {
                break;
            }
            in_flight.pop();
            c.delivered += 1;
            log(t, EventKind::Deliver, id, flow);
            let ack_no = flows[flow].receiver.on_packet(t, seq, sent_at);
            acks.push(Reverse((t + latency, ack_order, flow, ack_no, seq, id)));
            ack_order += 1;
        }

        while let Some(&Reverse((at, _, flow, ack_no, seq, id))) = acks.peek() {
            if at > t {
                break;
            }
            acks.pop();
            match flows[flow].sender.on_ack(t, ack_no, seq) {
                AckOutcome::Advanced => log(t, EventKind::Ack, id, flow),
                AckOutcome::Duplicate | AckOutcome::FastRetransmit => log(t, EventKind::Dupack, id, flow),
                AckOutcome::Stale => log(t, EventKind::Ack, id, flow),
            }
        }

        for (i, f) in flows.iter_mut().enumerate() {
            if let Some(id) = f.sender.check_timeout(t) {
                log(t, EventKind::Rto, id, i);
            }
            f.sender.refill();
        }

        loop {
            let mut any = false;
            for (i, f) in flows.iter_mut().enumerate() {
                let Some(seq) = f.sender.ready() else { continue };
                any = true;
                let id = next_id;
                next_id += 1;
                f.sender.transmit(seq, id, t);
                c.sent += 1;
                log(t, EventKind::Send, id, i);
                c.enqueue_attempts += 1;
                if (queue.len() as u64) < buffer {
                    queue.push_back(Packet { id, flow: i, seq, sent_at: t });
                    c.enqueued += 1;
                    c.max_queue = c.max_queue.max(queue.len() as u64);
                    debug_assert!(queue.len() as u64 <= buffer);
                    log(t, EventKind::Enqueue, id, i);
                } else {
                    c.dropped += 1;
                    log(t, EventKind::Drop, id, i);
                }
            }
            if !any {
                break;
            }
        }

        tokens += u64::from(iv.bandwidth_mbps) * 1000;
        while tokens >= PACKET_BITS {
            let Some(p) = queue.pop_front() else { break };
            tokens -= PACKET_BITS;
            c.dequeued += 1;
            log(t, EventKind::Dequeue, p.id, p.flow);
            let arrival = match &mut jitter {
                Some((r, normal)) => {
                    last_jittered = last_jittered.max(t + latency + normal.sample(r).abs().round() as u64);
                    last_jittered
                }
                None => t + latency,
            };
            in_flight.push(Reverse((arrival, p.id, p.flow, p.seq, p.sent_at)));
        }
        if queue.is_empty() {
            tokens = tokens.min(PACKET_BITS);
        }

        if cfg.sample_cwnd {
            for f in &mut flows {
                f.cwnd_samples.push((t, f.sender.cc().cwnd()));
            }
        }
        t += 1;
        if total.is_some() && flows.iter().all(|f| f.receiver.completed_at().is_some()) {
            break;
        }
    }

    let elapsed = t;
    let flows = flows
        .into_iter()
        .map(|f| {
            let bytes = f.receiver.unique_packets() * MTU_BYTES;
            let completion = f.receiver.completed_at().map(|c| (c + 1) as f64);
            if total.is_some() && completion.is_none() {
                log::warn!("{} flow did not finish its transfer within {elapsed} ms", f.model);
            }
            let span = completion.unwrap_or(elapsed as f64).max(1.0);
            FlowResult {
                model: f.model,
                perf: PerfSummary {
                    throughput_mbps: bytes as f64 * 8.0 / (span * 1000.0),
                    // Nothing arrived: the delay is at least the whole run.
                    mean_delay_ms: f.receiver.mean_delay_ms().unwrap_or(elapsed as f64),
                    completion_time_ms: total.map(|_| completion.unwrap_or(elapsed as f64)),
                    bytes_delivered: bytes,
                },
                sender: f.sender.stats,
                cwnd_samples: f.cwnd_samples,
            }
        })
        .collect();
    Ok(SimResult { flows, events, counters: c, elapsed_ms: elapsed })
}

/// The best any sender could do: the link's duration-weighted mean bandwidth
/// at the duration-weighted mean propagation delay.
pub fn capacity_oracle(trace: &Trace) -> PerfSummary {
    let completion = trace.data_kb.map(|kb| {
        let mut bits = packets_for(kb) * PACKET_BITS;
        let mut t = 0u64;
        // Walk the (cyclic) trace until the transfer fits.
        loop {
            if trace.capacity_bytes() == 0 {
                break t as f64;
            }
            let iv = trace.interval_at(t);
            let per_ms = u64::from(iv.bandwidth_mbps) * 1000;
            bits = bits.saturating_sub(per_ms);
            t += 1;
            if bits == 0 {
                break t as f64;
            }
        }
    });
    PerfSummary {
        throughput_mbps: trace.mean_bandwidth_mbps(),
        mean_delay_ms: trace.mean_latency_ms(),
        completion_time_ms: completion,
        bytes_delivered: match trace.data_kb {
            Some(kb) => packets_for(kb) * MTU_BYTES,
            None => trace.capacity_bytes(),
        },
    }
}
