//! Toy congestion controllers. They drive the same transport and differ only
//! in how they size the window and pace.

use serde::{Deserialize, Serialize};

pub const INITIAL_CWND: f64 = 10.0;
pub const MIN_CWND: f64 = 1.0;
pub const MAX_CWND: f64 = 100_000.0;

/// What the transport learned from one cumulative ACK that moved `una`.
#[derive(Debug, Clone, Copy)]
pub struct AckSample {
    pub now_ms: u64,
    pub newly_acked: u64,
    /// Karn-filtered: absent when the triggering packet was a retransmission.
    pub rtt_ms: Option<f64>,
    /// Packets per ms over the triggering packet's flight.
    pub delivery_rate: Option<f64>,
    /// Cumulative delivered count when the triggering packet was sent.
    pub prior_delivered: u64,
    pub delivered: u64,
    pub inflight: u64,
    pub in_recovery: bool,
}

pub trait CongestionControl: Send {
    fn name(&self) -> &'static str;
    /// Congestion window in packets, at least [`MIN_CWND`].
    fn cwnd(&self) -> f64;
    /// Packets per ms, or `None` for window-limited bursts.
    fn pacing_rate(&self) -> Option<f64> {
        None
    }
    fn on_ack(&mut self, ack: &AckSample);
    fn on_fast_retransmit(&mut self, now_ms: u64);
    fn on_rto(&mut self, now_ms: u64);
    /// Whether the transport should run its retransmission timer.
    fn uses_rto(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcKind {
    Reno,
    Vegas,
    BbrLike,
    /// Unresponsive source sending a fixed number of packets every ms. Used
    /// to saturate the link in tests.
    Greedy { packets_per_ms: u32 },
}

impl CcKind {
    pub const MODELS: [CcKind; 3] = [CcKind::Reno, CcKind::Vegas, CcKind::BbrLike];

    pub fn build(self) -> Box<dyn CongestionControl> {
        match self {
            CcKind::Reno => Box::new(Reno::new()),
            CcKind::Vegas => Box::new(Vegas::new()),
            CcKind::BbrLike => Box::new(BbrLike::new()),
            CcKind::Greedy { packets_per_ms } => Box::new(Greedy { rate: f64::from(packets_per_ms) }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CcKind::Reno => "reno",
            CcKind::Vegas => "vegas",
            CcKind::BbrLike => "bbr_like",
            CcKind::Greedy { .. } => "greedy",
        }
    }
}

pub fn reno() -> Box<dyn CongestionControl> {
    CcKind::Reno.build()
}

pub fn vegas() -> Box<dyn CongestionControl> {
    CcKind::Vegas.build()
}

pub fn bbr_like() -> Box<dyn CongestionControl> {
    CcKind::BbrLike.build()
}

#[derive(Debug, Clone)]
pub struct Reno {
    cwnd: f64,
    ssthresh: f64,
}

impl Reno {
    pub fn new() -> Self {
        Self { cwnd: INITIAL_CWND, ssthresh: f64::INFINITY }
    }

    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }
}

impl Default for Reno {
    fn default() -> Self {
        Self::new()
    }
}

impl CongestionControl for Reno {
    fn name(&self) -> &'static str {
        "reno"
    }

    fn cwnd(&self) -> f64 {
        self.cwnd
    }

    fn on_ack(&mut self, ack: &AckSample) {
        if ack.in_recovery {
            return;
        }
        let n = ack.newly_acked as f64;
        if self.cwnd < self.ssthresh {
            self.cwnd += n;
        } else {
            self.cwnd += n / self.cwnd;
        }
        self.cwnd = self.cwnd.min(MAX_CWND);
    }

    fn on_fast_retransmit(&mut self, _now_ms: u64) {
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.cwnd = self.ssthresh;
    }

    fn on_rto(&mut self, _now_ms: u64) {
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.cwnd = MIN_CWND;
    }
}

pub const VEGAS_ALPHA: f64 = 2.0;
pub const VEGAS_BETA: f64 = 4.0;
pub const VEGAS_GAMMA: f64 = 1.0;

/// Delay-based window control. Once per RTT it estimates the packets it
/// keeps queued, `cwnd * (1 - base_rtt / rtt)`, and nudges the window by one
/// to hold that between alpha and beta. Slow start doubles only every other
/// round so the queue estimate is taken with a steady window.
#[derive(Debug, Clone)]
pub struct Vegas {
    cwnd: f64,
    slow_start: bool,
    base_rtt: f64,
    round_min_rtt: f64,
    round_end: u64,
    grow_round: bool,
}

impl Vegas {
    pub fn new() -> Self {
        Self {
            cwnd: INITIAL_CWND,
            slow_start: true,
            base_rtt: f64::INFINITY,
            round_min_rtt: f64::INFINITY,
            round_end: 0,
            grow_round: true,
        }
    }

    pub fn in_slow_start(&self) -> bool {
        self.slow_start
    }
}

impl Default for Vegas {
    fn default() -> Self {
        Self::new()
    }
}

impl CongestionControl for Vegas {
    fn name(&self) -> &'static str {
        "vegas"
    }

    fn cwnd(&self) -> f64 {
        self.cwnd
    }

    fn on_ack(&mut self, ack: &AckSample) {
        if let Some(rtt) = ack.rtt_ms {
            let rtt = rtt.max(1.0);
            self.base_rtt = self.base_rtt.min(rtt);
            self.round_min_rtt = self.round_min_rtt.min(rtt);
        }
        if ack.in_recovery {
            return;
        }
        if self.slow_start && self.grow_round {
            self.cwnd = (self.cwnd + ack.newly_acked as f64).min(MAX_CWND);
        }
        if ack.prior_delivered < self.round_end {
            return;
        }
        // A packet sent after the previous round closed was acked.
        self.round_end = ack.delivered;
        self.grow_round = !self.grow_round;
        if !self.round_min_rtt.is_finite() {
            return;
        }
        let rtt = self.round_min_rtt;
        self.round_min_rtt = f64::INFINITY;
        let diff = self.cwnd * (1.0 - self.base_rtt / rtt);
        if self.slow_start {
            if diff > VEGAS_GAMMA {
                self.slow_start = false;
                let target = self.cwnd * self.base_rtt / rtt;
                self.cwnd = self.cwnd.min(target + 1.0);
            }
        } else if diff < VEGAS_ALPHA {
            self.cwnd += 1.0;
        } else if diff > VEGAS_BETA {
            self.cwnd -= 1.0;
        }
        self.cwnd = self.cwnd.clamp(2.0, MAX_CWND);
    }

    fn on_fast_retransmit(&mut self, _now_ms: u64) {
        self.slow_start = false;
        self.cwnd = (self.cwnd / 2.0).max(2.0);
    }

    fn on_rto(&mut self, _now_ms: u64) {
        self.slow_start = true;
        self.cwnd = MIN_CWND;
    }
}

/// Startup pacing gain, 2/ln 2.
pub const BBR_HIGH_GAIN: f64 = 2.885;
pub const BBR_GAIN_CYCLE: [f64; 8] = [1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
pub const BBR_BW_WINDOW_ROUNDS: u64 = 10;
pub const BBR_MIN_RTT_WINDOW_MS: u64 = 10_000;
const BBR_CWND_GAIN: f64 = 2.0;
const BBR_MIN_CWND: f64 = 4.0;
const BBR_FULL_BW_GROWTH: f64 = 1.25;
const BBR_FULL_BW_ROUNDS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbrState {
    Startup,
    Drain,
    ProbeBw,
}

/// Rate-based model: paces at a gain times the windowed-max delivery rate and
/// caps inflight at twice the estimated BDP.
#[derive(Debug, Clone)]
pub struct BbrLike {
    state: BbrState,
    /// (round, rate) samples, newest last.
    bw_samples: Vec<(u64, f64)>,
    btl_bw: f64,
    min_rtt: f64,
    min_rtt_stamp: u64,
    round: u64,
    round_end: u64,
    full_bw: f64,
    full_bw_rounds: u32,
    phase: usize,
    phase_start: u64,
    inflight: u64,
    after_rto: bool,
}

impl BbrLike {
    pub fn new() -> Self {
        Self {
            state: BbrState::Startup,
            bw_samples: Vec::new(),
            btl_bw: 0.0,
            min_rtt: f64::INFINITY,
            min_rtt_stamp: 0,
            round: 0,
            round_end: 0,
            full_bw: 0.0,
            full_bw_rounds: 0,
            phase: 0,
            phase_start: 0,
            inflight: 0,
            after_rto: false,
        }
    }

    pub fn state(&self) -> BbrState {
        self.state
    }

    /// Packets per ms.
    pub fn bottleneck_bw(&self) -> f64 {
        self.btl_bw
    }

    fn bdp(&self) -> Option<f64> {
        (self.btl_bw > 0.0 && self.min_rtt.is_finite()).then(|| self.btl_bw * self.min_rtt)
    }

    fn pacing_gain(&self) -> f64 {
        match self.state {
            BbrState::Startup => BBR_HIGH_GAIN,
            BbrState::Drain => 1.0 / BBR_HIGH_GAIN,
            BbrState::ProbeBw => BBR_GAIN_CYCLE[self.phase],
        }
    }
}

impl Default for BbrLike {
    fn default() -> Self {
        Self::new()
    }
}

impl CongestionControl for BbrLike {
    fn name(&self) -> &'static str {
        "bbr_like"
    }

    fn cwnd(&self) -> f64 {
        if self.after_rto {
            return MIN_CWND;
        }
        match self.bdp() {
            None => INITIAL_CWND,
            Some(bdp) => {
                let gain = if self.state == BbrState::Startup { BBR_HIGH_GAIN } else { BBR_CWND_GAIN };
                (gain * bdp).clamp(BBR_MIN_CWND, MAX_CWND)
            }
        }
    }

    fn pacing_rate(&self) -> Option<f64> {
        (self.btl_bw > 0.0).then(|| self.pacing_gain() * self.btl_bw)
    }

    fn on_ack(&mut self, ack: &AckSample) {
        self.after_rto = false;
        self.inflight = ack.inflight;
        let round_start = ack.prior_delivered >= self.round_end;
        if round_start {
            self.round += 1;
            self.round_end = ack.delivered;
        }
        if let Some(rtt) = ack.rtt_ms {
            let rtt = rtt.max(1.0);
            if rtt <= self.min_rtt || ack.now_ms.saturating_sub(self.min_rtt_stamp) > BBR_MIN_RTT_WINDOW_MS {
                self.min_rtt = rtt;
                self.min_rtt_stamp = ack.now_ms;
            }
        }
        if let Some(rate) = ack.delivery_rate {
            self.bw_samples.push((self.round, rate));
        }
        let oldest = self.round.saturating_sub(BBR_BW_WINDOW_ROUNDS - 1);
        self.bw_samples.retain(|&(r, _)| r >= oldest);
        self.btl_bw = self.bw_samples.iter().map(|&(_, b)| b).fold(0.0, f64::max);

        match self.state {
            BbrState::Startup => {
                if round_start && self.btl_bw > 0.0 {
                    if self.btl_bw >= self.full_bw * BBR_FULL_BW_GROWTH {
                        self.full_bw = self.btl_bw;
                        self.full_bw_rounds = 0;
                    } else {
                        self.full_bw_rounds += 1;
                        if self.full_bw_rounds >= BBR_FULL_BW_ROUNDS {
                            self.state = BbrState::Drain;
                        }
                    }
                }
            }
            BbrState::Drain => {
                if self.bdp().is_some_and(|bdp| self.inflight as f64 <= bdp) {
                    self.state = BbrState::ProbeBw;
                    self.phase = 2;
                    self.phase_start = ack.now_ms;
                }
            }
            BbrState::ProbeBw => {
                let period = if self.min_rtt.is_finite() { self.min_rtt } else { 1.0 };
                if (ack.now_ms - self.phase_start) as f64 >= period {
                    self.phase = (self.phase + 1) % BBR_GAIN_CYCLE.len();
                    self.phase_start = ack.now_ms;
                }
            }
        }
    }

    fn on_fast_retransmit(&mut self, _now_ms: u64) {}

    fn on_rto(&mut self, _now_ms: u64) {
        self.after_rto = true;
    }
}

/// See [`CcKind::Greedy`].
#[derive(Debug, Clone)]
pub struct Greedy {
    rate: f64,
}

impl CongestionControl for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn cwnd(&self) -> f64 {
        MAX_CWND
    }

    fn pacing_rate(&self) -> Option<f64> {
        Some(self.rate)
    }

    fn on_ack(&mut self, _ack: &AckSample) {}

    fn on_fast_retransmit(&mut self, _now_ms: u64) {}

    fn on_rto(&mut self, _now_ms: u64) {}

    fn uses_rto(&self) -> bool {
        false
    }
}
