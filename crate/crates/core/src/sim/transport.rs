//! Sender and receiver halves of a cumulative-ACK reliable transport.
//!
//! Loss recovery is NewReno-flavoured: three duplicate ACKs trigger one fast
//! retransmit, partial ACKs retransmit the next hole, and a timeout rewinds
//! to the first unacked packet (go-back-N).

use std::collections::{BTreeSet, VecDeque};

use super::cc::{AckSample, CongestionControl};

pub const MIN_RTO_MS: f64 = 200.0;
pub const INITIAL_RTO_MS: f64 = 1000.0;
pub const MAX_RTO_MS: f64 = 60_000.0;
pub const DUPACK_THRESHOLD: u32 = 3;

#[derive(Debug, Clone, Copy)]
struct SentMeta {
    id: u64,
    sent_at: u64,
    retransmitted: bool,
    delivered: u64,
    delivered_time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckOutcome {
    Advanced,
    Duplicate,
    /// Third duplicate: the hole at `una` is queued for retransmission.
    FastRetransmit,
    Stale,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SenderStats {
    pub sent: u64,
    pub retransmits: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
}

pub struct Sender {
    cc: Box<dyn CongestionControl>,
    total: Option<u64>,
    una: u64,
    next_seq: u64,
    high: u64,
    meta: VecDeque<SentMeta>,
    retransmit: Option<u64>,
    dupacks: u32,
    in_recovery: bool,
    partial_seen: bool,
    recover: u64,
    srtt: Option<f64>,
    rttvar: f64,
    rto: f64,
    deadline: Option<u64>,
    delivered: u64,
    delivered_time: u64,
    credit: f64,
    pub stats: SenderStats,
}

impl Sender {
    /// `total` packets to transfer, or `None` for a backlogged sender.
    pub fn new(cc: Box<dyn CongestionControl>, total: Option<u64>) -> Self {
        Self {
            cc,
            total,
            una: 0,
            next_seq: 0,
            high: 0,
            meta: VecDeque::new(),
            retransmit: None,
            dupacks: 0,
            in_recovery: false,
            partial_seen: false,
            recover: 0,
            srtt: None,
            rttvar: 0.0,
            rto: INITIAL_RTO_MS,
            deadline: None,
            delivered: 0,
            delivered_time: 0,
            credit: 0.0,
            stats: SenderStats::default(),
        }
    }

    pub fn cc(&self) -> &dyn CongestionControl {
        self.cc.as_ref()
    }

    pub fn una(&self) -> u64 {
        self.una
    }

    pub fn rto_ms(&self) -> f64 {
        self.rto
    }

    pub fn srtt_ms(&self) -> Option<f64> {
        self.srtt
    }

    pub fn finished(&self) -> bool {
        self.total.is_some_and(|t| self.una >= t)
    }

    fn inflight(&self) -> u64 {
        self.next_seq - self.una
    }

    /// Adds this ms worth of pacing credit.
    pub fn refill(&mut self) {
        if let Some(rate) = self.cc.pacing_rate() {
            self.credit = (self.credit + rate).min((2.0 * rate).max(1.0));
        }
    }

    /// Sequence number the sender would transmit now, if any.
    pub fn ready(&self) -> Option<u64> {
        if self.cc.pacing_rate().is_some() && self.credit < 1.0 {
            return None;
        }
        if let Some(seq) = self.retransmit {
            return Some(seq);
        }
        let cwnd = self.cc.cwnd().max(1.0).floor() as u64;
        if self.inflight() >= cwnd {
            return None;
        }
        if self.next_seq < self.high {
            return Some(self.next_seq);
        }
        if self.total.is_some_and(|t| self.next_seq >= t) {
            return None;
        }
        Some(self.next_seq)
    }

    /// Records transmission of `seq` (from [`Sender::ready`]) as packet `id`.
    pub fn transmit(&mut self, seq: u64, id: u64, now: u64) {
        if self.cc.pacing_rate().is_some() {
            self.credit -= 1.0;
        }
        let meta = SentMeta { id, sent_at: now, retransmitted: false, delivered: self.delivered, delivered_time: self.delivered_time };
        if seq == self.high {
            self.meta.push_back(meta);
            self.high += 1;
        } else {
            let m = &mut self.meta[(seq - self.una) as usize];
            *m = SentMeta { retransmitted: true, ..meta };
            self.stats.retransmits += 1;
        }
        if self.retransmit == Some(seq) {
            self.retransmit = None;
        } else {
            self.next_seq = seq + 1;
        }
        self.stats.sent += 1;
        if self.deadline.is_none() && self.cc.uses_rto() {
            self.deadline = Some(now + self.rto.ceil() as u64);
        }
    }

    fn update_rtt(&mut self, r: f64) {
        match self.srtt {
            None => {
                self.srtt = Some(r);
                self.rttvar = r / 2.0;
            }
            Some(s) => {
                self.rttvar = 0.75 * self.rttvar + 0.25 * (s - r).abs();
                self.srtt = Some(0.875 * s + 0.125 * r);
            }
        }
        let s = self.srtt.unwrap_or(r);
        self.rto = (s + (4.0 * self.rttvar).max(1.0)).clamp(MIN_RTO_MS, MAX_RTO_MS);
    }

    /// Handles a cumulative ACK for everything below `ack_no`, sent in
    /// response to the arrival of `trigger_seq`.
    pub fn on_ack(&mut self, now: u64, ack_no: u64, trigger_seq: u64) -> AckOutcome {
        if ack_no > self.una {
            let trig = (trigger_seq >= self.una && trigger_seq < self.high).then(|| self.meta[(trigger_seq - self.una) as usize]);
            let newly = ack_no - self.una;
            self.delivered += newly;
            self.delivered_time = now;
            for _ in 0..newly {
                self.meta.pop_front();
            }
            self.una = ack_no;
            self.next_seq = self.next_seq.max(self.una);
            self.dupacks = 0;
            if self.retransmit.is_some_and(|s| s < self.una) {
                self.retransmit = None;
            }

            let rtt = trig.filter(|m| !m.retransmitted).map(|m| (now - m.sent_at) as f64);
            if let Some(r) = rtt {
                self.update_rtt(r);
            }
            let rate = trig.map(|m| (self.delivered - m.delivered) as f64 / ((now - m.delivered_time).max(1)) as f64);
            let mut rearm = true;
            if self.in_recovery {
                if self.una >= self.recover {
                    self.in_recovery = false;
                } else {
                    self.retransmit = Some(self.una);
                    // Only the first partial ACK restarts the timer, so a
                    // window with many holes falls back to a timeout instead
                    // of repairing one hole per RTT.
                    rearm = !self.partial_seen;
                    self.partial_seen = true;
                }
            }
            let sample = AckSample {
                now_ms: now,
                newly_acked: newly,
                rtt_ms: rtt,
                delivery_rate: rate,
                prior_delivered: trig.map_or(self.delivered, |m| m.delivered),
                delivered: self.delivered,
                inflight: self.inflight(),
                in_recovery: self.in_recovery,
            };
            self.cc.on_ack(&sample);
            if self.una >= self.high || !self.cc.uses_rto() {
                self.deadline = None;
            } else if rearm {
                self.deadline = Some(now + self.rto.ceil() as u64);
            }
            AckOutcome::Advanced
        } else if ack_no == self.una && self.una < self.high {
            self.dupacks += 1;
            // After a timeout, duplicates caused by the go-back-N resend must
            // not start another recovery until everything sent before it is
            // acknowledged.
            if self.dupacks == DUPACK_THRESHOLD && !self.in_recovery && self.una >= self.recover {
                self.in_recovery = true;
                self.partial_seen = false;
                self.recover = self.high;
                self.retransmit = Some(self.una);
                self.stats.fast_retransmits += 1;
                self.cc.on_fast_retransmit(now);
                return AckOutcome::FastRetransmit;
            }
            AckOutcome::Duplicate
        } else {
            AckOutcome::Stale
        }
    }

    /// Fires the retransmission timer if due; returns the id of the last
    /// transmission of the packet that timed out.
    pub fn check_timeout(&mut self, now: u64) -> Option<u64> {
        let due = self.deadline.is_some_and(|d| d <= now);
        if !due || self.una >= self.high {
            return None;
        }
        self.stats.timeouts += 1;
        self.cc.on_rto(now);
        self.next_seq = self.una;
        self.retransmit = None;
        self.in_recovery = false;
        self.recover = self.high;
        self.dupacks = 0;
        self.rto = (self.rto * 2.0).min(MAX_RTO_MS);
        self.deadline = Some(now + self.rto.ceil() as u64);
        self.meta.front().map(|m| m.id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Receiver {
    expected: u64,
    out_of_order: BTreeSet<u64>,
    unique: u64,
    delay_sum: f64,
    delay_count: u64,
    total: Option<u64>,
    completed_at: Option<u64>,
}

impl Receiver {
    pub fn new(total: Option<u64>) -> Self {
        Self { total, ..Self::default() }
    }

    /// Accepts a packet and returns the cumulative ACK number.
    pub fn on_packet(&mut self, now: u64, seq: u64, sent_at: u64) -> u64 {
        self.delay_sum += (now - sent_at) as f64;
        self.delay_count += 1;
        if seq == self.expected {
            self.unique += 1;
            self.expected += 1;
            while self.out_of_order.remove(&self.expected) {
                self.expected += 1;
            }
        } else if seq > self.expected && self.out_of_order.insert(seq) {
            self.unique += 1;
        }
        if self.completed_at.is_none() && self.total.is_some_and(|t| self.expected >= t) {
            self.completed_at = Some(now);
        }
        self.expected
    }

    pub fn unique_packets(&self) -> u64 {
        self.unique
    }

    pub fn mean_delay_ms(&self) -> Option<f64> {
        (self.delay_count > 0).then(|| self.delay_sum / self.delay_count as f64)
    }

    pub fn completed_at(&self) -> Option<u64> {
        self.completed_at
    }
}
