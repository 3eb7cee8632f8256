//! Network environment model: traces, parameter bounds, the flat integer
//! encoding every optimizer works on, and the on-disk trace format.
//!
//! A [`Trace`] is a sequence of `(bandwidth, latency, duration)` intervals plus
//! the time-invariant buffer length and an optional transfer size. Optimizers
//! never touch traces directly; they operate on [`TraceVector`]s whose layout is
//!
//! ```text
//! bw_1, lat_1, dur_1, ..., bw_K, lat_K, dur_K, buffer_len[, data_size]
//! ```
//!
//! so that crossover cut points mean the same thing in every run.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Header line of the trace file format.
pub const TRACE_HEADER: &str = "duration_ms,bandwidth_mbps,latency_ms";

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("{} bound violation(s): {}", .0.len(), list_violations(.0))]
    Bounds(Vec<Violation>),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("trace file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn list_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    /// Megabits per second.
    pub bandwidth_mbps: u32,
    /// One-way, milliseconds.
    pub latency_ms: u32,
    pub duration_ms: u32,
}

impl Interval {
    pub fn new(bandwidth_mbps: u32, latency_ms: u32, duration_ms: u32) -> Self {
        Self { bandwidth_mbps, latency_ms, duration_ms }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trace {
    pub intervals: Vec<Interval>,
    /// Bottleneck queue capacity in packets.
    pub buffer_packets: u32,
    /// Transfer size in kilobytes. `None` means the sender is backlogged for
    /// the whole trace.
    pub data_kb: Option<u32>,
}

impl Trace {
    pub fn new(intervals: Vec<Interval>, buffer_packets: u32, data_kb: Option<u32>) -> Self {
        Self { intervals, buffer_packets, data_kb }
    }

    pub fn total_duration_ms(&self) -> u64 {
        self.intervals.iter().map(|i| u64::from(i.duration_ms)).sum()
    }

    /// Duration-weighted mean bandwidth in Mbps.
    pub fn mean_bandwidth_mbps(&self) -> f64 {
        self.weighted_mean(|i| f64::from(i.bandwidth_mbps))
    }

    /// Duration-weighted mean one-way latency in ms.
    pub fn mean_latency_ms(&self) -> f64 {
        self.weighted_mean(|i| f64::from(i.latency_ms))
    }

    pub fn min_latency_ms(&self) -> u32 {
        self.intervals.iter().map(|i| i.latency_ms).min().unwrap_or(0)
    }

    /// Total bytes the link can carry over one pass of the trace.
    pub fn capacity_bytes(&self) -> u64 {
        // 1 Mbps for 1 ms is 1000 bits = 125 bytes.
        self.intervals
            .iter()
            .map(|i| u64::from(i.bandwidth_mbps) * u64::from(i.duration_ms) * 125)
            .sum()
    }

    /// Interval in effect at `t_ms`. Past the end the trace repeats from the
    /// start, as trace-driven emulators do.
    pub fn interval_at(&self, t_ms: u64) -> &Interval {
        let total = self.total_duration_ms();
        let mut t = if total == 0 { 0 } else { t_ms % total };
        for iv in &self.intervals {
            let d = u64::from(iv.duration_ms);
            if t < d {
                return iv;
            }
            t -= d;
        }
        self.intervals.last().expect("trace has no intervals")
    }

    /// Checks the intrinsic invariants (non-empty, bandwidth and duration
    /// at least 1, buffer at least 1). Bounds are checked by [`validate`].
    pub fn check(&self) -> Result<(), EnvError> {
        let layout = Layout::new(self.intervals.len().max(1), self.data_kb.is_some());
        if self.intervals.is_empty() {
            return Err(EnvError::Shape { expected: "at least one interval".into(), found: "0".into() });
        }
        let mut out = Vec::new();
        let v = layout.encode(self)?;
        for (pos, (&value, slot)) in v.values().iter().zip(layout.slots()).enumerate() {
            let min = slot.intrinsic_min();
            if value < min {
                out.push(Violation { position: pos, slot, value, lower: min, upper: i64::from(u32::MAX) });
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(EnvError::Bounds(out))
        }
    }

    fn weighted_mean(&self, f: impl Fn(&Interval) -> f64) -> f64 {
        let total = self.total_duration_ms();
        if total == 0 {
            return 0.0;
        }
        let sum: f64 = self.intervals.iter().map(|i| f(i) * f64::from(i.duration_ms)).sum();
        sum / total as f64
    }

    /// Serialize to the text trace format. Lines end in LF.
    pub fn to_file_string(&self) -> String {
        let mut s = String::with_capacity(40 + 16 * self.intervals.len());
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for iv in &self.intervals {
            s.push_str(&format!("{},{},{}\n", iv.duration_ms, iv.bandwidth_mbps, iv.latency_ms));
        }
        s.push_str(&format!("buffer_packets={}\n", self.buffer_packets));
        if let Some(kb) = self.data_kb {
            s.push_str(&format!("data_kb={kb}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let err = |line: usize, message: String| EnvError::Parse { line, message };
        let body = text.strip_suffix('\n').unwrap_or(text);
        let mut lines = body.split('\n').enumerate().map(|(i, l)| (i + 1, l));

        match lines.next() {
            Some((_, TRACE_HEADER)) => {}
            Some((n, other)) => return Err(err(n, format!("expected header `{TRACE_HEADER}`, found `{other}`"))),
            None => return Err(err(1, "empty file".into())),
        }

        let mut intervals = Vec::new();
        let mut buffer = None;
        let mut data_kb = None;
        for (n, line) in lines {
            if line.contains('\r') || line != line.trim_end() {
                return Err(err(n, "trailing whitespace or CR".into()));
            }
            if let Some(v) = line.strip_prefix("buffer_packets=") {
                if buffer.is_some() {
                    return Err(err(n, "duplicate buffer_packets".into()));
                }
                buffer = Some(parse_u32(v).map_err(|m| err(n, m))?);
            } else if let Some(v) = line.strip_prefix("data_kb=") {
                if buffer.is_none() || data_kb.is_some() {
                    return Err(err(n, "data_kb must follow buffer_packets exactly once".into()));
                }
                data_kb = Some(parse_u32(v).map_err(|m| err(n, m))?);
            } else {
                if buffer.is_some() {
                    return Err(err(n, format!("unexpected line after buffer_packets: `{line}`")));
                }
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != 3 {
                    return Err(err(n, format!("expected 3 comma-separated fields, found {}", fields.len())));
                }
                let dur = parse_u32(fields[0]).map_err(|m| err(n, m))?;
                let bw = parse_u32(fields[1]).map_err(|m| err(n, m))?;
                let lat = parse_u32(fields[2]).map_err(|m| err(n, m))?;
                intervals.push(Interval::new(bw, lat, dur));
            }
        }
        let buffer_packets = buffer.ok_or_else(|| err(0, "missing buffer_packets line".into()))?;
        if intervals.is_empty() {
            return Err(err(2, "no intervals".into()));
        }
        Ok(Trace { intervals, buffer_packets, data_kb })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), EnvError> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }
}

fn parse_u32(s: &str) -> Result<u32, String> {
    // Reject signs and padding; the format is canonical decimal.
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("`{s}` is not a non-negative integer"));
    }
    s.parse().map_err(|e| format!("`{s}`: {e}"))
}

/// What a vector position holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    Bandwidth(usize),
    Latency(usize),
    Duration(usize),
    Buffer,
    DataSize,
}

impl Slot {
    fn intrinsic_min(self) -> i64 {
        match self {
            Slot::Latency(_) | Slot::DataSize => 0,
            Slot::Bandwidth(_) | Slot::Duration(_) | Slot::Buffer => 1,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Bandwidth(k) => write!(f, "bandwidth[{k}]"),
            Slot::Latency(k) => write!(f, "latency[{k}]"),
            Slot::Duration(k) => write!(f, "duration[{k}]"),
            Slot::Buffer => f.write_str("buffer_packets"),
            Slot::DataSize => f.write_str("data_kb"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub position: usize,
    pub slot: Slot,
    pub value: i64,
    pub lower: i64,
    pub upper: i64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (position {}) = {} outside [{}, {}]", self.slot, self.position, self.value, self.lower, self.upper)
    }
}

/// Maps vector positions to trace fields for a fixed interval count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub intervals: usize,
    pub data_size: bool,
}

impl Layout {
    pub fn new(intervals: usize, data_size: bool) -> Self {
        Self { intervals, data_size }
    }

    pub fn len(&self) -> usize {
        3 * self.intervals + 1 + usize::from(self.data_size)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn slot(&self, position: usize) -> Slot {
        let k = position / 3;
        if k < self.intervals {
            match position % 3 {
                0 => Slot::Bandwidth(k),
                1 => Slot::Latency(k),
                _ => Slot::Duration(k),
            }
        } else if position == 3 * self.intervals {
            Slot::Buffer
        } else {
            Slot::DataSize
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        (0..self.len()).map(|p| self.slot(p))
    }

    fn check_trace_shape(&self, trace: &Trace) -> Result<(), EnvError> {
        if trace.intervals.len() != self.intervals || trace.data_kb.is_some() != self.data_size {
            return Err(EnvError::Shape {
                expected: self.describe(),
                found: Layout::new(trace.intervals.len(), trace.data_kb.is_some()).describe(),
            });
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!("{} interval(s){}", self.intervals, if self.data_size { " + data_kb" } else { "" })
    }

    pub fn encode(&self, trace: &Trace) -> Result<TraceVector, EnvError> {
        self.check_trace_shape(trace)?;
        let mut v = Vec::with_capacity(self.len());
        for iv in &trace.intervals {
            v.extend([iv.bandwidth_mbps, iv.latency_ms, iv.duration_ms].map(i64::from));
        }
        v.push(i64::from(trace.buffer_packets));
        if let Some(kb) = trace.data_kb {
            v.push(i64::from(kb));
        }
        Ok(TraceVector(v))
    }

    pub fn decode(&self, vector: &TraceVector) -> Result<Trace, EnvError> {
        let v = vector.values();
        if v.len() != self.len() {
            return Err(EnvError::Shape {
                expected: format!("vector of length {}", self.len()),
                found: format!("length {}", v.len()),
            });
        }
        let field = |p: usize| {
            u32::try_from(v[p]).map_err(|_| EnvError::Bounds(vec![Violation {
                position: p,
                slot: self.slot(p),
                value: v[p],
                lower: 0,
                upper: i64::from(u32::MAX),
            }]))
        };
        let mut intervals = Vec::with_capacity(self.intervals);
        for k in 0..self.intervals {
            intervals.push(Interval::new(field(3 * k)?, field(3 * k + 1)?, field(3 * k + 2)?));
        }
        let buffer_packets = field(3 * self.intervals)?;
        let data_kb = if self.data_size { Some(field(3 * self.intervals + 1)?) } else { None };
        Ok(Trace { intervals, buffer_packets, data_kb })
    }
}

/// Flat integer encoding of a trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TraceVector(pub Vec<i64>);

impl TraceVector {
    pub fn values(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<i64>> for TraceVector {
    fn from(v: Vec<i64>) -> Self {
        TraceVector(v)
    }
}

/// Inclusive per-position integer bounds over a [`Layout`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    lower: Vec<i64>,
    upper: Vec<i64>,
    layout: Layout,
}

/// Inclusive `[lo, hi]` range for one parameter family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range {
    pub lo: i64,
    pub hi: i64,
}

impl Range {
    pub const fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }
}

/// Per-family ranges, expanded to per-position bounds by [`Bounds::uniform`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRanges {
    pub bandwidth_mbps: Range,
    pub latency_ms: Range,
    pub duration_ms: Range,
    pub buffer_packets: Range,
    #[serde(default)]
    pub data_kb: Option<Range>,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            bandwidth_mbps: Range::new(1, 100),
            latency_ms: Range::new(5, 100),
            duration_ms: Range::new(500, 2500),
            buffer_packets: Range::new(500, 10000),
            data_kb: None,
        }
    }
}

impl Bounds {
    pub fn new(lower: Vec<i64>, upper: Vec<i64>, layout: Layout) -> Result<Self, EnvError> {
        if lower.len() != layout.len() || upper.len() != layout.len() {
            return Err(EnvError::InvalidBounds(format!(
                "layout needs {} positions, got lower={} upper={}",
                layout.len(),
                lower.len(),
                upper.len()
            )));
        }
        for (p, slot) in layout.slots().enumerate() {
            if lower[p] > upper[p] {
                return Err(EnvError::InvalidBounds(format!("{slot}: lower {} > upper {}", lower[p], upper[p])));
            }
            if lower[p] < slot.intrinsic_min() {
                return Err(EnvError::InvalidBounds(format!(
                    "{slot}: lower {} below minimum {}",
                    lower[p],
                    slot.intrinsic_min()
                )));
            }
            if upper[p] > i64::from(u32::MAX) {
                return Err(EnvError::InvalidBounds(format!("{slot}: upper {} exceeds u32", upper[p])));
            }
        }
        Ok(Self { lower, upper, layout })
    }

    /// Same range for every interval.
    pub fn uniform(intervals: usize, ranges: &ParamRanges) -> Result<Self, EnvError> {
        if intervals == 0 {
            return Err(EnvError::InvalidBounds("interval count must be at least 1".into()));
        }
        let layout = Layout::new(intervals, ranges.data_kb.is_some());
        let (mut lower, mut upper) = (Vec::new(), Vec::new());
        for slot in layout.slots() {
            let r = match slot {
                Slot::Bandwidth(_) => ranges.bandwidth_mbps,
                Slot::Latency(_) => ranges.latency_ms,
                Slot::Duration(_) => ranges.duration_ms,
                Slot::Buffer => ranges.buffer_packets,
                Slot::DataSize => ranges.data_kb.expect("layout has data slot"),
            };
            lower.push(r.lo);
            upper.push(r.hi);
        }
        Self::new(lower, upper, layout)
    }

    /// Default experiment bounds for `intervals` intervals.
    pub fn defaults(intervals: usize) -> Self {
        Self::uniform(intervals, &ParamRanges::default()).expect("default ranges are valid")
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn upper(&self) -> &[i64] {
        &self.upper
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, v: &TraceVector) -> bool {
        v.len() == self.len() && self.violations(v).is_empty()
    }

    fn violations(&self, v: &TraceVector) -> Vec<Violation> {
        v.values()
            .iter()
            .enumerate()
            .filter(|&(p, &x)| x < self.lower[p] || x > self.upper[p])
            .map(|(p, &x)| Violation {
                position: p,
                slot: self.layout.slot(p),
                value: x,
                lower: self.lower[p],
                upper: self.upper[p],
            })
            .collect()
    }

    pub fn validate_vector(&self, v: &TraceVector) -> Result<(), EnvError> {
        if v.len() != self.len() {
            return Err(EnvError::Shape {
                expected: format!("vector of length {}", self.len()),
                found: format!("length {}", v.len()),
            });
        }
        let out = self.violations(v);
        if out.is_empty() {
            Ok(())
        } else {
            Err(EnvError::Bounds(out))
        }
    }

    /// Each coordinate independently uniform over `[lower_i, upper_i]`.
    pub fn sample_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> TraceVector {
        TraceVector(self.lower.iter().zip(&self.upper).map(|(&l, &u)| rng.random_range(l..=u)).collect())
    }
}

/// Checks a trace against bounds. A trace whose interval count or data-size
/// presence differs from the bounds layout yields [`EnvError::Shape`]; value
/// violations yield [`EnvError::Bounds`] listing every offending position.
pub fn validate(trace: &Trace, bounds: &Bounds) -> Result<(), EnvError> {
    let v = bounds.layout.encode(trace)?;
    bounds.validate_vector(&v)
}

pub fn sample_uniform<R: Rng + ?Sized>(bounds: &Bounds, rng: &mut R) -> Trace {
    let v = bounds.sample_vector(rng);
    bounds.layout.decode(&v).expect("bounds fit in u32")
}
