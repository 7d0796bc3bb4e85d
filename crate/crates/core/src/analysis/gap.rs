use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeConfig, LatticeState, Recorder, UpdateEvent};

/// Global signal `V(s)` sampled after every update.
///
/// `values[0]` is the signal of the state the recording started from, at
/// simulation time `start_step`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    pub values: Vec<f64>,
    pub start_step: u64,
    pub config: Option<LatticeConfig>,
}

impl SignalTrace {
    pub fn new(values: Vec<f64>) -> Self {
        SignalTrace {
            values,
            start_step: 0,
            config: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Recorder building a [`SignalTrace`].
#[derive(Debug, Default, Clone)]
pub struct SignalTraceRecorder {
    trace: Option<SignalTrace>,
}

impl SignalTraceRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_trace(self) -> Option<SignalTrace> {
        self.trace
    }

    pub fn trace(&self) -> Option<&SignalTrace> {
        self.trace.as_ref()
    }
}

impl Recorder for SignalTraceRecorder {
    fn start(&mut self, state: &LatticeState) {
        if self.trace.is_none() {
            self.trace = Some(SignalTrace {
                values: vec![state.global_signal().0],
                start_step: state.step(),
                config: Some(state.config().clone()),
            });
        }
    }

    fn record(&mut self, state: &LatticeState, _event: &UpdateEvent) {
        if let Some(t) = self.trace.as_mut() {
            t.values.push(state.global_signal().0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    /// Offset into the trace where the running minimum drops.
    pub x: u64,
    pub level: f64,
}

/// Running minimum of a signal trace, stored as its breakpoints.
///
/// `G(x) = min { V(s) : s <= x }` is piecewise constant; a new breakpoint is
/// opened only on a strict decrease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFunction {
    pub breakpoints: Vec<Breakpoint>,
}

impl GapFunction {
    /// `G(x)` for an offset inside the recorded trace.
    pub fn level_at(&self, x: u64) -> f64 {
        let k = self.breakpoints.partition_point(|b| b.x <= x);
        self.breakpoints[k.saturating_sub(1)].level
    }

    /// The last level reached.
    pub fn final_level(&self) -> f64 {
        self.breakpoints.last().map(|b| b.level).unwrap_or(f64::NAN)
    }

    pub fn last_x(&self) -> u64 {
        self.breakpoints.last().map(|b| b.x).unwrap_or(0)
    }
}

pub fn gap_function(trace: &SignalTrace) -> Result<GapFunction> {
    let mut tracker = GapTracker::default();
    for &v in &trace.values {
        tracker.push(v);
    }
    tracker
        .finish()
        .ok_or_else(|| Error::Input("gap function of an empty trace".into()))
}

/// Streaming construction of the gap function, one signal value at a time.
///
/// Produces the same breakpoints as [`gap_function`] without keeping the
/// trace in memory.
#[derive(Debug, Default, Clone)]
pub struct GapTracker {
    seen: u64,
    breakpoints: Vec<Breakpoint>,
}

impl GapTracker {
    pub fn push(&mut self, v: f64) {
        match self.breakpoints.last() {
            Some(last) if v >= last.level => {}
            _ => self.breakpoints.push(Breakpoint {
                x: self.seen,
                level: v,
            }),
        }
        self.seen += 1;
    }

    /// Number of values pushed so far.
    pub fn len(&self) -> u64 {
        self.seen
    }

    pub fn is_empty(&self) -> bool {
        self.seen == 0
    }

    pub fn current_level(&self) -> Option<f64> {
        self.breakpoints.last().map(|b| b.level)
    }

    pub fn finish(self) -> Option<GapFunction> {
        if self.breakpoints.is_empty() {
            None
        } else {
            Some(GapFunction {
                breakpoints: self.breakpoints,
            })
        }
    }
}

impl Recorder for GapTracker {
    fn start(&mut self, state: &LatticeState) {
        if self.seen == 0 {
            self.push(state.global_signal().0);
        }
    }

    fn record(&mut self, state: &LatticeState, _event: &UpdateEvent) {
        self.push(state.global_signal().0);
    }
}

/// Plateau decomposition of a gap function.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AvalancheRecord {
    /// `x_k - x_{k-1}` for every completed plateau.
    pub lengths: Vec<u64>,
    /// `G(x_{k-1})`, the level each avalanche started from.
    pub start_levels: Vec<f64>,
}

impl AvalancheRecord {
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn total_length(&self) -> u64 {
        self.lengths.iter().sum()
    }
}

/// Completed avalanches of a gap function.
///
/// The trailing plateau, from the last breakpoint to the end of the trace,
/// has not ended yet and is not counted.
pub fn avalanches(gap: &GapFunction, trace_len: u64) -> AvalancheRecord {
    debug_assert!(gap.last_x() < trace_len.max(1));
    let mut record = AvalancheRecord::default();
    for pair in gap.breakpoints.windows(2) {
        record.lengths.push(pair[1].x - pair[0].x);
        record.start_levels.push(pair[0].level);
    }
    record
}
