//! Criticality diagnostics computed from simulation traces.

mod activity;
mod avalanche_hist;
mod entropy;
mod gap;

pub use activity::{activity_histogram, HitLog, WindowedHitLog};
pub use avalanche_hist::{
    fit_power_law, integrate_count, size_histogram, PowerLawFit, SizeHistogram,
    SizeHistogramAccumulator,
};
pub use entropy::{entropy, EntropySampler};
pub use gap::{
    avalanches, gap_function, AvalancheRecord, Breakpoint, GapFunction, GapTracker, SignalTrace,
    SignalTraceRecorder,
};
