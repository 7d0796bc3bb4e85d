//! File formats: minute bars in, CSV/binary/JSON artifacts out, and the
//! run configuration that ties them together.

mod bars;
mod config;
mod snapshot;
mod tables;

pub use bars::{
    historical_returns, ingest_minutes, ingest_minutes_lenient, read_bars, write_bars, Column,
    ColumnMap, GapPolicy, IngestReport, MinuteBar,
};
pub use config::{
    Artifact, AvalancheSection, GainsSection, LatticeSection, Manifest, RunConfig, RunSection,
    SeriesSection,
};
pub use snapshot::{Snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use tables::{
    write_avalanches, write_entropy, write_gains_histogram, write_gap, write_hit_log, write_series,
    write_signal_trace, write_size_histogram, CsvHitRecorder, CsvSignalRecorder,
};
