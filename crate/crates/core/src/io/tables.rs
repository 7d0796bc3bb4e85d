use std::io::Write;

use crate::analysis::{AvalancheRecord, GapFunction, HitLog, SignalTrace, SizeHistogram};
use crate::dist::GainsHistogram;
use crate::error::Result;
use crate::lattice::{LatticeState, Recorder, UpdateEvent};
use crate::series::{PriceSeries, ReturnsSeries, VolatilitySeries};

/// `s,V`.
pub fn write_signal_trace<W: Write>(mut w: W, trace: &SignalTrace) -> Result<()> {
    writeln!(w, "s,V")?;
    for (i, v) in trace.values.iter().enumerate() {
        writeln!(w, "{},{v}", trace.start_step + i as u64)?;
    }
    Ok(())
}

/// `x_k,level`.
pub fn write_gap<W: Write>(mut w: W, gap: &GapFunction) -> Result<()> {
    writeln!(w, "x_k,level")?;
    for b in &gap.breakpoints {
        writeln!(w, "{},{}", b.x, b.level)?;
    }
    Ok(())
}

/// `k,length,start_level`, with `k` counted from 1.
pub fn write_avalanches<W: Write>(mut w: W, record: &AvalancheRecord) -> Result<()> {
    writeln!(w, "k,length,start_level")?;
    for (k, (len, level)) in record.lengths.iter().zip(&record.start_levels).enumerate() {
        writeln!(w, "{},{len},{level}", k + 1)?;
    }
    Ok(())
}

/// `lambda_bin_center,mean_count,stderr`.
pub fn write_size_histogram<W: Write>(mut w: W, hist: &SizeHistogram) -> Result<()> {
    writeln!(w, "lambda_bin_center,mean_count,stderr")?;
    for i in 0..hist.n_bins() {
        writeln!(
            w,
            "{},{},{}",
            hist.lambda(i),
            hist.counts[i],
            hist.errors[i]
        )?;
    }
    Ok(())
}

/// `s,j`.
pub fn write_hit_log<W: Write>(mut w: W, log: &HitLog) -> Result<()> {
    writeln!(w, "s,j")?;
    for (s, j) in log.entries() {
        writeln!(w, "{s},{j}")?;
    }
    Ok(())
}

/// `s,S`.
pub fn write_entropy<W: Write>(mut w: W, samples: &[(u64, f64)]) -> Result<()> {
    writeln!(w, "s,S")?;
    for (s, v) in samples {
        writeln!(w, "{s},{v}")?;
    }
    Ok(())
}

/// `r_center,mean_count,stderr`.
pub fn write_gains_histogram<W: Write>(mut w: W, hist: &GainsHistogram) -> Result<()> {
    writeln!(w, "r_center,mean_count,stderr")?;
    for i in 0..hist.n_bins() {
        writeln!(
            w,
            "{},{},{}",
            hist.centers[i], hist.mean_counts[i], hist.stderr[i]
        )?;
    }
    Ok(())
}

/// `j,r,p,v`; `v` is left empty where the window is undefined.
pub fn write_series<W: Write>(
    mut w: W,
    returns: &ReturnsSeries,
    prices: &PriceSeries,
    vol: &VolatilitySeries,
) -> Result<()> {
    writeln!(w, "j,r,p,v")?;
    for (j, r) in returns.values.iter().enumerate() {
        let p = prices.values.get(j).map(f64::to_string).unwrap_or_default();
        let v = vol.at(j).map(|x| x.to_string()).unwrap_or_default();
        writeln!(w, "{j},{r},{p},{v}")?;
    }
    Ok(())
}

/// Streams `s,V` rows while a simulation runs.
///
/// Write errors are held until [`CsvSignalRecorder::finish`].
pub struct CsvSignalRecorder<W: Write> {
    out: W,
    error: Option<std::io::Error>,
    header: bool,
}

impl<W: Write> CsvSignalRecorder<W> {
    pub fn new(out: W) -> Self {
        CsvSignalRecorder {
            out,
            error: None,
            header: false,
        }
    }

    fn row(&mut self, s: u64, v: f64) {
        if self.error.is_some() {
            return;
        }
        let res = if self.header {
            Ok(())
        } else {
            self.header = true;
            writeln!(self.out, "s,V")
        };
        if let Err(e) = res.and_then(|_| writeln!(self.out, "{s},{v}")) {
            self.error = Some(e);
        }
    }

    pub fn finish(mut self) -> Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> Recorder for CsvSignalRecorder<W> {
    fn start(&mut self, state: &LatticeState) {
        if !self.header {
            self.row(state.step(), state.global_signal().0);
        }
    }

    fn record(&mut self, state: &LatticeState, event: &UpdateEvent) {
        self.row(event.step, state.global_signal().0);
    }
}

/// Streams `s,j` rows for every replaced site.
pub struct CsvHitRecorder<W: Write> {
    out: W,
    error: Option<std::io::Error>,
}

impl<W: Write> CsvHitRecorder<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "s,j")?;
        Ok(CsvHitRecorder { out, error: None })
    }

    pub fn finish(mut self) -> Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> Recorder for CsvHitRecorder<W> {
    fn record(&mut self, state: &LatticeState, event: &UpdateEvent) {
        if self.error.is_some() {
            return;
        }
        for j in event.sites(state.sites()) {
            if let Err(e) = writeln!(self.out, "{},{j}", event.step) {
                self.error = Some(e);
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{avalanches, gap_function, SignalTraceRecorder};
    use crate::lattice::{LatticeConfig, Simulation};
    use crate::series::{prices, volatility};

    fn text(buf: Vec<u8>) -> String {
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn gap_and_avalanche_tables() {
        let trace = SignalTrace::new(vec![5.0, 3.0, 4.0, 2.0, 2.0, 1.0]);
        let gap = gap_function(&trace).unwrap();
        let mut buf = Vec::new();
        write_gap(&mut buf, &gap).unwrap();
        assert_eq!(text(buf), "x_k,level\n0,5\n1,3\n3,2\n5,1\n");
        let mut buf = Vec::new();
        write_avalanches(&mut buf, &avalanches(&gap, 6)).unwrap();
        assert_eq!(text(buf), "k,length,start_level\n1,1,5\n2,2,3\n3,2,2\n");
    }

    #[test]
    fn open_series_leaves_volatility_blank() {
        let r = ReturnsSeries::historical(vec![0.0, 0.1, -0.1, 0.0], "h", 0);
        let p = prices(&r, 100.0).unwrap();
        let v = volatility(&r).unwrap();
        let mut buf = Vec::new();
        write_series(&mut buf, &r, &p, &v).unwrap();
        let out = text(buf);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "j,r,p,v");
        assert!(lines[1].ends_with(','));
        assert!(lines[4].ends_with(','));
        assert!(!lines[2].ends_with(','));
    }

    #[test]
    fn streaming_signal_matches_trace() {
        let cfg = LatticeConfig::new(20, 1.0, 4).unwrap();
        let mut sim = Simulation::new(&cfg).unwrap();
        let mut csv = CsvSignalRecorder::new(Vec::new());
        let mut trace = SignalTraceRecorder::new();
        sim.run(50, &mut [&mut csv, &mut trace]);
        let mut expected = Vec::new();
        write_signal_trace(&mut expected, &trace.into_trace().unwrap()).unwrap();
        assert_eq!(csv.finish().unwrap(), expected);
    }

    #[test]
    fn streaming_hits_match_log() {
        let cfg = LatticeConfig::new(20, 1.0, 4).unwrap();
        let mut sim = Simulation::new(&cfg).unwrap();
        let mut csv = CsvHitRecorder::new(Vec::new()).unwrap();
        let mut log = HitLog::new();
        sim.run(30, &mut [&mut csv, &mut log]);
        let mut expected = Vec::new();
        write_hit_log(&mut expected, &log).unwrap();
        assert_eq!(csv.finish().unwrap(), expected);
    }
}
