use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::lattice::{LatticeConfig, LatticeState};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"SOCL";
pub const SNAPSHOT_VERSION: u16 = 1;

/// A lattice field with enough metadata to resume from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n_intervals: u32,
    pub variance_w: f64,
    pub seed: u64,
    pub step: u64,
    pub returns: Vec<f64>,
}

impl Snapshot {
    pub fn of(state: &LatticeState) -> Self {
        let cfg = state.config();
        Snapshot {
            n_intervals: cfg.n_intervals as u32,
            variance_w: cfg.variance_w,
            seed: cfg.seed,
            step: state.step(),
            returns: state.returns().to_vec(),
        }
    }

    /// Rebuild the state; hit counters restart at zero.
    pub fn into_state(self) -> Result<LatticeState> {
        let cfg = LatticeConfig::new(self.n_intervals as usize, self.variance_w, self.seed)?;
        Ok(LatticeState::from_returns(&cfg, self.returns)?.with_step(self.step))
    }

    /// Little-endian frame: magic, version u16, n u32, w f64, seed u64,
    /// step u64, then the `n + 1` returns.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        if self.returns.len() != self.n_intervals as usize + 1 {
            return Err(Error::Input(format!(
                "snapshot holds {} values for n = {}",
                self.returns.len(),
                self.n_intervals
            )));
        }
        w.write_all(&SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&self.n_intervals.to_le_bytes())?;
        w.write_all(&self.variance_w.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.step.to_le_bytes())?;
        for r in &self.returns {
            w.write_all(&r.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
            let mut buf = [0u8; N];
            r.read_exact(&mut buf)
                .map_err(|e| Error::Input(format!("truncated snapshot: {e}")))?;
            Ok(buf)
        }
        if take::<4, _>(&mut r)? != SNAPSHOT_MAGIC {
            return Err(Error::Input("not a lattice snapshot (bad magic)".into()));
        }
        let version = u16::from_le_bytes(take(&mut r)?);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Input(format!(
                "unsupported snapshot version {version}"
            )));
        }
        let n_intervals = u32::from_le_bytes(take(&mut r)?);
        let variance_w = f64::from_le_bytes(take(&mut r)?);
        let seed = u64::from_le_bytes(take(&mut r)?);
        let step = u64::from_le_bytes(take(&mut r)?);
        let returns = (0..=n_intervals)
            .map(|_| Ok(f64::from_le_bytes(take(&mut r)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Snapshot {
            n_intervals,
            variance_w,
            seed,
            step,
            returns,
        })
    }

    /// `j,r_j` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "j,r_j")?;
        for (j, r) in self.returns.iter().enumerate() {
            writeln!(w, "{j},{r}")?;
        }
        Ok(())
    }
}
