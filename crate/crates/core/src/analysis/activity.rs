use std::ops::RangeInclusive;

use crate::lattice::{LatticeState, Recorder, UpdateEvent};

/// Per-site update-visit counts `H_j`.
pub fn activity_histogram(state: &LatticeState) -> Vec<u64> {
    state.hits().to_vec()
}

/// One `(s, j)` entry for every replaced site, in update order.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct HitLog {
    entries: Vec<(u64, u32)>,
}

impl HitLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[(u64, u32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries inside `steps × sites`, order preserved.
    pub fn window(
        &self,
        steps: RangeInclusive<u64>,
        sites: RangeInclusive<usize>,
    ) -> Vec<(u64, u32)> {
        self.entries
            .iter()
            .copied()
            .filter(|&(s, j)| steps.contains(&s) && sites.contains(&(j as usize)))
            .collect()
    }
}

impl Recorder for HitLog {
    fn record(&mut self, state: &LatticeState, event: &UpdateEvent) {
        for j in event.sites(state.sites()) {
            self.entries.push((event.step, j as u32));
        }
    }
}

/// Hit log that keeps only a fixed `steps × sites` window, for long runs.
#[derive(Debug, Clone)]
pub struct WindowedHitLog {
    steps: RangeInclusive<u64>,
    sites: RangeInclusive<usize>,
    log: HitLog,
}

impl WindowedHitLog {
    pub fn new(steps: RangeInclusive<u64>, sites: RangeInclusive<usize>) -> Self {
        WindowedHitLog {
            steps,
            sites,
            log: HitLog::new(),
        }
    }

    pub fn into_log(self) -> HitLog {
        self.log
    }
}

impl Recorder for WindowedHitLog {
    fn record(&mut self, state: &LatticeState, event: &UpdateEvent) {
        if !self.steps.contains(&event.step) {
            return;
        }
        for j in event.sites(state.sites()) {
            if self.sites.contains(&j) {
                self.log.entries.push((event.step, j as u32));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeConfig, Simulation};

    #[test]
    fn one_step_logs_the_triplet() {
        let cfg = LatticeConfig::new(30, 1.0, 5).unwrap();
        let mut sim = Simulation::new(&cfg).unwrap();
        let site = sim.state().global_signal().1;
        let mut log = HitLog::new();
        sim.run(1, &mut [&mut log]);
        let m = cfg.sites();
        let mut expected = vec![
            (1, ((site + m - 1) % m) as u32),
            (1, site as u32),
            (1, ((site + 1) % m) as u32),
        ];
        let mut got = log.entries().to_vec();
        expected.sort();
        got.sort();
        assert_eq!(got, expected);
        let h = activity_histogram(sim.state());
        assert_eq!(h.iter().filter(|&&x| x == 1).count(), 3);
        assert_eq!(h.iter().sum::<u64>(), 3);
    }

    #[test]
    fn log_is_conserved_and_windows_filter() {
        let cfg = LatticeConfig::new(50, 1.0, 9).unwrap();
        let mut sim = Simulation::new(&cfg).unwrap();
        let mut log = HitLog::new();
        let mut windowed = WindowedHitLog::new(100..=400, 10..=30);
        sim.run(1000, &mut [&mut log, &mut windowed]);
        assert_eq!(log.len(), 3000);
        let w = log.window(100..=400, 10..=30);
        assert!(w
            .iter()
            .all(|&(s, j)| (100..=400).contains(&s) && (10..=30).contains(&j)));
        // order-preserving subsequence of the full log
        let mut it = log.entries().iter();
        for e in &w {
            assert!(it.any(|x| x == e));
        }
        assert_eq!(windowed.into_log().entries(), w.as_slice());
        assert_eq!(activity_histogram(sim.state()).iter().sum::<u64>(), 3000);
    }
}
