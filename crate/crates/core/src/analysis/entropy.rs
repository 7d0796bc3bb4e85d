use crate::error::{Error, Result};
use crate::lattice::{LatticeState, Recorder, UpdateEvent};

const EXP_LIMIT: f64 = 700.0;

/// `S = (1/n) Σ_{j=1..n} R_j log R_j` with `R_j = exp(r_j)`.
///
/// Site 0 is excluded, so `n` is one less than the field length. Evaluated
/// as `(1/n) Σ r_j exp(r_j)`.
pub fn entropy(returns: &[f64]) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::Input("entropy needs at least two sites".into()));
    }
    let n = returns.len() - 1;
    let mut sum = 0.0;
    for &r in &returns[1..] {
        if !(r.abs() <= EXP_LIMIT) {
            return Err(Error::Computation(format!(
                "return {r} overflows exp(); runaway field"
            )));
        }
        sum += r * r.exp();
    }
    Ok(sum / n as f64)
}

/// Samples the entropy every `cadence` steps (and once at the start).
#[derive(Debug, Clone)]
pub struct EntropySampler {
    cadence: u64,
    samples: Vec<(u64, f64)>,
    failures: u64,
}

impl EntropySampler {
    pub fn new(cadence: u64) -> Self {
        EntropySampler {
            cadence: cadence.max(1),
            samples: Vec::new(),
            failures: 0,
        }
    }

    pub fn samples(&self) -> &[(u64, f64)] {
        &self.samples
    }

    /// Samples skipped because the field overflowed.
    pub fn failures(&self) -> u64 {
        self.failures
    }

    fn sample(&mut self, state: &LatticeState) {
        match entropy(state.returns()) {
            Ok(s) => self.samples.push((state.step(), s)),
            Err(_) => self.failures += 1,
        }
    }
}

impl Default for EntropySampler {
    fn default() -> Self {
        Self::new(100)
    }
}

impl Recorder for EntropySampler {
    fn start(&mut self, state: &LatticeState) {
        if self.samples.last().map(|s| s.0) != Some(state.step()) {
            self.sample(state);
        }
    }

    fn record(&mut self, state: &LatticeState, event: &UpdateEvent) {
        if event.step.is_multiple_of(self.cadence) {
            self.sample(state);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeConfig, Simulation};
    use proptest::prelude::*;

    #[test]
    fn zero_field_has_zero_entropy() {
        assert_eq!(entropy(&[0.0; 10]).unwrap(), 0.0);
    }

    #[test]
    fn site_zero_is_excluded() {
        let s = entropy(&[123.0, 1.0, 1.0]).unwrap();
        assert!((s - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn runaway_field_is_an_error() {
        assert!(matches!(
            entropy(&[0.0, 701.0, 0.0]),
            Err(Error::Computation(_))
        ));
        assert!(matches!(
            entropy(&[0.0, f64::NAN]),
            Err(Error::Computation(_))
        ));
    }

    #[test]
    fn sampler_cadence() {
        let cfg = LatticeConfig::new(20, 1.0, 3).unwrap();
        let mut sim = Simulation::new(&cfg).unwrap();
        let mut sampler = EntropySampler::new(10);
        sim.run(95, &mut [&mut sampler]);
        let steps: Vec<u64> = sampler.samples().iter().map(|s| s.0).collect();
        assert_eq!(steps, vec![0, 10, 20, 30, 40, 50, 60, 70, 80, 90]);
    }

    proptest! {
        #[test]
        fn matches_r_log_r_form(r in prop::collection::vec(-5.0f64..5.0, 2..100)) {
            let n = (r.len() - 1) as f64;
            let via_exp: f64 = r[1..].iter().map(|&x| { let big = x.exp(); big * big.ln() }).sum::<f64>() / n;
            let s = entropy(&r).unwrap();
            prop_assert!((s - via_exp).abs() <= 1e-12 * (1.0 + s.abs()));
        }
    }
}
