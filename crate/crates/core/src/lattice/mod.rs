//! The periodic returns lattice and its max-signal update dynamics.
//!
//! A chain of `n + 1` sites carries returns `r_j` with periodic boundary
//! `r_{n+1} = r_0`. Each site has a signal
//!
//! ```text
//! V_j = | r_j (r_{j+1} - r_{j-1}) |
//! ```
//!
//! and the global signal is `V = max_j V_j`. One update finds the site
//! `j_s` carrying `V` and replaces the returns at `j_s - 1`, `j_s` and
//! `j_s + 1` with three Gaussian numbers constrained to sum to zero.
//!
//! Signals are cached per site and the maximum is kept in a binary
//! tournament tree, so an update costs `O(log n)` instead of a full rescan.

mod tree;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use tree::MaxTree;

/// The random number generator driving every simulation.
pub type SimRng = ChaCha8Rng;

/// How to choose among several sites sharing the maximal signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    RandomAmongTies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    /// Number of time intervals `n`; the lattice has `n + 1` sites.
    pub n_intervals: usize,
    /// Variance `w` of the Gaussian draws.
    pub variance_w: f64,
    pub seed: u64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl LatticeConfig {
    pub fn new(n_intervals: usize, variance_w: f64, seed: u64) -> Result<Self> {
        let config = LatticeConfig {
            n_intervals,
            variance_w,
            seed,
            tie_break: TieBreak::LowestIndex,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_intervals < 4 {
            return Err(Error::Config(format!(
                "n_intervals must be at least 4, got {}",
                self.n_intervals
            )));
        }
        if self.n_intervals >= u32::MAX as usize {
            return Err(Error::Config("n_intervals too large".into()));
        }
        if !(self.variance_w > 0.0 && self.variance_w.is_finite()) {
            return Err(Error::Config(format!(
                "variance_w must be positive and finite, got {}",
                self.variance_w
            )));
        }
        Ok(())
    }

    /// Number of lattice sites, `n + 1`.
    pub fn sites(&self) -> usize {
        self.n_intervals + 1
    }

    /// A fresh generator seeded from `seed`.
    pub fn rng(&self) -> SimRng {
        SimRng::seed_from_u64(self.seed)
    }
}

/// One triplet replacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateEvent {
    /// Simulation time after the update (the first update has `step == 1`).
    pub step: u64,
    /// The site `j_s` that carried the global signal.
    pub site: usize,
    /// The global signal that triggered the update.
    pub old_signal: f64,
    /// Values written to `j_s - 1`, `j_s`, `j_s + 1`.
    pub drawn: [f64; 3],
}

impl UpdateEvent {
    /// The three replaced sites in the order `j_s - 1`, `j_s`, `j_s + 1`.
    pub fn sites(&self, n_sites: usize) -> [usize; 3] {
        [
            wrap(self.site, -1, n_sites),
            self.site,
            wrap(self.site, 1, n_sites),
        ]
    }
}

#[inline]
fn wrap(j: usize, offset: isize, n_sites: usize) -> usize {
    ((j + n_sites) as isize + offset) as usize % n_sites
}

/// `V_j = |r_j (r_{j+1} - r_{j-1})|` with periodic indexing.
#[inline]
pub fn compute_signal(returns: &[f64], j: usize) -> f64 {
    let m = returns.len();
    let next = returns[wrap(j, 1, m)];
    let prev = returns[wrap(j, -1, m)];
    (returns[j] * (next - prev)).abs()
}

/// All per-site signals of a field.
pub fn compute_signals(returns: &[f64]) -> Vec<f64> {
    (0..returns.len())
        .map(|j| compute_signal(returns, j))
        .collect()
}

/// Draw three `Normal(0, w)` numbers and project them onto the zero-sum plane.
pub fn draw_zero_sum_triple<R: Rng + ?Sized>(rng: &mut R, variance_w: f64) -> [f64; 3] {
    let z: [f64; 3] = [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ];
    let mean = (z[0] + z[1] + z[2]) / 3.0;
    let scale = variance_w.sqrt();
    [
        scale * (z[0] - mean),
        scale * (z[1] - mean),
        scale * (z[2] - mean),
    ]
}

/// Mutable core of a simulation: the field, its cached signals and counters.
#[derive(Debug, Clone)]
pub struct LatticeState {
    config: LatticeConfig,
    returns: Vec<f64>,
    signals: Vec<f64>,
    step: u64,
    hits: Vec<u64>,
    tree: MaxTree,
}

impl LatticeState {
    /// Fill the lattice with iid `Normal(0, w)` returns.
    pub fn init_random<R: Rng + ?Sized>(config: &LatticeConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let scale = config.variance_w.sqrt();
        let returns = (0..config.sites())
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::from_returns(config, returns)
    }

    /// Build a state at `step = 0` from an explicit field.
    pub fn from_returns(config: &LatticeConfig, returns: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if returns.len() != config.sites() {
            return Err(Error::Input(format!(
                "field has {} values, lattice needs {}",
                returns.len(),
                config.sites()
            )));
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::Input("field contains non-finite values".into()));
        }
        let signals = compute_signals(&returns);
        let tree = MaxTree::new(&signals);
        Ok(LatticeState {
            config: config.clone(),
            hits: vec![0; returns.len()],
            returns,
            signals,
            step: 0,
            tree,
        })
    }

    pub(crate) fn with_step(mut self, step: u64) -> Self {
        self.step = step;
        self
    }

    pub fn config(&self) -> &LatticeConfig {
        &self.config
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn signals(&self) -> &[f64] {
        &self.signals
    }

    /// Simulation time `s`: number of updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Per-site count of replacements, including neighbor replacements.
    pub fn hits(&self) -> &[u64] {
        &self.hits
    }

    pub fn sites(&self) -> usize {
        self.returns.len()
    }

    /// Global signal `V` and the lowest site index carrying it.
    pub fn global_signal(&self) -> (f64, usize) {
        self.tree.max()
    }

    /// Number of sites sharing the global signal.
    pub fn tie_count(&self) -> usize {
        self.tree.tie_count()
    }

    /// Pick the update site according to the configured tie-break policy.
    ///
    /// The generator is only consumed when there is an actual tie under
    /// [`TieBreak::RandomAmongTies`].
    pub fn select_site<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, usize) {
        let (v, lowest) = self.tree.max();
        match self.config.tie_break {
            TieBreak::LowestIndex => (v, lowest),
            TieBreak::RandomAmongTies => {
                let ties = self.tree.tie_count();
                if ties > 1 {
                    (v, self.tree.kth_max(rng.random_range(0..ties)))
                } else {
                    (v, lowest)
                }
            }
        }
    }

    /// Apply one triplet replacement at the max-signal site.
    pub fn update_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> UpdateEvent {
        let (old_signal, site) = self.select_site(rng);
        let drawn = draw_zero_sum_triple(rng, self.config.variance_w);
        let m = self.returns.len();

        for (k, &x) in drawn.iter().enumerate() {
            let j = wrap(site, k as isize - 1, m);
            self.returns[j] = x;
            self.hits[j] += 1;
        }
        for offset in -2..=2 {
            let j = wrap(site, offset, m);
            let v = compute_signal(&self.returns, j);
            self.signals[j] = v;
            self.tree.set(j, v);
        }
        self.step += 1;

        UpdateEvent {
            step: self.step,
            site,
            old_signal,
            drawn,
        }
    }
}

/// Observer notified on every update of a [`Simulation::run`].
pub trait Recorder {
    /// Called once at the start of each `run`, before any update.
    fn start(&mut self, _state: &LatticeState) {}

    fn record(&mut self, state: &LatticeState, event: &UpdateEvent);
}

/// A lattice together with the generator that drives it.
///
/// `(config, seed)` fully determines the trajectory: the generator is seeded
/// from `config.seed`, used first for the initial field and then for every
/// update.
#[derive(Debug, Clone)]
pub struct Simulation {
    state: LatticeState,
    rng: SimRng,
}

impl Simulation {
    pub fn new(config: &LatticeConfig) -> Result<Self> {
        let mut rng = config.rng();
        let state = LatticeState::init_random(config, &mut rng)?;
        Ok(Simulation { state, rng })
    }

    pub fn from_parts(state: LatticeState, rng: SimRng) -> Self {
        Simulation { state, rng }
    }

    pub fn state(&self) -> &LatticeState {
        &self.state
    }

    pub fn into_state(self) -> LatticeState {
        self.state
    }

    pub fn step(&mut self) -> UpdateEvent {
        self.state.update_step(&mut self.rng)
    }

    /// Advance `steps` updates without observers.
    pub fn advance(&mut self, steps: u64) {
        for _ in 0..steps {
            self.state.update_step(&mut self.rng);
        }
    }

    /// Advance `steps` updates, notifying every recorder after each one.
    pub fn run(&mut self, steps: u64, recorders: &mut [&mut dyn Recorder]) {
        for r in recorders.iter_mut() {
            r.start(&self.state);
        }
        for _ in 0..steps {
            let event = self.state.update_step(&mut self.rng);
            for r in recorders.iter_mut() {
                r.record(&self.state, &event);
            }
        }
    }
}
