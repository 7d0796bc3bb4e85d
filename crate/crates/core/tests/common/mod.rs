use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// O(n) reference: recomputes every signal and scans for the first maximum
/// before each update.
pub struct RescanLattice {
    pub r: Vec<f64>,
    rng: ChaCha8Rng,
    w: f64,
}

impl RescanLattice {
    pub fn new(n_sites: usize, w: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = (0..n_sites)
            .map(|_| w.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        RescanLattice { r, rng, w }
    }

    pub fn signal(&self, j: usize) -> f64 {
        let m = self.r.len();
        (self.r[j] * (self.r[(j + 1) % m] - self.r[(j + m - 1) % m])).abs()
    }

    pub fn argmax(&self) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for j in 0..self.r.len() {
            let v = self.signal(j);
            if v > best.0 {
                best = (v, j);
            }
        }
        best
    }

    pub fn step(&mut self) -> usize {
        let (_, j) = self.argmax();
        let z: [f64; 3] = std::array::from_fn(|_| self.rng.sample(StandardNormal));
        let mean = (z[0] + z[1] + z[2]) / 3.0;
        let m = self.r.len();
        for (k, site) in [(j + m - 1) % m, j, (j + 1) % m].into_iter().enumerate() {
            self.r[site] = self.w.sqrt() * (z[k] - mean);
        }
        j
    }
}
