//! Ensemble gains distributions and Gaussian reference fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeConfig, Simulation};
use crate::regression::weighted_line;
use crate::seeds::run_seed;

/// Bins of width `Δr` centered on the multiples `k Δr`, `k_min <= k <= k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainsBinning {
    pub bin_width: f64,
    pub k_min: i64,
    pub k_max: i64,
}

impl GainsBinning {
    /// Every bin whose center lies in `[r_min, r_max]`.
    pub fn new(bin_width: f64, range: (f64, f64)) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::Input(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        let (lo, hi) = range;
        let k_min = (lo / bin_width - 1e-9).ceil() as i64;
        let k_max = (hi / bin_width + 1e-9).floor() as i64;
        if k_max < k_min {
            return Err(Error::Input(format!("empty histogram range [{lo}, {hi}]")));
        }
        Ok(GainsBinning {
            bin_width,
            k_min,
            k_max,
        })
    }

    pub fn n_bins(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    pub fn center(&self, i: usize) -> f64 {
        (self.k_min + i as i64) as f64 * self.bin_width
    }

    pub fn bin_of(&self, r: f64) -> Option<usize> {
        let k = (r / self.bin_width).round();
        if k >= self.k_min as f64 && k <= self.k_max as f64 {
            Some((k as i64 - self.k_min) as usize)
        } else {
            None
        }
    }

    /// Raw counts of `samples` per bin, and how many fell inside.
    pub fn count(&self, samples: &[f64]) -> (Vec<u32>, u64) {
        let mut counts = vec![0u32; self.n_bins()];
        let mut inside = 0;
        for &r in samples {
            if let Some(b) = self.bin_of(r) {
                counts[b] += 1;
                inside += 1;
            }
        }
        (counts, inside)
    }
}

/// Ensemble-mean frequency `Δc/Δr` of returns with per-bin standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GainsHistogram {
    pub bin_width: f64,
    pub centers: Vec<f64>,
    pub mean_counts: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Target of `Σ mean_counts · Δr`.
    pub normalization: f64,
    /// Number of runs averaged.
    pub n_samples: usize,
}

impl GainsHistogram {
    /// Average per-run histograms, each normalized so its counts sum to
    /// `normalization`.
    ///
    /// Runs are summed in the order given, so the result does not depend on
    /// how the counts were produced.
    pub fn from_counts(
        binning: &GainsBinning,
        runs: &[(Vec<u32>, u64)],
        normalization: f64,
    ) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Input("no runs to histogram".into()));
        }
        let nb = binning.n_bins();
        let dr = binning.bin_width;
        let mut sum = vec![0.0; nb];
        let mut sum_sq = vec![0.0; nb];
        for (counts, inside) in runs {
            if *inside == 0 {
                return Err(Error::Input(
                    "a run has no returns inside the histogram range".into(),
                ));
            }
            let scale = normalization / (dr * *inside as f64);
            for (b, &c) in counts.iter().enumerate() {
                let d = c as f64 * scale;
                sum[b] += d;
                sum_sq[b] += d * d;
            }
        }
        let n = runs.len() as f64;
        let mean_counts: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let stderr = if runs.len() < 2 {
            vec![0.0; nb]
        } else {
            (0..nb)
                .map(|b| {
                    let var =
                        ((sum_sq[b] - n * mean_counts[b] * mean_counts[b]) / (n - 1.0)).max(0.0);
                    (var / n).sqrt()
                })
                .collect()
        };
        Ok(GainsHistogram {
            bin_width: dr,
            centers: (0..nb).map(|i| binning.center(i)).collect(),
            mean_counts,
            stderr,
            normalization,
            n_samples: runs.len(),
        })
    }

    /// Histogram of arbitrary per-run samples.
    pub fn from_samples(
        binning: &GainsBinning,
        runs: &[Vec<f64>],
        normalization: f64,
    ) -> Result<Self> {
        let counts: Vec<_> = runs.iter().map(|r| binning.count(r)).collect();
        Self::from_counts(binning, &counts, normalization)
    }

    pub fn total(&self) -> f64 {
        self.mean_counts.iter().sum::<f64>() * self.bin_width
    }

    pub fn n_bins(&self) -> usize {
        self.centers.len()
    }
}

/// Equilibrated lattice fields of an ensemble, one per run.
///
/// Run `i` uses the seed derived from `(config.seed, i)`.
pub fn ensemble_fields(
    config: &LatticeConfig,
    n_runs: usize,
    equilibration_steps: u64,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = config.clone().with_seed(run_seed(config.seed, i));
            let mut sim = Simulation::new(&cfg)?;
            sim.advance(equilibration_steps);
            Ok(sim.into_state().returns().to_vec())
        })
        .collect()
}

/// Gains histogram over `n_runs` independent equilibrated lattices.
///
/// Each run contributes every site of its final field; counts are normalized
/// to `n` per run.
pub fn ensemble_gains(
    config: &LatticeConfig,
    n_runs: usize,
    equilibration_steps: u64,
    binning: &GainsBinning,
) -> Result<GainsHistogram> {
    if n_runs == 0 {
        return Err(Error::Input("need at least one run".into()));
    }
    config.validate()?;
    let counts: Vec<(Vec<u32>, u64)> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let cfg = config.clone().with_seed(run_seed(config.seed, i));
            let mut sim = Simulation::new(&cfg)?;
            sim.advance(equilibration_steps);
            Ok(binning.count(sim.state().returns()))
        })
        .collect::<Result<_>>()?;
    GainsHistogram::from_counts(binning, &counts, config.n_intervals as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "region", content = "n_points", rename_all = "snake_case")]
pub enum GaussianRegion {
    /// The `k` bins nearest `r = 0`.
    Center(usize),
    /// The `m` outermost populated bins on each side.
    Tails(usize),
}

/// `A exp(-r² / 2σ²)` fitted to part of a histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub sigma: f64,
    #[serde(flatten)]
    pub region: GaussianRegion,
    pub chi2: f64,
}

impl GaussianFit {
    pub fn eval(&self, r: f64) -> f64 {
        self.amplitude * (-r * r / (2.0 * self.sigma * self.sigma)).exp()
    }
}

fn region_bins(hist: &GainsHistogram, region: GaussianRegion) -> Result<Vec<usize>> {
    match region {
        GaussianRegion::Center(k) => {
            let mut order: Vec<usize> = (0..hist.n_bins()).collect();
            order.sort_by(|&a, &b| {
                hist.centers[a]
                    .abs()
                    .total_cmp(&hist.centers[b].abs())
                    .then(a.cmp(&b))
            });
            order.truncate(k);
            if order.len() < k || order.iter().any(|&b| hist.mean_counts[b] <= 0.0) {
                return Err(Error::Fit(format!(
                    "the {k} central bins are not all populated"
                )));
            }
            Ok(order)
        }
        GaussianRegion::Tails(m) => {
            let populated = |b: &usize| hist.mean_counts[*b] > 0.0;
            let left: Vec<usize> = (0..hist.n_bins())
                .filter(|&b| hist.centers[b] < 0.0)
                .filter(populated)
                .take(m)
                .collect();
            let right: Vec<usize> = (0..hist.n_bins())
                .rev()
                .filter(|&b| hist.centers[b] > 0.0)
                .filter(populated)
                .take(m)
                .collect();
            if left.len() < m || right.len() < m {
                return Err(Error::Fit(format!(
                    "need {m} populated tail bins per side, found {} and {}",
                    left.len(),
                    right.len()
                )));
            }
            Ok(left.into_iter().chain(right).collect())
        }
    }
}

/// Fit a zero-mean Gaussian to the selected bins.
///
/// The fit is a straight line through `(r², log count)`, weighted by
/// `(count / stderr)²` when every selected bin has a positive error.
pub fn fit_gaussian(hist: &GainsHistogram, region: GaussianRegion) -> Result<GaussianFit> {
    let bins = region_bins(hist, region)?;
    let x: Vec<f64> = bins.iter().map(|&b| hist.centers[b].powi(2)).collect();
    let y: Vec<f64> = bins.iter().map(|&b| hist.mean_counts[b].ln()).collect();
    let w: Vec<f64> = if bins.iter().all(|&b| hist.stderr[b] > 0.0) {
        bins.iter()
            .map(|&b| (hist.mean_counts[b] / hist.stderr[b]).powi(2))
            .collect()
    } else {
        vec![1.0; bins.len()]
    };
    let line = weighted_line(&x, &y, &w)?;
    if !(line.slope < 0.0) {
        return Err(Error::Fit(format!(
            "counts do not decay with |r| (slope {})",
            line.slope
        )));
    }
    Ok(GaussianFit {
        amplitude: line.intercept.exp(),
        sigma: (-0.5 / line.slope).sqrt(),
        region,
        chi2: line.chi2,
    })
}

/// Observed and Gaussian-predicted mass in bins with `|r| > threshold`.
pub fn tail_mass(hist: &GainsHistogram, fit: &GaussianFit, threshold: f64) -> (f64, f64) {
    let mut observed = 0.0;
    let mut predicted = 0.0;
    for (b, &r) in hist.centers.iter().enumerate() {
        if r.abs() > threshold {
            observed += hist.mean_counts[b] * hist.bin_width;
            predicted += fit.eval(r) * hist.bin_width;
        }
    }
    (observed, predicted)
}

/// Axis scale factors for overlaying lattice and historical histograms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayScaling {
    /// Return-axis factor.
    pub x_factor: f64,
    /// Frequency-axis factor.
    pub y_factor: f64,
}

impl OverlayScaling {
    /// The factors used to match NASDAQ minute returns: `ΔX = 2.4e-3 Δr`,
    /// `ΔN/ΔX = 1.1e5 Δc/Δr`.
    pub const NASDAQ_MINUTE: OverlayScaling = OverlayScaling {
        x_factor: 2.4e-3,
        y_factor: 1.1e5,
    };

    pub fn new(x_factor: f64, y_factor: f64) -> Result<Self> {
        if !(x_factor > 0.0 && y_factor > 0.0 && x_factor.is_finite() && y_factor.is_finite()) {
            return Err(Error::Input("overlay factors must be positive".into()));
        }
        Ok(OverlayScaling { x_factor, y_factor })
    }

    pub fn inverse(&self) -> Self {
        OverlayScaling {
            x_factor: 1.0 / self.x_factor,
            y_factor: 1.0 / self.y_factor,
        }
    }
}

pub fn apply_overlay(hist: &GainsHistogram, s: &OverlayScaling) -> GainsHistogram {
    GainsHistogram {
        bin_width: hist.bin_width * s.x_factor,
        centers: hist.centers.iter().map(|c| c * s.x_factor).collect(),
        mean_counts: hist.mean_counts.iter().map(|c| c * s.y_factor).collect(),
        stderr: hist.stderr.iter().map(|e| e * s.y_factor).collect(),
        normalization: hist.normalization * s.x_factor * s.y_factor,
        n_samples: hist.n_samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn binning() -> GainsBinning {
        GainsBinning::new(0.05, (-5.0, 5.0)).unwrap()
    }

    fn gaussian_hist(a: f64, sigma: f64, with_errors: bool) -> GainsHistogram {
        let b = binning();
        let centers: Vec<f64> = (0..b.n_bins()).map(|i| b.center(i)).collect();
        let mean_counts: Vec<f64> = centers
            .iter()
            .map(|r| a * (-r * r / (2.0 * sigma * sigma)).exp())
            .collect();
        let stderr = mean_counts
            .iter()
            .map(|c| if with_errors { 0.05 * c } else { 0.0 })
            .collect();
        GainsHistogram {
            bin_width: b.bin_width,
            centers,
            mean_counts,
            stderr,
            normalization: 1.0,
            n_samples: 1,
        }
    }

    #[test]
    fn binning_centers_on_multiples() {
        let b = binning();
        assert_eq!(b.n_bins(), 201);
        assert_eq!(b.center(100), 0.0);
        assert_eq!(b.bin_of(0.024), Some(100));
        assert_eq!(b.bin_of(-0.026), Some(99));
        assert_eq!(b.bin_of(5.1), None);
        assert!((b.center(0) + 5.0).abs() < 1e-12);
    }

    #[test]
    fn single_run_has_zero_stderr_and_is_normalized() {
        let b = binning();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let normal = Normal::new(0.0, 0.5).unwrap();
        let run: Vec<f64> = (0..781).map(|_| normal.sample(&mut rng)).collect();
        let h = GainsHistogram::from_samples(&b, &[run], 780.0).unwrap();
        assert!(h.stderr.iter().all(|&e| e == 0.0));
        assert!((h.total() - 780.0).abs() < 1e-9 * 780.0);
    }

    #[test]
    fn ensemble_single_run() {
        let cfg = LatticeConfig::new(40, 1.0, 3).unwrap();
        let h = ensemble_gains(&cfg, 1, 500, &binning()).unwrap();
        assert!(h.stderr.iter().all(|&e| e == 0.0));
        assert!((h.total() - 40.0).abs() < 1e-9 * 40.0);
        let h = ensemble_gains(&cfg, 6, 500, &binning()).unwrap();
        assert!((h.total() - 40.0).abs() < 1e-9 * 40.0);
        assert_eq!(h, ensemble_gains(&cfg, 6, 500, &binning()).unwrap());
    }

    #[test]
    fn stderr_shrinks_like_inverse_root_runs() {
        let b = binning();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let make = |runs: usize, seed: u64| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<Vec<f64>> = (0..runs)
                .map(|_| (0..781).map(|_| normal.sample(&mut rng)).collect())
                .collect();
            GainsHistogram::from_samples(&b, &samples, 780.0).unwrap()
        };
        let mean_err = |h: &GainsHistogram| {
            // bins well inside the bulk, where every run contributes
            let idx: Vec<usize> = (0..h.n_bins())
                .filter(|&i| h.centers[i].abs() < 1.0)
                .collect();
            idx.iter().map(|&i| h.stderr[i]).sum::<f64>() / idx.len() as f64
        };
        let ratio = mean_err(&make(400, 11)) / mean_err(&make(200, 12));
        assert!((0.65..=0.76).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn noiseless_gaussian_is_recovered() {
        for errs in [false, true] {
            let h = gaussian_hist(37.5, 0.8, errs);
            for region in [GaussianRegion::Center(7), GaussianRegion::Tails(38)] {
                let fit = fit_gaussian(&h, region).unwrap();
                assert!(((fit.amplitude - 37.5) / 37.5).abs() < 1e-6, "{fit:?}");
                assert!(((fit.sigma - 0.8) / 0.8).abs() < 1e-6, "{fit:?}");
                assert_eq!(fit.region, region);
            }
        }
    }

    #[test]
    fn region_selection() {
        let mut h = gaussian_hist(1.0, 1.0, false);
        let center = region_bins(&h, GaussianRegion::Center(7)).unwrap();
        let mut c: Vec<f64> = center.iter().map(|&b| h.centers[b]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c.len(), 7);
        assert!((c[0] + 0.15).abs() < 1e-12 && (c[6] - 0.15).abs() < 1e-12);

        // empty outermost bins are skipped
        for b in [0, 1, 200] {
            h.mean_counts[b] = 0.0;
        }
        let tails = region_bins(&h, GaussianRegion::Tails(3)).unwrap();
        let t: Vec<usize> = tails;
        assert_eq!(t, vec![2, 3, 4, 199, 198, 197]);
        assert!(fit_gaussian(&h, GaussianRegion::Tails(150)).is_err());
    }

    #[test]
    fn overlay_round_trip_and_normalization() {
        let h = gaussian_hist(3.0, 1.0, true);
        assert_eq!(
            apply_overlay(&h, &OverlayScaling::new(1.0, 1.0).unwrap()),
            h
        );
        let s = OverlayScaling::NASDAQ_MINUTE;
        let o = apply_overlay(&h, &s);
        assert!(((o.total() - h.total() * s.x_factor * s.y_factor) / o.total()).abs() < 1e-12);
        let back = apply_overlay(&o, &s.inverse());
        for (a, b) in back.mean_counts.iter().zip(&h.mean_counts) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
        for (a, b) in back.centers.iter().zip(&h.centers) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
        assert!(OverlayScaling::new(0.0, 1.0).is_err());
    }
}
