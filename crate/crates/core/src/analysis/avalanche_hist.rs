use serde::{Deserialize, Serialize};

use super::gap::AvalancheRecord;
use crate::error::{Error, Result};
use crate::regression::weighted_line;

/// Ensemble-averaged avalanche-size frequency `dN/dΛ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeHistogram {
    pub bin_width: f64,
    /// Mean of `count / bin_width` over runs, per bin.
    pub counts: Vec<f64>,
    /// Standard error of the mean over runs, per bin.
    pub errors: Vec<f64>,
    pub n_runs: usize,
    /// Mean number of avalanches per run longer than the last bin.
    pub overflow: f64,
}

impl SizeHistogram {
    /// Representative avalanche length of bin `i`, which covers
    /// `[i Δ, (i + 1) Δ)`.
    ///
    /// Avalanche lengths are integers, so this is the midpoint of the
    /// integers inside the bin; for `Δ = 1` it is the bin's lower edge.
    pub fn lambda(&self, i: usize) -> f64 {
        bin_lambda(self.bin_width, i)
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }
}

fn bin_lambda(width: f64, i: usize) -> f64 {
    let lo = (i as f64 * width).ceil();
    let hi = ((i + 1) as f64 * width).ceil() - 1.0;
    if hi >= lo {
        0.5 * (lo + hi)
    } else {
        (i as f64 + 0.5) * width
    }
}

/// Per-bin integer tallies over runs. Merging is associative and
/// commutative, so runs can be reduced in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeHistogramAccumulator {
    bin_width: f64,
    runs: u64,
    sum: Vec<u64>,
    sum_sq: Vec<u64>,
    overflow: u64,
}

impl SizeHistogramAccumulator {
    pub fn new(bin_width: f64, n_bins: usize) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(Error::Input(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        if n_bins == 0 {
            return Err(Error::Input("need at least one bin".into()));
        }
        Ok(SizeHistogramAccumulator {
            bin_width,
            runs: 0,
            sum: vec![0; n_bins],
            sum_sq: vec![0; n_bins],
            overflow: 0,
        })
    }

    pub fn add(&mut self, record: &AvalancheRecord) {
        let n_bins = self.sum.len();
        let mut run = vec![0u64; n_bins];
        for &len in &record.lengths {
            let bin = (len as f64 / self.bin_width).floor() as usize;
            if bin < n_bins {
                run[bin] += 1;
            } else {
                self.overflow += 1;
            }
        }
        for (i, c) in run.into_iter().enumerate() {
            self.sum[i] += c;
            self.sum_sq[i] += c * c;
        }
        self.runs += 1;
    }

    pub fn merge(mut self, other: &Self) -> Result<Self> {
        if self.sum.len() != other.sum.len() || self.bin_width != other.bin_width {
            return Err(Error::Input(
                "cannot merge histograms with different binning".into(),
            ));
        }
        for i in 0..self.sum.len() {
            self.sum[i] += other.sum[i];
            self.sum_sq[i] += other.sum_sq[i];
        }
        self.runs += other.runs;
        self.overflow += other.overflow;
        Ok(self)
    }

    pub fn finish(&self) -> Result<SizeHistogram> {
        if self.runs == 0 {
            return Err(Error::Input("no runs to histogram".into()));
        }
        let n = self.runs as f64;
        let w = self.bin_width;
        let counts = self.sum.iter().map(|&s| s as f64 / n / w).collect();
        let errors = self
            .sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(&s, &q)| {
                if self.runs < 2 {
                    return 0.0;
                }
                // exact integer numerator, so identical runs give exactly zero
                let num = self.runs as u128 * q as u128 - s as u128 * s as u128;
                let var = num as f64 / (n * (n - 1.0));
                (var / n).sqrt() / w
            })
            .collect();
        Ok(SizeHistogram {
            bin_width: w,
            counts,
            errors,
            n_runs: self.runs as usize,
            overflow: self.overflow as f64 / n,
        })
    }
}

/// Bin avalanche lengths of every run and average over runs.
pub fn size_histogram(
    records: &[AvalancheRecord],
    bin_width: f64,
    n_bins: usize,
) -> Result<SizeHistogram> {
    if records.is_empty() {
        return Err(Error::Input("empty collection of avalanche records".into()));
    }
    let mut acc = SizeHistogramAccumulator::new(bin_width, n_bins)?;
    for r in records {
        acc.add(r);
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub amplitude: f64,
    pub exponent: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub chi2: f64,
    pub dof: usize,
    pub n_bins_used: usize,
    pub weighted: bool,
}

impl PowerLawFit {
    pub fn eval(&self, lambda: f64) -> f64 {
        self.amplitude * lambda.powf(self.exponent)
    }
}

/// Least-squares straight line through `(log Λ, log count)` over the bins
/// whose representative length lies in `range`.
///
/// Bins with zero count are skipped. When every used bin has a positive
/// error the points are weighted by `(count / error)^2`; otherwise the fit
/// is unweighted.
pub fn fit_power_law(hist: &SizeHistogram, range: (f64, f64)) -> Result<PowerLawFit> {
    let (lo, hi) = range;
    let used: Vec<usize> = (0..hist.n_bins())
        .filter(|&i| {
            let l = hist.lambda(i);
            l >= lo && l <= hi && l > 0.0 && hist.counts[i] > 0.0
        })
        .collect();
    if used.len() < 3 {
        return Err(Error::Fit(format!(
            "power-law fit needs at least 3 populated bins in [{lo}, {hi}], found {}",
            used.len()
        )));
    }
    let x: Vec<f64> = used.iter().map(|&i| hist.lambda(i).ln()).collect();
    let y: Vec<f64> = used.iter().map(|&i| hist.counts[i].ln()).collect();
    let weighted = used.iter().all(|&i| hist.errors[i] > 0.0);
    let w: Vec<f64> = if weighted {
        used.iter()
            .map(|&i| {
                let rel = hist.errors[i] / hist.counts[i];
                1.0 / (rel * rel)
            })
            .collect()
    } else {
        vec![1.0; used.len()]
    };
    let line = weighted_line(&x, &y, &w)?;
    Ok(PowerLawFit {
        amplitude: line.intercept.exp(),
        exponent: line.slope,
        lambda_min: lo,
        lambda_max: hi,
        chi2: line.chi2,
        dof: used.len() - 2,
        n_bins_used: used.len(),
        weighted,
    })
}

/// `∫ A Λ^γ dΛ` over `range` in closed form.
///
/// The upper bound may be `f64::INFINITY` when `γ < -1`.
pub fn integrate_count(fit: &PowerLawFit, range: (f64, f64)) -> f64 {
    let (a, b) = range;
    let g = fit.exponent;
    if g == -1.0 {
        return fit.amplitude * (b / a).ln();
    }
    let p = g + 1.0;
    let upper = if b.is_infinite() {
        if p < 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        b.powf(p)
    };
    fit.amplitude * (upper - a.powf(p)) / p
}
