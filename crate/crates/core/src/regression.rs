//! Straight-line least squares shared by the power-law and Gaussian fits.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub chi2: f64,
    pub points: usize,
}

/// Fit `y = intercept + slope * x`, minimizing `sum w_i (y_i - a - b x_i)^2`.
pub(crate) fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    debug_assert!(x.len() == y.len() && y.len() == w.len());
    let n = x.len();
    if n < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {n}")));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are degenerate".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2 = (0..n)
        .map(|i| {
            let r = y[i] - intercept - slope * x[i];
            w[i] * r * r
        })
        .sum();
    Ok(LineFit {
        intercept,
        slope,
        chi2,
        points: n,
    })
}
