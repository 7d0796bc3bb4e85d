//! Returns, prices and local volatility as financial time series.
//!
//! Prices follow the recursion `p_j = p_{j-1} exp(r_j)`, and the volatility
//! at `j` is the variance of the three returns `r_{j-1}, r_j, r_{j+1}`
//! about their own mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Simulated { seed: u64, steps: u64, w: f64 },
    Historical { source: String, offset: usize },
}

/// How the ends of a series are treated by windowed operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Indices wrap, as on the lattice.
    Periodic,
    /// Windows that would cross an end are undefined.
    Open,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsSeries {
    pub values: Vec<f64>,
    pub provenance: Provenance,
    pub boundary: Boundary,
    /// Product of every rescaling factor applied so far.
    pub lambda: f64,
}

impl ReturnsSeries {
    /// Snapshot of a lattice field; lattice series are periodic.
    pub fn from_lattice(state: &LatticeState) -> Self {
        let cfg = state.config();
        ReturnsSeries {
            values: state.returns().to_vec(),
            provenance: Provenance::Simulated {
                seed: cfg.seed,
                steps: state.step(),
                w: cfg.variance_w,
            },
            boundary: Boundary::Periodic,
            lambda: 1.0,
        }
    }

    /// Historical returns carry an open boundary.
    pub fn historical(values: Vec<f64>, source: impl Into<String>, offset: usize) -> Self {
        ReturnsSeries {
            values,
            provenance: Provenance::Historical {
                source: source.into(),
                offset,
            },
            boundary: Boundary::Open,
            lambda: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub values: Vec<f64>,
    pub currency_unit: String,
}

impl PriceSeries {
    pub fn p0(&self) -> f64 {
        self.values[0]
    }

    /// Integrate log increments from `p0`: one more price than increments.
    pub fn from_increments(p0: f64, increments: &[f64]) -> Result<Self> {
        if !(p0 > 0.0 && p0.is_finite()) {
            return Err(Error::Input(format!(
                "initial price must be positive, got {p0}"
            )));
        }
        let mut values = Vec::with_capacity(increments.len() + 1);
        let mut p = p0;
        values.push(p);
        for &r in increments {
            p *= r.exp();
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Computation(format!(
                    "price overflowed at index {}",
                    values.len()
                )));
            }
            values.push(p);
        }
        Ok(PriceSeries {
            values,
            currency_unit: String::new(),
        })
    }
}

/// `p_0 = p0`, `p_j = p_{j-1} exp(r_j)` for `j >= 1`.
///
/// The output has one price per return; `r_0` does not enter.
pub fn prices(r: &ReturnsSeries, p0: f64) -> Result<PriceSeries> {
    if r.is_empty() {
        return Err(Error::Input("empty returns series".into()));
    }
    PriceSeries::from_increments(p0, &r.values[1..])
}

/// `r_j = log(p_j / p_{j-1})` for `j = 1..n`.
pub fn returns_of(p: &PriceSeries) -> Result<ReturnsSeries> {
    if let Some(j) = p.values.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Input(format!(
            "price at index {j} is not positive: {}",
            p.values[j]
        )));
    }
    let values = p.values.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    Ok(ReturnsSeries::historical(values, "prices", 0))
}

/// Three-slice local variance.
#[derive(Debug, Clone, PartialEq)]
pub struct VolatilitySeries {
    /// `values[k]` is `v_{k + offset}`.
    pub values: Vec<f64>,
    pub offset: usize,
    /// Length of the underlying returns series.
    pub len: usize,
}

impl VolatilitySeries {
    /// `v_j`, or `None` where the window is undefined.
    pub fn at(&self, j: usize) -> Option<f64> {
        j.checked_sub(self.offset)
            .and_then(|k| self.values.get(k))
            .copied()
    }
}

fn window_variance(a: f64, b: f64, c: f64) -> f64 {
    let mean = (a + b + c) / 3.0;
    ((a - mean).powi(2) + (b - mean).powi(2) + (c - mean).powi(2)) / 3.0
}

pub fn volatility(r: &ReturnsSeries) -> Result<VolatilitySeries> {
    let n = r.len();
    if n < 3 {
        return Err(Error::Input(format!(
            "volatility needs at least 3 returns, got {n}"
        )));
    }
    let x = &r.values;
    match r.boundary {
        Boundary::Periodic => Ok(VolatilitySeries {
            values: (0..n)
                .map(|j| window_variance(x[(j + n - 1) % n], x[j], x[(j + 1) % n]))
                .collect(),
            offset: 0,
            len: n,
        }),
        Boundary::Open => Ok(VolatilitySeries {
            values: x
                .windows(3)
                .map(|w| window_variance(w[0], w[1], w[2]))
                .collect(),
            offset: 1,
            len: n,
        }),
    }
}

/// Returns under `w -> λ w`: every value is multiplied by `√λ`.
pub fn rescale(r: &ReturnsSeries, lambda: f64) -> Result<ReturnsSeries> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Input(format!(
            "scale factor must be positive, got {lambda}"
        )));
    }
    let s = lambda.sqrt();
    Ok(ReturnsSeries {
        values: r.values.iter().map(|v| v * s).collect(),
        provenance: r.provenance.clone(),
        boundary: r.boundary,
        lambda: r.lambda * lambda,
    })
}
