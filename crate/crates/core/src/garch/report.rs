use std::fmt;

use serde::{Deserialize, Serialize};

use super::optimizer::GarchFit;

pub const CRITICAL_5PCT: f64 = 1.96;
pub const CRITICAL_1PCT: f64 = 2.576;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Significance {
    NotSignificant,
    FivePercent,
    OnePercent,
}

impl Significance {
    fn marker(self) -> &'static str {
        match self {
            Significance::NotSignificant => "",
            Significance::FivePercent => "*",
            Significance::OnePercent => "**",
        }
    }
}

/// Two-sided significance of a t statistic.
pub fn significance(t: f64) -> Significance {
    let a = t.abs();
    if a > CRITICAL_1PCT {
        Significance::OnePercent
    } else if a > CRITICAL_5PCT {
        Significance::FivePercent
    } else {
        Significance::NotSignificant
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub series_id: String,
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub stderr: [f64; 3],
    pub t: [f64; 3],
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitReport {
    pub fn new(series_id: impl Into<String>, fit: &GarchFit) -> Self {
        FitReport {
            series_id: series_id.into(),
            alpha0: fit.params.alpha0,
            alpha1: fit.params.alpha1,
            beta1: fit.params.beta1,
            stderr: fit.stderr,
            t: fit.t_stats,
            loglik: fit.loglik,
            iterations: fit.iterations,
            converged: fit.converged,
        }
    }

    fn estimates(&self) -> [f64; 3] {
        [self.alpha0, self.alpha1, self.beta1]
    }
}

/// `4.14E-09`: two decimals, signed two-digit exponent.
pub(crate) fn format_sci(x: f64) -> String {
    let s = format!("{x:.2E}");
    let (mantissa, exp) = s.split_once('E').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exp.abs())
}

/// Seven significant digits in fixed notation: `2.564338`, `122.4713`.
pub(crate) fn format_t(t: f64) -> String {
    if t == 0.0 || !t.is_finite() {
        return format!("{t:.6}");
    }
    let magnitude = t.abs().log10().floor() as i32;
    let decimals = (6 - magnitude).max(0) as usize;
    let s = format!("{t:.decimals$}");
    // rounding can carry into a new digit (9.9999999 -> 10.000000)
    let digits = s.trim_start_matches('-').replace('.', "").len();
    if digits > 7 && decimals > 0 {
        let decimals = decimals - 1;
        format!("{t:.decimals$}")
    } else {
        s
    }
}

/// `estimate(stderr)[t]` for one parameter.
pub fn format_cell(param: usize, estimate: f64, stderr: f64, t: f64) -> String {
    if param == 0 {
        format!(
            "{}({})[{}]",
            format_sci(estimate),
            format_sci(stderr),
            format_t(t)
        )
    } else {
        format!("{estimate:.6}({stderr:.6})[{}]", format_t(t))
    }
}

/// Lattice (L) against historical (N) fits, one row per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub title: String,
    pub lattice: FitReport,
    pub historical: FitReport,
}

impl ComparisonTable {
    pub fn new(title: impl Into<String>, lattice: FitReport, historical: FitReport) -> Self {
        ComparisonTable {
            title: title.into(),
            lattice,
            historical,
        }
    }

    pub fn significance(&self) -> [[Significance; 2]; 3] {
        let mut out = [[Significance::NotSignificant; 2]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            row[0] = significance(self.lattice.t[i]);
            row[1] = significance(self.historical.t[i]);
        }
        out
    }

    fn cells(report: &FitReport) -> [String; 3] {
        let est = report.estimates();
        std::array::from_fn(|i| format_cell(i, est[i], report.stderr[i], report.t[i]))
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 3] = ["alpha0", "alpha1", "beta1"];
        let left = Self::cells(&self.lattice);
        let right = Self::cells(&self.historical);
        let sig = self.significance();
        let l_head = format!("{} L", self.title);
        let n_head = format!("{} N", self.title);
        let lw = left
            .iter()
            .map(|c| c.len() + 2)
            .chain([l_head.len()])
            .max()
            .unwrap_or(0);
        let rw = right
            .iter()
            .map(|c| c.len() + 2)
            .chain([n_head.len()])
            .max()
            .unwrap_or(0);
        writeln!(f, "{:<8}  {:<lw$}  {:<rw$}", "", l_head, n_head)?;
        for i in 0..3 {
            let l = format!("{}{}", left[i], sig[i][0].marker());
            let r = format!("{}{}", right[i], sig[i][1].marker());
            writeln!(f, "{:<8}  {:<lw$}  {}", NAMES[i], l, r)?;
        }
        write!(f, "* |t| > {CRITICAL_5PCT}, ** |t| > {CRITICAL_1PCT}")
    }
}
