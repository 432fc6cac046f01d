//! Finite-horizon trend classification of a statistic sequence.
//!
//! A statistic is given in log form `y_i = ln F_i` against an abscissa `x_i`
//! (usually `ln(1+|x|)` of the sample point). Only the final quartile of the
//! schedule is used: the least-squares slope of `y` on `x` there, and how much
//! the running max of `y` still rises there.

use serde::{Deserialize, Serialize};

/// Default log-log slope separating "growing" from "flat".
pub const SLOPE_THRESHOLD: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendClass {
    Bounded,
    Unbounded,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendConfig {
    pub slope_threshold: f64,
    /// Fraction of the schedule forming the final window.
    pub window: f64,
}

impl Default for TrendConfig {
    fn default() -> Self {
        TrendConfig { slope_threshold: SLOPE_THRESHOLD, window: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub class: TrendClass,
    pub slope: f64,
    /// Rise of the running max of `y` across the final window.
    pub running_max_rise: f64,
    /// Abscissa span of the final window.
    pub window_span: f64,
    /// Largest `y` seen; `+inf` when the statistic overflowed.
    pub log_max: f64,
    pub samples: usize,
    pub config: TrendConfig,
}

/// Ordinary least squares `y = slope*x + intercept`, with Pearson correlation.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    // shift by the first value so huge offsets cancel exactly
    let (x0, y0) = (x[0], y[0]);
    let mx = x.iter().map(|v| v - x0).sum::<f64>() / n + x0;
    let my = y.iter().map(|v| v - y0).sum::<f64>() / n + y0;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        let dy = (b - y0) - (my - y0);
        sxy += (a - mx) * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return (0.0, my, 0.0);
    }
    let slope = sxy / sxx;
    let r = if syy == 0.0 { 1.0 } else { sxy / (sxx * syy).sqrt() };
    (slope, my - slope * mx, r)
}

/// `n` points log-spaced in `[lo, hi]`, both ends included.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Values below this are treated as this (keeps regressions finite when the
/// statistic underflows to zero).
const LOG_FLOOR: f64 = -1e100;

pub fn classify(x: &[f64], y: &[f64], cfg: &TrendConfig) -> TrendReport {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let log_max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let start = ((n as f64) * (1.0 - cfg.window)).floor() as usize;
    let start = start.min(n.saturating_sub(2));
    let mut report = TrendReport {
        class: TrendClass::Inconclusive,
        slope: f64::NAN,
        running_max_rise: f64::NAN,
        window_span: 0.0,
        log_max,
        samples: n,
        config: *cfg,
    };
    if n < 4 {
        return report;
    }
    if log_max == f64::INFINITY {
        report.class = TrendClass::Unbounded;
        report.slope = f64::INFINITY;
        report.running_max_rise = f64::INFINITY;
        return report;
    }
    let ys: Vec<f64> = y.iter().map(|v| v.max(LOG_FLOOR)).collect();
    let (slope, _, _) = linear_fit(&x[start..], &ys[start..]);
    let rm_before = ys[..start].iter().cloned().fold(LOG_FLOOR, f64::max);
    let rm_end = ys.iter().cloned().fold(LOG_FLOOR, f64::max);
    let rise = (rm_end - rm_before).max(0.0);
    let span = x[n - 1] - x[start];
    report.slope = slope;
    report.running_max_rise = rise;
    report.window_span = span;
    let thr = cfg.slope_threshold;
    report.class = if slope <= thr && rise <= thr * span.max(1.0) {
        TrendClass::Bounded
    } else if slope > thr && rise > 0.0 {
        TrendClass::Unbounded
    } else {
        TrendClass::Inconclusive
    };
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule(f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let xs: Vec<f64> = (0..64).map(|i| 2f64.powf(i as f64 / 2.0)).collect();
        let ax = xs.iter().map(|x| (1.0 + x).ln()).collect();
        let ay = xs.iter().map(|&x| f(x).ln()).collect();
        (ax, ay)
    }

    #[test]
    fn power_growth_is_unbounded() {
        let (x, y) = schedule(|t| t.powf(0.5));
        let r = classify(&x, &y, &TrendConfig::default());
        assert_eq!(r.class, TrendClass::Unbounded);
        assert!((r.slope - 0.5).abs() < 1e-3);
    }

    #[test]
    fn saturating_ratio_is_bounded() {
        let (x, y) = schedule(|t| (t / (1.0 + t)).powi(6));
        assert_eq!(classify(&x, &y, &TrendConfig::default()).class, TrendClass::Bounded);
        let (x, y) = schedule(|t| t.powi(-3));
        assert_eq!(classify(&x, &y, &TrendConfig::default()).class, TrendClass::Bounded);
        let (x, y) = schedule(|_| 0.0);
        let r = classify(&x, &y, &TrendConfig::default());
        assert_eq!(r.class, TrendClass::Bounded, "{r:?}");
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let (s, c, r) = linear_fit(&x, &y);
        assert!((s - 3.0).abs() < 1e-12 && (c + 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
    }
}
