//! Ordinary least squares on log-log data.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TdError};

/// Fraction of the log-abscissa range dropped at each end by default.
pub const DEFAULT_TRIM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points_used: usize,
}

/// Least-squares line through `(ln x, ln y)`.
///
/// Points whose `ln x` falls in the outer `trim` fraction of the abscissa
/// range on either side are discarded before fitting. Non-positive or
/// non-finite samples are rejected.
pub fn fit_loglog(xs: &[f64], ys: &[f64], trim: f64) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(TdError::InvalidParameter(format!(
            "fit needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let mut pts = Vec::with_capacity(xs.len());
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(TdError::InvalidParameter(format!(
                "log-log fit needs positive finite data, got ({x}, {y})"
            )));
        }
        pts.push((x.ln(), y.ln()));
    }
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let margin = trim.clamp(0.0, 0.49) * (hi - lo);
    // Small slack keeps grid points sitting exactly on the cut.
    let slack = 1e-12 * (hi - lo).max(1.0);
    let kept: Vec<(f64, f64)> = pts
        .into_iter()
        .filter(|p| p.0 >= lo + margin - slack && p.0 <= hi - margin + slack)
        .collect();
    linear_fit(&kept)
}

fn linear_fit(pts: &[(f64, f64)]) -> Result<LogLogFit> {
    let n = pts.len();
    if n < 2 {
        return Err(TdError::InvalidParameter(format!(
            "fit needs at least two points after trimming, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(TdError::InvalidParameter("fit abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r2,
        points_used: n,
    })
}

/// `n` points spaced evenly in `ln x` from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
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
    }
}
