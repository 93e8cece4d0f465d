use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit of `log y = slope · log x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    /// Standard error of the slope (zero for two points or an exact fit).
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Fits the log-log slope over the last `tail` points, or all but the first by default.
pub fn fit_rate(x: &[f64], y: &[f64], tail: Option<usize>) -> Result<RateFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} abscissae for {} values", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InvalidData("rate fit needs at least three points".into()));
    }
    let k = tail.unwrap_or(x.len() - 1);
    if k < 2 || k > x.len() {
        return Err(Error::InvalidData(format!("cannot fit on {k} of {} points", x.len())));
    }
    if let Some(bad) = x.iter().chain(y).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidData(format!("log-log fit needs positive values, got {bad}")));
    }
    let lx: Vec<f64> = x[x.len() - k..].iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y[y.len() - k..].iter().map(|v| v.ln()).collect();
    let m = k as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidData("abscissae are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if k > 2 {
        let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        stderr,
        intercept,
        points: k,
    })
}
