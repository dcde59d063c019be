//! Fitting `value_n <= C rho^n` to a decay sequence.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ln0;

/// A fitted geometric envelope `value_n <= c * rho^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rho: f64,
    #[serde(serialize_with = "crate::num::extended")]
    pub c: f64,
    /// Last `n` with a positive value when the sequence vanishes inside the
    /// fitting window; the envelope is then `c` up to that `n` and zero after.
    pub support_end: Option<u64>,
}

impl RateFit {
    pub const ZERO: Self = Self { rho: 0.0, c: 0.0, support_end: None };

    /// Whether the fitted rate is below the decision threshold.
    pub fn geometric(&self) -> bool {
        self.rho < super::RATE_THRESHOLD && self.c.is_finite()
    }

    /// `ln` of the envelope at step `n`.
    pub fn ln_bound(&self, n: u64) -> f64 {
        match self.support_end {
            Some(end) if n <= end => ln0(self.c),
            Some(_) => f64::NEG_INFINITY,
            None => ln0(self.c) + n as f64 * ln0(self.rho),
        }
    }

    /// Checks every observed point against the envelope with relative slack.
    pub fn verify_ln(&self, points: &[(u64, f64)], slack: f64) -> bool {
        points.iter().all(|&(n, ln_v)| ln_v == f64::NEG_INFINITY || ln_v <= self.ln_bound(n) + slack)
    }
}

/// Fits `(rho, C)` to a sequence given as `(n, ln value)`.
///
/// `rho` is the exponential of the least-squares slope of the finite log
/// values with `n` in `window` (inclusive); `C` is the smallest constant
/// making the envelope dominate every observed point.
pub fn fit_log_decay(points: &[(u64, f64)], window: (u64, u64)) -> Result<RateFit> {
    let (lo, hi) = window;
    let in_window: Vec<(u64, f64)> = points.iter().copied().filter(|&(n, _)| n >= lo && n <= hi).collect();
    if in_window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let positive: Vec<(u64, f64)> = points.iter().copied().filter(|p| p.1 > f64::NEG_INFINITY).collect();
    if positive.is_empty() {
        return Ok(RateFit::ZERO);
    }
    let fit_points: Vec<(f64, f64)> =
        in_window.iter().filter(|p| p.1 > f64::NEG_INFINITY).map(|&(n, l)| (n as f64, l)).collect();

    if fit_points.len() < 2 {
        let end = positive.iter().map(|p| p.0).max().unwrap_or(0);
        let ln_c = positive.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        return Ok(RateFit { rho: 0.0, c: ln_c.exp(), support_end: Some(end) });
    }

    let k = fit_points.len() as f64;
    let mean_n = fit_points.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_l = fit_points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = fit_points.iter().map(|p| (p.0 - mean_n).powi(2)).sum();
    let sxy: f64 = fit_points.iter().map(|p| (p.0 - mean_n) * (p.1 - mean_l)).sum();
    let slope = sxy / sxx;
    let ln_c = positive.iter().map(|&(n, l)| l - n as f64 * slope).fold(f64::NEG_INFINITY, f64::max);
    Ok(RateFit { rho: slope.exp(), c: ln_c.exp(), support_end: None })
}

/// Fits `(rho, C)` to nonnegative `(n, value)` pairs over `window`.
pub fn fit_geometric_rate(decay: &[(u64, f64)], window: (u64, u64)) -> Result<RateFit> {
    let points: Vec<(u64, f64)> = decay.iter().map(|&(n, v)| (n, ln0(v))).collect();
    fit_log_decay(&points, window)
}

/// The tail window `[n_max / 2, n_max]` used for all decay fits.
pub fn tail_window(n_max: usize) -> (u64, u64) {
    ((n_max / 2).max(1) as u64, n_max as u64)
}
