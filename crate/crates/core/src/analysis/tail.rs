//! Tail-index estimation for power-law samples.

use super::stats::fit_line;
use super::AnalysisError;

/// Fewest samples a tail fit accepts.
pub const MIN_TAIL_SAMPLES: usize = 1000;
/// Default share of upper order statistics.
pub const DEFAULT_TOP_FRACTION: f64 = 0.01;
/// Sensitivity rungs around the default share.
pub const SENSITIVITY_FRACTIONS: [f64; 3] = [0.005, 0.01, 0.02];
/// Largest relative spread of the rung estimates for a power-law verdict.
pub const MAX_INSTABILITY: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMethod {
    Hill,
    LogLogRank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailFit {
    pub gamma: f64,
    pub se: f64,
    pub n: usize,
    /// Number of upper order statistics used.
    pub k: usize,
    pub fraction: f64,
    pub method: TailMethod,
    /// Slope of log rank against log value over the same order statistics,
    /// negated.
    pub loglog_gamma: f64,
    /// `(fraction, gamma)` at each sensitivity rung.
    pub rungs: Vec<(f64, f64)>,
    /// `(max - min) / gamma` over the rungs.
    pub instability: f64,
    pub power_law: bool,
}

/// Hill estimate from the top `k` of the descending-sorted data, or `None`
/// when the top values are all tied with the threshold.
fn hill_sorted(desc: &[f64], k: usize) -> Option<f64> {
    let threshold = desc[k].ln();
    let h = desc[..k].iter().map(|x| x.ln() - threshold).sum::<f64>() / k as f64;
    (h > 0.0).then(|| 1.0 / h)
}

fn top_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, n - 1)
}

/// Hill estimator over the top `ceil(fraction * n)` order statistics with
/// standard error `gamma / sqrt(k)`, a rank-regression cross-check and a
/// stability verdict across the sensitivity rungs.
pub fn hill_estimator(samples: &[f64], fraction: f64) -> Result<TailFit, AnalysisError> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(AnalysisError::TooFewSamples { needed: MIN_TAIL_SAMPLES, got: samples.len() });
    }
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(AnalysisError::InvalidArgument(format!("top fraction {fraction} outside (0, 0.5]")));
    }
    if let Some(x) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(AnalysisError::InvalidArgument(format!("tail samples must be positive, found {x}")));
    }
    let mut desc = samples.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let n = desc.len();
    let k = top_count(n, fraction);
    let gamma = hill_sorted(&desc, k).ok_or_else(|| {
        AnalysisError::NotPowerLaw(format!("the top {k} of {n} samples are all equal"))
    })?;

    let xs: Vec<f64> = desc[..k].iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = (1..=k).map(|r| (r as f64 / n as f64).ln()).collect();
    let loglog_gamma = -fit_line(&xs, &ys).slope;

    let rungs: Vec<(f64, f64)> = SENSITIVITY_FRACTIONS
        .iter()
        .map(|&f| (f, hill_sorted(&desc, top_count(n, f)).unwrap_or(f64::INFINITY)))
        .collect();
    let (lo, hi) = rungs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.1), hi.max(r.1)));
    let instability = (hi - lo) / gamma;
    Ok(TailFit {
        gamma,
        se: gamma / (k as f64).sqrt(),
        n,
        k,
        fraction,
        method: TailMethod::Hill,
        loglog_gamma,
        rungs,
        instability,
        power_law: instability.is_finite() && instability <= MAX_INSTABILITY,
    })
}
