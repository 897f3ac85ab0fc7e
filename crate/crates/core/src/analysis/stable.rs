//! One-sided stable laws and empirical Laplace-transform comparison.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::stats::quantile_sorted;
use super::AnalysisError;
use crate::rng::StreamRng;

/// Default Laplace variable grid.
pub const LAMBDA_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const MIN_REPLICAS: usize = 1000;

/// Draw from the positive stable law with `E exp(-l S) = exp(-l^alpha)`,
/// `0 < alpha < 1`, by Kanter's representation.
pub fn sample_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0);
    let u: f64 = PI * rng.gen::<f64>();
    let w: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * u).sin() / w;
    a * b.powf((1.0 - alpha) / alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceRow {
    pub lambda: f64,
    /// Mean of `exp(-lambda * x)` over the scaled samples.
    pub empirical: f64,
    /// `exp(-xi * lambda^gamma)`.
    pub theory: f64,
    pub deviation: f64,
    /// Standard deviation of the bootstrap replicates.
    pub boot_se: f64,
    /// 95% percentile bootstrap interval of the empirical value.
    pub ci: (f64, f64),
}

impl LaplaceRow {
    /// The deviation is within three bootstrap standard errors.
    pub fn within_noise(&self) -> bool {
        self.deviation.abs() <= 3.0 * self.boot_se
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceReport {
    pub rows: Vec<LaplaceRow>,
    pub max_abs_deviation: f64,
    pub n_samples: usize,
}

/// Compares the empirical Laplace transform of `scaled` (already divided by
/// `n^(1/gamma)`) with `exp(-xi * lambda^gamma)` on `lambdas`.
pub fn laplace_compare(
    scaled: &[f64],
    gamma: f64,
    xi: f64,
    lambdas: &[f64],
    boot_reps: usize,
    rng: &mut StreamRng,
) -> Result<LaplaceReport, AnalysisError> {
    if scaled.len() < MIN_REPLICAS {
        return Err(AnalysisError::TooFewSamples { needed: MIN_REPLICAS, got: scaled.len() });
    }
    let n = scaled.len();
    let transform = |xs: &mut dyn Iterator<Item = f64>, l: f64| -> f64 {
        let mut s = 0.0;
        for x in xs {
            s += (-l * x).exp();
        }
        s / n as f64
    };
    let mut boots: Vec<Vec<f64>> = vec![Vec::with_capacity(boot_reps); lambdas.len()];
    let mut idx = vec![0usize; n];
    for _ in 0..boot_reps {
        for slot in idx.iter_mut() {
            *slot = rng.gen_range(0..n);
        }
        for (li, &l) in lambdas.iter().enumerate() {
            boots[li].push(transform(&mut idx.iter().map(|&i| scaled[i]), l));
        }
    }
    let rows: Vec<LaplaceRow> = lambdas
        .iter()
        .zip(boots.iter_mut())
        .map(|(&lambda, b)| {
            let empirical = transform(&mut scaled.iter().copied(), lambda);
            let theory = (-xi * lambda.powf(gamma)).exp();
            b.sort_by(f64::total_cmp);
            let m = b.iter().sum::<f64>() / b.len().max(1) as f64;
            let boot_se = (b.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (b.len().max(2) - 1) as f64).sqrt();
            let ci = if b.is_empty() { (empirical, empirical) } else { (quantile_sorted(b, 0.025), quantile_sorted(b, 0.975)) };
            LaplaceRow { lambda, empirical, theory, deviation: empirical - theory, boot_se, ci }
        })
        .collect();
    let max_abs_deviation = rows.iter().map(|r| r.deviation.abs()).fold(0.0, f64::max);
    Ok(LaplaceReport { rows, max_abs_deviation, n_samples: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};

    #[test]
    fn stable_sampler_has_the_right_transform() {
        let mut rng = substream(1, Purpose::Fixture, 0);
        for alpha in [0.3, 0.5, 0.76, 0.9] {
            let xs: Vec<f64> = (0..200_000).map(|_| sample_positive_stable(alpha, &mut rng)).collect();
            assert!(xs.iter().all(|x| *x > 0.0));
            for l in [0.5, 1.0, 3.0] {
                let emp = xs.iter().map(|x| (-l * x).exp()).sum::<f64>() / xs.len() as f64;
                let exact = (-f64::powf(l, alpha)).exp();
                assert!((emp - exact).abs() < 0.005, "alpha {alpha} lambda {l}: {emp} vs {exact}");
            }
        }
    }

    #[test]
    fn synthetic_draws_pass() {
        let (gamma, xi) = (0.76, 1.7f64);
        let mut rng = substream(2, Purpose::Fixture, 0);
        let xs: Vec<f64> = (0..5000).map(|_| xi.powf(1.0 / gamma) * sample_positive_stable(gamma, &mut rng)).collect();
        let mut boot = substream(2, Purpose::Bootstrap, 0);
        let report = laplace_compare(&xs, gamma, xi, &LAMBDA_GRID, 300, &mut boot).unwrap();
        for r in &report.rows {
            assert!(r.within_noise(), "{r:?}");
        }
        // both sides decrease in lambda
        for w in report.rows.windows(2) {
            assert!(w[1].empirical < w[0].empirical && w[1].theory < w[0].theory);
        }
        let zero = laplace_compare(&xs, gamma, xi, &[0.0], 10, &mut boot).unwrap();
        assert_eq!(zero.rows[0].empirical, 1.0);
        assert_eq!(zero.rows[0].theory, 1.0);
        assert!(laplace_compare(&xs[..999], gamma, xi, &[1.0], 10, &mut boot).is_err());
    }
}
