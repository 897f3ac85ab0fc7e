//! Small statistical helpers shared by the estimators.

use std::collections::BTreeMap;
use std::hash::Hash;

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::rng::StreamRng;

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Linear-interpolation quantile of sorted data, `p` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, 0.5)
}

/// Least-squares line `y = a + b x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LineFit { intercept, slope, slope_se }
}

/// Two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    /// Asymptotic p-value.
    pub p_value: f64,
    /// Critical value of the statistic at the 5% level.
    pub critical_5: f64,
}

impl KsTest {
    pub fn passes_5(&self) -> bool {
        self.statistic <= self.critical_5
    }
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsTest {
    assert!(!a.is_empty() && !b.is_empty(), "KS test needs two non-empty samples");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        // step past every copy of the smaller value in both samples
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsTest { statistic: d, p_value: kolmogorov_q(lambda), critical_5: 1.3581 / ne.sqrt() }
}

/// Tail of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Empirical distribution over categories.
pub fn histogram<K: Ord + Clone, I: IntoIterator<Item = K>>(items: I) -> BTreeMap<K, u64> {
    let mut h = BTreeMap::new();
    for k in items {
        *h.entry(k).or_insert(0) += 1;
    }
    h
}

/// Total variation distance between two empirical distributions.
pub fn tv_distance<K: Ord + Clone + Hash>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> f64 {
    let na = a.values().sum::<u64>() as f64;
    let nb = b.values().sum::<u64>() as f64;
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    0.5 * keys
        .into_iter()
        .map(|k| {
            let pa = a.get(k).copied().unwrap_or(0) as f64 / na;
            let pb = b.get(k).copied().unwrap_or(0) as f64 / nb;
            (pa - pb).abs()
        })
        .sum::<f64>()
}

/// Pearson goodness-of-fit statistic and p-value for observed counts against
/// expected probabilities. Cells with expected count below 5 are pooled.
pub fn chi_square(observed: &[u64], expected_probs: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected_probs.len());
    let n = observed.iter().sum::<u64>() as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_probs) {
        if n * p < 5.0 {
            pool.0 += o as f64;
            pool.1 += n * p;
        } else {
            cells.push((o as f64, n * p));
        }
    }
    if pool.1 > 0.0 {
        cells.push(pool);
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() as f64 - 1.0).max(1.0);
    let p = 1.0 - ChiSquared::new(dof).expect("positive degrees of freedom").cdf(stat);
    (stat, p)
}

/// Percentile bootstrap interval of `stat` at the given coverage.
pub fn bootstrap_interval<F>(xs: &[f64], reps: usize, coverage: f64, rng: &mut StreamRng, stat: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = xs.len();
    let mut buf = vec![0.0; n];
    let mut values: Vec<f64> = (0..reps)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = xs[rng.gen_range(0..n)];
            }
            stat(&buf)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - coverage) / 2.0;
    (quantile_sorted(&values, alpha), quantile_sorted(&values, 1.0 - alpha))
}
