//! Log-periodicity of holding times under lattice and non-lattice biases.

use std::f64::consts::TAU;

use super::AnalysisError;

/// Fewest holding times above the threshold for each configuration.
pub const MIN_DEEP_SAMPLES: usize = 10_000;

/// Length of the mean of `exp(2 pi i u)` where `u` is the fractional part of
/// `log x / log beta`. 1 for a point mass on a power of `beta`, near 0 for
/// phases spread evenly.
pub fn circular_resultant(samples: &[f64], beta: f64) -> f64 {
    let lb = beta.ln();
    let (c, s) = samples.iter().fold((0.0, 0.0), |(c, s), x| {
        let u = (x.ln() / lb).rem_euclid(1.0);
        (c + (TAU * u).cos(), s + (TAU * u).sin())
    });
    let n = samples.len() as f64;
    (c * c + s * s).sqrt() / n
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyReport {
    pub beta: f64,
    pub threshold: f64,
    pub r_lattice: f64,
    pub r_nonlattice: f64,
    pub n_lattice: usize,
    pub n_nonlattice: usize,
    /// `r_lattice / r_nonlattice`.
    pub ratio: f64,
    /// `1 / sqrt(n)` scale of `R` for phases that are uniform.
    pub noise_lattice: f64,
    pub noise_nonlattice: f64,
}

/// Compares the phase concentration of holding times above `threshold` for
/// a lattice and a non-lattice bias law.
pub fn lattice_dichotomy(
    lattice: &[f64],
    nonlattice: &[f64],
    beta: f64,
    threshold: f64,
) -> Result<DichotomyReport, AnalysisError> {
    if !(beta > 1.0) {
        return Err(AnalysisError::InvalidArgument(format!("base {beta} must exceed 1")));
    }
    let deep = |xs: &[f64]| -> Result<Vec<f64>, AnalysisError> {
        let d: Vec<f64> = xs.iter().copied().filter(|&x| x > threshold).collect();
        if d.len() < MIN_DEEP_SAMPLES {
            return Err(AnalysisError::TooFewSamples { needed: MIN_DEEP_SAMPLES, got: d.len() });
        }
        Ok(d)
    };
    let a = deep(lattice)?;
    let b = deep(nonlattice)?;
    let r_lattice = circular_resultant(&a, beta);
    let r_nonlattice = circular_resultant(&b, beta);
    Ok(DichotomyReport {
        beta,
        threshold,
        r_lattice,
        r_nonlattice,
        n_lattice: a.len(),
        n_nonlattice: b.len(),
        ratio: r_lattice / r_nonlattice,
        noise_lattice: 1.0 / (a.len() as f64).sqrt(),
        noise_nonlattice: 1.0 / (b.len() as f64).sqrt(),
    })
}
