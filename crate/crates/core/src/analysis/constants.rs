//! Trap-weight tail, the entrance rate, and the composed scale constant.

use std::sync::Arc;

use statrs::function::gamma::gamma as gamma_fn;

use super::stats::{ks_two_sample, mean_se, quantile_sorted, KsTest};
use super::tail::{hill_estimator, TailFit, DEFAULT_TOP_FRACTION};
use super::AnalysisError;
use crate::ensemble::{map_replicas, Execution};
use crate::laws::{solve_gamma_for_mean, Model};
use crate::rng::{substream, Purpose};
use crate::tree::{sample_trap, Environment};
use crate::walk::{run_walk, trap_counts, Mode, Stop, WalkOptions};

/// Upper-tail shares whose thresholds form the direct tail-constant grid.
pub const D1_TAIL_FRACTIONS: [f64; 4] = [0.01, 0.005, 0.002, 0.001];
/// Trap depths averaged in the depth-resolved tail constant.
pub const D1_DEPTHS: std::ops::RangeInclusive<u32> = 8..=14;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn new(value: f64, se: f64) -> Self {
        Self { value, se }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightTailOptions {
    pub samples: usize,
    pub top_fraction: f64,
}

impl Default for WeightTailOptions {
    fn default() -> Self {
        Self { samples: 1_000_000, top_fraction: DEFAULT_TOP_FRACTION }
    }
}

/// One threshold or one depth of a tail-constant estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D1Rung {
    /// Threshold `u` for the direct route, depth `k` for the depth route.
    pub at: f64,
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTailReport {
    pub fit: TailFit,
    /// Exponent from the root solver.
    pub gamma: f64,
    /// Mean of `u^gamma P(w > u)` over the threshold grid.
    pub d1_tail: Estimate,
    pub tail_grid: Vec<D1Rung>,
    /// Depth-resolved route from an independent sample.
    pub d1_depth: Estimate,
    pub depth_ladder: Vec<D1Rung>,
    /// `d1_tail / d1_depth`.
    pub ratio: f64,
}

fn trap_sample(model: &Model, n: usize, seed: u64, purpose: Purpose, exec: Execution) -> Result<Vec<(f64, u32)>, AnalysisError> {
    map_replicas(n as u64, exec, |i| {
        let trap = sample_trap(&model.harris.h, &model.bias, &mut substream(seed, purpose, i))?;
        Ok((trap.omega_ent(), trap.depth()))
    })
    .into_iter()
    .collect()
}

/// Samples traps, fits the tail of their weights and estimates the tail
/// constant twice: from the empirical tail at high thresholds and from the
/// depth-resolved moments `E[w^gamma; D = k]` on an independent sample.
pub fn trap_weight_tail(
    model: &Model,
    opts: WeightTailOptions,
    seed: u64,
    exec: Execution,
) -> Result<WeightTailReport, AnalysisError> {
    let n = opts.samples;
    let first = trap_sample(model, n, seed, Purpose::Trap, exec)?;
    let weights: Vec<f64> = first.iter().map(|x| x.0).collect();
    let fit = hill_estimator(&weights, opts.top_fraction)?;
    let sol = solve_gamma_for_mean(model.harris.m_h, &model.bias)?;
    let g = sol.gamma;

    let mut sorted = weights;
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let tail_grid: Vec<D1Rung> = D1_TAIL_FRACTIONS
        .iter()
        .map(|&f| {
            let u = quantile_sorted(&sorted, 1.0 - f);
            let above = n - sorted.partition_point(|&w| w <= u);
            let p = above as f64 / nf;
            let scale = u.powf(g);
            D1Rung { at: u, value: scale * p, se: scale * (p * (1.0 - p) / nf).sqrt() }
        })
        .collect();
    let m = tail_grid.len() as f64;
    let d1_tail = Estimate::new(
        tail_grid.iter().map(|r| r.value).sum::<f64>() / m,
        tail_grid.iter().map(|r| r.se).sum::<f64>() / m,
    );

    let second = trap_sample(model, n, seed, Purpose::Analysis, exec)?;
    let prefactor = 1.0 / (g * sol.m_h * model.bias.log_moment(g));
    let depth_ladder: Vec<D1Rung> = D1_DEPTHS
        .map(|k| {
            let xs: Vec<f64> =
                second.iter().map(|&(w, d)| if d == k { w.powf(g) } else { 0.0 }).collect();
            let (mean, se) = mean_se(&xs);
            D1Rung { at: f64::from(k), value: prefactor * mean, se: prefactor * se }
        })
        .collect();
    let m = depth_ladder.len() as f64;
    let d1_depth = Estimate::new(
        depth_ladder.iter().map(|r| r.value).sum::<f64>() / m,
        depth_ladder.iter().map(|r| r.se * r.se).sum::<f64>().sqrt() / m,
    );
    if !(d1_depth.value > 0.0) {
        return Err(AnalysisError::TooFewSamples { needed: n * 10, got: n });
    }

    Ok(WeightTailReport {
        fit,
        gamma: g,
        ratio: d1_tail.value / d1_depth.value,
        d1_tail,
        tail_grid,
        d1_depth,
        depth_ladder,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiReport {
    /// Entrances before backbone depth `n`, per unit depth, averaged over
    /// replicas.
    pub direct: Estimate,
    /// Entrances per regeneration block over depth gained per block.
    pub indirect: Estimate,
    /// `|direct - indirect| / direct`.
    pub relative_gap: f64,
    /// First-half against second-half block counts, pooled over replicas.
    pub stationarity: KsTest,
    pub blocks: usize,
    pub n: u32,
    pub replicas: u64,
}

/// Runs `replicas` collapsed walks to backbone depth `n` and compares the
/// two estimates of the trap-entrance rate. Regenerations closer than
/// `horizon` steps to the end of a walk are not used.
pub fn estimate_psi(
    model: &Arc<Model>,
    n: u32,
    replicas: u64,
    budget: u64,
    horizon: u64,
    seed: u64,
    exec: Execution,
) -> Result<PsiReport, AnalysisError> {
    if replicas < 2 {
        return Err(AnalysisError::TooFewSamples { needed: 2, got: replicas as usize });
    }
    let runs: Vec<Result<_, AnalysisError>> = map_replicas(replicas, exec, |r| {
        let mut env = Environment::new(model.clone(), substream(seed, Purpose::Environment, r));
        let opts = WalkOptions::new(Stop::BackboneDistance(n), budget)
            .mode(Mode::Collapsed)
            .horizon(horizon);
        let trace = run_walk(&mut env, &opts, &mut substream(seed, Purpose::Walk, r))?;
        Ok(trap_counts(&trace, n)?)
    });
    let runs: Vec<_> = runs.into_iter().collect::<Result<_, _>>()?;

    let directs: Vec<f64> = runs.iter().map(|p| p.direct).collect();
    let (dm, dse) = mean_se(&directs);
    let total_a: f64 = runs.iter().map(|p| p.a_counts.iter().sum::<u64>() as f64).sum();
    let total_depth: f64 = runs.iter().map(|p| p.kappa * p.a_counts.len() as f64).sum();
    let indirect_value = total_a / total_depth;
    // replicate spread of the ratio estimator
    let per: Vec<f64> = runs.iter().map(|p| p.indirect).collect();
    let (_, ise) = mean_se(&per);

    let mut first = Vec::new();
    let mut second = Vec::new();
    for p in &runs {
        let half = p.a_counts.len() / 2;
        first.extend(p.a_counts[..half].iter().map(|&a| a as f64));
        second.extend(p.a_counts[half..].iter().map(|&a| a as f64));
    }
    Ok(PsiReport {
        direct: Estimate::new(dm, dse),
        indirect: Estimate::new(indirect_value, ise),
        relative_gap: (dm - indirect_value).abs() / dm,
        stationarity: ks_two_sample(&first, &second),
        blocks: first.len() + second.len(),
        n,
        replicas,
    })
}

/// The scale constant and its factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantEstimates {
    pub d1: Estimate,
    pub d2: Estimate,
    pub eta: Estimate,
    pub psi: Estimate,
    pub gamma: f64,
    pub xi: f64,
    /// Free-form `(key, value)` provenance: sample sizes, radii, thresholds.
    pub provenance: Vec<(String, String)>,
}

impl ConstantEstimates {
    pub fn new(d1: Estimate, d2: Estimate, eta: Estimate, psi: Estimate, gamma: f64) -> Result<Self, AnalysisError> {
        for (name, e) in [("d1", d1), ("d2", d2), ("eta", eta), ("psi", psi)] {
            if !(e.value > 0.0 && e.value.is_finite()) {
                return Err(AnalysisError::InvalidArgument(format!("{name} estimate {} is not positive", e.value)));
            }
        }
        if eta.value > 1.0 {
            return Err(AnalysisError::InvalidArgument(format!("eta estimate {} exceeds 1", eta.value)));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(AnalysisError::InvalidArgument(format!("gamma {gamma} outside (0, 1)")));
        }
        let xi = compose_xi(psi.value, eta.value, d1.value, d2.value, gamma);
        Ok(Self { d1, d2, eta, psi, gamma, xi, provenance: Vec::new() })
    }

    pub fn with_provenance(mut self, key: &str, value: impl ToString) -> Self {
        self.provenance.push((key.to_string(), value.to_string()));
        self
    }

    /// `xi` recomputed from the stored factors.
    pub fn recompose(&self) -> f64 {
        compose_xi(self.psi.value, self.eta.value, self.d1.value, self.d2.value, self.gamma)
    }
}

/// `psi eta d1 d2 Gamma(1 + gamma) Gamma(1 - gamma)`.
pub fn compose_xi(psi: f64, eta: f64, d1: f64, d2: f64, gamma: f64) -> f64 {
    psi * eta * d1 * d2 * gamma_fn(1.0 + gamma) * gamma_fn(1.0 - gamma)
}
