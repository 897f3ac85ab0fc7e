//! Growth exponents of hitting times and displacement.

use std::sync::Arc;

use rand::Rng;

use super::stats::{fit_line, median, quantile_sorted, LineFit};
use super::AnalysisError;
use crate::ensemble::{map_replicas, Execution};
use crate::laws::Model;
use crate::rng::{substream, Purpose};
use crate::tree::Environment;
use crate::walk::{run_walk, Mode, Stop, TraceSummary, WalkError, WalkOptions};

const MIN_GRID: usize = 4;
const MIN_REPLICAS: u64 = 500;
/// Checkpoints per doubling of time.
const CHECKPOINTS_PER_OCTAVE: u32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementOptions {
    /// Geometric grid of backbone depths.
    pub ns: Vec<u32>,
    pub replicas: u64,
    pub budget: u64,
    pub boot_reps: usize,
    /// Accept fewer than the recommended grid points and replicas.
    pub relaxed: bool,
}

impl Default for DisplacementOptions {
    fn default() -> Self {
        Self { ns: vec![64, 128, 256, 512], replicas: 500, budget: 2_000_000_000, boot_reps: 200, relaxed: false }
    }
}

/// A log-log slope with a bootstrap interval over replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub fit: LineFit,
    /// 95% percentile interval.
    pub ci: (f64, f64),
    /// `(x, median)` points that entered the fit.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementReport {
    pub ns: Vec<u32>,
    /// Median first time at backbone depth `n`, against `n`.
    pub hitting: ScalingFit,
    /// Median running maximum depth against time.
    pub displacement: Option<ScalingFit>,
    /// Per `n`, per replica, first time at backbone depth `n`; `u64::MAX`
    /// where the budget ran out first.
    pub backbone_hits: Vec<Vec<u64>>,
    /// Same for the first time at any vertex of depth `n`.
    pub any_hits: Vec<Vec<u64>>,
    pub unfinished: usize,
}

fn checkpoint_grid(budget: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut j = 4 * CHECKPOINTS_PER_OCTAVE;
    loop {
        let t = 2f64.powf(f64::from(j) / f64::from(CHECKPOINTS_PER_OCTAVE)).round() as u64;
        if t > budget {
            break;
        }
        if out.last() != Some(&t) {
            out.push(t);
        }
        j += 1;
    }
    out
}

struct Run {
    backbone: Vec<u64>,
    any: Vec<u64>,
    /// Running maximum at each checkpoint, `u32::MAX` once the walk stopped.
    maxima: Vec<u32>,
    finished: bool,
}

fn one_run(model: &Arc<Model>, ns: &[u32], checkpoints: &[u64], budget: u64, seed: u64, r: u64) -> Result<Run, WalkError> {
    let n_max = *ns.iter().max().expect("non-empty grid");
    let mut env = Environment::new(model.clone(), substream(seed, Purpose::Environment, r));
    let opts = WalkOptions::new(Stop::BackboneDistance(n_max), budget)
        .mode(Mode::Full)
        .checkpoints(checkpoints.to_vec());
    let (trace, finished): (TraceSummary, bool) = match run_walk(&mut env, &opts, &mut substream(seed, Purpose::Walk, r)) {
        Ok(t) => (t, true),
        Err(WalkError::StepBudgetExceeded { partial: Some(t), .. }) => (*t, false),
        Err(e) => return Err(e),
    };
    let backbone = ns.iter().map(|&n| trace.first_backbone_hit(n).unwrap_or(u64::MAX)).collect();
    let any = ns.iter().map(|&n| trace.first_hit(n).unwrap_or(u64::MAX)).collect();
    let mut maxima: Vec<u32> = trace.checkpoint_max.iter().map(|c| c.1).collect();
    maxima.resize(checkpoints.len(), if finished { u32::MAX } else { 0 });
    Ok(Run { backbone, any, maxima, finished })
}

/// Median where `u64::MAX` marks a value known only to be huge.
fn median_u64(xs: &[u64]) -> f64 {
    let v: Vec<f64> = xs.iter().map(|&x| if x == u64::MAX { f64::INFINITY } else { x as f64 }).collect();
    median(&v)
}

fn slope_of(points: &[(f64, f64)]) -> Option<LineFit> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.1.is_finite() && p.1 > 0.0).collect();
    if pts.len() < 2 {
        return None;
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    Some(fit_line(&x, &y))
}

fn bootstrap_slope<F>(replicas: usize, reps: usize, seed: u64, stat: F) -> (f64, f64)
where
    F: Fn(&[usize]) -> Option<f64>,
{
    let mut rng = substream(seed, Purpose::Bootstrap, 0);
    let mut idx = vec![0; replicas];
    let mut slopes: Vec<f64> = (0..reps)
        .filter_map(|_| {
            idx.iter_mut().for_each(|i| *i = rng.gen_range(0..replicas));
            stat(&idx)
        })
        .collect();
    if slopes.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    slopes.sort_by(f64::total_cmp);
    (quantile_sorted(&slopes, 0.025), quantile_sorted(&slopes, 0.975))
}

/// Runs full walks to the deepest backbone level of the grid and fits the
/// growth of median hitting times in `n` and of the median running maximum
/// in time. The displacement fit uses checkpoints between the median
/// hitting times of the smallest level and half that of the largest.
pub fn displacement_exponent(
    model: &Arc<Model>,
    opts: &DisplacementOptions,
    seed: u64,
    exec: Execution,
) -> Result<DisplacementReport, AnalysisError> {
    if !opts.relaxed {
        if opts.ns.len() < MIN_GRID {
            return Err(AnalysisError::TooFewSamples { needed: MIN_GRID, got: opts.ns.len() });
        }
        if opts.replicas < MIN_REPLICAS {
            return Err(AnalysisError::TooFewSamples { needed: MIN_REPLICAS as usize, got: opts.replicas as usize });
        }
    }
    if opts.ns.len() < 2 || opts.ns.windows(2).any(|w| w[1] <= w[0]) || opts.ns[0] == 0 {
        return Err(AnalysisError::InvalidArgument(format!("grid {:?} must be increasing and positive", opts.ns)));
    }
    let checkpoints = checkpoint_grid(opts.budget);
    let runs: Vec<Run> = map_replicas(opts.replicas, exec, |r| one_run(model, &opts.ns, &checkpoints, opts.budget, seed, r))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let unfinished = runs.iter().filter(|r| !r.finished).count();
    let backbone_hits: Vec<Vec<u64>> = (0..opts.ns.len()).map(|j| runs.iter().map(|r| r.backbone[j]).collect()).collect();
    let any_hits: Vec<Vec<u64>> = (0..opts.ns.len()).map(|j| runs.iter().map(|r| r.any[j]).collect()).collect();

    let hit_points = |rows: &[usize]| -> Vec<(f64, f64)> {
        opts.ns
            .iter()
            .enumerate()
            .map(|(j, &n)| {
                let xs: Vec<u64> = rows.iter().map(|&i| runs[i].backbone[j]).collect();
                (f64::from(n), median_u64(&xs))
            })
            .collect()
    };
    let all: Vec<usize> = (0..runs.len()).collect();
    let points = hit_points(&all);
    let fit = slope_of(&points).ok_or_else(|| AnalysisError::TooFewSamples { needed: 2, got: 0 })?;
    let ci = bootstrap_slope(runs.len(), opts.boot_reps, seed, |rows| slope_of(&hit_points(rows)).map(|f| f.slope));
    let lo = points[0].1;
    let hi = points.last().expect("grid").1 / 2.0;
    let hitting = ScalingFit { fit, ci, points };
    let window: Vec<usize> =
        (0..checkpoints.len()).filter(|&c| (checkpoints[c] as f64) >= lo && (checkpoints[c] as f64) <= hi).collect();
    let disp_points = |rows: &[usize]| -> Vec<(f64, f64)> {
        window
            .iter()
            .map(|&c| {
                let xs: Vec<f64> = rows
                    .iter()
                    .map(|&i| match runs[i].maxima[c] {
                        u32::MAX => f64::INFINITY,
                        m => f64::from(m),
                    })
                    .collect();
                (checkpoints[c] as f64, median(&xs))
            })
            .collect()
    };
    let displacement = if window.len() >= 3 {
        let points = disp_points(&all);
        slope_of(&points).map(|fit| ScalingFit {
            fit,
            ci: bootstrap_slope(runs.len(), opts.boot_reps, seed ^ 1, |rows| slope_of(&disp_points(rows)).map(|f| f.slope)),
            points,
        })
    } else {
        None
    };

    Ok(DisplacementReport { ns: opts.ns.clone(), hitting, displacement, backbone_hits, any_hits, unfinished })
}

/// First time each replica's walk stands at depth `n` (any vertex, or a
/// backbone vertex with `backbone`); `u64::MAX` where the budget ran out.
pub fn hitting_times(
    model: &Arc<Model>,
    n: u32,
    backbone: bool,
    replicas: u64,
    budget: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<u64>, AnalysisError> {
    let stop = if backbone { Stop::BackboneDistance(n) } else { Stop::Distance(n) };
    map_replicas(replicas, exec, |r| {
        let mut env = Environment::new(model.clone(), substream(seed, Purpose::Environment, r));
        let opts = WalkOptions::new(stop, budget).mode(Mode::Full);
        match run_walk(&mut env, &opts, &mut substream(seed, Purpose::Walk, r)) {
            Ok(t) => Ok(t.time),
            Err(WalkError::StepBudgetExceeded { .. }) => Ok(u64::MAX),
            Err(e) => Err(e.into()),
        }
    })
    .into_iter()
    .collect()
}
