//! Late-entrance snapshot records and the estimators built on them: the
//! trap-time tail and the constants of the entrance-to-time conversion.

use std::sync::Arc;

use statrs::function::gamma::gamma as gamma_fn;

use super::constants::{Estimate, D1_TAIL_FRACTIONS};
use super::stats::{mean_se, quantile_sorted};
use super::tail::{hill_estimator, TailFit};
use super::AnalysisError;
use crate::ensemble::{map_replicas, Execution};
use crate::exact::{pair_constants, BiasBounds};
use crate::laws::Model;
use crate::rng::{derive_seed, substream, Purpose};
use crate::tree::{compose_pair, renewal_decompose, sample_trap, BackboneGrowth, BackboneTreePair};
use crate::walk::{late_neighborhood, SnapshotOptions, TrapTimeSampler, WalkError, DEFAULT_K_STOP};

/// Fewest snapshots accepted by [`estimate_d2`].
pub const MIN_D2_SNAPSHOTS: usize = 10_000;
/// Fewest snapshots accepted by [`estimate_eta`].
pub const MIN_ETA_SNAPSHOTS: usize = 100_000;
/// Fewest snapshots accepted by [`trap_time_tail`].
pub const MIN_TRAP_TIME_SNAPSHOTS: usize = 10_000;
/// Fewest samples left after a filter.
const MIN_EFFECTIVE: usize = 30;
const MAX_CENSORED: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotPlan {
    pub snapshots: u64,
    /// Independent traps glued to each neighborhood.
    pub traps_per_snapshot: u32,
    pub snapshot: SnapshotOptions,
    /// Walks from the entrance per pair; 0 skips the holding times.
    pub tau_reps: u32,
    pub k_stop: u32,
    pub tau_budget: u64,
    /// Evaluate the exact pair constants; without them only the weight,
    /// depth and holding times are filled in.
    pub constants: bool,
}

impl Default for SnapshotPlan {
    fn default() -> Self {
        Self {
            snapshots: 10_000,
            traps_per_snapshot: 1,
            snapshot: SnapshotOptions::default(),
            tau_reps: 0,
            k_stop: DEFAULT_K_STOP,
            tau_budget: 1_000_000_000,
            constants: true,
        }
    }
}

/// What the estimators need from one backbone/trap pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub snapshot: u64,
    pub trap: u32,
    pub omega_ent: f64,
    pub trap_depth: u32,
    /// Number of renewal components of the trap below its entrance.
    pub r: u32,
    pub p_esc_k: f64,
    pub p_de: f64,
    pub fd_prob: f64,
    /// `c_{f,j}` for `j = 1..=k`.
    pub c_f: Vec<f64>,
    pub c_f_upper: Vec<f64>,
    /// Path weight from the entrance to the `j`-th cutpoint, `j = 1..=min(r - 1, k)`.
    pub cut_weight: Vec<f64>,
    pub tau: Vec<u64>,
    pub fell_deep: u32,
    pub censored: u32,
}

impl SnapshotRecord {
    /// Constants of `pair` at radius `k`, without holding times.
    pub fn from_pair(pair: &BackboneTreePair, k: u32, bounds: BiasBounds) -> Result<Self, AnalysisError> {
        let pc = pair_constants(pair, k, bounds)?;
        let tree = pair.tree();
        let dec = renewal_decompose(tree, pair.ent());
        let cut_weight = dec
            .cutpoints
            .iter()
            .take(k as usize)
            .map(|&c| tree.path_weight(pair.ent(), c).expect("cutpoint lies below ent"))
            .collect();
        Ok(Self {
            snapshot: 0,
            trap: 0,
            omega_ent: pc.omega_ent,
            trap_depth: pair.trap_depth(),
            r: dec.r() as u32,
            p_esc_k: pc.p_esc_k,
            p_de: pc.p_de,
            fd_prob: pc.fd_prob,
            c_f: pc.ladder.iter().map(|r| r.c_f_k).collect(),
            c_f_upper: pc.ladder.iter().map(|r| r.c_f_upper).collect(),
            cut_weight,
            tau: Vec::new(),
            fell_deep: 0,
            censored: 0,
        })
    }

    fn bare(pair: &BackboneTreePair) -> Self {
        Self {
            snapshot: 0,
            trap: 0,
            omega_ent: pair.omega_ent(),
            trap_depth: pair.trap_depth(),
            r: 0,
            p_esc_k: f64::NAN,
            p_de: f64::NAN,
            fd_prob: f64::NAN,
            c_f: Vec::new(),
            c_f_upper: Vec::new(),
            cut_weight: Vec::new(),
            tau: Vec::new(),
            fell_deep: 0,
            censored: 0,
        }
    }

    /// `2 c_{f,k} omega_ent` at the record's largest radius.
    pub fn trap_time_scale(&self) -> f64 {
        2.0 * self.c_f.last().copied().unwrap_or(f64::NAN) * self.omega_ent
    }

    /// `(2 c_{f,k} w(c_k))^gamma` if the trap has more than `k` components,
    /// else 0.
    pub fn d2_term(&self, k: u32, gamma: f64) -> f64 {
        let k = k as usize;
        if k == 0 || k > self.c_f.len() || self.r as usize <= k {
            return 0.0;
        }
        (2.0 * self.c_f[k - 1] * self.cut_weight[k - 1]).powf(gamma)
    }
}

fn trap_rng(seed: u64, trap: u32, snapshot: u64) -> crate::rng::StreamRng {
    if trap == 0 {
        substream(seed, Purpose::Trap, snapshot)
    } else {
        substream(derive_seed(seed, u64::from(trap)), Purpose::Trap, snapshot)
    }
}

/// Builds `snapshots * traps_per_snapshot` records. The first trap of each
/// snapshot is the one [`late_trap_snapshot`](crate::walk::late_trap_snapshot)
/// would attach.
pub fn collect_snapshots(
    model: &Arc<Model>,
    plan: SnapshotPlan,
    seed: u64,
    exec: Execution,
) -> Result<Vec<SnapshotRecord>, AnalysisError> {
    if plan.traps_per_snapshot == 0 {
        return Err(AnalysisError::InvalidArgument("traps_per_snapshot must be at least 1".into()));
    }
    let bounds = BiasBounds::from(&model.bias);
    let k = plan.snapshot.k;
    let per = plan.traps_per_snapshot;
    let batches = map_replicas(plan.snapshots, exec, |s| -> Result<Vec<SnapshotRecord>, AnalysisError> {
        let nbhd = late_neighborhood(model, plan.snapshot, seed, s)?;
        let mut out = Vec::with_capacity(per as usize);
        for j in 0..per {
            let trap = sample_trap(&model.harris.h, &model.bias, &mut trap_rng(seed, j, s))?;
            let pair = compose_pair(&nbhd, &trap);
            let mut rec = if plan.constants {
                SnapshotRecord::from_pair(&pair, k, bounds)?
            } else {
                SnapshotRecord::bare(&pair)
            };
            rec.snapshot = s;
            rec.trap = j;
            if plan.tau_reps > 0 {
                let growth = BackboneGrowth::Law { joint: &model.harris.joint, bias: &model.bias };
                let mut sampler = TrapTimeSampler::new(&pair, growth, plan.k_stop).with_budget(plan.tau_budget);
                let mut rng = substream(seed, Purpose::Holding, s * u64::from(per) + u64::from(j));
                for _ in 0..plan.tau_reps {
                    match sampler.sample(&mut rng) {
                        Ok(v) => {
                            rec.tau.push(v.tau);
                            rec.fell_deep += u32::from(v.fell_deep);
                        }
                        Err(WalkError::StepBudgetExceeded { .. }) => rec.censored += 1,
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            out.push(rec);
        }
        Ok(out)
    });
    let mut records = Vec::with_capacity((plan.snapshots * u64::from(per)) as usize);
    for b in batches {
        records.extend(b?);
    }
    Ok(records)
}

fn require(records: &[SnapshotRecord], needed: usize) -> Result<(), AnalysisError> {
    if records.len() < needed {
        return Err(AnalysisError::TooFewSamples { needed, got: records.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D2Rung {
    pub k: u32,
    pub value: f64,
    pub se: f64,
    /// Records with more than `k` components.
    pub effective: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct D2Report {
    pub rungs: Vec<D2Rung>,
    pub records: usize,
}

impl D2Report {
    /// The deepest rung.
    pub fn estimate(&self) -> Estimate {
        let r = self.rungs.last().expect("non-empty ladder");
        Estimate::new(r.value, r.se)
    }
}

/// Mean of the truncated terms over all records, scaled by
/// `1 / (1 - h(0))`, for each radius in `ks`.
pub fn estimate_d2(records: &[SnapshotRecord], gamma: f64, h0: f64, ks: &[u32]) -> Result<D2Report, AnalysisError> {
    require(records, MIN_D2_SNAPSHOTS)?;
    if ks.is_empty() || ks.iter().any(|k| !(4..=12).contains(k)) {
        return Err(AnalysisError::InvalidArgument(format!("d2 radii {ks:?} must lie in 4..=12")));
    }
    if !(0.0..1.0).contains(&h0) {
        return Err(AnalysisError::InvalidArgument(format!("h(0) = {h0} outside [0, 1)")));
    }
    let scale = 1.0 / (1.0 - h0);
    let mut rungs = Vec::with_capacity(ks.len());
    for &k in ks {
        let effective = records.iter().filter(|r| r.r > k && r.c_f.len() >= k as usize).count();
        if effective < MIN_EFFECTIVE {
            return Err(AnalysisError::TooFewSamples { needed: MIN_EFFECTIVE, got: effective });
        }
        let xs: Vec<f64> = records.iter().map(|r| r.d2_term(k, gamma)).collect();
        let (m, se) = mean_se(&xs);
        rungs.push(D2Rung { k, value: scale * m, se: scale * se, effective });
    }
    Ok(D2Report { rungs, records: records.len() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaRung {
    pub quantile: f64,
    pub threshold: f64,
    pub value: f64,
    pub se: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaReport {
    pub rungs: Vec<EtaRung>,
    pub records: usize,
}

impl EtaReport {
    /// The highest rung.
    pub fn estimate(&self) -> Estimate {
        let r = self.rungs.last().expect("non-empty ladder");
        Estimate::new(r.value, r.se)
    }
}

/// Mean fall-deep probability over records whose `2 c_{f,k} omega_ent`
/// exceeds its empirical quantile, for each quantile in `quantiles`.
pub fn estimate_eta(records: &[SnapshotRecord], quantiles: &[f64]) -> Result<EtaReport, AnalysisError> {
    require(records, MIN_ETA_SNAPSHOTS)?;
    if quantiles.is_empty() || quantiles.iter().any(|q| !(*q > 0.9 && *q < 0.9999)) {
        return Err(AnalysisError::InvalidArgument(format!("quantiles {quantiles:?} must lie in (0.9, 0.9999)")));
    }
    let mut scales: Vec<f64> = records.iter().map(SnapshotRecord::trap_time_scale).collect();
    scales.sort_by(f64::total_cmp);
    let mut rungs = Vec::with_capacity(quantiles.len());
    for &q in quantiles {
        let threshold = quantile_sorted(&scales, q);
        let xs: Vec<f64> =
            records.iter().filter(|r| r.trap_time_scale() > threshold).map(|r| r.fd_prob).collect();
        if xs.len() < MIN_EFFECTIVE {
            return Err(AnalysisError::TooFewSamples { needed: MIN_EFFECTIVE, got: xs.len() });
        }
        let (m, se) = mean_se(&xs);
        rungs.push(EtaRung { quantile: q, threshold, value: m, se: if se.is_nan() { 0.0 } else { se }, count: xs.len() });
    }
    Ok(EtaReport { rungs, records: records.len() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrapTimeReport {
    pub fit: TailFit,
    pub gamma: f64,
    pub samples: usize,
    pub censored_fraction: f64,
    /// Mean of `x^gamma P(tau > x)` over high thresholds.
    pub prefactor: Estimate,
    /// `eta d1 d2 Gamma(1 + gamma)` when the parts are supplied.
    pub composed: Option<f64>,
    pub ratio: Option<f64>,
}

/// Fits the tail of the holding times stored in `records`. With `parts =
/// Some((eta, d1, d2))` the empirical prefactor is compared with
/// `eta d1 d2 Gamma(1 + gamma)`.
pub fn trap_time_tail(
    records: &[SnapshotRecord],
    gamma: f64,
    top_fraction: f64,
    parts: Option<(f64, f64, f64)>,
) -> Result<TrapTimeReport, AnalysisError> {
    require(records, MIN_TRAP_TIME_SNAPSHOTS)?;
    let taus: Vec<f64> = records.iter().flat_map(|r| r.tau.iter().map(|&t| t as f64)).collect();
    let censored: u64 = records.iter().map(|r| u64::from(r.censored)).sum();
    let attempts = taus.len() as f64 + censored as f64;
    if attempts == 0.0 {
        return Err(AnalysisError::TooFewSamples { needed: MIN_TRAP_TIME_SNAPSHOTS, got: 0 });
    }
    let censored_fraction = censored as f64 / attempts;
    if censored_fraction > MAX_CENSORED {
        return Err(AnalysisError::ExcessCensoring { fraction: censored_fraction });
    }
    let fit = hill_estimator(&taus, top_fraction)?;

    let mut sorted = taus;
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let grid: Vec<(f64, f64)> = D1_TAIL_FRACTIONS
        .iter()
        .map(|&f| {
            let x = quantile_sorted(&sorted, 1.0 - f);
            let p = (n - sorted.partition_point(|&t| t <= x)) as f64 / n as f64;
            let s = x.powf(gamma);
            (s * p, s * (p * (1.0 - p) / n as f64).sqrt())
        })
        .collect();
    let m = grid.len() as f64;
    let prefactor = Estimate::new(grid.iter().map(|g| g.0).sum::<f64>() / m, grid.iter().map(|g| g.1).sum::<f64>() / m);
    let composed = parts.map(|(eta, d1, d2)| eta * d1 * d2 * gamma_fn(1.0 + gamma));
    Ok(TrapTimeReport {
        fit,
        gamma,
        samples: n,
        censored_fraction,
        ratio: composed.map(|c| prefactor.value / c),
        prefactor,
        composed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{BiasLaw, OffspringLaw};
    use crate::tree::{Role, TrapTree, WeightedTree};

    fn reference() -> Arc<Model> {
        let p = OffspringLaw::from_pairs(&[(0, 0.25), (2, 0.75)]).unwrap();
        let bias = BiasLaw::atoms(vec![(2.0, 0.5), (3.0, 0.5)]).unwrap();
        Arc::new(Model::new(&p, bias).unwrap())
    }

    #[test]
    fn records_are_deterministic_and_consistent() {
        let m = reference();
        let plan = SnapshotPlan {
            snapshots: 12,
            traps_per_snapshot: 2,
            snapshot: SnapshotOptions { n: 30, k: 6, ..Default::default() },
            tau_reps: 3,
            ..Default::default()
        };
        let a = collect_snapshots(&m, plan, 9, Execution::Sequential).unwrap();
        let b = collect_snapshots(&m, plan, 9, Execution::Parallel(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 24);
        let first = crate::walk::late_trap_snapshot(&m, plan.snapshot, 9, 5).unwrap();
        assert_eq!(a[10].omega_ent, first.omega_ent());
        for r in &a {
            assert_eq!(r.c_f.len(), 6);
            assert_eq!(r.cut_weight.len(), (r.r as usize - 1).min(6));
            assert_eq!(r.tau.len() as u32 + r.censored, 3);
            assert!(r.tau.iter().all(|&t| t >= 1));
            assert!(r.fd_prob > 0.0 && r.fd_prob <= 1.0);
            assert!(r.d2_term(4, 0.76) >= 0.0);
        }
    }

    fn trivial_records(n: usize) -> Vec<SnapshotRecord> {
        let mut t = WeightedTree::new(Role::Backbone);
        t.add_child(TrapTree::HEAD, 2.0, Role::Bud);
        let trap = TrapTree::from_tree(t).unwrap();
        let pair = BackboneTreePair::on_line(2.0, 12, &trap);
        let rec = SnapshotRecord::from_pair(&pair, 12, BiasBounds { q: 2.0, big_q: 2.0 }).unwrap();
        (0..n)
            .map(|i| SnapshotRecord { snapshot: i as u64, omega_ent: 1.0 + i as f64 * 1e-3, ..rec.clone() })
            .collect()
    }

    #[test]
    fn trivial_traps_give_unit_eta() {
        let recs = trivial_records(MIN_ETA_SNAPSHOTS);
        assert_eq!(recs[0].p_de, 1.0);
        let eta = estimate_eta(&recs, &[0.95, 0.99]).unwrap();
        for r in &eta.rungs {
            assert_eq!(r.value, 1.0);
        }
        assert!(estimate_eta(&recs, &[0.5]).is_err());
        assert!(matches!(estimate_eta(&recs[..10], &[0.95]), Err(AnalysisError::TooFewSamples { .. })));
    }

    #[test]
    fn d2_needs_deep_traps() {
        let recs = trivial_records(MIN_D2_SNAPSHOTS);
        assert!(matches!(estimate_d2(&recs, 0.76, 0.75, &[4]), Err(AnalysisError::TooFewSamples { .. })));
        assert!(estimate_d2(&recs, 0.76, 0.75, &[3]).is_err());
    }

    #[test]
    fn bounded_holding_times_are_not_a_power_law() {
        let mut recs = trivial_records(MIN_TRAP_TIME_SNAPSHOTS);
        recs.iter_mut().for_each(|r| r.tau = vec![1]);
        let r = trap_time_tail(&recs, 0.76, 0.01, None);
        assert!(matches!(r, Err(AnalysisError::NotPowerLaw(_))), "{r:?}");
        recs.iter_mut().take(300).for_each(|r| r.censored = 1);
        assert!(matches!(trap_time_tail(&recs, 0.76, 0.01, None), Err(AnalysisError::ExcessCensoring { .. })));
    }
}
