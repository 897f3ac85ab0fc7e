//! Exact hitting quantities on finite trees by two-pass elimination.
//!
//! For a harmonic (or Poisson) equation with pinned vertices, every free
//! vertex satisfies `x(v) = a_v + b_v * x(parent(v))` once its subtree has
//! been eliminated. A post-order pass computes `(a_v, b_v)`, a pre-order pass
//! fills in the values. Pinned vertices cut the tree and only the piece
//! holding the start is solved.

use thiserror::Error;

use crate::laws::BiasLaw;
use crate::tree::{renewal_decompose, BackboneTreePair, Role, TrapTree, VertexId, WeightedTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("no absorbing vertex is reachable from the start")]
    NoAbsorption,
    #[error("target and rival sets overlap at {0:?}")]
    Overlap(VertexId),
    #[error("value {value} outside (0, 1]")]
    Domain { value: f64 },
    #[error("radius {k} exceeds the materialized radius {radius}")]
    Radius { k: u32, radius: u32 },
}

/// What happens at backbone vertices whose children are not materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// They are leaves of the finite tree.
    Reflect,
    /// They join the rival set.
    AbsorbOuter,
}

/// Hit `target` before `rival`, starting from `start`.
#[derive(Debug, Clone)]
pub struct AbsorptionSpec<'a> {
    pub tree: &'a WeightedTree,
    pub start: VertexId,
    pub target: Vec<VertexId>,
    pub rival: Vec<VertexId>,
    pub boundary: Boundary,
}

/// Smallest and largest edge bias, `q` and `Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasBounds {
    pub q: f64,
    pub big_q: f64,
}

impl From<&BiasLaw> for BiasBounds {
    fn from(b: &BiasLaw) -> Self {
        Self { q: b.support_min(), big_q: b.support_max() }
    }
}

impl BiasBounds {
    pub fn p_esc_min(&self) -> f64 {
        (self.q - 1.0) / (self.big_q + self.q + 1.0)
    }

    pub fn p_de_min(&self) -> f64 {
        1.0 - 1.0 / self.q
    }

    pub fn c_f_max(&self) -> f64 {
        (self.big_q + self.q + 2.0) / (self.q - 1.0)
    }
}

/// Solves `x(v) = c(v) + sum_w P(v, w) x(w)` on the free vertices of the
/// component of `start`, with `x` given on pinned ones. `source` is the
/// constant term: 0 for hitting probabilities, 1 for expected hitting
/// times. Vertices outside the component come back as NaN.
fn solve(tree: &WeightedTree, pinned: &[Option<f64>], source: f64, start: VertexId) -> Result<Vec<f64>, ExactError> {
    let n = tree.len();
    let mut top = start;
    while let Some(p) = tree.parent(top) {
        if pinned[p.index()].is_some() {
            break;
        }
        top = p;
    }
    let mut live = vec![false; n];
    live[top.index()] = true;
    for i in top.index() + 1..n {
        let p = tree.parent(VertexId(i as u32)).expect("non-root").index();
        live[i] = live[p] && pinned[p].is_none();
    }
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    // `reaches[v]`: the subtree of `v` contains a pinned vertex.
    let mut reaches = vec![false; n];
    // Sums over children `c` of `beta_c * a_c` and `beta_c * b_c`.
    let mut acc_a = vec![0.0; n];
    let mut acc_b = vec![0.0; n];
    for i in (top.index()..n).rev() {
        if !live[i] {
            continue;
        }
        let v = VertexId(i as u32);
        let (ai, bi) = match (pinned[i], tree.parent(v)) {
            (Some(val), _) => {
                reaches[i] = true;
                (val, 0.0)
            }
            (None, None) => break,
            (None, Some(_)) => {
                let z = 1.0 + tree.child_bias_sum(v);
                let den = 1.0 - acc_b[i] / z;
                a[i] = (source + acc_a[i] / z) / den;
                // Without a pinned descendant the walk can only leave upward.
                b[i] = if reaches[i] { (1.0 / z) / den } else { 1.0 };
                (a[i], b[i])
            }
        };
        if v == top {
            break;
        }
        let p = tree.parent(v).expect("non-root").index();
        let w = tree.bias_unchecked(v);
        acc_a[p] += w * ai;
        acc_b[p] += w * bi;
        reaches[p] |= reaches[i];
    }
    let mut x = vec![f64::NAN; n];
    let t = top.index();
    x[t] = match (pinned[t], tree.parent(top)) {
        (Some(val), _) => val,
        (None, Some(p)) => a[t] + b[t] * pinned[p.index()].expect("component is cut by a pinned parent"),
        (None, None) => {
            if !reaches[t] {
                return Err(ExactError::NoAbsorption);
            }
            let z = tree.child_bias_sum(top);
            (source + acc_a[t] / z) / (1.0 - acc_b[t] / z)
        }
    };
    for i in t + 1..n {
        if !live[i] {
            continue;
        }
        x[i] = match pinned[i] {
            Some(val) => val,
            None => a[i] + b[i] * x[tree.parent(VertexId(i as u32)).expect("non-root").index()],
        };
    }
    Ok(x)
}

fn pins(spec: &AbsorptionSpec<'_>) -> Result<Vec<Option<f64>>, ExactError> {
    let mut pinned = vec![None; spec.tree.len()];
    for &v in &spec.target {
        pinned[v.index()] = Some(1.0);
    }
    for &v in &spec.rival {
        if pinned[v.index()].is_some() {
            return Err(ExactError::Overlap(v));
        }
        pinned[v.index()] = Some(0.0);
    }
    if spec.boundary == Boundary::AbsorbOuter {
        for v in spec.tree.vertices() {
            if spec.tree.role(v) == Role::Backbone && !spec.tree.is_expanded(v) && pinned[v.index()].is_none() {
                pinned[v.index()] = Some(0.0);
            }
        }
    }
    Ok(pinned)
}

/// Probability of hitting the target before the rival set. A start inside
/// either set gives 1 or 0.
pub fn hit_probability(spec: &AbsorptionSpec<'_>) -> Result<f64, ExactError> {
    let pinned = pins(spec)?;
    if let Some(val) = pinned[spec.start.index()] {
        return Ok(val);
    }
    let x = solve(spec.tree, &pinned, 0.0, spec.start)?;
    Ok(x[spec.start.index()].clamp(0.0, 1.0))
}

/// Hitting probabilities for every vertex in the component of the start
/// (NaN elsewhere).
pub fn hit_probabilities(spec: &AbsorptionSpec<'_>) -> Result<Vec<f64>, ExactError> {
    solve(spec.tree, &pins(spec)?, 0.0, spec.start)
}

/// Expected number of steps from `start` to the first visit of `targets`.
pub fn mean_hitting_time(tree: &WeightedTree, start: VertexId, targets: &[VertexId]) -> Result<f64, ExactError> {
    let mut pinned = vec![None; tree.len()];
    for &t in targets {
        pinned[t.index()] = Some(0.0);
    }
    if pinned[start.index()].is_some() {
        return Ok(0.0);
    }
    let x = solve(tree, &pinned, 1.0, start)?;
    Ok(x[start.index()])
}

/// Escape probability through the shell at distance `k + 1` from `ent`
/// before returning to `ent`, started at `head`, with its certified width
/// above the infinite-backbone value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Enclosed {
    pub value: f64,
    pub width: f64,
}

/// `k` must not exceed the pair's radius.
pub fn escape_probability_k(pair: &BackboneTreePair, k: u32, bounds: BiasBounds) -> Result<Enclosed, ExactError> {
    if k > pair.radius() {
        return Err(ExactError::Radius { k, radius: pair.radius() });
    }
    let tree = pair.tree();
    let shell: Vec<VertexId> = tree
        .vertices()
        .filter(|&v| tree.role(v) == Role::Backbone && tree.distance(v, pair.ent()) == k + 1)
        .collect();
    let spec = AbsorptionSpec {
        tree,
        start: pair.head(),
        target: shell,
        rival: vec![pair.ent()],
        boundary: Boundary::Reflect,
    };
    let value = hit_probability(&spec)?;
    Ok(Enclosed { value, width: 2.0 * bounds.q.powf(1.0 - f64::from(k) / 2.0) })
}

/// Probability of reaching `v_base` before `head`, started at `ent`.
pub fn deep_excursion_probability(trap: &TrapTree) -> f64 {
    if trap.v_base() == trap.ent() {
        return 1.0;
    }
    let spec = AbsorptionSpec {
        tree: trap.tree(),
        start: trap.ent(),
        target: vec![trap.v_base()],
        rival: vec![trap.head()],
        boundary: Boundary::Reflect,
    };
    hit_probability(&spec).expect("head is reachable on a finite trap")
}

/// The deep-excursion probability truncated at the `k`-th cutpoint of the
/// trap below `ent` when there are at least `k` of them, otherwise the full
/// one.
pub fn deep_excursion_probability_k(trap: &TrapTree, k: u32) -> f64 {
    let dec = renewal_decompose(trap.tree(), trap.ent());
    match dec.cutpoint(k as usize) {
        Some(c) if dec.r() > k as usize => {
            let spec = AbsorptionSpec {
                tree: trap.tree(),
                start: trap.ent(),
                target: vec![c],
                rival: vec![trap.head()],
                boundary: Boundary::Reflect,
            };
            hit_probability(&spec).expect("head is reachable on a finite trap")
        }
        _ => deep_excursion_probability(trap),
    }
}

/// `1/p_esc + 1/p_de - 1`.
pub fn correction_factor(p_esc: f64, p_de: f64) -> f64 {
    1.0 / p_esc + 1.0 / p_de - 1.0
}

/// `p_de / (1 - (1 - p_esc)(1 - p_de))`: probability that the walk reaches
/// `v_base` at some point before escaping for good.
pub fn fall_deep_probability(p_esc: f64, p_de: f64) -> Result<f64, ExactError> {
    for value in [p_esc, p_de] {
        if !(value > 0.0 && value <= 1.0) {
            return Err(ExactError::Domain { value });
        }
    }
    Ok(p_de / (1.0 - (1.0 - p_esc) * (1.0 - p_de)))
}

/// Truncated constants at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfRung {
    pub k: u32,
    pub p_esc_k: f64,
    pub esc_width: f64,
    pub p_de_k: f64,
    pub c_f_k: f64,
    /// Certified upper end for the infinite-radius correction factor.
    pub c_f_upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairConstants {
    pub k: u32,
    pub p_esc_k: f64,
    pub esc_width: f64,
    /// Exact on the finite trap.
    pub p_de: f64,
    pub p_de_k: f64,
    pub c_f_k: f64,
    pub c_f_upper: f64,
    /// Fall-deep probability from `p_esc_k` and `p_de`.
    pub fd_prob: f64,
    pub omega_ent: f64,
    /// Rungs `1..=k`; `c_f_upper` is a running minimum, so the enclosure
    /// never widens along the ladder.
    pub ladder: Vec<CfRung>,
}

impl PairConstants {
    /// `2 c_{f,k} omega_ent`, the leading-order mean trap time given a fall.
    pub fn expected_trap_time(&self) -> Enclosed {
        let value = 2.0 * self.c_f_k * self.omega_ent;
        Enclosed { value, width: 2.0 * (self.c_f_upper - self.c_f_k) * self.omega_ent }
    }
}

fn rung(pair: &BackboneTreePair, trap: &TrapTree, k: u32, bounds: BiasBounds) -> Result<CfRung, ExactError> {
    let esc = escape_probability_k(pair, k, bounds)?;
    let p_de_k = deep_excursion_probability_k(trap, k);
    let c_f_k = correction_factor(esc.value, p_de_k);
    let de_width = 2.0 * bounds.q.powf(-f64::from(k));
    let esc_low = (esc.value - esc.width).max(bounds.p_esc_min());
    let de_low = (p_de_k - de_width).max(bounds.p_de_min());
    let c_f_upper = correction_factor(esc_low, de_low).min(bounds.c_f_max()).max(c_f_k);
    Ok(CfRung { k, p_esc_k: esc.value, esc_width: esc.width, p_de_k, c_f_k, c_f_upper })
}

/// Escape, deep-excursion and correction constants of a pair at radius `k`,
/// with the ladder of truncations `1..=k`.
pub fn pair_constants(pair: &BackboneTreePair, k: u32, bounds: BiasBounds) -> Result<PairConstants, ExactError> {
    if k > pair.radius() {
        return Err(ExactError::Radius { k, radius: pair.radius() });
    }
    let trap = pair.trap();
    let mut ladder = Vec::with_capacity(k as usize);
    let mut upper = f64::INFINITY;
    for j in 1..=k.max(1) {
        let mut r = rung(pair, &trap, j.min(k), bounds)?;
        upper = upper.min(r.c_f_upper).max(r.c_f_k);
        r.c_f_upper = upper;
        ladder.push(r);
    }
    let last = *ladder.last().expect("non-empty ladder");
    let p_de = deep_excursion_probability(&trap);
    Ok(PairConstants {
        k,
        p_esc_k: last.p_esc_k,
        esc_width: last.esc_width,
        p_de,
        p_de_k: last.p_de_k,
        c_f_k: last.c_f_k,
        c_f_upper: last.c_f_upper,
        fd_prob: fall_deep_probability(last.p_esc_k, p_de)?,
        omega_ent: pair.omega_ent(),
        ladder,
    })
}

/// `c_{f,k}` alone.
pub fn correction_factor_k(pair: &BackboneTreePair, k: u32, bounds: BiasBounds) -> Result<f64, ExactError> {
    Ok(rung(pair, &pair.trap(), k, bounds)?.c_f_k)
}
