//! Offspring and edge-bias laws, extinction probability, the Harris
//! backbone/trap transform and the sub-ballistic exponent solver.

use rand::Rng;
use thiserror::Error;

/// Largest supported offspring count.
pub const MAX_OFFSPRING: usize = 64;

const SUM_TOL: f64 = 1e-12;
const FIXED_POINT_TOL: f64 = 1e-12;
const GAMMA_TOL: f64 = 1e-10;
/// Upper end of the search bracket for the exponent.
pub const GAMMA_MAX: f64 = 64.0;
const LATTICE_TOL: f64 = 1e-9;
const LATTICE_MAX_DENOM: i64 = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("offspring law: {0}")]
    InvalidOffspring(String),
    #[error("bias law: {0}")]
    InvalidBias(String),
    #[error("argument {value} outside the domain [0, 1]")]
    Domain { value: f64 },
    #[error("offspring law is not supercritical (mean {mean})")]
    NotSupercritical { mean: f64 },
    #[error("no exponent root: {0}")]
    NoRoot(String),
}

/// Finite-support reproduction law `p_0 .. p_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    probs: Vec<f64>,
}

impl OffspringLaw {
    pub fn new(mut probs: Vec<f64>) -> Result<Self, LawError> {
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.is_empty() {
            return Err(LawError::InvalidOffspring("empty probability vector".into()));
        }
        if probs.len() > MAX_OFFSPRING + 1 {
            return Err(LawError::InvalidOffspring(format!(
                "support exceeds {MAX_OFFSPRING} children"
            )));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(LawError::InvalidOffspring(format!("p_{i} = {p} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(LawError::InvalidOffspring(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs })
    }

    /// Builds a law from `(count, probability)` pairs.
    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self, LawError> {
        let len = pairs.iter().map(|(k, _)| k + 1).max().unwrap_or(0);
        if len > MAX_OFFSPRING + 1 {
            return Err(LawError::InvalidOffspring(format!(
                "support exceeds {MAX_OFFSPRING} children"
            )));
        }
        let mut probs = vec![0.0; len];
        for &(k, p) in pairs {
            probs[k] += p;
        }
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn max_offspring(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    /// Generating function `f(z) = sum p_i z^i`.
    pub fn pgf(&self, z: f64) -> Result<f64, LawError> {
        check_unit(z)?;
        Ok(self.probs.iter().rev().fold(0.0, |acc, p| acc * z + p))
    }

    /// Derivative `f'(z)`.
    pub fn pgf_derivative(&self, z: f64) -> Result<f64, LawError> {
        check_unit(z)?;
        Ok(self
            .probs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, p)| acc * z + k as f64 * p))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u: f64 = rng.gen();
        for (k, p) in self.probs.iter().enumerate() {
            if u < *p {
                return k;
            }
            u -= p;
        }
        // round-off: fall back to the largest supported count
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

fn check_unit(z: f64) -> Result<(), LawError> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(LawError::Domain { value: z })
    }
}

/// Result of the extinction fixed-point search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extinction {
    pub q_ext: f64,
    /// `p_0 = 0`: the tree survives surely and has no traps.
    pub leafless: bool,
}

/// Smallest fixed point of the generating function in `[0, 1)`.
pub fn extinction_probability(law: &OffspringLaw) -> Result<Extinction, LawError> {
    let mean = law.mean();
    if mean <= 1.0 {
        return Err(LawError::NotSupercritical { mean });
    }
    if law.prob(0) == 0.0 {
        return Ok(Extinction { q_ext: 0.0, leafless: true });
    }
    let gap = |z: f64| law.pgf(z).expect("z in [0,1]") - z;
    // f(z) - z is convex, positive at 0 and negative just below 1.
    let mut delta = 0.5;
    while gap(1.0 - delta) >= 0.0 {
        delta *= 0.5;
        if delta < 1e-15 {
            return Err(LawError::NotSupercritical { mean });
        }
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0 - delta);
    while hi - lo > FIXED_POINT_TOL * 1e-3 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Extinction { q_ext: 0.5 * (lo + hi), leafless: false })
}

/// Joint law of (backbone children, bud children) at a backbone vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneJointLaw {
    /// `(j, m, probability)` with `j >= 1`, in increasing `(j + m, j)` order.
    entries: Vec<(usize, usize, f64)>,
    /// Marginal of `j`, indexed by `j`.
    backbone_marginal: Vec<f64>,
}

impl BackboneJointLaw {
    fn new(law: &OffspringLaw, q_ext: f64) -> Self {
        let mut entries = Vec::new();
        let mut backbone_marginal = vec![0.0; law.max_offspring() + 1];
        for n in 1..=law.max_offspring() {
            let pn = law.prob(n);
            if pn == 0.0 {
                continue;
            }
            for j in 1..=n {
                let m = n - j;
                let p = pn * binomial(n, j) * (1.0 - q_ext).powi(j as i32) * q_ext.powi(m as i32)
                    / (1.0 - q_ext);
                if p > 0.0 {
                    entries.push((j, m, p));
                    backbone_marginal[j] += p;
                }
            }
        }
        Self { entries, backbone_marginal }
    }

    pub fn prob(&self, j: usize, m: usize) -> f64 {
        self.entries
            .iter()
            .find(|(a, b, _)| *a == j && *b == m)
            .map_or(0.0, |e| e.2)
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    /// Law of the number of backbone children alone.
    pub fn backbone_marginal(&self) -> &[f64] {
        &self.backbone_marginal
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let mut u: f64 = rng.gen::<f64>() * self.total();
        for &(j, m, p) in &self.entries {
            if u < p {
                return (j, m);
            }
            u -= p;
        }
        let last = self.entries.last().expect("non-empty joint law");
        (last.0, last.1)
    }

    pub fn sample_backbone_only<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total: f64 = self.backbone_marginal.iter().sum();
        let mut u: f64 = rng.gen::<f64>() * total;
        for (j, p) in self.backbone_marginal.iter().enumerate() {
            if u < *p {
                return j;
            }
            u -= p;
        }
        self.backbone_marginal.iter().rposition(|p| *p > 0.0).unwrap_or(1)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Laws of the Harris decomposition of a supercritical law.
#[derive(Debug, Clone, PartialEq)]
pub struct HarrisLaws {
    pub offspring: OffspringLaw,
    /// Subcritical trap offspring law.
    pub h: OffspringLaw,
    pub joint: BackboneJointLaw,
    pub q_ext: f64,
    /// Mean of `h`, equal to `f'(q_ext)`.
    pub m_h: f64,
    pub leafless: bool,
}

pub fn harris_transform(law: &OffspringLaw) -> Result<HarrisLaws, LawError> {
    let ext = extinction_probability(law)?;
    let q = ext.q_ext;
    let h = if ext.leafless {
        // Limit q -> 0 of p_k q^{k-1}; only relevant if a trap were ever grown.
        let p1 = law.prob(1);
        OffspringLaw::new(vec![1.0 - p1, p1])?
    } else {
        let mut hk: Vec<f64> = (0..=law.max_offspring())
            .map(|k| law.prob(k) * q.powi(k as i32 - 1))
            .collect();
        let total: f64 = hk.iter().sum();
        debug_assert!((total - 1.0).abs() < 1e-10, "h sums to {total}");
        hk.iter_mut().for_each(|p| *p /= total);
        OffspringLaw::new(hk)?
    };
    let m_h = law.pgf_derivative(q)?;
    if !ext.leafless && m_h >= 1.0 {
        return Err(LawError::InvalidOffspring(format!(
            "trap law is not subcritical (m_h = {m_h})"
        )));
    }
    Ok(HarrisLaws {
        offspring: law.clone(),
        h,
        joint: BackboneJointLaw::new(law, q),
        q_ext: q,
        m_h,
        leafless: ext.leafless,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum BiasKind {
    Atoms(Vec<(f64, f64)>),
    Uniform { lo: f64, hi: f64 },
}

/// Edge-bias law supported in `[q, Q]` with `q > 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasLaw {
    kind: BiasKind,
    min: f64,
    max: f64,
    lattice: bool,
}

impl BiasLaw {
    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self, LawError> {
        if atoms.is_empty() {
            return Err(LawError::InvalidBias("no atoms".into()));
        }
        for &(v, p) in &atoms {
            if !(v.is_finite() && v > 1.0) {
                return Err(LawError::InvalidBias(format!("atom value {v} must exceed 1")));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(LawError::InvalidBias(format!("atom probability {p} is invalid")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(LawError::InvalidBias(format!("atom probabilities sum to {total}")));
        }
        let support: Vec<f64> = atoms.iter().filter(|a| a.1 > 0.0).map(|a| a.0).collect();
        let min = support.iter().copied().fold(f64::INFINITY, f64::min);
        let max = support.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lattice = is_log_lattice(&support);
        Ok(Self { kind: BiasKind::Atoms(atoms), min, max, lattice })
    }

    pub fn point(value: f64) -> Result<Self, LawError> {
        Self::atoms(vec![(value, 1.0)])
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self, LawError> {
        if !(lo.is_finite() && hi.is_finite() && lo > 1.0 && hi > lo) {
            return Err(LawError::InvalidBias(format!(
                "uniform bounds ({lo}, {hi}) need 1 < lo < hi"
            )));
        }
        Ok(Self { kind: BiasKind::Uniform { lo, hi }, min: lo, max: hi, lattice: false })
    }

    pub fn kind(&self) -> &BiasKind {
        &self.kind
    }

    /// `q`, the smallest bias.
    pub fn support_min(&self) -> f64 {
        self.min
    }

    /// `Q`, the largest bias.
    pub fn support_max(&self) -> f64 {
        self.max
    }

    pub fn is_lattice(&self) -> bool {
        self.lattice
    }

    /// `s -> integral of y^s`.
    pub fn moment(&self, s: f64) -> f64 {
        match &self.kind {
            BiasKind::Atoms(atoms) => atoms.iter().map(|(v, p)| p * v.powf(s)).sum(),
            BiasKind::Uniform { lo, hi } => {
                (hi.powf(s + 1.0) - lo.powf(s + 1.0)) / ((s + 1.0) * (hi - lo))
            }
        }
    }

    /// `integral of y^s log y`, the derivative of [`moment`](Self::moment).
    pub fn log_moment(&self, s: f64) -> f64 {
        match &self.kind {
            BiasKind::Atoms(atoms) => atoms.iter().map(|(v, p)| p * v.powf(s) * v.ln()).sum(),
            BiasKind::Uniform { lo, hi } => {
                let a = s + 1.0;
                let prim = |y: f64| y.powf(a) * (y.ln() / a - 1.0 / (a * a));
                (prim(*hi) - prim(*lo)) / (hi - lo)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            BiasKind::Atoms(atoms) => {
                let mut u: f64 = rng.gen();
                for &(v, p) in atoms {
                    if u < p {
                        return v;
                    }
                    u -= p;
                }
                self.max
            }
            BiasKind::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
        }
    }

    /// Multiplies every atom (or both bounds) by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, LawError> {
        match &self.kind {
            BiasKind::Atoms(atoms) => {
                Self::atoms(atoms.iter().map(|(v, p)| (v * factor, *p)).collect())
            }
            BiasKind::Uniform { lo, hi } => Self::uniform(lo * factor, hi * factor),
        }
    }
}

/// True iff all `log v` are integer multiples of one real number.
fn is_log_lattice(values: &[f64]) -> bool {
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    logs.iter().enumerate().all(|(i, a)| {
        logs[i + 1..].iter().all(|b| rational_approx(a / b, LATTICE_MAX_DENOM, LATTICE_TOL))
    })
}

/// Is `x` within `tol` of a rational with denominator at most `max_denom`?
fn rational_approx(x: f64, max_denom: i64, tol: f64) -> bool {
    // continued-fraction convergents
    let (mut h0, mut h1) = (0_i64, 1_i64);
    let (mut k0, mut k1) = (1_i64, 0_i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i64;
        let h2 = ai.saturating_mul(h1).saturating_add(h0);
        let k2 = ai.saturating_mul(k1).saturating_add(k0);
        if k2 > max_denom || k2 <= 0 {
            return false;
        }
        if (x - h2 as f64 / k2 as f64).abs() <= tol * x.abs().max(1.0) {
            return true;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-15 {
            return false;
        }
        r = 1.0 / frac;
    }
    false
}

/// Solution of `moment(gamma) = 1 / f'(q_ext)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSolution {
    pub gamma: f64,
    pub m_h: f64,
    pub q_ext: f64,
    /// `gamma < 1`: displacement grows like `n^gamma`.
    pub sub_ballistic: bool,
}

pub fn solve_gamma(law: &OffspringLaw, bias: &BiasLaw) -> Result<GammaSolution, LawError> {
    let harris = harris_transform(law)?;
    solve_gamma_for_mean(harris.m_h, bias).map(|g| GammaSolution { q_ext: harris.q_ext, ..g })
}

/// Exponent for a trap law of mean `m_h` directly.
pub fn solve_gamma_for_mean(m_h: f64, bias: &BiasLaw) -> Result<GammaSolution, LawError> {
    if !(m_h > 0.0) {
        return Err(LawError::NoRoot(format!("trap mean {m_h} has no finite exponent")));
    }
    let target = 1.0 / m_h;
    if bias.moment(0.0) >= target {
        return Err(LawError::NoRoot(format!("target 1/m_h = {target} is not above 1")));
    }
    if bias.moment(GAMMA_MAX) < target {
        return Err(LawError::NoRoot(format!("no root below {GAMMA_MAX}")));
    }
    let (mut lo, mut hi) = (0.0_f64, GAMMA_MAX);
    while hi - lo > GAMMA_TOL * 1e-3 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if bias.moment(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = 0.5 * (lo + hi);
    Ok(GammaSolution { gamma, m_h, q_ext: f64::NAN, sub_ballistic: gamma < 1.0 })
}

/// Offspring law, its Harris transform and the edge-bias law: everything
/// needed to grow an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub harris: HarrisLaws,
    pub bias: BiasLaw,
}

impl Model {
    pub fn new(offspring: &OffspringLaw, bias: BiasLaw) -> Result<Self, LawError> {
        Ok(Self { harris: harris_transform(offspring)?, bias })
    }

    pub fn offspring(&self) -> &OffspringLaw {
        &self.harris.offspring
    }

    pub fn gamma(&self) -> Result<GammaSolution, LawError> {
        solve_gamma_for_mean(self.harris.m_h, &self.bias)
            .map(|g| GammaSolution { q_ext: self.harris.q_ext, ..g })
    }
}
