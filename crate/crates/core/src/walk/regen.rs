use super::{TraceSummary, WalkError};

/// Default confirmation horizon, in steps.
pub const DEFAULT_HORIZON: u64 = 10_000;

const MIN_BLOCKS: usize = 10;

/// Online regeneration detector over the stream of backbone visits.
///
/// A backbone visit is a regeneration if every earlier backbone visit is
/// strictly shallower and every later one strictly deeper. Candidates are
/// kept on a stack of strictly increasing depths and dropped as soon as a
/// later visit fails to go deeper.
#[derive(Debug, Clone, Default)]
pub struct RegenerationTracker {
    stack: Vec<(u64, u32)>,
    max_depth: Option<u32>,
}

impl RegenerationTracker {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn visit(&mut self, time: u64, depth: u32) {
        while matches!(self.stack.last(), Some(&(_, d)) if d >= depth) {
            self.stack.pop();
        }
        if self.max_depth.map_or(true, |m| depth > m) {
            self.stack.push((time, depth));
            self.max_depth = Some(depth);
        }
    }

    /// Surviving candidates at least `horizon` steps before `end_time`, as
    /// `(time, depth)`.
    pub fn confirmed(&self, end_time: u64, horizon: u64) -> Vec<(u64, u32)> {
        self.stack.iter().copied().filter(|&(t, _)| end_time - t >= horizon).collect()
    }
}

/// Retrospective detector: `visits` are `(time, depth)` for every backbone
/// visit in time order. Returns the confirmed regeneration times.
pub fn detect_regenerations(visits: &[(u64, u32)], end_time: u64, horizon: u64) -> Vec<u64> {
    let n = visits.len();
    let mut suffix_min = vec![u32::MAX; n + 1];
    for i in (0..n).rev() {
        suffix_min[i] = suffix_min[i + 1].min(visits[i].1);
    }
    let mut prefix_max: Option<u32> = None;
    let mut out = Vec::new();
    for (i, &(t, d)) in visits.iter().enumerate() {
        let past_ok = prefix_max.map_or(true, |m| m < d);
        let future_ok = suffix_min[i + 1] > d;
        if past_ok && future_ok && end_time - t >= horizon {
            out.push(t);
        }
        prefix_max = Some(prefix_max.map_or(d, |m| m.max(d)));
    }
    out
}

/// Trap-entrance counts between regenerations and the two estimates of the
/// asymptotic number of trap entrances per unit of backbone depth.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiEstimate {
    /// Entrances strictly between consecutive confirmed regenerations.
    pub a_counts: Vec<u64>,
    /// Entrances before first reaching backbone depth `n`, divided by `n`.
    pub direct: f64,
    /// Mean depth gained per regeneration block.
    pub kappa: f64,
    pub mean_a: f64,
    /// `mean_a / kappa`.
    pub indirect: f64,
    pub n: u32,
}

/// Needs a trace that reached backbone depth `n` and has at least ten
/// confirmed regeneration blocks.
pub fn trap_counts(trace: &TraceSummary, n: u32) -> Result<PsiEstimate, WalkError> {
    let hit = trace
        .first_backbone_hit(n)
        .ok_or_else(|| WalkError::InvalidArgument(format!("trace never reached backbone depth {n}")))?;
    let chi = trace.entrances.iter().filter(|e| e.time < hit).count();
    let regs = &trace.regenerations;
    if regs.len() < MIN_BLOCKS + 1 {
        return Err(WalkError::InsufficientRegenerations {
            found: regs.len().saturating_sub(1),
            needed: MIN_BLOCKS,
        });
    }
    let mut a_counts = Vec::with_capacity(regs.len() - 1);
    let mut j = 0;
    let ents = &trace.entrances;
    for w in regs.windows(2) {
        while j < ents.len() && ents[j].time < w[0].0 {
            j += 1;
        }
        let start = j;
        while j < ents.len() && ents[j].time < w[1].0 {
            j += 1;
        }
        a_counts.push((j - start) as u64);
    }
    let blocks = a_counts.len() as f64;
    let kappa = f64::from(regs.last().expect("non-empty").1 - regs[0].1) / blocks;
    let mean_a = a_counts.iter().sum::<u64>() as f64 / blocks;
    Ok(PsiEstimate {
        direct: chi as f64 / f64::from(n),
        kappa,
        mean_a,
        indirect: mean_a / kappa,
        a_counts,
        n,
    })
}
