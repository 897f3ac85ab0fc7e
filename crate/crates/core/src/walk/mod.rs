//! Biased random walks on environments and on backbone-tree pairs, with
//! detection of trap entrances, holding times and regeneration times.

mod engine;
mod pair_walk;
mod regen;
mod snapshot;

pub use engine::{run_walk, Mode, Stop, TrapEntrance, TraceSummary, WalkOptions};
pub use pair_walk::{escape_time, simulate_trap_time, TrapTimeSampler, TrapVisit, DEFAULT_K_STOP};
pub use regen::{detect_regenerations, trap_counts, PsiEstimate, RegenerationTracker, DEFAULT_HORIZON};
pub use snapshot::{late_neighborhood, late_trap_snapshot, SnapshotOptions, MAX_SNAPSHOT_RADIUS};

use rand::Rng;
use thiserror::Error;

use crate::tree::{TreeError, VertexId, WeightedTree};

#[derive(Debug, Error, Clone)]
pub enum WalkError {
    #[error("step budget of {budget} exhausted before the stop condition")]
    StepBudgetExceeded { budget: u64, partial: Option<Box<TraceSummary>> },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("only {found} confirmed regeneration blocks; at least {needed} required")]
    InsufficientRegenerations { found: usize, needed: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One-step law from `v`: to the parent with weight 1 and to each child with
/// its edge bias, normalized. At the root only the children count.
pub fn transition_distribution(tree: &WeightedTree, v: VertexId) -> Vec<(VertexId, f64)> {
    let kids = tree.children(v);
    let sum = tree.child_bias_sum(v);
    match tree.parent(v) {
        Some(p) => {
            let z = 1.0 + sum;
            let mut out = Vec::with_capacity(kids.len() + 1);
            out.push((p, 1.0 / z));
            out.extend(kids.iter().map(|&c| (c, tree.bias_unchecked(c) / z)));
            out
        }
        None => kids.iter().map(|&c| (c, tree.bias_unchecked(c) / sum)).collect(),
    }
}

/// Samples one step of the walk from `v`. A root without children stays put.
#[inline]
pub(crate) fn step<R: Rng + ?Sized>(tree: &WeightedTree, v: VertexId, rng: &mut R) -> VertexId {
    let kids = tree.children(v);
    let sum = tree.child_bias_sum(v);
    let parent = tree.parent(v);
    let mut u = match parent {
        Some(p) => {
            let u = rng.gen::<f64>() * (1.0 + sum);
            if u < 1.0 || kids.is_empty() {
                return p;
            }
            u - 1.0
        }
        None => {
            if kids.is_empty() {
                return v;
            }
            rng.gen::<f64>() * sum
        }
    };
    for &c in kids {
        let b = tree.bias_unchecked(c);
        if u < b {
            return c;
        }
        u -= b;
    }
    *kids.last().expect("non-empty children")
}
