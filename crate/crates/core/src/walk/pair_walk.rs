use rand::Rng;
use std::collections::VecDeque;

use super::{step, WalkError};
use crate::tree::{BackboneGrowth, BackboneTreePair, Role, TrapTree, VertexId, WeightedTree};

/// Default escape distance from `head`, in backbone edges.
pub const DEFAULT_K_STOP: u32 = 30;

const DEFAULT_BUDGET: u64 = 1_000_000_000;

/// Outcome of one walk started at a trap entrance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrapVisit {
    /// Time indices spent in the trap, including the start at `ent`.
    pub tau: u64,
    /// `v_base` was visited.
    pub fell_deep: bool,
    pub steps: u64,
}

/// Repeated walks from `ent` on one pair until the walk stands on a backbone
/// vertex at distance `k_stop` from `head`. The backbone is grown past its
/// shell on demand and the growth is discarded after every walk.
#[derive(Debug, Clone)]
pub struct TrapTimeSampler<'a> {
    pair: &'a BackboneTreePair,
    growth: BackboneGrowth<'a>,
    k_stop: u32,
    budget: u64,
    work: WeightedTree,
    base_len: usize,
    dist: Vec<u32>,
    touched: Vec<VertexId>,
}

impl<'a> TrapTimeSampler<'a> {
    pub fn new(pair: &'a BackboneTreePair, growth: BackboneGrowth<'a>, k_stop: u32) -> Self {
        let work = pair.tree().clone();
        let dist = distances_from(&work, pair.head());
        Self {
            pair,
            growth,
            k_stop,
            budget: DEFAULT_BUDGET,
            base_len: work.len(),
            work,
            dist,
            touched: Vec::new(),
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<TrapVisit, WalkError> {
        let result = self.run(rng);
        self.reset();
        result
    }

    fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<TrapVisit, WalkError> {
        let ent = self.pair.ent();
        let v_base = self.pair.v_base();
        let mut v = ent;
        let mut tau = 1u64;
        let mut fell_deep = v == v_base;
        let mut steps = 0u64;
        loop {
            let on_backbone = self.work.role(v) == Role::Backbone;
            if on_backbone {
                if self.dist[v.index()] >= self.k_stop {
                    return Ok(TrapVisit { tau, fell_deep, steps });
                }
                if !self.work.is_expanded(v) {
                    self.grow(v, rng);
                }
            }
            if steps == self.budget {
                return Err(WalkError::StepBudgetExceeded { budget: self.budget, partial: None });
            }
            v = step(&self.work, v, rng);
            steps += 1;
            if self.work.role(v) != Role::Backbone {
                tau += 1;
                fell_deep |= v == v_base;
            }
        }
    }

    fn grow<R: Rng + ?Sized>(&mut self, v: VertexId, rng: &mut R) {
        let d = self.dist[v.index()] + 1;
        match self.growth {
            BackboneGrowth::Law { joint, bias } => {
                for _ in 0..joint.sample_backbone_only(rng) {
                    let c = self.work.add_child(v, bias.sample(rng), Role::Backbone);
                    self.work.set_expanded(c, false);
                    self.dist.push(d);
                }
            }
            BackboneGrowth::Line { bias } => {
                let c = self.work.add_child(v, bias, Role::Backbone);
                self.work.set_expanded(c, false);
                self.dist.push(d);
            }
            BackboneGrowth::Closed => return,
        }
        self.work.set_expanded(v, true);
        if v.index() < self.base_len {
            self.touched.push(v);
        }
    }

    fn reset(&mut self) {
        if self.work.len() > self.base_len {
            self.work.truncate(self.base_len, &self.touched);
            self.dist.truncate(self.base_len);
        }
        for &v in &self.touched {
            self.work.set_expanded(v, false);
        }
        self.touched.clear();
    }
}

fn distances_from(tree: &WeightedTree, source: VertexId) -> Vec<u32> {
    let mut dist = vec![u32::MAX; tree.len()];
    dist[source.index()] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v.index()] + 1;
        let parent = tree.parent(v);
        for &w in parent.iter().chain(tree.children(v)) {
            if dist[w.index()] == u32::MAX {
                dist[w.index()] = d;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// One walk from `ent` on `pair`; see [`TrapTimeSampler`].
pub fn simulate_trap_time<R: Rng + ?Sized>(
    pair: &BackboneTreePair,
    growth: BackboneGrowth<'_>,
    k_stop: u32,
    rng: &mut R,
) -> Result<TrapVisit, WalkError> {
    TrapTimeSampler::new(pair, growth, k_stop).sample(rng)
}

/// Steps taken by the walk from `ent` to first reach `head`.
pub fn escape_time<R: Rng + ?Sized>(trap: &TrapTree, rng: &mut R) -> u64 {
    let tree = trap.tree();
    let mut v = trap.ent();
    let mut t = 0u64;
    while v != trap.head() {
        v = step(tree, v, rng);
        t += 1;
    }
    t
}
