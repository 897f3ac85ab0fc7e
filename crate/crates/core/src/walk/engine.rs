use std::collections::HashMap;

use super::regen::{RegenerationTracker, DEFAULT_HORIZON};
use super::{step, WalkError};
use crate::rng::StreamRng;
use crate::tree::{Environment, Role, VertexId};

/// How much of the environment the walk materializes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Traps are grown and walked through; all times are real.
    Full,
    /// A visit to a trap entrance is followed at once by the return to its
    /// parent. Spatial quantities (entrance order, regeneration structure,
    /// depths) keep their law; times count backbone and entrance visits only.
    Collapsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// First visit to a backbone vertex at this depth.
    BackboneDistance(u32),
    /// First visit to any vertex at this depth.
    Distance(u32),
    /// Arrival at this many distinct trap entrances.
    TrapEntrances(usize),
    /// Run until the step budget is used up.
    Budget,
}

#[derive(Debug, Clone)]
pub struct WalkOptions {
    pub stop: Stop,
    pub budget: u64,
    pub mode: Mode,
    /// Regeneration candidates this close to the end stay unconfirmed.
    pub horizon: u64,
    /// Times at which the running maximum depth is recorded, increasing.
    pub checkpoints: Vec<u64>,
}

impl WalkOptions {
    pub fn new(stop: Stop, budget: u64) -> Self {
        Self { stop, budget, mode: Mode::Full, horizon: DEFAULT_HORIZON, checkpoints: Vec::new() }
    }

    pub fn mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn checkpoints(mut self, checkpoints: Vec<u64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrapEntrance {
    /// 0-based order of first arrival.
    pub index: usize,
    pub vertex: VertexId,
    pub time: u64,
    pub depth: u32,
}

/// Everything recorded along one walk. Time indices run over `0..=time`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub time: u64,
    /// The stop condition was met.
    pub complete: bool,
    pub mode: Mode,
    pub final_vertex: VertexId,
    /// Entry `d` is the first time at depth `d`.
    pub first_hit: Vec<u64>,
    /// Entry `d` is the first time at a backbone vertex of depth `d`.
    pub first_backbone_hit: Vec<u64>,
    pub entrances: Vec<TrapEntrance>,
    /// Time indices spent in each entered trap (entrance included). Empty in
    /// collapsed mode.
    pub holding: Vec<u64>,
    /// The walk ended inside the last entered trap, so its holding time is
    /// cut short.
    pub censored_last: bool,
    /// Time indices spent on the backbone.
    pub backbone_time: u64,
    /// Confirmed regenerations as `(time, depth)`.
    pub regenerations: Vec<(u64, u32)>,
    /// `(checkpoint time, max depth so far)`.
    pub checkpoint_max: Vec<(u64, u32)>,
}

impl TraceSummary {
    pub fn first_hit(&self, n: u32) -> Option<u64> {
        self.first_hit.get(n as usize).copied()
    }

    pub fn first_backbone_hit(&self, n: u32) -> Option<u64> {
        self.first_backbone_hit.get(n as usize).copied()
    }

    pub fn regeneration_times(&self) -> Vec<u64> {
        self.regenerations.iter().map(|r| r.0).collect()
    }

    pub fn max_depth(&self) -> u32 {
        self.first_hit.len().saturating_sub(1) as u32
    }
}

/// Event detection fed one arrival at a time.
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    mode: Mode,
    first_hit: Vec<u64>,
    first_backbone_hit: Vec<u64>,
    entrances: Vec<TrapEntrance>,
    entered: HashMap<VertexId, usize>,
    holding: Vec<u64>,
    current_trap: Option<(VertexId, usize)>,
    backbone_time: u64,
    tracker: RegenerationTracker,
    checkpoints: Vec<u64>,
    checkpoint_max: Vec<(u64, u32)>,
}

impl TraceRecorder {
    pub fn new(mode: Mode, checkpoints: Vec<u64>) -> Self {
        Self {
            mode,
            first_hit: Vec::new(),
            first_backbone_hit: Vec::new(),
            entrances: Vec::new(),
            entered: HashMap::new(),
            holding: Vec::new(),
            current_trap: None,
            backbone_time: 0,
            tracker: RegenerationTracker::new(),
            checkpoints,
            checkpoint_max: Vec::new(),
        }
    }

    /// Records the walk standing at depth `depth` at time `t`. `owner` is the trap
    /// entrance whose trap contains the current vertex. Returns whether this is the first
    /// arrival at a trap entrance.
    #[inline]
    pub fn arrive(&mut self, t: u64, depth: u32, role: Role, owner: Option<VertexId>) -> bool {
        if depth as usize == self.first_hit.len() {
            self.first_hit.push(t);
        }
        let mut new_entrance = false;
        match role {
            Role::Backbone => {
                self.backbone_time += 1;
                self.current_trap = None;
                if depth as usize == self.first_backbone_hit.len() {
                    self.first_backbone_hit.push(t);
                }
                self.tracker.visit(t, depth);
            }
            Role::Bud | Role::Trap => {
                let bud = owner.expect("trap-side vertex has an owner");
                let idx = match self.current_trap {
                    Some((b, i)) if b == bud => i,
                    _ => {
                        let next = self.entrances.len();
                        let i = *self.entered.entry(bud).or_insert(next);
                        if i == next {
                            self.entrances.push(TrapEntrance { index: i, vertex: bud, time: t, depth });
                            if self.mode == Mode::Full {
                                self.holding.push(0);
                            }
                            new_entrance = true;
                        }
                        self.current_trap = Some((bud, i));
                        i
                    }
                };
                if self.mode == Mode::Full {
                    self.holding[idx] += 1;
                }
            }
        }
        while self.checkpoint_max.len() < self.checkpoints.len() && self.checkpoints[self.checkpoint_max.len()] == t {
            let c = self.checkpoints[self.checkpoint_max.len()];
            self.checkpoint_max.push((c, self.first_hit.len() as u32 - 1));
        }
        new_entrance
    }

    pub fn entrances(&self) -> usize {
        self.entrances.len()
    }

    pub fn finish(self, time: u64, final_vertex: VertexId, complete: bool, horizon: u64) -> TraceSummary {
        let censored_last = self.mode == Mode::Full && self.current_trap.is_some();
        TraceSummary {
            time,
            complete,
            mode: self.mode,
            final_vertex,
            regenerations: self.tracker.confirmed(time, horizon),
            first_hit: self.first_hit,
            first_backbone_hit: self.first_backbone_hit,
            entrances: self.entrances,
            holding: self.holding,
            censored_last,
            backbone_time: self.backbone_time,
            checkpoint_max: self.checkpoint_max,
        }
    }
}

/// Runs the walk from the root of `env` until `opts.stop` holds.
pub fn run_walk(env: &mut Environment, opts: &WalkOptions, rng: &mut StreamRng) -> Result<TraceSummary, WalkError> {
    let mut rec = TraceRecorder::new(opts.mode, opts.checkpoints.clone());
    let mut v = env.root();
    let mut t = 0u64;
    env.ensure_expanded(v)?;
    rec.arrive(0, 0, Role::Backbone, None);
    let done = |rec: &TraceRecorder, v: VertexId, env: &Environment| -> bool {
        let tree = env.tree();
        match opts.stop {
            Stop::BackboneDistance(n) => tree.depth(v) == n && tree.role(v) == Role::Backbone,
            Stop::Distance(n) => tree.depth(v) == n,
            Stop::TrapEntrances(n) => rec.entrances() >= n,
            Stop::Budget => false,
        }
    };
    let mut complete = done(&rec, v, env);
    while !complete {
        if t == opts.budget {
            break;
        }
        v = step(env.tree(), v, rng);
        t += 1;
        let role = env.tree().role(v);
        match role {
            Role::Backbone => env.ensure_expanded(v)?,
            Role::Bud if opts.mode == Mode::Full => env.ensure_expanded(v)?,
            _ => {}
        }
        let depth = env.tree().depth(v);
        rec.arrive(t, depth, role, env.owner(v));
        complete = done(&rec, v, env);
    }
    let trace = rec.finish(t, v, complete || opts.stop == Stop::Budget, opts.horizon);
    if complete || opts.stop == Stop::Budget {
        Ok(trace)
    } else {
        Err(WalkError::StepBudgetExceeded { budget: opts.budget, partial: Some(Box::new(trace)) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::WeightedTree;

    /// Trap entrance owning `v` in a static tree: the nearest `Bud` ancestor.
    fn static_owner(tree: &WeightedTree, mut v: VertexId) -> Option<VertexId> {
        loop {
            match tree.role(v) {
                Role::Backbone => return None,
                Role::Bud => return Some(v),
                Role::Trap => v = tree.parent(v)?,
            }
        }
    }
    use crate::laws::{BiasLaw, Model, OffspringLaw};
    use crate::rng::{substream, Purpose};
    use std::sync::Arc;

    fn model(p: &[(usize, f64)]) -> Arc<Model> {
        let law = OffspringLaw::from_pairs(p).unwrap();
        let bias = BiasLaw::atoms(vec![(2.0, 0.5), (3.0, 0.5)]).unwrap();
        Arc::new(Model::new(&law, bias).unwrap())
    }

    fn walk(m: &Arc<Model>, r: u64, opts: &WalkOptions) -> Result<TraceSummary, WalkError> {
        let mut env = Environment::new(m.clone(), substream(7, Purpose::Environment, r));
        run_walk(&mut env, opts, &mut substream(7, Purpose::Walk, r))
    }

    #[test]
    fn leafless_tree_has_no_traps() {
        let m = model(&[(1, 0.3), (2, 0.7)]);
        for r in 0..20 {
            let tr = walk(&m, r, &WalkOptions::new(Stop::BackboneDistance(8), 100_000)).unwrap();
            assert_eq!(tr.first_hit(8), tr.first_backbone_hit(8));
            assert!(tr.entrances.is_empty());
        }
    }

    #[test]
    fn zero_budget() {
        let m = model(&[(0, 0.25), (2, 0.75)]);
        let tr = walk(&m, 0, &WalkOptions::new(Stop::Budget, 0)).unwrap();
        assert_eq!(tr.time, 0);
        assert!(tr.entrances.is_empty());
        let err = walk(&m, 0, &WalkOptions::new(Stop::Distance(5), 0)).unwrap_err();
        match err {
            WalkError::StepBudgetExceeded { partial, .. } => assert!(!partial.unwrap().complete),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hitting_order_and_time_accounting() {
        let m = model(&[(0, 0.25), (2, 0.75)]);
        for r in 0..50 {
            let tr = walk(&m, r, &WalkOptions::new(Stop::BackboneDistance(30), 10_000_000)).unwrap();
            assert!(tr.first_hit(30).unwrap() <= tr.first_backbone_hit(30).unwrap());
            let trap_time: u64 = tr.holding.iter().sum();
            assert_eq!(trap_time + tr.backbone_time, tr.time + 1);
            assert!(!tr.censored_last);
            for w in tr.entrances.windows(2) {
                assert!(w[0].time < w[1].time);
                assert_ne!(w[0].vertex, w[1].vertex);
            }
        }
    }

    #[test]
    fn collapsed_mode_preserves_entrance_sequence_law() {
        // Mean number of distinct entrances before backbone depth 40, both modes.
        let m = model(&[(0, 0.25), (2, 0.75)]);
        let stats = |mode: Mode| {
            let xs: Vec<f64> = (0..400)
                .map(|r| {
                    let o = WalkOptions::new(Stop::BackboneDistance(40), 100_000_000).mode(mode);
                    walk(&m, r + 1000 * (mode == Mode::Full) as u64, &o).unwrap().entrances.len() as f64
                })
                .collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            (mean, var / xs.len() as f64)
        };
        let (a, va) = stats(Mode::Full);
        let (b, vb) = stats(Mode::Collapsed);
        assert!((a - b).abs() < 4.0 * (va + vb).sqrt(), "{a} vs {b}");
    }

    #[test]
    fn handcrafted_entrance_fixture() {
        // root -> x (backbone) with buds b1, b2 and a trap child under b1.
        let mut t = WeightedTree::new(Role::Backbone);
        let x = t.add_child(t.root(), 2.0, Role::Backbone);
        let b1 = t.add_child(x, 2.0, Role::Bud);
        let b2 = t.add_child(x, 3.0, Role::Bud);
        let c = t.add_child(b1, 2.0, Role::Trap);
        let path = [t.root(), x, b1, c, b1, x, b1, x, b2, x];
        let mut rec = TraceRecorder::new(Mode::Full, vec![]);
        for (i, &v) in path.iter().enumerate() {
            rec.arrive(i as u64, t.depth(v), t.role(v), static_owner(&t, v));
        }
        let tr = rec.finish(9, x, true, 0);
        assert_eq!(tr.entrances.len(), 2);
        assert_eq!((tr.entrances[0].vertex, tr.entrances[0].time), (b1, 2));
        assert_eq!((tr.entrances[1].vertex, tr.entrances[1].time), (b2, 8));
        assert_eq!(tr.holding, vec![4, 1]);
        assert_eq!(tr.backbone_time, 5);
    }
}
