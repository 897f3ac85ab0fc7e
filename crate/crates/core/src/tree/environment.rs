use rand::seq::SliceRandom;
use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use super::{grow_branching, Role, TreeError, VertexId, WeightedTree, TRAP_LIMIT};
use crate::laws::Model;
use crate::rng::StreamRng;

const NO_OWNER: u32 = u32::MAX;

/// Infinite weighted tree conditioned on survival, grown on demand in
/// backbone/bud/trap form.
///
/// Backbone vertices are expanded the first time [`ensure_expanded`]
/// reaches them; a bud's trap is grown on its first expansion.
///
/// [`ensure_expanded`]: Environment::ensure_expanded
#[derive(Debug, Clone)]
pub struct Environment {
    tree: WeightedTree,
    /// Bud a trap-side vertex belongs to (the bud itself for a bud).
    owner: Vec<u32>,
    model: Arc<Model>,
    rng: StreamRng,
    trap_limit: usize,
}

/// Snapshot of a bud and the backbone around it.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub tree: WeightedTree,
    /// Copy of the bud; a leaf here.
    pub ent: VertexId,
    pub head: VertexId,
    /// Backbone vertices within distance `radius + 1` of `ent` are present.
    pub radius: u32,
}

impl Environment {
    pub fn new(model: Arc<Model>, rng: StreamRng) -> Self {
        let mut tree = WeightedTree::with_capacity(Role::Backbone, 1024);
        tree.set_expanded(tree.root(), false);
        Self { tree, owner: vec![NO_OWNER], model, rng, trap_limit: TRAP_LIMIT }
    }

    pub fn with_trap_limit(mut self, limit: usize) -> Self {
        self.trap_limit = limit;
        self
    }

    pub fn tree(&self) -> &WeightedTree {
        &self.tree
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn root(&self) -> VertexId {
        self.tree.root()
    }

    /// Trap entrance whose trap contains `v`, if `v` is off the backbone.
    #[inline]
    pub fn owner(&self, v: VertexId) -> Option<VertexId> {
        let o = self.owner[v.index()];
        (o != NO_OWNER).then_some(VertexId(o))
    }

    /// Materializes the children of `v` if that has not happened yet.
    #[inline]
    pub fn ensure_expanded(&mut self, v: VertexId) -> Result<(), TreeError> {
        if self.tree.is_expanded(v) {
            return Ok(());
        }
        match self.tree.role(v) {
            Role::Backbone => {
                self.materialize_children(v);
                Ok(())
            }
            _ => self.attach_trap(v),
        }
    }

    /// Draws backbone and bud children of a backbone vertex. Returns the
    /// numbers `(j, m)` of backbone and bud children created.
    pub fn materialize_children(&mut self, v: VertexId) -> (usize, usize) {
        debug_assert_eq!(self.tree.role(v), Role::Backbone);
        debug_assert!(!self.tree.is_expanded(v));
        let model = Arc::clone(&self.model);
        let (j, m) = model.harris.joint.sample(&mut self.rng);
        let mut roles: smallvec::SmallVec<[bool; 8]> = (0..j + m).map(|i| i < j).collect();
        roles.shuffle(&mut self.rng);
        for is_backbone in roles {
            let b = model.bias.sample(&mut self.rng);
            if is_backbone {
                let c = self.tree.add_child(v, b, Role::Backbone);
                self.tree.set_expanded(c, false);
                self.owner.push(NO_OWNER);
            } else {
                let c = self.tree.add_child(v, b, Role::Bud);
                self.tree.set_expanded(c, false);
                self.owner.push(c.0);
            }
        }
        self.tree.set_expanded(v, true);
        (j, m)
    }

    fn attach_trap(&mut self, bud: VertexId) -> Result<(), TreeError> {
        debug_assert_eq!(self.tree.role(bud), Role::Bud);
        let model = Arc::clone(&self.model);
        let before = self.tree.len();
        let limit = self.trap_limit.saturating_sub(1);
        grow_branching(&mut self.tree, bud, &model.harris.h, &model.bias, Role::Trap, &mut self.rng, limit)?;
        self.owner.resize(self.tree.len(), bud.0);
        debug_assert!(self.tree.len() >= before);
        Ok(())
    }

    /// `u` together with every backbone vertex within distance `k + 1` of it,
    /// rooted at the ancestor `k + 1` levels up (or the environment root if
    /// `u` is shallower). Backbone vertices within distance `k` of `u` are
    /// expanded first.
    pub fn backbone_neighborhood(&mut self, u: VertexId, k: u32) -> Neighborhood {
        assert_eq!(self.tree.role(u), Role::Bud, "neighborhoods are taken around buds");
        let reach = k + 1;
        let mut dist: HashMap<VertexId, u32> = HashMap::from([(u, 0)]);
        let mut queue = VecDeque::from([u]);
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            if d == reach {
                continue;
            }
            if v != u {
                self.materialize_if_needed(v);
            }
            let mut next: smallvec::SmallVec<[VertexId; 8]> = smallvec::SmallVec::new();
            if let Some(p) = self.tree.parent(v) {
                next.push(p);
            }
            if v != u {
                next.extend(self.tree.children(v).iter().copied());
            }
            for w in next {
                if self.tree.role(w) == Role::Backbone && !dist.contains_key(&w) {
                    dist.insert(w, d + 1);
                    queue.push_back(w);
                }
            }
        }

        let mut top = u;
        for _ in 0..reach {
            match self.tree.parent(top) {
                Some(p) => top = p,
                None => break,
            }
        }
        let mut out = WeightedTree::new(Role::Backbone);
        let mut ent = out.root();
        let mut stack = vec![(top, out.root())];
        while let Some((old, new)) = stack.pop() {
            let d = dist[&old];
            let keep_open = old != top && d == reach;
            out.set_expanded(new, !keep_open);
            let kids: Vec<VertexId> =
                self.tree.children(old).iter().copied().filter(|c| dist.contains_key(c)).collect();
            let mut created = Vec::with_capacity(kids.len());
            for c in kids {
                let role = if c == u { Role::Bud } else { Role::Backbone };
                let nc = out.add_child(new, self.tree.bias_unchecked(c), role);
                if c == u {
                    ent = nc;
                }
                created.push((c, nc));
            }
            stack.extend(created.into_iter().rev());
        }
        let head = out.parent(ent).expect("bud has a parent");
        Neighborhood { tree: out, ent, head, radius: k }
    }

    fn materialize_if_needed(&mut self, v: VertexId) {
        if self.tree.role(v) == Role::Backbone && !self.tree.is_expanded(v) {
            self.materialize_children(v);
        }
    }
}
