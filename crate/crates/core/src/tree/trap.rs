use rand::Rng;
use std::collections::VecDeque;

use super::{Role, TreeError, VertexId, WeightedTree};
use crate::laws::{BiasLaw, OffspringLaw};

/// Largest trap `sample_trap` will grow.
pub const TRAP_LIMIT: usize = 100_000_000;

/// Finite single-entry tree: `head` (the root) has exactly one child `ent`.
#[derive(Debug, Clone)]
pub struct TrapTree {
    tree: WeightedTree,
    v_base: VertexId,
    omega_ent: f64,
    depth: u32,
}

impl TrapTree {
    pub const HEAD: VertexId = VertexId(0);
    pub const ENT: VertexId = VertexId(1);

    pub fn from_tree(tree: WeightedTree) -> Result<Self, TreeError> {
        tree.validate()?;
        if tree.children(Self::HEAD) != [Self::ENT] {
            return Err(TreeError::Invalid("head must have exactly one child".into()));
        }
        let (depth, v_base) = depth_and_base(&tree, Self::ENT);
        let omega_ent = tree.weight(Self::ENT);
        Ok(Self { tree, v_base, omega_ent, depth })
    }

    /// `{head, ent}` joined by an edge of the given bias.
    pub fn trivial(bias: f64) -> Self {
        let mut tree = WeightedTree::new(Role::Backbone);
        tree.add_child(Self::HEAD, bias, Role::Bud);
        Self { tree, v_base: Self::ENT, omega_ent: 1.0, depth: 0 }
    }

    pub fn tree(&self) -> &WeightedTree {
        &self.tree
    }

    pub fn into_tree(self) -> WeightedTree {
        self.tree
    }

    pub fn head(&self) -> VertexId {
        Self::HEAD
    }

    pub fn ent(&self) -> VertexId {
        Self::ENT
    }

    pub fn v_base(&self) -> VertexId {
        self.v_base
    }

    /// `omega_ent(T_ent)`.
    pub fn omega_ent(&self) -> f64 {
        self.omega_ent
    }

    /// Height of the tree below `ent`.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Vertex count including `head`.
    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_text(&self) -> String {
        format!(
            "# omega {}\n# depth {}\n# v_base {}\n{}",
            self.omega_ent,
            self.depth,
            self.v_base.0,
            self.tree.to_text()
        )
    }

    pub fn from_text(text: &str) -> Result<Self, TreeError> {
        Self::from_tree(WeightedTree::from_text(text)?)
    }
}

/// Grows an independent branching process with offspring law `h` below
/// `root`, every new edge biased by an independent draw from `bias`.
/// Children are created breadth-first in order.
pub fn grow_branching<R: Rng + ?Sized>(
    tree: &mut WeightedTree,
    root: VertexId,
    h: &OffspringLaw,
    bias: &BiasLaw,
    role: Role,
    rng: &mut R,
    limit: usize,
) -> Result<usize, TreeError> {
    let mut added = 0usize;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let k = h.sample(rng);
        added += k;
        if added > limit {
            return Err(TreeError::TrapTooLarge { limit });
        }
        for _ in 0..k {
            let b = bias.sample(rng);
            queue.push_back(tree.add_child(v, b, role));
        }
        tree.set_expanded(v, true);
    }
    Ok(added)
}

/// Samples a trap from the `h`-branching process with i.i.d. biases.
pub fn sample_trap<R: Rng + ?Sized>(
    h: &OffspringLaw,
    bias: &BiasLaw,
    rng: &mut R,
) -> Result<TrapTree, TreeError> {
    sample_trap_with_limit(h, bias, rng, TRAP_LIMIT)
}

pub fn sample_trap_with_limit<R: Rng + ?Sized>(
    h: &OffspringLaw,
    bias: &BiasLaw,
    rng: &mut R,
    limit: usize,
) -> Result<TrapTree, TreeError> {
    let mut tree = WeightedTree::new(Role::Backbone);
    let ent = tree.add_child(TrapTree::HEAD, bias.sample(rng), Role::Bud);
    grow_branching(&mut tree, ent, h, bias, Role::Trap, rng, limit.saturating_sub(2))
        .map_err(|_| TreeError::TrapTooLarge { limit })?;
    let (depth, v_base) = depth_and_base(&tree, ent);
    let omega_ent = tree.weight(ent);
    Ok(TrapTree { tree, v_base, omega_ent, depth })
}

/// Height of the descendant tree of `root` and its lexicographically first
/// deepest vertex (children compared in creation order).
pub fn depth_and_base(tree: &WeightedTree, root: VertexId) -> (u32, VertexId) {
    let base_depth = tree.depth(root);
    let mut best = (0u32, root);
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        let d = tree.depth(v) - base_depth;
        if d > best.0 {
            best = (d, v);
        }
        stack.extend(tree.children(v).iter().rev().copied());
    }
    best
}

/// Sizes of the outgrowths hanging off the `ent -> v_base` path, one per
/// path vertex above `v_base`.
pub fn outgrowth_sizes(trap: &TrapTree) -> Vec<usize> {
    let tree = trap.tree();
    let mut sizes = vec![1usize; tree.len()];
    for v in (1..tree.len()).rev() {
        let p = tree.parent(VertexId(v as u32)).expect("non-root has a parent");
        sizes[p.index()] += sizes[v];
    }
    let mut path = Vec::with_capacity(trap.depth() as usize + 1);
    let mut cur = trap.v_base();
    loop {
        path.push(cur);
        if cur == trap.ent() {
            break;
        }
        cur = tree.parent(cur).expect("v_base lies below ent");
    }
    path.reverse();
    path.windows(2).map(|w| sizes[w[0].index()] - sizes[w[1].index()]).collect()
}

/// No outgrowth exceeds `b0 * log log omega_ent`. Traps with
/// `omega_ent <= e` are bare by convention.
pub fn is_bare(trap: &TrapTree, b0: f64) -> bool {
    let omega = trap.omega_ent();
    if omega <= std::f64::consts::E {
        return true;
    }
    let cap = b0 * omega.ln().ln();
    outgrowth_sizes(trap).iter().all(|&s| s as f64 <= cap)
}
