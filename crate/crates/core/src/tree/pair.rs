use super::{depth_and_base, Neighborhood, Role, TrapTree, TreeError, VertexId, WeightedTree};
use crate::laws::{BackboneJointLaw, BiasLaw};

/// A trap glued below the backbone around its entrance.
///
/// Vertices with role [`Role::Backbone`] form the backbone piece; `ent` and
/// everything below it is the trap. The root is reflecting. Backbone
/// vertices left unexpanded (the outer shell) can be grown further by a
/// walk via [`BackboneGrowth`].
#[derive(Debug, Clone)]
pub struct BackboneTreePair {
    tree: WeightedTree,
    head: VertexId,
    ent: VertexId,
    v_base: VertexId,
    omega_ent: f64,
    trap_depth: u32,
    radius: u32,
}

/// How a walk extends the backbone beyond an unexpanded shell vertex.
#[derive(Debug, Clone, Copy)]
pub enum BackboneGrowth<'a> {
    /// Fresh backbone-only children from the joint law, biases from `bias`.
    Law { joint: &'a BackboneJointLaw, bias: &'a BiasLaw },
    /// A single backbone child with a fixed bias.
    Line { bias: f64 },
    /// No growth: the shell vertices are leaves.
    Closed,
}

pub fn compose_pair(nbhd: &Neighborhood, trap: &TrapTree) -> BackboneTreePair {
    let mut tree = nbhd.tree.clone();
    let ent = nbhd.ent;
    let src = trap.tree();
    let mut map = vec![VertexId(u32::MAX); src.len()];
    map[TrapTree::ENT.index()] = ent;
    for v in src.vertices().skip(2) {
        let p = map[src.parent(v).expect("trap vertex has a parent").index()];
        map[v.index()] = tree.add_child(p, src.bias_unchecked(v), Role::Trap);
    }
    tree.set_expanded(ent, true);
    BackboneTreePair {
        head: nbhd.head,
        ent,
        v_base: map[trap.v_base().index()],
        omega_ent: trap.omega_ent(),
        trap_depth: trap.depth(),
        radius: nbhd.radius,
        tree,
    }
}

impl BackboneTreePair {
    /// Pair on a backbone that is a single ray of constant bias: `radius`
    /// edges above `head` and `radius` below it, with `trap` hanging off
    /// `head` (its own entrance bias kept).
    pub fn on_line(line_bias: f64, radius: u32, trap: &TrapTree) -> Self {
        let mut tree = WeightedTree::new(Role::Backbone);
        let mut head = tree.root();
        for _ in 0..radius {
            head = tree.add_child(head, line_bias, Role::Backbone);
        }
        let mut v = head;
        for _ in 0..radius {
            v = tree.add_child(v, line_bias, Role::Backbone);
        }
        tree.set_expanded(v, false);
        let ent_bias = trap.tree().bias(TrapTree::ENT).expect("ent has a parent");
        let ent = tree.add_child(head, ent_bias, Role::Bud);
        let nbhd = Neighborhood { tree, ent, head, radius };
        compose_pair(&nbhd, trap)
    }

    pub fn tree(&self) -> &WeightedTree {
        &self.tree
    }

    pub fn head(&self) -> VertexId {
        self.head
    }

    pub fn ent(&self) -> VertexId {
        self.ent
    }

    pub fn v_base(&self) -> VertexId {
        self.v_base
    }

    pub fn omega_ent(&self) -> f64 {
        self.omega_ent
    }

    pub fn trap_depth(&self) -> u32 {
        self.trap_depth
    }

    /// Backbone vertices within distance `radius + 1` of `ent` are present.
    pub fn radius(&self) -> u32 {
        self.radius
    }

    #[inline]
    pub fn in_trap(&self, v: VertexId) -> bool {
        self.tree.role(v) != Role::Backbone
    }

    /// The trap part re-rooted as a single-entry tree.
    pub fn trap(&self) -> TrapTree {
        let (sub, _) = self.tree.subtree(self.ent);
        let mut t = WeightedTree::with_capacity(Role::Backbone, sub.len() + 1);
        t.add_child(TrapTree::HEAD, self.tree.bias_unchecked(self.ent), Role::Bud);
        for v in sub.vertices().skip(1) {
            let p = sub.parent(v).expect("non-root");
            t.add_child(VertexId(p.0 + 1), sub.bias_unchecked(v), Role::Trap);
        }
        TrapTree::from_tree(t).expect("trap part is single-entry")
    }

    /// The same backbone with the trap replaced.
    pub fn with_trap(&self, trap: &TrapTree) -> Self {
        let mut tree = WeightedTree::with_capacity(Role::Backbone, self.tree.len());
        let mut map = vec![VertexId(u32::MAX); self.tree.len()];
        map[0] = tree.root();
        let mut ent = tree.root();
        for v in self.tree.vertices().skip(1) {
            if self.tree.role(v) == Role::Trap {
                continue;
            }
            let p = map[self.tree.parent(v).expect("non-root").index()];
            let nv = tree.add_child(p, self.tree.bias_unchecked(v), self.tree.role(v));
            tree.set_expanded(nv, self.tree.is_expanded(v));
            map[v.index()] = nv;
            if v == self.ent {
                ent = nv;
            }
        }
        let nbhd = Neighborhood { tree, ent, head: map[self.head.index()], radius: self.radius };
        compose_pair(&nbhd, trap)
    }

    pub fn to_text(&self) -> String {
        format!(
            "# head {}\n# ent {}\n# v_base {}\n# radius {}\n# omega {}\n{}",
            self.head.0,
            self.ent.0,
            self.v_base.0,
            self.radius,
            self.omega_ent,
            self.tree.to_text()
        )
    }

    /// Parses [`to_text`](Self::to_text). The `ent` and `radius` headers are
    /// required; everything else is recomputed.
    pub fn from_text(text: &str) -> Result<Self, TreeError> {
        let mut ent = None;
        let mut radius = None;
        for (i, line) in text.lines().enumerate() {
            let Some(rest) = line.trim().strip_prefix('#') else { continue };
            let mut it = rest.split_whitespace();
            let (key, value) = (it.next(), it.next());
            let parse = |v: Option<&str>| {
                v.and_then(|s| s.parse::<u32>().ok())
                    .ok_or(TreeError::Parse { line: i + 1, message: "bad header value".into() })
            };
            match key {
                Some("ent") => ent = Some(parse(value)?),
                Some("radius") => radius = Some(parse(value)?),
                _ => {}
            }
        }
        let missing = |what: &str| TreeError::Parse { line: 0, message: format!("missing `# {what}` header") };
        let ent = VertexId(ent.ok_or_else(|| missing("ent"))?);
        let radius = radius.ok_or_else(|| missing("radius"))?;
        let tree = WeightedTree::from_text(text)?;
        if !tree.contains(ent) || tree.role(ent) != Role::Bud {
            return Err(TreeError::Invalid("ent must be the bud vertex".into()));
        }
        let head = tree.parent(ent).ok_or(TreeError::Invalid("ent has no parent".into()))?;
        let (trap_depth, v_base) = depth_and_base(&tree, ent);
        let omega_ent = tree.weight(ent);
        Ok(Self { tree, head, ent, v_base, omega_ent, trap_depth, radius })
    }
}
