use smallvec::SmallVec;
use std::fmt::Write as _;

use super::TreeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl VertexId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Backbone,
    /// Trap entrance: a non-backbone child of a backbone vertex.
    Bud,
    /// Strict descendant of a trap entrance.
    Trap,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Backbone => "backbone",
            Role::Bud => "bud",
            Role::Trap => "trap",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "backbone" => Some(Role::Backbone),
            "bud" => Some(Role::Bud),
            "trap" => Some(Role::Trap),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<VertexId>,
    children: SmallVec<[VertexId; 4]>,
    /// Bias of the edge to the parent; unused at the root.
    bias: f64,
    child_bias_sum: f64,
    depth: u32,
    role: Role,
    expanded: bool,
}

/// Rooted tree with edge biases, stored as a dense vertex table.
///
/// Vertex ids are assigned in creation order and every parent id is smaller
/// than its children's ids, so a reverse id scan is a post-order traversal.
#[derive(Debug, Clone)]
pub struct WeightedTree {
    nodes: Vec<Node>,
}

impl WeightedTree {
    pub fn new(root_role: Role) -> Self {
        Self {
            nodes: vec![Node {
                parent: None,
                children: SmallVec::new(),
                bias: f64::NAN,
                child_bias_sum: 0.0,
                depth: 0,
                role: root_role,
                expanded: true,
            }],
        }
    }

    pub fn with_capacity(root_role: Role, capacity: usize) -> Self {
        let mut t = Self::new(root_role);
        t.nodes.reserve(capacity.saturating_sub(1));
        t
    }

    pub const ROOT: VertexId = VertexId(0);

    pub fn root(&self) -> VertexId {
        Self::ROOT
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.index() < self.nodes.len()
    }

    pub fn vertices(&self) -> impl DoubleEndedIterator<Item = VertexId> + ExactSizeIterator {
        (0..self.nodes.len() as u32).map(VertexId)
    }

    /// Appends a child; children keep their creation order.
    pub fn add_child(&mut self, parent: VertexId, bias: f64, role: Role) -> VertexId {
        let id = VertexId(self.nodes.len() as u32);
        let depth = self.nodes[parent.index()].depth + 1;
        self.nodes.push(Node {
            parent: Some(parent),
            children: SmallVec::new(),
            bias,
            child_bias_sum: 0.0,
            depth,
            role,
            expanded: true,
        });
        let p = &mut self.nodes[parent.index()];
        p.children.push(id);
        p.child_bias_sum += bias;
        id
    }

    #[inline]
    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.nodes[v.index()].parent
    }

    #[inline]
    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.nodes[v.index()].children
    }

    /// Bias of the edge from `v` to its parent.
    #[inline]
    pub fn bias(&self, v: VertexId) -> Option<f64> {
        let n = &self.nodes[v.index()];
        n.parent.map(|_| n.bias)
    }

    #[inline]
    pub(crate) fn bias_unchecked(&self, v: VertexId) -> f64 {
        self.nodes[v.index()].bias
    }

    #[inline]
    pub fn child_bias_sum(&self, v: VertexId) -> f64 {
        self.nodes[v.index()].child_bias_sum
    }

    #[inline]
    pub fn depth(&self, v: VertexId) -> u32 {
        self.nodes[v.index()].depth
    }

    #[inline]
    pub fn role(&self, v: VertexId) -> Role {
        self.nodes[v.index()].role
    }

    pub fn set_role(&mut self, v: VertexId, role: Role) {
        self.nodes[v.index()].role = role;
    }

    /// Whether all children of `v` are present.
    #[inline]
    pub fn is_expanded(&self, v: VertexId) -> bool {
        self.nodes[v.index()].expanded
    }

    pub fn set_expanded(&mut self, v: VertexId, expanded: bool) {
        self.nodes[v.index()].expanded = expanded;
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.nodes[v.index()].children.is_empty()
    }

    /// Drops every vertex with id `>= len` along with references to it.
    pub fn truncate(&mut self, len: usize, touched: &[VertexId]) {
        if len >= self.nodes.len() {
            return;
        }
        self.nodes.truncate(len);
        for &v in touched {
            if v.index() < len {
                let n = &mut self.nodes[v.index()];
                n.children.retain(|c| c.index() < len);
                n.child_bias_sum = 0.0;
                let kids = n.children.clone();
                let sum: f64 = kids.iter().map(|c| self.nodes[c.index()].bias).sum();
                self.nodes[v.index()].child_bias_sum = sum;
            }
        }
    }

    /// `omega_x(T_x)` for every vertex `x`, in one post-order pass.
    pub fn subtree_weights(&self) -> Vec<f64> {
        let mut w = vec![1.0; self.nodes.len()];
        for v in (1..self.nodes.len()).rev() {
            let n = &self.nodes[v];
            let p = n.parent.expect("non-root vertex has a parent").index();
            w[p] += n.bias * w[v];
        }
        w
    }

    /// `omega_x(T_x)`: sum over descendants `v` of the bias product on `x -> v`.
    pub fn weight(&self, x: VertexId) -> f64 {
        let desc = self.descendants(x);
        let mut w: Vec<f64> = vec![1.0; desc.len()];
        let pos: std::collections::HashMap<VertexId, usize> =
            desc.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        for i in (1..desc.len()).rev() {
            let v = desc[i];
            let p = pos[&self.parent(v).expect("descendant has a parent")];
            w[p] += self.bias_unchecked(v) * w[i];
        }
        w[0]
    }

    /// Product of biases along the downward path `ancestor -> v`.
    pub fn path_weight(&self, ancestor: VertexId, v: VertexId) -> Option<f64> {
        let mut acc = 1.0;
        let mut cur = v;
        while cur != ancestor {
            acc *= self.bias_unchecked(cur);
            cur = self.parent(cur)?;
        }
        Some(acc)
    }

    /// `x` and its descendants in pre-order (children in creation order).
    pub fn descendants(&self, x: VertexId) -> Vec<VertexId> {
        let mut out = Vec::new();
        let mut stack = vec![x];
        while let Some(v) = stack.pop() {
            out.push(v);
            stack.extend(self.children(v).iter().rev().copied());
        }
        out
    }

    pub fn is_ancestor_or_self(&self, a: VertexId, mut v: VertexId) -> bool {
        loop {
            if v == a {
                return true;
            }
            match self.parent(v) {
                Some(p) => v = p,
                None => return false,
            }
        }
    }

    /// Graph distance between two vertices.
    pub fn distance(&self, a: VertexId, b: VertexId) -> u32 {
        let (mut x, mut y) = (a, b);
        let mut d = 0;
        while self.depth(x) > self.depth(y) {
            x = self.parent(x).expect("deeper vertex has a parent");
            d += 1;
        }
        while self.depth(y) > self.depth(x) {
            y = self.parent(y).expect("deeper vertex has a parent");
            d += 1;
        }
        while x != y {
            x = self.parent(x).expect("distinct vertices below a common root");
            y = self.parent(y).expect("distinct vertices below a common root");
            d += 2;
        }
        d
    }

    /// Copy of the descendant tree of `x`, re-rooted at `x`. Returns the map
    /// from new ids to original ids.
    pub fn subtree(&self, x: VertexId) -> (WeightedTree, Vec<VertexId>) {
        let mut out = WeightedTree::new(self.role(x));
        let mut map = vec![x];
        let mut queue = std::collections::VecDeque::from([(x, VertexId(0))]);
        while let Some((old, new)) = queue.pop_front() {
            for &c in self.children(old) {
                let nc = out.add_child(new, self.bias_unchecked(c), self.role(c));
                map.push(c);
                queue.push_back((c, nc));
            }
            out.set_expanded(new, self.is_expanded(old));
        }
        (out, map)
    }

    /// Line-per-vertex text: `id parent_id bias role depth`, root first.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in self.vertices() {
            let n = &self.nodes[v.index()];
            match n.parent {
                Some(p) => {
                    let _ = writeln!(s, "{} {} {} {} {}", v.0, p.0, n.bias, n.role.as_str(), n.depth);
                }
                None => {
                    let _ = writeln!(s, "{} - - {} {}", v.0, n.role.as_str(), n.depth);
                }
            }
        }
        s
    }

    /// Parses [`to_text`](Self::to_text) output. Lines starting with `#` and
    /// blank lines are skipped. Backbone vertices without children are marked
    /// unexpanded.
    pub fn from_text(text: &str) -> Result<Self, TreeError> {
        let mut tree: Option<WeightedTree> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| TreeError::Parse { line: lineno + 1, message: msg.to_string() };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(bad("expected 5 fields: id parent_id bias role depth"));
            }
            let id: u32 = fields[0].parse().map_err(|_| bad("bad id"))?;
            let role = Role::parse(fields[3]).ok_or_else(|| bad("unknown role"))?;
            let depth: u32 = fields[4].parse().map_err(|_| bad("bad depth"))?;
            match (&mut tree, fields[1]) {
                (None, "-") => {
                    if id != 0 || depth != 0 || fields[2] != "-" {
                        return Err(bad("root must be `0 - - role 0`"));
                    }
                    tree = Some(WeightedTree::new(role));
                }
                (Some(t), p) if p != "-" => {
                    let parent: u32 = p.parse().map_err(|_| bad("bad parent id"))?;
                    let bias: f64 = fields[2].parse().map_err(|_| bad("bad bias"))?;
                    if id as usize != t.len() || parent >= id {
                        return Err(bad("ids must be dense and follow their parent"));
                    }
                    if !(bias.is_finite() && bias > 0.0) {
                        return Err(bad("bias must be positive"));
                    }
                    let v = t.add_child(VertexId(parent), bias, role);
                    if t.depth(v) != depth {
                        return Err(bad("depth inconsistent with parent"));
                    }
                }
                _ => return Err(bad("exactly one root, given first")),
            }
        }
        let mut tree = tree.ok_or(TreeError::Parse { line: 0, message: "empty tree".into() })?;
        for v in tree.vertices().collect::<Vec<_>>() {
            if tree.role(v) == Role::Backbone && tree.is_leaf(v) {
                tree.set_expanded(v, false);
            }
        }
        Ok(tree)
    }

    /// Checks parent/child consistency and depths.
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.nodes.is_empty() || self.nodes[0].parent.is_some() {
            return Err(TreeError::Invalid("missing root".into()));
        }
        for v in self.vertices().skip(1) {
            let p = self.parent(v).ok_or_else(|| TreeError::Invalid(format!("{v:?} lacks a parent")))?;
            if !self.children(p).contains(&v) || self.depth(v) != self.depth(p) + 1 {
                return Err(TreeError::Invalid(format!("inconsistent link at {v:?}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(biases: &[f64]) -> WeightedTree {
        let mut t = WeightedTree::new(Role::Bud);
        let mut v = t.root();
        for &b in biases {
            v = t.add_child(v, b, Role::Trap);
        }
        t
    }

    #[test]
    fn weight_examples() {
        assert_eq!(path(&[2.0, 3.0]).weight(VertexId(0)), 9.0);
        assert_eq!(path(&[]).weight(VertexId(0)), 1.0);
        let mut fork = WeightedTree::new(Role::Bud);
        fork.add_child(fork.root(), 2.0, Role::Trap);
        fork.add_child(fork.root(), 3.0, Role::Trap);
        assert_eq!(fork.weight(fork.root()), 6.0);
        assert_eq!(fork.subtree_weights(), vec![6.0, 1.0, 1.0]);
    }

    #[test]
    fn text_round_trip() {
        let mut t = path(&[2.0, std::f64::consts::PI]);
        t.add_child(VertexId(1), 1.0 / 3.0, Role::Trap);
        let text = t.to_text();
        let back = WeightedTree::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.bias(VertexId(2)), Some(std::f64::consts::PI));
        assert!(text.starts_with("0 - - bud 0\n1 0 2 trap 1\n"));
    }

    #[test]
    fn parse_errors() {
        assert!(WeightedTree::from_text("").is_err());
        assert!(WeightedTree::from_text("0 - - bud 0\n2 0 2 trap 1\n").is_err());
        assert!(WeightedTree::from_text("0 - - bud 0\n1 0 2 trap 2\n").is_err());
        assert!(WeightedTree::from_text("0 - - goblin 0\n").is_err());
    }

    #[test]
    fn distances_and_subtrees() {
        let mut t = path(&[2.0, 2.0, 2.0]);
        let side = t.add_child(VertexId(1), 3.0, Role::Trap);
        assert_eq!(t.distance(VertexId(3), side), 3);
        assert_eq!(t.distance(VertexId(0), VertexId(3)), 3);
        let (sub, map) = t.subtree(VertexId(1));
        assert_eq!(sub.len(), 4);
        assert_eq!(map[0], VertexId(1));
        assert_eq!(sub.weight(sub.root()), t.weight(VertexId(1)));
        assert_eq!(t.path_weight(VertexId(0), VertexId(3)), Some(8.0));
        assert!(t.validate().is_ok());
    }
}
