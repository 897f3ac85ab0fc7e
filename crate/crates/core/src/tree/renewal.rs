use super::{VertexId, WeightedTree};

/// Cutpoints of a finite rooted tree and the components between them.
///
/// A cutpoint is a non-root, non-leaf vertex whose depth is shared only
/// with leaves. Component `i` (0-based) consists of the `i`-th cut vertex
/// (the root for `i = 0`) and all vertices strictly deeper than it down to
/// the next cutpoint's depth, so consecutive components share exactly one
/// cutpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenewalDecomposition {
    pub cutpoints: Vec<VertexId>,
    /// Each component lists its top vertex first, then the rest in pre-order.
    pub components: Vec<Vec<VertexId>>,
}

impl RenewalDecomposition {
    /// Number of components, one more than the number of cutpoints.
    pub fn r(&self) -> usize {
        self.components.len()
    }

    /// `k`-th cutpoint (1-based), the base of component `k`.
    pub fn cutpoint(&self, k: usize) -> Option<VertexId> {
        k.checked_sub(1).and_then(|i| self.cutpoints.get(i).copied())
    }
}

/// Renewal decomposition of the descendant tree of `root`.
pub fn renewal_decompose(tree: &WeightedTree, root: VertexId) -> RenewalDecomposition {
    let vertices = tree.descendants(root);
    let base = tree.depth(root);
    let height = vertices.iter().map(|&v| tree.depth(v) - base).max().unwrap_or(0) as usize;
    let mut inner_count = vec![0u32; height + 1];
    let mut inner_vertex = vec![root; height + 1];
    for &v in &vertices {
        if !tree.is_leaf(v) {
            let d = (tree.depth(v) - base) as usize;
            inner_count[d] += 1;
            inner_vertex[d] = v;
        }
    }
    let cutpoints: Vec<VertexId> =
        (1..=height).filter(|&d| inner_count[d] == 1).map(|d| inner_vertex[d]).collect();

    let mut tops = vec![root];
    tops.extend(&cutpoints);
    let mut components = Vec::with_capacity(tops.len());
    for (i, &top) in tops.iter().enumerate() {
        let bottom = match cutpoints.get(i) {
            Some(&c) => tree.depth(c),
            None => base + height as u32,
        };
        let mut comp = Vec::new();
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            comp.push(v);
            if tree.depth(v) < bottom {
                stack.extend(tree.children(v).iter().rev().copied());
            }
        }
        components.push(comp);
    }
    RenewalDecomposition { cutpoints, components }
}
