//! Check of the backbone/trap construction against the conditioned
//! branching process, through the law of the first three generations.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use super::stats::{histogram, tv_distance};
use crate::ensemble::{map_replicas, Execution};
use crate::laws::{Model, OffspringLaw};
use crate::rng::{substream, Purpose};
use crate::tree::{Environment, TreeError, VertexId, WeightedTree};

/// Ordered shape of the top generations: `(` children `)` for a vertex
/// above the cut depth, `.` for a vertex at it.
pub type Shape = String;

const SHAPE_DEPTH: u32 = 3;
const SURVIVED_AT: u64 = 64;
const GIVE_UP_DEPTH: u32 = 40;

/// Shape of the top `SHAPE_DEPTH` generations below `v`.
pub fn depth3_shape(tree: &WeightedTree, v: VertexId) -> Shape {
    fn walk(tree: &WeightedTree, v: VertexId, d: u32, out: &mut String) {
        if d == SHAPE_DEPTH {
            out.push('.');
            return;
        }
        out.push('(');
        for &c in tree.children(v) {
            walk(tree, c, d + 1, out);
        }
        out.push(')');
    }
    let mut s = String::new();
    walk(tree, v, 0, &mut s);
    s
}

fn lazy_shape(model: &Arc<Model>, seed: u64, replica: u64) -> Result<Shape, TreeError> {
    let mut env = Environment::new(model.clone(), substream(seed, Purpose::Environment, replica));
    let mut frontier = vec![env.root()];
    for _ in 0..SHAPE_DEPTH {
        let mut next = Vec::new();
        for v in frontier {
            env.ensure_expanded(v)?;
            next.extend_from_slice(env.tree().children(v));
        }
        frontier = next;
    }
    Ok(depth3_shape(env.tree(), env.root()))
}

/// One draw from the offspring law conditioned on survival, by rejection:
/// the first generations are sampled explicitly, later ones only as counts
/// until they die out (rejected), reach `SURVIVED_AT` (accepted), or stall
/// for `GIVE_UP_DEPTH` generations (rejected). Returns the shape and the
/// number of rejected attempts.
pub fn rejection_shape<R: Rng + ?Sized>(law: &OffspringLaw, rng: &mut R) -> (Shape, u64) {
    fn grow<R: Rng + ?Sized>(law: &OffspringLaw, d: u32, rng: &mut R, out: &mut String) -> u64 {
        if d == SHAPE_DEPTH {
            out.push('.');
            return 1;
        }
        out.push('(');
        let mut frontier = 0;
        for _ in 0..law.sample(rng) {
            frontier += grow(law, d + 1, rng, out);
        }
        out.push(')');
        frontier
    }
    let mut rejected = 0;
    loop {
        let mut shape = String::new();
        let mut z = grow(law, 0, rng, &mut shape);
        let mut depth = SHAPE_DEPTH;
        while z > 0 && z < SURVIVED_AT && depth < GIVE_UP_DEPTH {
            z = (0..z).map(|_| law.sample(rng) as u64).sum();
            depth += 1;
        }
        if z >= SURVIVED_AT {
            return (shape, rejected);
        }
        rejected += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarrisShapeReport {
    pub lazy: BTreeMap<Shape, u64>,
    pub rejection: BTreeMap<Shape, u64>,
    pub tv: f64,
    pub samples: u64,
    pub rejected: u64,
}

/// Total-variation distance between the shape laws of the lazily grown
/// environment and of rejection-sampled conditioned trees.
pub fn harris_shape_check(
    model: &Arc<Model>,
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<HarrisShapeReport, TreeError> {
    let lazy: Vec<Shape> =
        map_replicas(samples, exec, |i| lazy_shape(model, seed, i)).into_iter().collect::<Result<_, _>>()?;
    let law = &model.harris.offspring;
    let rej: Vec<(Shape, u64)> =
        map_replicas(samples, exec, |i| rejection_shape(law, &mut substream(seed, Purpose::Analysis, i)));
    let rejected = rej.iter().map(|r| r.1).sum();
    let lazy = histogram(lazy);
    let rejection = histogram(rej.into_iter().map(|r| r.0));
    Ok(HarrisShapeReport { tv: tv_distance(&lazy, &rejection), lazy, rejection, samples, rejected })
}
