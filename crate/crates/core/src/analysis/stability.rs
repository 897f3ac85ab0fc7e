//! Stationarity of the backbone seen from late trap entrances.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use super::stats::{histogram, tv_distance};
use super::AnalysisError;
use crate::ensemble::{map_replicas, Execution};
use crate::laws::Model;
use crate::rng::derive_seed;
use crate::tree::{Neighborhood, Role, VertexId};
use crate::walk::{late_neighborhood, SnapshotOptions};

/// Radius of the neighborhoods whose shapes are compared.
pub const STABILITY_RADIUS: u32 = 1;

/// Nested shape of a neighborhood: roles, edge biases to two decimals, and
/// `E` for the entrance.
pub fn neighborhood_shape(nbhd: &Neighborhood) -> String {
    fn walk(n: &Neighborhood, v: VertexId, out: &mut String) {
        if v == n.ent {
            out.push('E');
        } else {
            out.push(match n.tree.role(v) {
                Role::Backbone => 'B',
                Role::Bud => 'b',
                Role::Trap => 't',
            });
        }
        if let Some(b) = n.tree.bias(v) {
            let _ = write!(out, "{b:.2}");
        }
        let kids = n.tree.children(v);
        if !kids.is_empty() {
            out.push('(');
            for &c in kids {
                walk(n, c, out);
            }
            out.push(')');
        }
    }
    let mut s = String::new();
    walk(nbhd, nbhd.tree.root(), &mut s);
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub n_early: usize,
    pub n_late: usize,
    pub early: BTreeMap<String, u64>,
    pub late: BTreeMap<String, u64>,
    pub tv: f64,
    pub snapshots: u64,
}

/// Total-variation distance between the neighborhood shape laws at the
/// `n_early`-th and `n_late`-th trap entrance. The two ensembles use
/// independent seeds.
pub fn snapshot_stability(
    model: &Arc<Model>,
    n_early: usize,
    n_late: usize,
    snapshots: u64,
    budget: u64,
    seed: u64,
    exec: Execution,
) -> Result<StabilityReport, AnalysisError> {
    if n_early == 0 || n_late <= n_early {
        return Err(AnalysisError::InvalidArgument(format!(
            "entrance counts {n_early} < {n_late} must be increasing and positive"
        )));
    }
    let shapes = |n: usize, seed: u64| -> Result<BTreeMap<String, u64>, AnalysisError> {
        let opts = SnapshotOptions { n, k: STABILITY_RADIUS, budget };
        let all: Vec<String> = map_replicas(snapshots, exec, |r| {
            late_neighborhood(model, opts, seed, r).map(|nb| neighborhood_shape(&nb))
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
        Ok(histogram(all))
    };
    let early = shapes(n_early, seed)?;
    let late = shapes(n_late, derive_seed(seed, 1))?;
    Ok(StabilityReport { tv: tv_distance(&early, &late), early, late, n_early, n_late, snapshots })
}
