use std::sync::Arc;

use super::{run_walk, Mode, Stop, WalkError, WalkOptions};
use crate::laws::Model;
use crate::rng::{substream, Purpose};
use crate::tree::{compose_pair, sample_trap, BackboneTreePair, Environment, Neighborhood};

/// Largest neighborhood radius for snapshots.
pub const MAX_SNAPSHOT_RADIUS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SnapshotOptions {
    /// Number of distinct trap entrances the walk reaches first.
    pub n: usize,
    /// Neighborhood radius.
    pub k: u32,
    pub budget: u64,
}

impl Default for SnapshotOptions {
    fn default() -> Self {
        Self { n: 200, k: 12, budget: 1_000_000_000 }
    }
}

/// Runs a fresh walk of replica `replica` to its `n`-th trap entrance and
/// takes the backbone neighborhood of radius `k` around that entrance.
///
/// The walk and its environment use the `Walk` and `Environment` streams.
pub fn late_neighborhood(
    model: &Arc<Model>,
    opts: SnapshotOptions,
    seed: u64,
    replica: u64,
) -> Result<Neighborhood, WalkError> {
    if opts.k > MAX_SNAPSHOT_RADIUS {
        return Err(WalkError::InvalidArgument(format!(
            "snapshot radius {} exceeds {MAX_SNAPSHOT_RADIUS}",
            opts.k
        )));
    }
    if opts.n == 0 {
        return Err(WalkError::InvalidArgument("snapshot needs n >= 1".into()));
    }
    let mut env = Environment::new(model.clone(), substream(seed, Purpose::Environment, replica));
    let walk_opts = WalkOptions::new(Stop::TrapEntrances(opts.n), opts.budget).mode(Mode::Collapsed);
    let trace = run_walk(&mut env, &walk_opts, &mut substream(seed, Purpose::Walk, replica))?;
    let bud = trace.entrances[opts.n - 1].vertex;
    Ok(env.backbone_neighborhood(bud, opts.k))
}

/// [`late_neighborhood`] with an independently sampled trap attached, drawn
/// from the `Trap` stream of the same replica.
pub fn late_trap_snapshot(
    model: &Arc<Model>,
    opts: SnapshotOptions,
    seed: u64,
    replica: u64,
) -> Result<BackboneTreePair, WalkError> {
    let nbhd = late_neighborhood(model, opts, seed, replica)?;
    let trap = sample_trap(&model.harris.h, &model.bias, &mut substream(seed, Purpose::Trap, replica))?;
    Ok(compose_pair(&nbhd, &trap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{BiasLaw, OffspringLaw};
    use crate::tree::Role;

    fn reference() -> Arc<Model> {
        let p = OffspringLaw::from_pairs(&[(0, 0.25), (2, 0.75)]).unwrap();
        let bias = BiasLaw::atoms(vec![(2.0, 0.5), (3.0, 0.5)]).unwrap();
        Arc::new(Model::new(&p, bias).unwrap())
    }

    #[test]
    fn snapshot_structure() {
        let m = reference();
        let opts = SnapshotOptions { n: 50, k: 6, ..Default::default() };
        for r in 0..20 {
            let pair = late_trap_snapshot(&m, opts, 11, r).unwrap();
            assert_eq!(pair.tree().role(pair.head()), Role::Backbone);
            assert_eq!(pair.tree().role(pair.ent()), Role::Bud);
            assert_eq!(pair.tree().distance(pair.ent(), pair.tree().root()), 7);
            let again = late_trap_snapshot(&m, opts, 11, r).unwrap();
            assert_eq!(again.to_text(), pair.to_text());
        }
    }

    #[test]
    fn trap_stream_is_separate() {
        let m = reference();
        let opts = SnapshotOptions { n: 20, k: 3, ..Default::default() };
        let pair = late_trap_snapshot(&m, opts, 5, 0).unwrap();
        let fresh = sample_trap(&m.harris.h, &m.bias, &mut substream(5, Purpose::Trap, 0)).unwrap();
        assert_eq!(pair.omega_ent(), fresh.omega_ent());
        assert!(late_trap_snapshot(&m, SnapshotOptions { k: 21, ..opts }, 5, 0).is_err());
    }
}
