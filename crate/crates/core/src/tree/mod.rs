//! Weighted trees, finite traps, the lazily grown environment and
//! backbone-tree pairs.

mod environment;
mod pair;
mod renewal;
mod trap;
mod weighted;

pub use environment::{Environment, Neighborhood};
pub use pair::{compose_pair, BackboneGrowth, BackboneTreePair};
pub use renewal::{renewal_decompose, RenewalDecomposition};
pub use trap::{
    depth_and_base, grow_branching, is_bare, outgrowth_sizes, sample_trap, sample_trap_with_limit,
    TrapTree, TRAP_LIMIT,
};
pub use weighted::{Role, VertexId, WeightedTree};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("trap grew past {limit} vertices; is the trap law close to critical?")]
    TrapTooLarge { limit: usize },
    #[error("tree text, line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid tree: {0}")]
    Invalid(String),
}
