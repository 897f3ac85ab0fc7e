//! Randomly biased random walks on supercritical Galton-Watson trees with
//! leaves.
//!
//! The crate samples environments through the backbone/trap decomposition,
//! runs walks on them, evaluates small-tree hitting quantities exactly, and
//! estimates the constants and exponents governing the slowdown of the walk.

pub mod analysis;
pub mod ensemble;
pub mod exact;
pub mod laws;
pub mod rng;
pub mod tree;
pub mod walk;

pub use ensemble::Execution;
pub use laws::{BiasLaw, Model, OffspringLaw};
