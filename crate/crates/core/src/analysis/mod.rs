//! Estimators for the tail exponents and scaling constants, plus the
//! comparisons against the stable limit.

mod constants;
mod dichotomy;
mod harris;
mod scaling;
mod snapshots;
mod stability;
mod stable;
pub mod stats;
mod tail;

use crate::exact::ExactError;
use crate::laws::LawError;
use crate::tree::TreeError;
use crate::walk::WalkError;

pub use constants::{
    compose_xi, estimate_psi, trap_weight_tail, ConstantEstimates, D1Rung, Estimate, PsiReport, WeightTailOptions,
    WeightTailReport, D1_DEPTHS, D1_TAIL_FRACTIONS,
};
pub use dichotomy::{circular_resultant, lattice_dichotomy, DichotomyReport, MIN_DEEP_SAMPLES};
pub use harris::{depth3_shape, harris_shape_check, rejection_shape, HarrisShapeReport, Shape};
pub use scaling::{displacement_exponent, hitting_times, DisplacementOptions, DisplacementReport, ScalingFit};
pub use snapshots::{
    collect_snapshots, estimate_d2, estimate_eta, trap_time_tail, D2Report, D2Rung, EtaReport, EtaRung,
    SnapshotPlan, SnapshotRecord, TrapTimeReport, MIN_D2_SNAPSHOTS, MIN_ETA_SNAPSHOTS, MIN_TRAP_TIME_SNAPSHOTS,
};
pub use stability::{neighborhood_shape, snapshot_stability, StabilityReport, STABILITY_RADIUS};
pub use stable::{laplace_compare, sample_positive_stable, LaplaceReport, LaplaceRow, LAMBDA_GRID};
pub use tail::{
    hill_estimator, TailFit, TailMethod, DEFAULT_TOP_FRACTION, MAX_INSTABILITY, MIN_TAIL_SAMPLES,
    SENSITIVITY_FRACTIONS,
};

#[derive(Debug, Clone, thiserror::Error)]
pub enum AnalysisError {
    #[error("too few samples: needed {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("not a power law: {0}")]
    NotPowerLaw(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("censored fraction {fraction} exceeds the 2% limit")]
    ExcessCensoring { fraction: f64 },
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Exact(#[from] ExactError),
}
