//! Two-photon position estimation: correlated-pair model, detector outcome
//! tables, Fisher information and estimators, and simulation drivers.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod detection;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod model;
pub mod numerics;

pub use detection::{OutcomeDistribution, OutcomeLabel, PixelDetector, SplitOutcome};
pub use error::{Error, Result};
pub use inference::{EstimateResult, FisherReport};
pub use model::{BiphotonModel, PhotonPair, RandomStream};
pub use numerics::QuadratureSpec;
