//! Sequential growth of causal sets, quantum measures on path space,
//! amplitude processes and discrete Einstein operators.
//!
//! The numeric layers are generic over a [`scalar::Real`] type; the aliases
//! below fix it to `f64` (and `f32`).

pub mod amplitude;
pub mod causet;
pub mod einstein;
pub mod example;
pub mod growth;
pub mod qmeasure;
pub mod scalar;

pub use causet::{parse_causet, Causet, CausetError, ElementSet, OffspringKind};
pub use growth::{ComplementMode, Growth, GrowthError, NamedPath, Path, PathSet, SetSpec, SiteId};
pub use scalar::{Complex, Phase, Real, RootSum};

pub type C64 = Complex<f64>;
pub type ProbabilityOperator = qmeasure::ProbabilityOperator<f64>;
pub type ProbabilityOperatorF32 = qmeasure::ProbabilityOperator<f32>;
pub type TransitionAmplitudeTable = amplitude::TransitionAmplitudeTable<f64>;
pub type TransitionAmplitudeTableF32 = amplitude::TransitionAmplitudeTable<f32>;
pub type PathAmplitudeVector = amplitude::PathAmplitudeVector<f64>;
pub type AmplitudeProcess<'g> = amplitude::AmplitudeProcess<'g, f64>;
pub type ClassicalProcess<'g> = amplitude::ClassicalProcess<'g, f64>;
pub type SiteDecoherence = einstein::SiteDecoherence<f64>;
pub type SparsePairOperator = einstein::SparsePairOperator<f64>;
