//! Engines and analytics for simulating spin synchronization in dense,
//! strongly exchange-coupled ensembles of alkali-like atoms.
//!
//! Numerical state is generic over the scalar type via [`real::Real`]
//! (`f32` or `f64`); aliases at the crate root fix the default `f64`
//! vocabulary.

pub mod bloch;
pub mod budget;
pub mod error;
pub mod init;
pub mod integrate;
pub mod master;
pub mod meanfield;
pub mod modes;
pub mod ops;
pub mod real;
pub mod tops;

pub use error::{Error, Result};
pub use real::Real;

/// Default-precision spin operator set.
pub type AngularMomentumSet = ops::AngularMomentumSet<f64>;
/// Default-precision product-space operators.
pub type ProductOperators = ops::ProductOperators<f64>;
/// Default-precision observable triple.
pub type SpinTriple = ops::SpinTriple<f64>;
/// Default-precision spin-temperature configuration.
pub type SpinTempConfig = init::SpinTempConfig<f64>;
/// Default-precision tilt angles.
pub type TiltAngles = init::TiltAngles<f64>;
/// Default-precision coupling matrix.
pub type CouplingMatrix = init::CouplingMatrix<f64>;
/// Default-precision frequency-spread description.
pub type FrequencySpread = init::FrequencySpread<f64>;
/// Default-precision ensemble Bloch state.
pub type EnsembleBlochState = bloch::EnsembleBlochState<f64>;
/// Default-precision Bloch engine parameters.
pub type BlochParams = bloch::BlochParams<f64>;
/// Default-precision mean-field parameters.
pub type MeanFieldParams = meanfield::MeanFieldParams<f64>;
/// Default-precision eigenvalue/amplitude mode set.
pub type ModeSet = meanfield::ModeSet<f64>;
/// Default-precision per-atom density matrices.
pub type DensityMatrixState = master::DensityMatrixState<f64>;
/// Default-precision master-equation trajectory.
pub type MasterTrajectory = master::MasterTrajectory<f64>;
/// Default-precision recovered-mode description.
pub type ModeEstimate = modes::ModeEstimate<f64>;
/// Default-precision synchronization metric.
pub type SyncMetric = modes::SyncMetric<f64>;
pub use budget::{BudgetResult, PulseGeometry, Temperature, VaporConfig};

/// Default-precision coupled-tops state.
pub type TopsState = tops::TopsState<f64>;
/// Default-precision effective exchange field.
pub type EffectiveField = tops::EffectiveField<f64>;
