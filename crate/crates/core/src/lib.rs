//! Numerical laboratory for free time minimizers of the Newtonian N-body problem.
//!
//! The crate is organised bottom-up:
//!
//! * [`configuration`]: mass metric, potential, kinetic energy, moment of inertia,
//!   center of mass, Newtonian force field and polar decomposition.
//! * [`action`]: discrete paths, the discretized Lagrangian action, its exact
//!   gradient and the fixed-time minimizer.
//! * [`free_time`]: optimization over the transfer time, the critical action
//!   potential and the free-time-minimizer certificate.
//! * [`central`]: minimal central configurations and their parabolic homothetic
//!   motions.
//! * [`dynamics`]: Newton-equation integration and the asymptotic diagnostics.
//!
//! All numerical code is generic over a [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below are the concrete types used by the command-line front end.

pub mod action;
pub mod central;
pub mod configuration;
pub mod dynamics;
mod error;
pub mod free_time;
mod lbfgs;
mod rng;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use action::{DiscretePath, MinimizeOptions, MinimizeReport};
pub use central::{CentralConfigResult, HomotheticSpec};
pub use configuration::{Configuration, MassSystem, PolarDecomposition};
pub use dynamics::{DiagnosticsSeries, IntegrateOptions, PowerLawFit, Trajectory};
pub use free_time::{FreeTimeResult, TauBracket, ToleranceSet, VerificationReport};

pub type MassSystemF64 = MassSystem<f64>;
pub type ConfigurationF64 = Configuration<f64>;
pub type PolarDecompositionF64 = PolarDecomposition<f64>;
pub type DiscretePathF64 = DiscretePath<f64>;
pub type MinimizeOptionsF64 = MinimizeOptions<f64>;
pub type MinimizeReportF64 = MinimizeReport<f64>;
pub type FreeTimeResultF64 = FreeTimeResult<f64>;
pub type TauBracketF64 = TauBracket<f64>;
pub type ToleranceSetF64 = ToleranceSet<f64>;
pub type CentralConfigResultF64 = CentralConfigResult<f64>;
pub type HomotheticSpecF64 = HomotheticSpec<f64>;
pub type TrajectoryF64 = Trajectory<f64>;
pub type DiagnosticsSeriesF64 = DiagnosticsSeries<f64>;
pub type PowerLawFitF64 = PowerLawFit<f64>;
pub type IntegrateOptionsF64 = IntegrateOptions<f64>;
