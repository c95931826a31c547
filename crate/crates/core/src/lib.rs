//! Certification and simulation of switched affine systems whose subsystems
//! have distinct equilibria.
//!
//! The pipeline: quadratic ISS certificates per subsystem, the set constants
//! `μ(κ)` and `ω(κ)`, an average dwell-time floor with the ultimate bound
//! `ω̄`, and trajectory replay that checks those guarantees on traces.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod certificates;
pub mod dwell_time;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod reproduce;
pub mod set_constructions;
pub mod simulate;
pub mod switching;
pub mod system_model;

pub use certificates::{build_certificate, CertificateSet, Epsilon, QuadraticCertificate, RateConvention};
pub use dwell_time::{AnalysisConfig, RobustnessReport};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use set_constructions::{closed_form_bounds, SetConstants};
pub use simulate::SimulationTrace;
pub use switching::{SwitchingBudget, SwitchingSignal};
pub use system_model::{DisturbanceSpec, LinearAffineSubsystem, SystemFamily, TimeDomain};
