//! Numerical functional Itô calculus on discretely sampled paths.
//!
//! - [`path`]: stopped paths, vertical bumps, flat extensions, metrics.
//! - [`functional`]: the non-anticipative functional trait and a catalog
//!   of functionals with closed-form derivatives.
//! - [`dupire`]: finite-difference horizontal/vertical derivatives.
//! - [`frechet`]: directional derivatives, measure recovery, ramp limits.
//! - [`sfde`]: Euler–Maruyama for path-dependent SDEs.
//! - [`verify`]: Itô formula, generator and coherence checks.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dupire;
pub mod error;
pub mod exec;
pub mod frechet;
pub mod functional;
pub mod io;
pub mod matrix;
pub mod path;
pub mod sfde;
pub mod stats;
pub mod verify;

pub use dupire::FdConfig;
pub use error::{Error, Result};
pub use exec::Exec;
pub use frechet::{RampFamily, RieszRepresentation};
pub use functional::{DupireJet, Functional, SharedFunctional, Smoothness};
pub use matrix::Matrix;
pub use path::{PathView, StoppedPath, TimeGrid};
pub use sfde::{NoisePlan, SfdeModel};
pub use stats::McEstimate;
pub use verify::{CoherenceReport, ConvergenceReport};
