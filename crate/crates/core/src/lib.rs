//! Ratios of functional determinants for Sturm–Liouville operators
//! `L = -d/dx (P(x) d/dx) + R(x)` and systems thereof, under arbitrary linear
//! boundary conditions `M (u(a), v(a)) + N (u(b), v(b)) = 0` with `v = P u'`.
//!
//! The determinant ratio is computed from homogeneous (`λ = 0`) solutions
//! only. Operators with a single zero mode are handled by extracting that
//! mode; an eigenvalue-product oracle in [`oracle`] provides an independent
//! check.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, reports and
//! the command-line front end live in the `funcdet` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod boundary;
pub mod corpus;
pub mod detratio;
mod error;
pub mod expr;
pub mod linalg;
pub mod model;
mod ode;
pub mod oracle;
pub mod propagate;
mod quad;
pub mod zeromode;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

pub use boundary::{BcClassification, BcKind};
pub use detratio::{NormalizedSolution, RatioMethod, RatioResult};
pub use expr::Expression;
pub use linalg::CMatrix;
pub use model::{BoundaryConditions, Problem, SolverSettings, ValidationReport};
pub use propagate::{FundamentalMatrix, SolutionPath};
pub use zeromode::{DataSplit, ZeroModeResult};
