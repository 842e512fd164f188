//! Classical statistical ensembles that reproduce two-state and four-state
//! quantum mechanics, together with the matrix formalism used to check them.
//!
//! The classical side lives in [`manifold`], [`observables`], [`correlations`],
//! [`dynamics`], [`pseudo`] and [`four_state`]. The matrix side lives in
//! [`quantum`]. Every classical result has a matrix counterpart so the two can
//! be compared numerically.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlations;
pub mod dynamics;
pub mod error;
pub mod four_state;
pub mod manifold;
pub mod observables;
pub mod pseudo;
pub mod quantum;
pub mod state;

pub use error::{Error, Result};
pub use manifold::{Ensemble, Manifold, MicroState, SubstateEnsemble};
pub use observables::{Observable, TwoLevelObservable};
pub use quantum::{DensityMatrix, LBasis, Operator, WaveFunction};
pub use state::{BlochState, Level};

/// Absolute tolerance used for normalization and probability checks.
pub const TOL: f64 = 1e-12;
