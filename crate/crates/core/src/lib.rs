//! Scalar-on-distribution regression where the functional covariate is a
//! generalized odds object of each subject's empirical activity distribution.
//!
//! Pipeline, in dependency order:
//!
//! 1. [`ingest`] — minute-level device records, wear-time QC, the analysis
//!    window, and the log transform, ending in per-subject observation sets.
//! 2. [`empdist`] — the shared evaluation grid and exact empirical cell
//!    probabilities, CDF, and survival values on it.
//! 3. [`odds`] — 1-, 2-, and 4-index generalized odds evaluations with the
//!    capping policy, including the rank-1 factorization of the 4-index case.
//! 4. [`basis`] — clamped B-splines on the activity domain.
//! 5. [`features`] — quadrature of basis tensor products against odds
//!    surfaces, feature-matrix assembly, and column standardization.
//! 6. [`penreg`] — penalized GLM fitting (lasso, elastic net, SCAD, MCP) by
//!    cyclic coordinate descent with warm-started lambda paths.
//! 7. [`evalcv`] — repeated k-fold cross-validation with nested lambda
//!    selection, baseline models, and R² reporting.
//! 8. [`synth`] — a synthetic benchmark whose outcome depends on the shape of
//!    the upper tail, not just its mass.
//! 9. [`io`] — a binary on-disk container for assembled designs.

pub mod basis;
pub mod empdist;
pub mod error;
pub mod evalcv;
pub mod features;
pub mod ingest;
pub mod io;
pub mod odds;
pub mod penreg;
pub mod synth;

pub use error::{Error, Result};
