//! Penalized GLM estimation: penalty functions, proximal operators, and the
//! coordinate-descent solver with regularization paths.

mod penalty;
mod solver;

pub use penalty::{
    penalty_derivative, penalty_value, prox, zero_threshold, PenaltyKind, PenaltySpec,
    DEFAULT_ALPHA_MIX, DEFAULT_A_SCAD, DEFAULT_GAMMA_MCP,
};
pub use solver::{
    fit, fit_path, fit_standardized, lambda_path, reconstruct_beta, Convergence, FitDiagnostics,
    FitOptions, FitResult, GlmFamily, GlmSpec, InnerFit,
};
