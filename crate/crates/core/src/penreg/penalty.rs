//! Coordinatewise penalty functions (lasso, elastic net, SCAD, MCP) and their
//! exact scaled proximal operators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Lasso,
    ElasticNet,
    Scad,
    Mcp,
}

impl std::str::FromStr for PenaltyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(PenaltyKind::Lasso),
            "elnet" | "elastic_net" => Ok(PenaltyKind::ElasticNet),
            "scad" => Ok(PenaltyKind::Scad),
            "mcp" => Ok(PenaltyKind::Mcp),
            other => Err(Error::Config(format!("unknown penalty `{other}`"))),
        }
    }
}

/// Penalty with its tuning parameters. `alpha_mix` is the elastic-net mixing
/// weight on the l1 term; `a_scad` and `gamma_mcp` are the nonconvexity knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub alpha_mix: f64,
    pub a_scad: f64,
    pub gamma_mcp: f64,
}

pub const DEFAULT_ALPHA_MIX: f64 = 0.5;
pub const DEFAULT_A_SCAD: f64 = 3.7;
pub const DEFAULT_GAMMA_MCP: f64 = 3.0;

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda: f64) -> Result<Self> {
        let spec = PenaltySpec {
            kind,
            lambda,
            alpha_mix: DEFAULT_ALPHA_MIX,
            a_scad: DEFAULT_A_SCAD,
            gamma_mcp: DEFAULT_GAMMA_MCP,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        PenaltySpec { lambda, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.kind == PenaltyKind::ElasticNet && !(self.alpha_mix > 0.0 && self.alpha_mix <= 1.0)
        {
            return Err(Error::Config(format!(
                "alpha_mix must be in (0, 1], got {}",
                self.alpha_mix
            )));
        }
        if self.kind == PenaltyKind::Scad && !(self.a_scad > 2.0) {
            return Err(Error::Config(format!("a_scad must be > 2, got {}", self.a_scad)));
        }
        if self.kind == PenaltyKind::Mcp && !(self.gamma_mcp > 1.0) {
            return Err(Error::Config(format!(
                "gamma_mcp must be > 1, got {}",
                self.gamma_mcp
            )));
        }
        Ok(())
    }
}

/// P(t; lambda) for t >= 0, exact closed forms.
pub fn penalty_value(spec: &PenaltySpec, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    let lambda = spec.lambda;
    match spec.kind {
        PenaltyKind::Lasso => lambda * t,
        PenaltyKind::ElasticNet => {
            let alpha = spec.alpha_mix;
            lambda * ((1.0 - alpha) * t * t / 2.0 + alpha * t)
        }
        PenaltyKind::Scad => {
            let a = spec.a_scad;
            if t <= lambda {
                lambda * t
            } else if t <= a * lambda {
                (2.0 * a * lambda * t - t * t - lambda * lambda) / (2.0 * (a - 1.0))
            } else {
                (a + 1.0) * lambda * lambda / 2.0
            }
        }
        PenaltyKind::Mcp => {
            let gamma = spec.gamma_mcp;
            if t <= gamma * lambda {
                lambda * t - t * t / (2.0 * gamma)
            } else {
                gamma * lambda * lambda / 2.0
            }
        }
    }
}

/// dP/dt for t > 0 (used in KKT residuals).
pub fn penalty_derivative(spec: &PenaltySpec, t: f64) -> f64 {
    debug_assert!(t > 0.0);
    let lambda = spec.lambda;
    match spec.kind {
        PenaltyKind::Lasso => lambda,
        PenaltyKind::ElasticNet => {
            lambda * ((1.0 - spec.alpha_mix) * t + spec.alpha_mix)
        }
        PenaltyKind::Scad => {
            let a = spec.a_scad;
            if t <= lambda {
                lambda
            } else if t <= a * lambda {
                (a * lambda - t) / (a - 1.0)
            } else {
                0.0
            }
        }
        PenaltyKind::Mcp => {
            let gamma = spec.gamma_mcp;
            if t <= gamma * lambda {
                lambda - t / gamma
            } else {
                0.0
            }
        }
    }
}

/// Subgradient bound at zero: theta_j = 0 is stationary iff |gradient| is at
/// most this value.
pub fn zero_threshold(spec: &PenaltySpec) -> f64 {
    match spec.kind {
        PenaltyKind::ElasticNet => spec.lambda * spec.alpha_mix,
        _ => spec.lambda,
    }
}

/// Exact minimizer of h(theta) = step_scale/2 * (theta - z)^2 + P(|theta|).
///
/// Each penalty is piecewise quadratic in |theta|, so the minimum over every
/// piece is its clamped stationary point or a piece boundary; the operator
/// enumerates those candidates and picks the best. This stays exact even in
/// the concave-piece regimes (step_scale*(a-1) <= 1, step_scale*gamma <= 1)
/// where the usual closed-form thresholding rules break down.
pub fn prox(spec: &PenaltySpec, z: f64, step_scale: f64) -> f64 {
    debug_assert!(step_scale > 0.0);
    let sign = if z < 0.0 { -1.0 } else { 1.0 };
    let z = z.abs();
    let s = step_scale;
    let lambda = spec.lambda;

    let solution = match spec.kind {
        PenaltyKind::Lasso => (z - lambda / s).max(0.0),
        PenaltyKind::ElasticNet => {
            let alpha = spec.alpha_mix;
            ((s * z - lambda * alpha) / (s + lambda * (1.0 - alpha))).max(0.0)
        }
        PenaltyKind::Scad => {
            let a = spec.a_scad;
            let mut candidates = vec![0.0, lambda, a * lambda, z];
            // piece [0, lambda]: P' = lambda
            candidates.push((z - lambda / s).clamp(0.0, lambda));
            // piece (lambda, a*lambda]: P' = (a*lambda - t)/(a-1)
            let denom = s * (a - 1.0) - 1.0;
            if denom.abs() > 1e-12 {
                let stat = (s * z * (a - 1.0) - a * lambda) / denom;
                candidates.push(stat.clamp(lambda, a * lambda));
            }
            // piece (a*lambda, inf): P' = 0
            candidates.push(z.max(a * lambda));
            best_candidate(spec, z, s, &candidates)
        }
        PenaltyKind::Mcp => {
            let gamma = spec.gamma_mcp;
            let mut candidates = vec![0.0, gamma * lambda, z];
            // piece [0, gamma*lambda]: P' = lambda - t/gamma
            let denom = s * gamma - 1.0;
            if denom.abs() > 1e-12 {
                let stat = gamma * (s * z - lambda) / denom;
                candidates.push(stat.clamp(0.0, gamma * lambda));
            }
            candidates.push(z.max(gamma * lambda));
            best_candidate(spec, z, s, &candidates)
        }
    };
    sign * solution
}

fn best_candidate(spec: &PenaltySpec, z: f64, s: f64, candidates: &[f64]) -> f64 {
    let objective = |t: f64| 0.5 * s * (t - z) * (t - z) + penalty_value(spec, t);
    let mut best = candidates[0];
    let mut best_value = objective(best);
    for &t in &candidates[1..] {
        let v = objective(t);
        if v < best_value {
            best_value = v;
            best = t;
        }
    }
    best
}
