//! Pipeline configuration: a TOML file mirrors every flag; flags win.

use std::path::Path;

use serde::{Deserialize, Serialize};

use goreg_core::basis::BasisConfig;
use goreg_core::error::{Error, Result};
use goreg_core::odds::OddsPolicy;
use goreg_core::penreg::{PenaltyKind, PenaltySpec, DEFAULT_ALPHA_MIX, DEFAULT_A_SCAD, DEFAULT_GAMMA_MCP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub grid_points: usize,
    pub d_max: f64,
    pub degree: usize,
    pub interior_knots: usize,
    pub denom_floor: f64,
    pub cap: f64,
    pub drop_zeros: bool,
    pub penalty: String,
    pub lambda: f64,
    pub alpha_mix: f64,
    pub a_scad: f64,
    pub gamma_mcp: f64,
    pub folds: usize,
    pub inner_folds: usize,
    pub replications: usize,
    pub n_lambda: usize,
    pub lambda_ratio: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            grid_points: 50,
            d_max: 9.6,
            degree: 3,
            interior_knots: 8,
            denom_floor: 1e-12,
            cap: 1e3,
            drop_zeros: false,
            penalty: "lasso".into(),
            lambda: 0.1,
            alpha_mix: DEFAULT_ALPHA_MIX,
            a_scad: DEFAULT_A_SCAD,
            gamma_mcp: DEFAULT_GAMMA_MCP,
            folds: 5,
            inner_folds: 5,
            replications: 100,
            n_lambda: 25,
            lambda_ratio: 1e-2,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn basis(&self) -> BasisConfig {
        BasisConfig {
            degree: self.degree,
            n_interior: self.interior_knots,
            d_max: self.d_max,
        }
    }

    pub fn policy(&self) -> Result<OddsPolicy> {
        OddsPolicy::new(self.denom_floor, self.cap)
    }

    pub fn penalty_spec(&self) -> Result<PenaltySpec> {
        let kind: PenaltyKind = self.penalty.parse()?;
        let mut spec = PenaltySpec::new(kind, self.lambda)?;
        spec.alpha_mix = self.alpha_mix;
        spec.a_scad = self.a_scad;
        spec.gamma_mcp = self.gamma_mcp;
        spec.validate()?;
        Ok(spec)
    }
}

/// Flag-level overrides; `Some` always beats the config file.
macro_rules! override_field {
    ($cfg:expr, $($field:ident : $opt:expr),+ $(,)?) => {
        $(if let Some(v) = $opt { $cfg.$field = v; })+
    };
}
pub(crate) use override_field;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_configuration() {
        let c = PipelineConfig::default();
        assert_eq!(c.grid_points, 50);
        assert_eq!(c.d_max, 9.6);
        assert_eq!(c.degree, 3);
        assert_eq!(c.interior_knots, 8);
        assert_eq!(c.folds, 5);
        assert_eq!(c.replications, 100);
        assert_eq!(c.cap, 1e3);
    }

    #[test]
    fn toml_round_trip_and_partial_file() {
        let c = PipelineConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(c, back);
        // partial files fill the rest with defaults
        let partial: PipelineConfig = toml::from_str("grid_points = 20\nseed = 9\n").unwrap();
        assert_eq!(partial.grid_points, 20);
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.d_max, 9.6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("grid_pionts = 20\n").is_err());
    }
}
