//! JSON configuration schema for the CLI, with the resolved form echoed into
//! every report for reproducibility. All tolerances default to the values
//! documented on the corresponding options structs and can be overridden
//! field by field.

use serde::{Deserialize, Serialize};

use crate::dynamics::JacobianScheme;
use crate::error::{EquifullerError, Result};
use crate::fuller::FullerOptions;
use crate::group::{enumerate_subgroup_classes, FiniteGroup, GroupSpec, IsotropyLattice};
use crate::region::Region;
use crate::sweep::SweepOptions;
use crate::systems::{builtin, BuiltinSystem};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Symmetry group; required for `marks`, ignored by system commands
    /// (builtin systems carry their own group and action).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpec>,
    /// Builtin system name for `index`, `sweep` and `check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    /// Override of the system's default invariant region.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    /// Override of the system's default period window (a, b).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    /// Override of the system's default parameter vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nondeg: Option<NondegConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Inclusive parameter range (lo, hi) for the first lambda component.
    pub range: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<usize>,
}

/// Optional overrides for the numerical knobs; absent fields keep the module
/// defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_random_seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_period_seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_factor: Option<f64>,
    /// "variational" (default) or "fd".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian_scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reseed_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin_tol: Option<f64>,
}

/// Affine symbolic coefficient c(lambda) = constant + linear . lambda, the
/// builtin family shape accepted by the criterion checkers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineCoeff {
    pub constant: f64,
    #[serde(default)]
    pub linear: Vec<f64>,
}

impl AffineCoeff {
    pub fn eval(&self, lambda: &[f64]) -> f64 {
        self.constant
            + self
                .linear
                .iter()
                .zip(lambda)
                .map(|(c, l)| c * l)
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Z2Family {
    pub h: AffineCoeff,
    #[serde(default)]
    pub lambda0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S1Family {
    pub a: AffineCoeff,
    pub b: AffineCoeff,
    #[serde(default)]
    pub lambda0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NondegConfig {
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z2: Option<Z2Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s1: Option<S1Family>,
}

fn default_fd_step() -> f64 {
    1e-4
}

impl Config {
    pub fn from_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            EquifullerError::Config(format!(
                "line {}, column {}: {}",
                e.line(),
                e.column(),
                e
            ))
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EquifullerError::Config(format!("{}: {}", path.display(), e)))?;
        Self::from_str(&text)
    }

    /// Build the configured group.
    pub fn build_group(&self) -> Result<FiniteGroup> {
        match &self.group {
            Some(spec) => spec.build(),
            None => Err(EquifullerError::Config(
                "config needs a \"group\" section".into(),
            )),
        }
    }

    pub fn build_lattice(&self) -> Result<IsotropyLattice> {
        enumerate_subgroup_classes(&self.build_group()?)
    }

    /// Resolve the builtin system with config overrides applied and the
    /// region checked for invariance.
    pub fn resolve_scenario(&self) -> Result<Scenario> {
        let name = self.system.as_deref().ok_or_else(|| {
            EquifullerError::Config("config needs a \"system\" name".into())
        })?;
        let base = builtin(name)?;
        let region = self.region.clone().unwrap_or_else(|| base.region.clone());
        if !region.is_invariant_under(base.system.action()) {
            return Err(EquifullerError::Config(
                "configured region is not invariant under the group action".into(),
            ));
        }
        let window = self.window.unwrap_or(base.window);
        let lambda = self
            .lambda
            .clone()
            .unwrap_or_else(|| base.default_lambda.clone());
        if lambda.len() != base.system.param_dim() {
            return Err(EquifullerError::Config(format!(
                "system \"{}\" takes {} parameter(s), config gives {}",
                name,
                base.system.param_dim(),
                lambda.len()
            )));
        }
        Ok(Scenario {
            builtin: base,
            region,
            window,
            lambda,
        })
    }

    /// Fuller options with numeric overrides and an optional seed override
    /// from the command line.
    pub fn fuller_options(&self, seed: Option<u64>) -> Result<FullerOptions> {
        let mut opts = FullerOptions::default();
        let n = &self.numerics;
        if let Some(v) = n.n_random_seeds {
            opts.search.n_random_seeds = v;
        }
        if let Some(v) = n.n_period_seeds {
            opts.search.n_period_seeds = v;
        }
        if let Some(v) = seed.or(n.rng_seed) {
            opts.search.rng_seed = v;
        }
        if let Some(v) = n.radius_factor {
            opts.radius_factor = v;
        }
        if let Some(s) = &n.jacobian_scheme {
            opts.scheme = match s.as_str() {
                "variational" => JacobianScheme::Variational,
                "fd" => JacobianScheme::FiniteDifference,
                other => {
                    return Err(EquifullerError::Config(format!(
                        "unknown jacobian_scheme \"{other}\" (expected variational|fd)"
                    )))
                }
            };
        }
        Ok(opts)
    }

    pub fn sweep_options(&self, seed: Option<u64>) -> Result<(SweepOptions, (f64, f64))> {
        let sc = self
            .sweep
            .as_ref()
            .ok_or_else(|| EquifullerError::Config("config needs a \"sweep\" section".into()))?;
        let mut opts = SweepOptions {
            fuller: self.fuller_options(seed)?,
            ..SweepOptions::default()
        };
        if let Some(v) = sc.n_grid {
            opts.n_grid = v;
        }
        let n = &self.numerics;
        if let Some(v) = n.reseed_every {
            opts.reseed_every = v;
        }
        if let Some(v) = n.event_tol {
            opts.event_tol = v;
        }
        if let Some(v) = n.margin_tol {
            opts.margin_tol = v;
        }
        Ok((opts, sc.range))
    }

    /// The resolved config echoed into reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// A builtin system with all config overrides resolved.
pub struct Scenario {
    pub builtin: BuiltinSystem,
    pub region: Region,
    pub window: (f64, f64),
    pub lambda: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtin_group_and_overrides() {
        let cfg = Config::from_str(
            r#"{
                "group": {"builtin": "cyclic", "n": 4},
                "system": "hopf_z2",
                "window": [4.0, 8.0],
                "numerics": {"n_random_seeds": 8}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.build_group().unwrap().order(), 4);
        let sc = cfg.resolve_scenario().unwrap();
        assert_eq!(sc.window, (4.0, 8.0));
        let opts = cfg.fuller_options(Some(7)).unwrap();
        assert_eq!(opts.search.n_random_seeds, 8);
        assert_eq!(opts.search.rng_seed, 7);
    }

    #[test]
    fn parses_explicit_table() {
        let cfg = Config::from_str(r#"{"group": {"order": 2, "mul": [[0,1],[1,0]]}}"#).unwrap();
        assert_eq!(cfg.build_group().unwrap().order(), 2);
    }

    #[test]
    fn malformed_table_is_a_config_error() {
        let cfg = Config::from_str(r#"{"group": {"order": 3, "mul": [[0,1],[1,0]]}}"#).unwrap();
        assert!(matches!(
            cfg.build_group(),
            Err(EquifullerError::Config(_)) | Err(EquifullerError::InvalidGroup(_))
        ));
    }

    #[test]
    fn parse_error_reports_position() {
        let err = Config::from_str("{\n  \"system\": }").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn noninvariant_region_rejected() {
        let cfg = Config::from_str(
            r#"{"system": "axis_z2", "region": {"box": {"half_widths": [2.0, 2.0, 1.0]}}}"#,
        )
        .unwrap();
        // the axis_z2 reflection preserves any axis-aligned box
        assert!(cfg.resolve_scenario().is_ok());
        let bad = Config::from_str(
            r#"{"system": "axis_z2", "region": {"box": {"half_widths": [2.0, 2.0]}}}"#,
        )
        .unwrap();
        assert!(bad.resolve_scenario().is_err());
    }

    #[test]
    fn nondeg_affine_families() {
        let cfg = Config::from_str(
            r#"{"nondeg": {"z2": {"h": {"constant": 1.0, "linear": [1.0]}, "lambda0": [0.0]}}}"#,
        )
        .unwrap();
        let nd = cfg.nondeg.unwrap();
        let fam = nd.z2.unwrap();
        assert_eq!(fam.h.eval(&[0.25]), 1.25);
        assert_eq!(nd.fd_step, 1e-4);
    }
}
