//! Run configuration: one TOML file per experiment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catalog::{Context, FieldSpec, FunctionalSpec};
use crate::error::{Error, Result};
use crate::measure::{JumpMeasure, Region};
use crate::volterra::{Integrand, Kernel, Sigma};

use super::identities;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative discrepancy allowed for pathwise identities.
    #[serde(default = "default_pathwise")]
    pub pathwise_rel: f64,
    /// Multiple of the combined standard error for expectation identities.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Absolute tolerance of every `𝓔` quadrature.
    #[serde(default = "default_quadrature")]
    pub quadrature: f64,
}

fn default_pathwise() -> f64 {
    1e-10
}
fn default_sigma() -> f64 {
    3.0
}
fn default_quadrature() -> f64 {
    1e-12
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pathwise_rel: default_pathwise(),
            sigma: default_sigma(),
            quadrature: default_quadrature(),
        }
    }
}

/// Product kernel `1_{A₁×…×A_k}` with the extra region `A` of the field case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosSection {
    pub factors: Vec<Region>,
    pub extra: Region,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoSection {
    /// Defaults to the top-level functional.
    #[serde(default)]
    pub functional: Option<FunctionalSpec>,
    pub outer: usize,
    pub inner: usize,
    #[serde(default)]
    pub mean: Option<f64>,
    #[serde(default)]
    pub l1_eps: Option<[f64; 2]>,
    #[serde(default = "default_l1_paths")]
    pub l1_paths: usize,
    #[serde(default = "default_max_l1")]
    pub max_l1_relative_error: f64,
    #[serde(default = "default_time_nodes")]
    pub time_nodes: usize,
    #[serde(default = "default_size_nodes")]
    pub size_nodes: usize,
    /// Inner futures used by the predictability identity.
    #[serde(default = "default_check_inner")]
    pub check_inner: usize,
}

fn default_l1_paths() -> usize {
    200
}
fn default_max_l1() -> f64 {
    0.05
}
fn default_time_nodes() -> usize {
    8
}
fn default_size_nodes() -> usize {
    16
}
fn default_check_inner() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolterraSection {
    pub kernel: Kernel,
    #[serde(default = "default_sigma_field")]
    pub sigma: Sigma,
    pub integrand: Integrand,
    pub t: f64,
    /// Small-jump cutoff; chosen by the `L¹` truncation error when absent.
    #[serde(default)]
    pub truncation: Option<f64>,
    #[serde(default = "default_volterra_tol")]
    pub tol: f64,
    #[serde(default = "default_ladder")]
    pub ladder: [f64; 2],
    #[serde(default = "default_ladder_paths")]
    pub ladder_paths: usize,
    /// Allowed gap between the three-term and collapsed evaluations.
    #[serde(default = "default_consistency")]
    pub consistency: f64,
}

fn default_sigma_field() -> Sigma {
    Sigma::ONE
}
fn default_volterra_tol() -> f64 {
    1e-8
}
fn default_ladder() -> [f64; 2] {
    [0.01, 0.005]
}
fn default_ladder_paths() -> usize {
    50
}
fn default_consistency() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Default for ClassifySection {
    fn default() -> Self {
        Self {
            alphas: vec![0.5, 1.5],
            betas: vec![0.3, 0.7],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub measure: JumpMeasure,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub eps: f64,
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    /// Size of the replica worker pool.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Identities to run; empty means the whole registry.
    #[serde(default)]
    pub identities: Vec<String>,
    #[serde(default = "default_functional")]
    pub functional: FunctionalSpec,
    /// Second factor of the product rule.
    #[serde(default = "default_second")]
    pub second_functional: FunctionalSpec,
    #[serde(default = "default_field")]
    pub field: FieldSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Closed-form values both sides of an expectation identity must hit.
    #[serde(default)]
    pub oracles: BTreeMap<String, f64>,
    #[serde(default)]
    pub chaos: Option<ChaosSection>,
    #[serde(default)]
    pub cho: Option<ChoSection>,
    #[serde(default)]
    pub volterra: Option<VolterraSection>,
    #[serde(default)]
    pub classify: Option<ClassifySection>,
}

fn default_horizon() -> f64 {
    1.0
}
fn default_workers() -> usize {
    1
}
fn default_functional() -> FunctionalSpec {
    FunctionalSpec::Count
}
fn default_second() -> FunctionalSpec {
    FunctionalSpec::PathValue { t: None }
}
fn default_field() -> FieldSpec {
    FieldSpec::Constant { value: 1.0 }
}

/// Line (1-based) of the first assignment to `key`, for error messages.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn config_error(text: &str, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line: key_line(text, key),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parses and validates; every error carries a line number when one can
    /// be attributed.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        cfg.validate_with(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with("")
    }

    fn validate_with(&self, text: &str) -> Result<()> {
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            return Err(config_error(text, "name", "name must be a non-empty file-name-safe string"));
        }
        if self.replicas == 0 {
            return Err(config_error(text, "replicas", "replicas must be at least 1"));
        }
        if self.workers == 0 {
            return Err(config_error(text, "workers", "workers must be at least 1"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(config_error(text, "horizon", "horizon must be positive and finite"));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(config_error(text, "eps", "eps must be non-negative"));
        }
        let ctx = self
            .context()
            .map_err(|e| config_error(text, "kind", format!("measure: {e}")))?;
        match ctx.measure.mass(&ctx.truncation()) {
            Ok(m) if m.is_finite() => {}
            Ok(_) | Err(_) => {
                return Err(config_error(
                    text,
                    "eps",
                    "the truncation has infinite mass; raise eps",
                ))
            }
        }
        for name in &self.identities {
            if name != "all" && identities::lookup(name).is_err() {
                return Err(config_error(text, "identities", format!("unknown identity `{name}`")));
            }
        }
        for name in self.oracles.keys() {
            if identities::lookup(name).is_err() {
                return Err(config_error(text, name, format!("oracle for unknown identity `{name}`")));
            }
        }
        let t = &self.tolerances;
        if !(t.pathwise_rel > 0.0 && t.sigma > 0.0 && t.quadrature > 0.0) {
            return Err(config_error(text, "pathwise_rel", "tolerances must be positive"));
        }
        if let Some(c) = &self.chaos {
            if c.factors.is_empty() || c.factors.len() > 3 {
                return Err(config_error(text, "factors", "chaos order must be 1, 2 or 3"));
            }
        }
        if let Some(c) = &self.cho {
            if c.outer == 0 || c.inner < 2 || c.check_inner < 2 {
                return Err(config_error(text, "outer", "cho needs outer >= 1 and inner >= 2"));
            }
        }
        if let Some(v) = &self.volterra {
            v.kernel
                .validate()
                .and_then(|_| v.sigma.validate())
                .and_then(|_| v.integrand.validate())
                .map_err(|e| config_error(text, "kernel", e.to_string()))?;
            if !(v.t > 0.0) {
                return Err(config_error(text, "t", "volterra t must be positive"));
            }
        }
        Ok(())
    }

    pub fn context(&self) -> Result<Context> {
        Context::new(self.measure.clone(), self.horizon, self.eps)
    }

    /// Registry entries this run covers, in registry order.
    pub fn selected_identities(&self) -> Vec<&'static identities::IdentityInfo> {
        if self.identities.is_empty() || self.identities.iter().any(|n| n == "all") {
            return identities::REGISTRY.iter().collect();
        }
        identities::REGISTRY
            .iter()
            .filter(|i| self.identities.iter().any(|n| n == i.name))
            .collect()
    }

    /// Output directory: explicit override, then `JUMPCALC_OUT`, then the
    /// config value, then `out`; always suffixed by the experiment name.
    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        let base = cli
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
            .or_else(|| self.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        base.join(&self.name)
    }

    pub fn default_chaos(&self) -> ChaosSection {
        let t = self.horizon;
        let strip = |a: f64, b: f64| Region {
            t_min: a * t,
            t_max: b * t,
            x_inner: self.eps,
            x_outer: f64::INFINITY,
        };
        ChaosSection {
            factors: vec![strip(0.0, 0.25), strip(0.25, 0.5)],
            extra: strip(0.5, 1.0),
        }
    }
}

/// Environment variable overriding the output directory.
pub const OUTPUT_ENV: &str = "JUMPCALC_OUT";
