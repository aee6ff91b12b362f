//! Experiment configuration: a TOML file mapping onto [`ExperimentConfig`],
//! validated with key-level messages before anything runs.

use crate::error::{Error, Result};
use crate::harness::{a0_contiguous, a0_spread, DesignKind};
use crate::inference::{IntervalVariant, NormDelta};
use serde::{Deserialize, Serialize};

/// What the experiment sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Per-coordinate intervals across replicates.
    Intervals,
    /// Coverage and active-set size across the full lambda grid.
    Sensitivity,
    /// Pairwise and joint confidence sets.
    Sets,
}

/// Placement of the true support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum A0Spec {
    /// "contiguous" or "spread".
    Named(String),
    /// Explicit 0-based indices.
    Explicit(Vec<usize>),
}

impl Default for A0Spec {
    fn default() -> Self {
        A0Spec::Named("contiguous".to_string())
    }
}

/// Penalty selection rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaRule {
    /// A fixed positive value.
    Fixed(f64),
    /// Pick one index (0-based) of the per-dataset grid.
    GridIndex { grid_index: usize },
    /// "cv1se": cross-validation with the one-standard-error rule.
    Named(String),
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Named("cv1se".to_string())
    }
}

fn default_a0_size() -> usize {
    5
}
fn default_sigma2() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.05
}
fn default_replicates() -> usize {
    20
}
fn default_cv_folds() -> usize {
    10
}
fn default_grid_count() -> usize {
    20
}
fn default_variants() -> Vec<IntervalVariant> {
    vec![
        IntervalVariant::Oracle,
        IntervalVariant::Plugin,
        IntervalVariant::Randomized,
        IntervalVariant::Conservative,
    ]
}
fn default_k_boundary() -> usize {
    20
}
fn default_n_keep() -> usize {
    500
}
fn default_burn_in() -> usize {
    1000
}
fn default_thin() -> usize {
    1
}
fn default_tau_multiplier() -> f64 {
    2.0
}
fn default_verify_fraction() -> f64 {
    0.01
}
fn default_beta_low() -> f64 {
    -1.0
}
fn default_beta_high() -> f64 {
    1.0
}
fn default_delta() -> NormDelta {
    NormDelta::LInf
}
fn default_true() -> bool {
    true
}

/// Full experiment description; unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub design: DesignKind,
    pub n: usize,
    pub p: usize,
    #[serde(default)]
    pub a0: A0Spec,
    #[serde(default = "default_a0_size")]
    pub a0_size: usize,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub lambda: LambdaRule,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_grid_count")]
    pub grid_count: usize,
    #[serde(default = "default_variants")]
    pub variants: Vec<IntervalVariant>,
    #[serde(default = "default_k_boundary")]
    pub k_boundary: usize,
    #[serde(default = "default_n_keep")]
    pub n_keep: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_tau_multiplier")]
    pub tau_multiplier: f64,
    #[serde(default = "default_verify_fraction")]
    pub verify_fraction: f64,
    #[serde(default = "default_beta_low")]
    pub beta_low: f64,
    #[serde(default = "default_beta_high")]
    pub beta_high: f64,
    /// Sets mode: build all pairwise sets.
    #[serde(default = "default_true")]
    pub pairwise: bool,
    /// Sets mode: build the joint set with `H = I`.
    #[serde(default = "default_true")]
    pub joint: bool,
    #[serde(default = "default_delta")]
    pub delta: NormDelta,
}

impl ExperimentConfig {
    /// Parses and validates a TOML experiment file.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Err(Error::InvalidConfig { message });
        if self.n < 2 {
            return fail(format!("n: need at least 2 rows, got {}", self.n));
        }
        if self.p < 1 {
            return fail("p: need at least 1 column".to_string());
        }
        if self.a0_size == 0 || self.a0_size > self.p {
            return fail(format!(
                "a0_size: must be in 1..={}, got {}",
                self.p, self.a0_size
            ));
        }
        if !(self.sigma2 > 0.0) {
            return fail(format!("sigma2: must be positive, got {}", self.sigma2));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return fail(format!("alpha: must be in (0, 1), got {}", self.alpha));
        }
        if self.replicates == 0 {
            return fail("replicates: must be at least 1".to_string());
        }
        if self.cv_folds < 2 || self.cv_folds > self.n {
            return fail(format!(
                "cv_folds: must be in 2..={}, got {}",
                self.n, self.cv_folds
            ));
        }
        if self.grid_count < 2 {
            return fail(format!(
                "grid_count: must be at least 2, got {}",
                self.grid_count
            ));
        }
        if self.variants.is_empty() {
            return fail("variants: must name at least one interval variant".to_string());
        }
        if self.k_boundary == 0 {
            return fail("k_boundary: must be at least 1".to_string());
        }
        if self.n_keep == 0 {
            return fail("n_keep: must be at least 1".to_string());
        }
        if self.thin == 0 {
            return fail("thin: must be at least 1".to_string());
        }
        if !(self.tau_multiplier > 0.0) {
            return fail(format!(
                "tau_multiplier: must be positive, got {}",
                self.tau_multiplier
            ));
        }
        if !(0.0..=1.0).contains(&self.verify_fraction) {
            return fail(format!(
                "verify_fraction: must be in [0, 1], got {}",
                self.verify_fraction
            ));
        }
        if !(self.beta_low < self.beta_high) {
            return fail(format!(
                "beta_low/beta_high: empty range [{}, {}]",
                self.beta_low, self.beta_high
            ));
        }
        match &self.a0 {
            A0Spec::Named(name) if name == "contiguous" || name == "spread" => {}
            A0Spec::Named(name) => {
                return fail(format!(
                    "a0: unknown placement \"{name}\" (expected \"contiguous\", \"spread\", or an index list)"
                ));
            }
            A0Spec::Explicit(idx) => {
                if idx.is_empty() {
                    return fail("a0: explicit index list is empty".to_string());
                }
                if idx.iter().any(|&j| j >= self.p) {
                    return fail(format!("a0: index out of range for p = {}", self.p));
                }
            }
        }
        match &self.lambda {
            LambdaRule::Fixed(v) => {
                if !(*v > 0.0) {
                    return fail(format!("lambda: fixed value must be positive, got {v}"));
                }
            }
            LambdaRule::GridIndex { grid_index } => {
                if *grid_index >= self.grid_count {
                    return fail(format!(
                        "lambda.grid_index: must be below grid_count ({}), got {}",
                        self.grid_count, grid_index
                    ));
                }
            }
            LambdaRule::Named(name) => {
                if name != "cv1se" {
                    return fail(format!(
                        "lambda: unknown rule \"{name}\" (expected \"cv1se\", a number, or {{ grid_index = i }})"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Resolved true support.
    pub fn a0_indices(&self) -> Vec<usize> {
        match &self.a0 {
            A0Spec::Named(name) if name == "spread" => a0_spread(self.p, self.a0_size),
            A0Spec::Named(_) => a0_contiguous(self.a0_size),
            A0Spec::Explicit(idx) => {
                let mut v = idx.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "intervals"
design = "identity"
n = 50
p = 100
replicates = 2
seed = 7
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.k_boundary, 20);
        assert_eq!(cfg.n_keep, 500);
        assert_eq!(cfg.a0_indices(), vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.variants.len(), 4);
        assert!(matches!(cfg.lambda, LambdaRule::Named(ref s) if s == "cv1se"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\nnot_a_key = 3\n");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn bad_values_get_key_specific_messages() {
        let text = MINIMAL.replace("n = 50", "n = 1");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::InvalidConfig { message }) => assert!(message.starts_with("n:")),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
        let text = format!("{MINIMAL}\nalpha = 1.5\n");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::InvalidConfig { message }) => assert!(message.starts_with("alpha:")),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn lambda_rules_parse_in_all_three_forms() {
        let fixed = format!("{MINIMAL}\nlambda = 0.25\n");
        assert!(matches!(
            ExperimentConfig::from_toml(&fixed).unwrap().lambda,
            LambdaRule::Fixed(v) if (v - 0.25).abs() < 1e-15
        ));
        let grid = format!("{MINIMAL}\nlambda = {{ grid_index = 11 }}\n");
        assert!(matches!(
            ExperimentConfig::from_toml(&grid).unwrap().lambda,
            LambdaRule::GridIndex { grid_index: 11 }
        ));
        let named = format!("{MINIMAL}\nlambda = \"nope\"\n");
        assert!(ExperimentConfig::from_toml(&named).is_err());
    }

    #[test]
    fn spread_support_resolves_against_p() {
        let text = format!("{MINIMAL}\na0 = \"spread\"\n");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.a0_indices(), vec![0, 20, 40, 60, 80]);
    }
}
