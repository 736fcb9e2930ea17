use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::LayeredEarthModel;
use crate::jacobian::DEFAULT_FD_STEP;
use crate::regularize::{OperatorKind, DEFAULT_KAPPA};

/// Relative-change tolerance used when none is configured.
pub const DEFAULT_STOP_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_ALPHA_MIN: f64 = 1e-5;
/// Bounds for the default constant starting conductivity, S/m.
pub const INITIAL_SIGMA_RANGE: (f64, f64) = (1e-3, 1.0);

/// How the Jacobian of each Gauss-Newton step is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum StepSource {
    Analytic,
    #[serde(alias = "fd")]
    FiniteDifference {
        #[serde(default = "default_fd_step")]
        delta: f64,
    },
    /// Exact Jacobian every `refresh` iterations, rank-one updates in between.
    Broyden { refresh: usize },
}

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

/// Rule that turns the sweep over truncation indices into one choice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", deny_unknown_fields)]
pub enum ChoiceRule {
    Discrepancy {
        #[serde(default = "default_kappa")]
        kappa: f64,
        noise_norm: f64,
    },
    Corner,
    #[serde(alias = "res_reg")]
    Resreg,
    /// Smallest relative error against a known profile.
    Oracle { sigma_true: Vec<f64> },
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

impl ChoiceRule {
    pub fn name(&self) -> &'static str {
        match self {
            ChoiceRule::Discrepancy { .. } => "discrepancy",
            ChoiceRule::Corner => "corner",
            ChoiceRule::Resreg => "resreg",
            ChoiceRule::Oracle { .. } => "oracle",
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            ChoiceRule::Discrepancy { kappa, noise_norm } => {
                if !(kappa.is_finite() && *kappa > 1.0) {
                    return Err(Error::InvalidInput(format!("kappa must exceed 1, got {kappa}")));
                }
                if !(noise_norm.is_finite() && *noise_norm >= 0.0) {
                    return Err(Error::InvalidInput(format!("noise norm must be ≥ 0, got {noise_norm}")));
                }
            }
            ChoiceRule::Oracle { sigma_true } => {
                if sigma_true.len() != n {
                    return Err(Error::Shape(format!(
                        "oracle profile has {} entries for {n} layers",
                        sigma_true.len()
                    )));
                }
                if sigma_true.iter().any(|v| !v.is_finite()) || sigma_true.iter().all(|&v| v == 0.0) {
                    return Err(Error::InvalidInput("oracle profile must be finite and nonzero".into()));
                }
            }
            ChoiceRule::Corner | ChoiceRule::Resreg => {}
        }
        Ok(())
    }
}

/// Discretization of the subsurface into layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum LayerGrid {
    /// `n` layers, the last one a half-space whose top sits at `depth` m.
    Equispaced { n: usize, depth: f64 },
    /// Thicknesses of all layers but the half-space, m.
    Explicit { thickness: Vec<f64> },
}

impl LayerGrid {
    pub fn n_layers(&self) -> usize {
        match self {
            LayerGrid::Equispaced { n, .. } => *n,
            LayerGrid::Explicit { thickness } => thickness.len() + 1,
        }
    }

    pub fn model(&self, sigma: Vec<f64>) -> Result<LayeredEarthModel> {
        if sigma.len() != self.n_layers() {
            return Err(Error::Shape(format!(
                "{} conductivities for a {}-layer grid",
                sigma.len(),
                self.n_layers()
            )));
        }
        match self {
            LayerGrid::Equispaced { depth, .. } => LayeredEarthModel::equispaced(sigma, *depth),
            LayerGrid::Explicit { thickness } => LayeredEarthModel::new(sigma, thickness.clone()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            LayerGrid::Equispaced { n, depth } => {
                if *n < 2 {
                    return Err(Error::InvalidInput("grid needs at least two layers".into()));
                }
                if !(depth.is_finite() && *depth > 0.0) {
                    return Err(Error::InvalidInput(format!("grid depth must be positive, got {depth}")));
                }
            }
            LayerGrid::Explicit { thickness } => {
                if thickness.is_empty() {
                    return Err(Error::InvalidInput("grid needs at least two layers".into()));
                }
                if thickness.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                    return Err(Error::InvalidInput("layer thicknesses must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub grid: LayerGrid,
    pub regularizer: OperatorKind,
    pub step_source: StepSource,
    /// Truncation indices to run; `None` sweeps every admissible one.
    pub ell: Option<Vec<usize>>,
    /// Relative-change stopping tolerance. Distinct from the noise level.
    pub stop_tol: f64,
    pub max_iter: usize,
    pub alpha_min: f64,
    /// Starting profile, S/m; `None` uses a constant derived from the data.
    pub initial_sigma: Option<Vec<f64>>,
    pub choice_rule: ChoiceRule,
    /// Rules evaluated alongside the primary one and reported with it.
    pub extra_rules: Vec<ChoiceRule>,
    /// Run exactly `max_iter` iterations: the relative-change and step-floor
    /// rules no longer stop the run, and a rejected step leaves the iterate
    /// unchanged. Meant for timing.
    pub fixed_iterations: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid: LayerGrid::Equispaced { n: 20, depth: 2.0 },
            regularizer: OperatorKind::SecondDifference,
            step_source: StepSource::Analytic,
            ell: None,
            stop_tol: DEFAULT_STOP_TOL,
            max_iter: DEFAULT_MAX_ITER,
            alpha_min: DEFAULT_ALPHA_MIN,
            initial_sigma: None,
            choice_rule: ChoiceRule::Corner,
            extra_rules: Vec::new(),
            fixed_iterations: false,
        }
    }
}

impl SolverConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }

    pub fn n_layers(&self) -> usize {
        self.grid.n_layers()
    }

    pub fn rules(&self) -> impl Iterator<Item = &ChoiceRule> {
        std::iter::once(&self.choice_rule).chain(&self.extra_rules)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let n = self.n_layers();
        if n < self.regularizer.min_size() {
            return Err(Error::InvalidInput(format!(
                "{} needs at least {} layers, grid has {n}",
                self.regularizer,
                self.regularizer.min_size()
            )));
        }
        // +inf is allowed: the run then stops after its first accepted step
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidInput(format!("stop_tol must be positive, got {}", self.stop_tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min < 1.0) {
            return Err(Error::InvalidInput(format!("alpha_min must lie in (0, 1), got {}", self.alpha_min)));
        }
        match self.step_source {
            StepSource::FiniteDifference { delta } if !(delta.is_finite() && delta > 0.0) => {
                return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {delta}")));
            }
            StepSource::Broyden { refresh: 0 } => {
                return Err(Error::InvalidInput("Broyden refresh interval must be at least 1".into()));
            }
            _ => {}
        }
        if let Some(sigma) = &self.initial_sigma {
            if sigma.len() != n {
                return Err(Error::Shape(format!("initial profile has {} entries for {n} layers", sigma.len())));
            }
            if sigma.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidInput("initial conductivities must be strictly positive".into()));
            }
        }
        if let Some(ell) = &self.ell {
            if ell.is_empty() {
                return Err(Error::InvalidInput("empty truncation-index list".into()));
            }
        }
        for rule in self.rules() {
            rule.validate(n)?;
        }
        Ok(())
    }

    /// Configured start, or the constant `mean(b)` clamped to
    /// [`INITIAL_SIGMA_RANGE`].
    pub fn initial_sigma_for(&self, b: &[f64]) -> Vec<f64> {
        if let Some(sigma) = &self.initial_sigma {
            return sigma.clone();
        }
        let mean = if b.is_empty() { 0.0 } else { b.iter().sum::<f64>() / b.len() as f64 };
        let (lo, hi) = INITIAL_SIGMA_RANGE;
        // NaN-safe: a NaN mean falls to the lower bound
        let value = if mean >= lo { mean.min(hi) } else { lo };
        vec![value; self.n_layers()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_defaults() {
        let text = r#"{
            "grid": {"n": 10, "depth": 2.0},
            "regularizer": "D1",
            "step_source": {"kind": "broyden", "refresh": 5},
            "choice_rule": {"rule": "discrepancy", "noise_norm": 0.01}
        }"#;
        let c = SolverConfig::from_json_str(text).unwrap();
        assert_eq!(c.n_layers(), 10);
        assert_eq!(c.stop_tol, DEFAULT_STOP_TOL);
        assert_eq!(c.max_iter, 100);
        assert_eq!(c.choice_rule, ChoiceRule::Discrepancy { kappa: 1.5, noise_norm: 0.01 });
        let back = SolverConfig::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn explicit_grid_and_fd_alias() {
        let text = r#"{"grid": {"thickness": [0.5, 0.5]}, "regularizer": "I",
                       "step_source": {"kind": "fd"}}"#;
        let c = SolverConfig::from_json_str(text).unwrap();
        assert_eq!(c.n_layers(), 3);
        assert_eq!(c.step_source, StepSource::FiniteDifference { delta: DEFAULT_FD_STEP });
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            r#"{"stop_tol": 0}"#,
            r#"{"max_iter": 0}"#,
            r#"{"alpha_min": 1.0}"#,
            r#"{"initial_sigma": [1.0]}"#,
            r#"{"grid": {"n": 2, "depth": 1.0}, "initial_sigma": [1.0, 0.0]}"#,
            r#"{"step_source": {"kind": "broyden", "refresh": 0}}"#,
            r#"{"grid": {"n": 2, "depth": 1.0}, "regularizer": "D2"}"#,
            r#"{"choice_rule": {"rule": "discrepancy", "kappa": 1.0, "noise_norm": 1}}"#,
            r#"{"choice_rule": {"rule": "oracle", "sigma_true": [1.0]}}"#,
            r#"{"unknown": 1}"#,
            r#"{"ell": []}"#,
        ];
        for text in bad {
            assert!(SolverConfig::from_json_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn default_start_is_clamped_mean() {
        let c = SolverConfig { grid: LayerGrid::Equispaced { n: 3, depth: 1.0 }, ..Default::default() };
        assert!(c.initial_sigma_for(&[0.2, 0.4]).iter().all(|v| (v - 0.3).abs() < 1e-15));
        assert_eq!(c.initial_sigma_for(&[5.0]), vec![1.0; 3]);
        assert_eq!(c.initial_sigma_for(&[-1.0, 0.0]), vec![1e-3; 3]);
        assert_eq!(c.initial_sigma_for(&[f64::NAN]), vec![1e-3; 3]);
    }
}
