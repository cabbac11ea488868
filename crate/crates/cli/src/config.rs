//! Experiment configuration: JSON in, validated plan out.
//!
//! Unknown fields anywhere in the config are rejected so that typos surface
//! as config errors instead of silently running with defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use slopebench_core::{Error, Result};

use crate::problems::Registry;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem_id: String,
    pub solver_id: String,
    #[serde(default)]
    pub solver_params: SolverParams,
    /// Start point; the problem default applies when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub stop: StopSpec,
    /// Value accuracy demanded of inexact subproblem solves.
    #[serde(default = "default_subproblem_tol")]
    pub subproblem_tol: f64,
    /// Seeds every sampling pass (majorization, approximator fits).
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record_envelope_slopes: bool,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    /// Proximal-point modulus alpha; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Prox-linear modulus mu; defaults to the problem's default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    pub step_tol: f64,
    pub max_iter: usize,
}

fn default_subproblem_tol() -> f64 {
    1e-12
}

fn default_gap_window() -> (f64, f64) {
    (1e-10, 1e-2)
}

fn default_theta_tol() -> f64 {
    0.05
}

fn default_per_segment() -> usize {
    40
}

fn default_loglog_tol() -> f64 {
    0.2
}

fn default_ratio_tol() -> f64 {
    1e-6
}

fn default_tail_fraction() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

fn default_slope_tol() -> f64 {
    1e-4
}

fn default_pairs() -> usize {
    500
}

fn default_sample_box() -> (f64, f64) {
    (-2.0, 2.0)
}

/// One requested diagnostic. Where a parameter is omitted the solver's own
/// constants apply: alpha from the proximal-point modulus, beta = 1/(2 alpha),
/// delta = 1/(4 alpha).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    KlFit {
        #[serde(default = "default_gap_window")]
        gap_window: (f64, f64),
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expected_theta: Option<f64>,
        #[serde(default = "default_theta_tol")]
        theta_tol: f64,
        /// Geometric refinements per trace segment when densifying samples.
        #[serde(default = "default_per_segment")]
        per_segment: usize,
    },
    RateFit {
        window: (usize, usize),
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expected_loglog: Option<f64>,
        #[serde(default = "default_loglog_tol")]
        loglog_tol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expected_ratio: Option<f64>,
        #[serde(default = "default_ratio_tol")]
        ratio_tol: f64,
    },
    BasicDescent {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    SlopeDescent {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    KeyInequality {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        #[serde(default = "default_gap_window")]
        gap_window: (f64, f64),
        #[serde(default = "default_per_segment")]
        per_segment: usize,
    },
    ValueConvergence {
        #[serde(default = "default_true")]
        moderate_growth: bool,
        /// Tail sup of k*gap must stay below this fraction of the head sup.
        #[serde(default = "default_tail_fraction")]
        tail_fraction: f64,
    },
    ErrorBound {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
        /// Reference minimizer; the problem's known one applies when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        minimizer: Option<Vec<f64>>,
        #[serde(default = "default_gap_window")]
        gap_window: (f64, f64),
        #[serde(default = "default_per_segment")]
        per_segment: usize,
    },
    Criticality {
        #[serde(default = "default_slope_tol")]
        slope_tol: f64,
    },
    Feasibility {},
    EnvelopeDescent {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        beta: Option<f64>,
    },
    Majorization {
        /// Override modulus; rebuilds the model on the composite facet.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default = "default_pairs")]
        pairs: usize,
        #[serde(default = "default_sample_box")]
        sample_box: (f64, f64),
    },
    FixedPoint {
        /// Step-length certificate; the run's stop tolerance applies when
        /// absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_tol: Option<f64>,
        #[serde(default = "default_slope_tol")]
        slope_tol: f64,
    },
}

impl CheckSpec {
    pub fn id(&self) -> &'static str {
        match self {
            CheckSpec::KlFit { .. } => "kl_fit",
            CheckSpec::RateFit { .. } => "rate_fit",
            CheckSpec::BasicDescent { .. } => "basic_descent",
            CheckSpec::SlopeDescent { .. } => "slope_descent",
            CheckSpec::KeyInequality { .. } => "key_inequality",
            CheckSpec::ValueConvergence { .. } => "value_convergence",
            CheckSpec::ErrorBound { .. } => "error_bound",
            CheckSpec::Criticality { .. } => "criticality",
            CheckSpec::Feasibility {} => "feasibility",
            CheckSpec::EnvelopeDescent { .. } => "envelope_descent",
            CheckSpec::Majorization { .. } => "majorization",
            CheckSpec::FixedPoint { .. } => "fixed_point",
        }
    }

    fn validate(&self) -> Result<()> {
        let window_ok = |w: (f64, f64)| w.0 >= 0.0 && w.0 < w.1 && w.1.is_finite();
        match self {
            CheckSpec::KlFit { gap_window, theta_tol, per_segment, .. } => {
                if !window_ok(*gap_window) {
                    return Err(Error::invalid(format!(
                        "gap window ({}, {}) must satisfy 0 <= lo < hi",
                        gap_window.0, gap_window.1
                    )));
                }
                if *per_segment == 0 {
                    return Err(Error::invalid("per_segment must be at least 1"));
                }
                if !(*theta_tol > 0.0) {
                    return Err(Error::invalid("theta tolerance must be positive"));
                }
                Ok(())
            }
            CheckSpec::KeyInequality { gap_window, per_segment, .. }
            | CheckSpec::ErrorBound { gap_window, per_segment, .. } => {
                if !window_ok(*gap_window) {
                    return Err(Error::invalid(format!(
                        "gap window ({}, {}) must satisfy 0 <= lo < hi",
                        gap_window.0, gap_window.1
                    )));
                }
                if *per_segment == 0 {
                    return Err(Error::invalid("per_segment must be at least 1"));
                }
                Ok(())
            }
            CheckSpec::RateFit { window, loglog_tol, ratio_tol, .. } => {
                if window.0 >= window.1 {
                    return Err(Error::invalid("rate window must satisfy lo < hi"));
                }
                if !(*loglog_tol > 0.0 && *ratio_tol > 0.0) {
                    return Err(Error::invalid("rate tolerances must be positive"));
                }
                Ok(())
            }
            CheckSpec::ValueConvergence { tail_fraction, .. } => {
                if !(*tail_fraction > 0.0 && *tail_fraction < 1.0) {
                    return Err(Error::invalid("tail fraction must lie in (0, 1)"));
                }
                Ok(())
            }
            CheckSpec::Criticality { slope_tol } | CheckSpec::FixedPoint { slope_tol, .. } => {
                if !(*slope_tol > 0.0) {
                    return Err(Error::invalid("slope tolerance must be positive"));
                }
                Ok(())
            }
            CheckSpec::Majorization { pairs, sample_box, mu } => {
                if *pairs == 0 {
                    return Err(Error::invalid("majorization needs at least one pair"));
                }
                if !(sample_box.0 < sample_box.1) {
                    return Err(Error::invalid("sample box must satisfy lo < hi"));
                }
                if let Some(m) = mu {
                    if !(*m > 0.0) {
                        return Err(Error::invalid("majorization mu override must be positive"));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

impl ExperimentConfig {
    /// Everything the registry can answer without building the problem.
    pub fn validate(&self, registry: &Registry) -> Result<()> {
        let def = registry.problem(&self.problem_id)?;
        registry.solver_known(&self.solver_id)?;
        if !def.supports(&self.solver_id) {
            return Err(Error::invalid(format!(
                "solver '{}' is not applicable to problem '{}'",
                self.solver_id, self.problem_id
            )));
        }
        match self.solver_id.as_str() {
            "prox_point" => {
                if self.solver_params.mu.is_some() {
                    return Err(Error::invalid("prox_point takes alpha, not mu"));
                }
                if let Some(a) = self.solver_params.alpha {
                    if !(a > 0.0 && a.is_finite()) {
                        return Err(Error::invalid(format!("alpha {a} must be positive")));
                    }
                }
            }
            "prox_linear" => {
                if self.solver_params.alpha.is_some() {
                    return Err(Error::invalid("prox_linear takes mu, not alpha"));
                }
                if let Some(m) = self.solver_params.mu {
                    if !(m > 0.0 && m.is_finite()) {
                        return Err(Error::invalid(format!("mu {m} must be positive")));
                    }
                }
            }
            _ => {
                if self.solver_params.alpha.is_some() || self.solver_params.mu.is_some() {
                    return Err(Error::invalid("moving_balls takes no solver parameters"));
                }
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != def.dim() {
                return Err(Error::DimensionMismatch { expected: def.dim(), actual: x0.len() });
            }
        }
        if !(self.stop.step_tol > 0.0 && self.stop.step_tol.is_finite()) {
            return Err(Error::invalid("stop.step_tol must be positive"));
        }
        if self.stop.max_iter == 0 {
            return Err(Error::invalid("stop.max_iter must be at least 1"));
        }
        if !(self.subproblem_tol > 0.0 && self.subproblem_tol.is_finite()) {
            return Err(Error::invalid("subproblem_tol must be positive"));
        }
        for c in &self.checks {
            c.validate()?;
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))
}
