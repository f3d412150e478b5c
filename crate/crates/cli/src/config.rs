//! Scenario configuration: model, claim, numerics and outputs.
//!
//! Files are TOML or JSON (detected by extension, with fallback parsing).
//! The seed is mandatory: every artifact must be reproducible.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    pub dividend: DividendSection,
    pub numerics: NumericsSection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: String,
    pub params: serde_json::Value,
    /// Initial state `(s, r)` and rating.
    pub y0: Vec<f64>,
    pub c0: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DividendSection {
    pub family: String,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    /// Master seed; mandatory.
    pub seed: u64,
    /// Per-axis `[lo, hi, nodes]` rows of the solver grid.
    pub grid: Vec<GridAxis>,
    /// Backward time steps of the solver.
    pub time_steps: usize,
    /// Monte Carlo paths.
    pub paths: usize,
    /// Monte Carlo time steps over `[0, T]`.
    #[serde(default = "default_mc_steps")]
    pub mc_time_steps: usize,
    /// Hedge field keeps every n-th solver level.
    #[serde(default = "default_stride")]
    pub hedge_time_stride: usize,
    /// Value probes compared between the solver and the Monte Carlo
    /// estimator; defaults to the initial state at t = 0.
    #[serde(default)]
    pub probes: Vec<Probe>,
    /// Paths per probe.
    #[serde(default = "default_probe_paths")]
    pub probe_paths: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    #[serde(default)]
    pub log: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    pub t: f64,
    pub y: Vec<f64>,
    pub c: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Monte Carlo flag width in standard errors.
    #[serde(default = "default_mc_sigma")]
    pub mc_sigma: f64,
    /// Probes allowed to flag before the run fails.
    #[serde(default = "default_allowed_flags")]
    pub probe_flags_allowed: usize,
    /// Relative eigenvalue cutoff of the strategy solver (informational;
    /// pinned in code).
    #[serde(default = "default_rank_threshold")]
    pub rank_rel_threshold: f64,
    /// Optional cap on the residual-risk point estimate.
    #[serde(default)]
    pub max_residual_risk: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mc_sigma: default_mc_sigma(),
            probe_flags_allowed: default_allowed_flags(),
            rank_rel_threshold: default_rank_threshold(),
            max_residual_risk: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputsSection {
    /// Output directory; `--out-dir` and `RISKMIN_OUT_DIR` override it.
    pub directory: Option<String>,
    pub value_field: bool,
    pub hedge_field: bool,
    /// Table of the strategy hedging only the rating-transition risk
    /// (multi-regime markets only).
    pub credit_hedge: bool,
    pub paths_csv: bool,
    pub transitions_csv: bool,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            directory: None,
            value_field: true,
            hedge_field: true,
            credit_hedge: false,
            paths_csv: false,
            transitions_csv: false,
        }
    }
}

fn default_mc_steps() -> usize {
    250
}
fn default_stride() -> usize {
    1
}
fn default_probe_paths() -> usize {
    100_000
}
fn default_mc_sigma() -> f64 {
    3.0
}
fn default_allowed_flags() -> usize {
    1
}
fn default_rank_threshold() -> f64 {
    1e-12
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        let config: ScenarioConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Config {
                path: path.display().to_string(),
                detail: format!("json parse error: {e}"),
            })?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config {
                path: path.display().to_string(),
                detail: format!("toml parse error: {e}"),
            })?
        };
        config.validate(path)?;
        Ok(config)
    }

    fn validate(&self, path: &Path) -> Result<(), CliError> {
        let bad = |detail: String| CliError::Config {
            path: path.display().to_string(),
            detail,
        };
        if self.numerics.grid.is_empty() || self.numerics.grid.len() > 2 {
            return Err(bad("numerics.grid needs 1 or 2 axes".into()));
        }
        for (i, ax) in self.numerics.grid.iter().enumerate() {
            if !(ax.lo < ax.hi) || ax.nodes < 8 {
                return Err(bad(format!(
                    "numerics.grid axis {} needs lo < hi and at least 8 nodes",
                    i + 1
                )));
            }
        }
        if self.numerics.time_steps == 0 || self.numerics.paths == 0 {
            return Err(bad("numerics.time_steps and numerics.paths must be positive".into()));
        }
        if self.numerics.hedge_time_stride == 0
            || !self.numerics.time_steps.is_multiple_of(self.numerics.hedge_time_stride)
        {
            return Err(bad("numerics.hedge_time_stride must divide numerics.time_steps".into()));
        }
        if self.model.c0 == 0 {
            return Err(bad("model.c0 is a 1-based rating label".into()));
        }
        Ok(())
    }
}
