//! Solver configuration: defaults, optional JSON config file, command-line
//! overrides — in increasing precedence.

use std::path::Path;

use serde::Deserialize;

use klda::fit::PenaltyConfig;
use klda::tune::TuningGrid;

use crate::errors::{data_err, CliError, CliResult};

/// Optional JSON config file; every field falls back to the built-in default.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub epsilon: Option<f64>,
    pub max_outer_iter: Option<usize>,
    pub mean_fuse_threshold: Option<f64>,
    pub glasso_tol: Option<f64>,
    pub glasso_max_iter: Option<usize>,
    pub ama_tol: Option<f64>,
    pub ama_max_iter: Option<usize>,
    pub grid: Option<String>,
    pub threads: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| data_err(&path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn apply(&self, cfg: &mut PenaltyConfig) {
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.max_outer_iter {
            cfg.max_outer_iter = v;
        }
        if let Some(v) = self.mean_fuse_threshold {
            cfg.mean_fuse_threshold = v;
        }
        if let Some(v) = self.glasso_tol {
            cfg.glasso_tol = v;
        }
        if let Some(v) = self.glasso_max_iter {
            cfg.glasso_max_iter = v;
        }
        if let Some(v) = self.ama_tol {
            cfg.ama.tol = v;
        }
        if let Some(v) = self.ama_max_iter {
            cfg.ama.max_iter = v;
        }
    }
}

/// Parses a one-axis grid spec: either `pow2:LO:STEP:HI` (exponents of two)
/// or a comma-separated list of nonnegative values.
pub fn parse_grid_axis(spec: &str) -> CliResult<Vec<f64>> {
    if let Some(rest) = spec.strip_prefix("pow2:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!(
                "bad grid spec {spec:?}: expected pow2:LO:STEP:HI"
            )));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|e| CliError::Usage(format!("bad grid spec {spec:?}: {e}")))
            })
            .collect::<CliResult<_>>()?;
        return TuningGrid::pow2_range(nums[0], nums[1], nums[2])
            .map_err(|e| CliError::Usage(e.to_string()));
    }
    spec.split(',')
        .map(|p| {
            let v: f64 = p
                .trim()
                .parse()
                .map_err(|e| CliError::Usage(format!("bad grid value {p:?}: {e}")))?;
            if !(v >= 0.0) {
                return Err(CliError::Usage(format!("grid value {v} must be nonnegative")));
            }
            Ok(v)
        })
        .collect()
}

/// A full grid from one spec applied to both penalty axes.
pub fn parse_grid(spec: &str) -> CliResult<TuningGrid> {
    let values = parse_grid_axis(spec)?;
    TuningGrid::new(values.clone(), values).map_err(|e| CliError::Usage(e.to_string()))
}
