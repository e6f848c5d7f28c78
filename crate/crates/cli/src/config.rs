//! Job configuration: a JSON file merged under command-line flags.

use std::path::{Path, PathBuf};

use qot_core::geodesic::Backend;
use qot_core::metric::MetricKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::read_json;

/// Every field is optional; flags given on the command line win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    /// When present, must name the subcommand being run.
    pub command: Option<String>,
    pub basis: Option<String>,
    pub kind: Option<MetricKind>,
    pub backend: Option<Backend>,
    pub steps: Option<usize>,
    pub gamma: Option<f64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub record_every: Option<usize>,
    pub grid_points: Option<usize>,
    pub seed: Option<u64>,
    pub marginal0: Option<PathBuf>,
    pub marginal1: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl JobConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        read_json(path)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: JobConfig) -> JobConfig {
        JobConfig {
            command: over.command.or(self.command),
            basis: over.basis.or(self.basis),
            kind: over.kind.or(self.kind),
            backend: over.backend.or(self.backend),
            steps: over.steps.or(self.steps),
            gamma: over.gamma.or(self.gamma),
            dt: over.dt.or(self.dt),
            t_final: over.t_final.or(self.t_final),
            tolerance: over.tolerance.or(self.tolerance),
            max_iterations: over.max_iterations.or(self.max_iterations),
            record_every: over.record_every.or(self.record_every),
            grid_points: over.grid_points.or(self.grid_points),
            seed: over.seed.or(self.seed),
            marginal0: over.marginal0.or(self.marginal0),
            marginal1: over.marginal1.or(self.marginal1),
            out: over.out.or(self.out),
        }
    }

    pub fn validate(&self, command: &str) -> CliResult<()> {
        if let Some(c) = &self.command {
            if c != command {
                return Err(CliError::Usage(format!("config is for '{c}', not '{command}'")));
            }
        }
        let positive = [
            ("gamma", self.gamma),
            ("dt", self.dt),
            ("t_final", self.t_final),
            ("tolerance", self.tolerance),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(CliError::Usage(format!("{name} must be positive, got {v}")));
                }
            }
        }
        let counts = [
            ("steps", self.steps),
            ("max_iterations", self.max_iterations),
            ("record_every", self.record_every),
            ("grid_points", self.grid_points),
        ];
        for (name, v) in counts {
            if v == Some(0) {
                return Err(CliError::Usage(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(16)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(1.0)
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(1e-3)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final.unwrap_or(1.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points.unwrap_or(16)
    }

    pub fn kind(&self) -> MetricKind {
        self.kind.unwrap_or(MetricKind::AntiCommutator)
    }

    /// Conic for the anti-commutator geometry unless asked otherwise; the logarithmic one
    /// has only the direct backend.
    pub fn backend(&self) -> Backend {
        self.backend.unwrap_or(match self.kind() {
            MetricKind::AntiCommutator => Backend::Conic,
            MetricKind::Logarithmic => Backend::Direct,
        })
    }
}
