use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparsedom::grid::Grid;
use sparsedom::maximal::CubeSweepPolicy;
use sparsedom::operators::{Kernel, KernelSpec};
use sparsedom::sparse::{PipelineConfig, ThresholdMode};

use crate::ConfigError;

/// One experiment, as read from a JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid: Grid,
    pub kernel: KernelSpec,
    pub function: FunctionSpec,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub sweep: CubeSweepPolicy,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionKind {
    Random,
    Bump,
    SpikeTrain,
    File,
}

/// Input function; `support` is `[lo, hi)` as fractions of the window side, on every axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub kind: FunctionKind,
    #[serde(default = "default_support")]
    pub support: [f64; 2],
    /// Random: number of constant blocks per axis (`0` draws every cell independently).
    /// Spike-train: number of spikes.
    #[serde(default)]
    pub blocks: usize,
    /// Overrides the experiment seed for the input only.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Function record for `kind = file`.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

fn default_support() -> [f64; 2] {
    [0.25, 0.75]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub alpha: i64,
    pub s: f64,
    pub q: f64,
    pub r: f64,
    pub mode: ThresholdMode,
    pub max_depth: Option<u32>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let d = PipelineConfig::default();
        PipelineSection {
            alpha: d.alpha,
            s: d.s,
            q: d.q,
            r: d.r,
            mode: d.mode,
            max_depth: d.max_depth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Dini,
    Hormander,
    Sparsity,
    Coefficients,
    Domination,
    LpRatio,
    WqProfile,
    T1Probe,
    SharpVsMaximal,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Dini => "dini",
            Check::Hormander => "hormander",
            Check::Sparsity => "sparsity",
            Check::Coefficients => "coefficients",
            Check::Domination => "domination",
            Check::LpRatio => "lp-ratio",
            Check::WqProfile => "wq-profile",
            Check::T1Probe => "t1-probe",
            Check::SharpVsMaximal => "sharp-vs-maximal",
        }
    }

    pub fn is_kernel_stat(self) -> bool {
        matches!(self, Check::Dini | Check::Hormander)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub checks: Vec<Check>,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Exponent of the `L^p` ratio.
    pub lp_p: f64,
    /// Levels of the weak-type profile.
    pub lambdas: Vec<f64>,
    pub t1_trials: u32,
    /// Side of the probed cube; `None` means half the window.
    pub t1_side: Option<i64>,
    /// Exponent of the maximal function in the pointwise comparison.
    pub rp: f64,
    pub hormander_r: f64,
    pub hormander_k_max: u32,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            checks: vec![Check::Sparsity, Check::Coefficients, Check::Domination],
            abs_tol: sparsedom::verify::ABS_TOL,
            rel_tol: sparsedom::verify::REL_TOL,
            lp_p: 2.0,
            lambdas: (1..=8).map(|k| 0.5f64.powi(k)).collect(),
            t1_trials: 200,
            t1_side: None,
            rp: 1.0,
            hormander_r: 1.0,
            hormander_k_max: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: None,
            formats: vec![Format::Json, Format::Csv, Format::Text],
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let p = &self.pipeline;
        PipelineConfig {
            alpha: p.alpha,
            s: p.s,
            q: p.q,
            r: p.r,
            mode: p.mode,
            max_depth: p.max_depth,
            sweep: self.sweep,
        }
    }

    pub fn kernel(&self) -> Result<Kernel, ConfigError> {
        let k = Kernel::from_spec(&self.kernel).map_err(|e| ConfigError(e.to_string()))?;
        if matches!(k.dim(), Some(d) if d != self.grid.dim()) {
            return Err(ConfigError(format!(
                "kernel `{}` needs a {}-dimensional grid",
                k.name(),
                k.dim().unwrap_or_default()
            )));
        }
        Ok(k)
    }

    pub fn function_seed(&self) -> u64 {
        self.function.seed.unwrap_or(self.seed)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        self.pipeline_config().validate().map_err(|e| ConfigError(e.to_string()))?;
        self.kernel()?;
        let [lo, hi] = self.function.support;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return err(format!("function support [{lo}, {hi}) must satisfy 0 <= lo < hi <= 1"));
        }
        if self.function.kind == FunctionKind::File && self.function.path.is_none() {
            return err("function kind `file` needs a `path`".into());
        }
        if self.function.kind == FunctionKind::SpikeTrain && self.function.blocks == 0 {
            return err("spike-train needs `blocks` >= 1 spikes".into());
        }
        let v = &self.verify;
        if !(v.abs_tol >= 0.0 && v.rel_tol >= 0.0) {
            return err("tolerances must be non-negative".into());
        }
        if !(v.lp_p > 1.0) {
            return err(format!("lp_p must exceed 1, got {}", v.lp_p));
        }
        if v.lambdas.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return err("profile levels must lie in (0, 1)".into());
        }
        if v.t1_trials == 0 {
            return err("t1_trials must be at least 1".into());
        }
        if matches!(v.t1_side, Some(s) if s < 1 || s > self.grid.cells_per_side() as i64) {
            return err("t1_side must lie between 1 and N".into());
        }
        if !(v.rp >= 1.0 && v.hormander_r >= 1.0) {
            return err("rp and hormander_r must be at least 1".into());
        }
        if v.hormander_k_max == 0 || v.hormander_k_max > 40 {
            return err("hormander_k_max must lie in 1..=40".into());
        }
        if v.checks.contains(&Check::Hormander) && self.grid.cells_per_side() < 8 {
            return err("the Hormander estimate needs N >= 8".into());
        }
        if self.output.formats.is_empty() {
            return err("output.formats must not be empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"dim": 1, "cells_per_side": 128},
        "kernel": {"name": "hilbert"},
        "function": {"kind": "random"}
    }"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.pipeline_config(), PipelineConfig::default());
        assert_eq!(c.function.support, [0.25, 0.75]);
        assert_eq!(c.verify.lambdas.len(), 8);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let extra = MINIMAL.replace("\"random\"", "\"random\", \"colour\": 1");
        assert!(ExperimentConfig::from_json(&extra).is_err());
        let even = MINIMAL.replace("\"function\"", "\"pipeline\": {\"alpha\": 4}, \"function\"");
        assert!(ExperimentConfig::from_json(&even).is_err());
        let riesz = MINIMAL.replace("hilbert", "riesz2d");
        assert!(ExperimentConfig::from_json(&riesz).is_err());
        let kernel_extra = MINIMAL.replace("\"hilbert\"", "\"hilbert\", \"delta\": 1");
        assert!(ExperimentConfig::from_json(&kernel_extra).is_err());
    }
}
