//! The JSON run description read by every command.

use mixedsolve_core::config::ProblemConfig;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Solve,
    Verify,
    Analyze,
    Converge,
    Spectral,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Analyze => "analyze",
            Command::Converge => "converge",
            Command::Spectral => "spectral",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// When present it must match the command given on the command line.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
    #[serde(default)]
    pub spectral: SpectralConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("mixedsolve-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub grids: Vec<usize>,
    /// Required fitted order (L2 norms for residuals, sup for errors).
    pub min_order: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { grids: vec![128, 256, 512], min_order: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeConfig {
    /// Coarse sampling resolution per axis.
    pub n4: usize,
    pub n_max: usize,
    /// Type-line cells of the closed kernel being sampled.
    pub kernel_cells: usize,
    pub apriori_grids: Vec<usize>,
    /// Extra random polynomial forcings drawn from `seed`.
    pub random_forcings: usize,
    pub max_apriori_spread: f64,
    pub b_norm_limit: f64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            n4: 12,
            n_max: 6,
            kernel_cells: 64,
            apriori_grids: vec![64, 128],
            random_forcings: 0,
            max_apriori_spread: 2.0,
            b_norm_limit: 0.5842,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    /// (re, im) pairs.
    pub lambdas: Vec<[f64; 2]>,
    pub n4: usize,
    pub kernel_cells: usize,
    pub max_residual: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            lambdas: vec![[1.0, 0.0], [-1.0, 0.0], [10.0, 0.0], [-10.0, 0.0], [100.0, 0.0], [-100.0, 0.0], [0.0, 10.0]],
            n4: 12,
            kernel_cells: 64,
            max_residual: 1e-8,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        RunConfig {
            schema_version: 1,
            command: Some(Command::Solve),
            output_dir: "out".into(),
            seed: 3,
            problem: ProblemConfig::default_with(1.0, 0.0, "lib_xy", 64),
            verify: VerifyConfig::default(),
            analyze: AnalyzeConfig::default(),
            spectral: SpectralConfig::default(),
        }
    }

    #[test]
    fn round_trips() {
        let c = sample();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let text = serde_json::to_string_pretty(&sample()).unwrap().replacen("\"seed\"", "\"sead\"", 1);
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.contains("sead") && e.contains("line"), "{e}");
    }

    #[test]
    fn wrong_schema_version() {
        let text =
            serde_json::to_string(&sample()).unwrap().replacen("\"schema_version\":1", "\"schema_version\":9", 1);
        assert!(RunConfig::parse(&text).unwrap_err().contains("schema_version"));
    }
}
