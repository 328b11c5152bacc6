//! Serialized problem description and its validation into a ProblemSpec.

use crate::engine::Grid1D;
use crate::error::{Error, Result};
use crate::functions::FieldSpec;
use crate::geometry::{CharCurve, CurveShape};
use crate::greens::{GluingParams, SeriesTruncation};
use crate::rhs::{ForcingField, Smoothness};
use crate::solver::ProblemSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    #[default]
    Uniform,
    Graded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cells: usize,
    #[serde(default)]
    pub kind: GridKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_true")]
    pub adaptive: bool,
}

fn default_n_max() -> usize {
    50
}
fn default_tail_tol() -> f64 {
    1e-14
}
fn default_true() -> bool {
    true
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig { n_max: default_n_max(), tail_tol: default_tail_tol(), adaptive: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub alpha: f64,
    pub beta: f64,
    pub curve: CurveShape,
    #[serde(default)]
    pub allow_degenerate: bool,
    pub q: FieldSpec,
    pub forcing: FieldSpec,
    #[serde(default = "default_smoothness")]
    pub smoothness: Smoothness,
    pub grid: GridConfig,
    /// Output sample cells per axis; defaults to cells / 8 (at least 8).
    #[serde(default)]
    pub field_resolution: Option<[usize; 2]>,
    #[serde(default)]
    pub truncation: TruncationConfig,
}

fn default_smoothness() -> Smoothness {
    Smoothness::L2Only
}

impl ProblemConfig {
    /// The default test problem: l = 3/4, Q = 1 + x t / 2.
    pub fn default_with(alpha: f64, beta: f64, forcing: &str, cells: usize) -> Self {
        ProblemConfig {
            alpha,
            beta,
            curve: CurveShape::Linear { l: 0.75 },
            allow_degenerate: false,
            q: FieldSpec::builtin("q_default"),
            forcing: FieldSpec::builtin(forcing),
            smoothness: Smoothness::L2Only,
            grid: GridConfig { cells, kind: GridKind::Uniform },
            field_resolution: None,
            truncation: TruncationConfig::default(),
        }
    }

    pub fn build(&self) -> Result<ProblemSpec> {
        if self.alpha * self.alpha + self.beta * self.beta == 0.0 {
            return Err(Error::Config("alpha = beta = 0 violates the requirement alpha^2 + beta^2 > 0".into()));
        }
        if self.grid.cells < 4 {
            return Err(Error::Config(format!("grid.cells must be at least 4, got {}", self.grid.cells)));
        }
        let params = GluingParams::new(self.alpha, self.beta, self.q.build()?)?;
        let curve = CharCurve::new(self.curve.clone(), self.allow_degenerate)?;
        let forcing = ForcingField::new(self.forcing.build()?, self.smoothness)?;
        let grid = match self.grid.kind {
            GridKind::Uniform => Grid1D::uniform(self.grid.cells),
            GridKind::Graded => Grid1D::graded(self.grid.cells),
        };
        let res = match self.field_resolution {
            Some([nx, ny]) => (nx, ny),
            None => ProblemSpec::default_resolution(self.grid.cells),
        };
        let t = &self.truncation;
        let trunc = SeriesTruncation { n_max: t.n_max, tail_tol: t.tail_tol, adaptive: t.adaptive };
        ProblemSpec::new(params, curve, forcing, grid, res, trunc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_strictness() {
        let c = ProblemConfig::default_with(1.0, 0.0, "lib_xy", 64);
        let s = serde_json::to_string(&c).unwrap();
        let back: ProblemConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
        let bad = s.replacen("\"alpha\"", "\"alpah\"", 1);
        assert!(serde_json::from_str::<ProblemConfig>(&bad).is_err());
    }

    #[test]
    fn zero_parameters_are_a_config_error() {
        let c = ProblemConfig::default_with(0.0, 0.0, "lib_xy", 64);
        let e = c.build().unwrap_err();
        assert!(e.is_config() && e.to_string().contains("alpha^2 + beta^2 > 0"));
    }
}
