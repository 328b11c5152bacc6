//! Built-in scalar fields on the plane: gluing kernels Q(x, t) and forcing
//! terms f(x, y), addressed by name + parameter map or given as tables.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// A scalar function of two variables. Derivatives default to central
/// differences; analytic members override them.
pub trait Field2: Send + Sync + fmt::Debug {
    fn eval(&self, x: f64, y: f64) -> f64;

    fn dx(&self, x: f64, y: f64) -> f64 {
        let h = 1e-6;
        (self.eval(x + h, y) - self.eval(x - h, y)) / (2.0 * h)
    }

    /// Polynomial form, when the field is a polynomial.
    fn as_poly(&self) -> Option<&Poly2> {
        None
    }

    /// Region-wise pieces (upper y >= 0, lower y < 0), when split.
    fn pieces(&self) -> Option<(&dyn Field2, &dyn Field2)> {
        None
    }
}

pub type FieldRef = Arc<dyn Field2>;

/// Bivariate polynomial sum c[i][j] x^i y^j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly2 {
    pub coeffs: Vec<Vec<f64>>,
}

impl Poly2 {
    pub fn new(coeffs: Vec<Vec<f64>>) -> Self {
        Poly2 { coeffs }
    }
}

impl Field2 for Poly2 {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, row| acc * x + row.iter().rev().fold(0.0, |a, c| a * y + c))
    }

    fn dx(&self, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        let mut xp = 1.0;
        for (i, row) in self.coeffs.iter().enumerate().skip(1) {
            s += i as f64 * xp * row.iter().rev().fold(0.0, |a, c| a * y + c);
            xp *= x;
        }
        s
    }

    fn as_poly(&self) -> Option<&Poly2> {
        Some(self)
    }
}

/// Samples on a tensor grid, bilinear in between, clamped outside.
#[derive(Debug, Clone)]
pub struct GridTable {
    x: Vec<f64>,
    y: Vec<f64>,
    v: Vec<Vec<f64>>,
}

impl GridTable {
    pub fn new(x: Vec<f64>, y: Vec<f64>, v: Vec<Vec<f64>>) -> Result<Self> {
        let inc = |a: &[f64]| a.len() >= 2 && a.windows(2).all(|w| w[1] > w[0]);
        if !inc(&x) || !inc(&y) {
            return Err(Error::Config("table axes need >= 2 increasing samples".into()));
        }
        if v.len() != x.len() || v.iter().any(|r| r.len() != y.len()) {
            return Err(Error::Config("table values must be len(x) rows of len(y)".into()));
        }
        Ok(GridTable { x, y, v })
    }
}

fn locate(a: &[f64], t: f64) -> (usize, f64) {
    let t = t.clamp(a[0], a[a.len() - 1]);
    let k = a.partition_point(|&v| v <= t).clamp(1, a.len() - 1) - 1;
    (k, (t - a[k]) / (a[k + 1] - a[k]))
}

impl Field2 for GridTable {
    fn eval(&self, x: f64, y: f64) -> f64 {
        let (i, s) = locate(&self.x, x);
        let (j, t) = locate(&self.y, y);
        let v = &self.v;
        (1.0 - s) * ((1.0 - t) * v[i][j] + t * v[i][j + 1]) + s * ((1.0 - t) * v[i + 1][j] + t * v[i + 1][j + 1])
    }
}

/// A field given separately above (y >= 0) and below (y < 0) the type line.
#[derive(Debug, Clone)]
pub struct Piecewise {
    pub upper: FieldRef,
    pub lower: FieldRef,
}

impl Field2 for Piecewise {
    fn eval(&self, x: f64, y: f64) -> f64 {
        if y >= 0.0 {
            self.upper.eval(x, y)
        } else {
            self.lower.eval(x, y)
        }
    }

    fn dx(&self, x: f64, y: f64) -> f64 {
        if y >= 0.0 {
            self.upper.dx(x, y)
        } else {
            self.lower.dx(x, y)
        }
    }

    fn pieces(&self) -> Option<(&dyn Field2, &dyn Field2)> {
        Some((self.upper.as_ref(), self.lower.as_ref()))
    }
}

/// Closure-backed analytic field with an optional analytic x-derivative.
pub struct Analytic {
    pub name: String,
    f: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    fx: Option<Box<dyn Fn(f64, f64) -> f64 + Send + Sync>>,
}

impl Analytic {
    pub fn new(name: &str, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Analytic { name: name.to_string(), f: Box::new(f), fx: None }
    }

    pub fn with_dx(mut self, fx: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.fx = Some(Box::new(fx));
        self
    }
}

impl fmt::Debug for Analytic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Analytic({})", self.name)
    }
}

impl Field2 for Analytic {
    fn eval(&self, x: f64, y: f64) -> f64 {
        (self.f)(x, y)
    }

    fn dx(&self, x: f64, y: f64) -> f64 {
        match &self.fx {
            Some(g) => g(x, y),
            None => {
                let h = 1e-6;
                ((self.f)(x + h, y) - (self.f)(x - h, y)) / (2.0 * h)
            }
        }
    }
}

/// Serialized description of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Polynomial {
        coeffs: Vec<Vec<f64>>,
    },
    Table {
        x: Vec<f64>,
        y: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    Piecewise {
        upper: Box<FieldSpec>,
        lower: Box<FieldSpec>,
    },
}

impl FieldSpec {
    pub fn builtin(name: &str) -> Self {
        FieldSpec::Builtin { name: name.into(), params: BTreeMap::new() }
    }

    pub fn build(&self) -> Result<FieldRef> {
        Ok(match self {
            FieldSpec::Builtin { name, params } => builtin(name, params)?,
            FieldSpec::Polynomial { coeffs } => Arc::new(Poly2::new(coeffs.clone())),
            FieldSpec::Table { x, y, values } => Arc::new(GridTable::new(x.clone(), y.clone(), values.clone())?),
            FieldSpec::Piecewise { upper, lower } => {
                Arc::new(Piecewise { upper: upper.build()?, lower: lower.build()? })
            }
        })
    }
}

/// Names of the smooth forcing library. Every member vanishes at (0, 0) and
/// at (0, 1), and has f_x + f_yy = 0 at (0, 1), so the heat data are
/// compatible at both corners and the parabolic solution is classical.
pub const FORCING_LIBRARY: [&str; 10] = [
    "lib_xy",
    "lib_x",
    "lib_y_sq",
    "lib_sin_cos",
    "lib_exp_mix",
    "lib_poly_mix",
    "lib_sin_mix",
    "lib_bump",
    "lib_x_cos_y",
    "lib_y_exp_x",
];

/// base(x, y) (1 - y)^power.
#[derive(Debug)]
pub struct Tapered {
    pub base: FieldRef,
    pub power: i32,
}

impl Field2 for Tapered {
    fn eval(&self, x: f64, y: f64) -> f64 {
        self.base.eval(x, y) * (1.0 - y).powi(self.power)
    }

    fn dx(&self, x: f64, y: f64) -> f64 {
        self.base.dx(x, y) * (1.0 - y).powi(self.power)
    }
}

fn library_member(name: &str) -> Option<(&'static str, i32)> {
    Some(match name {
        "lib_xy" => ("xy", 1),
        "lib_x" => ("x", 1),
        "lib_y_sq" => ("y_sq", 3),
        "lib_exp_mix" => ("exp_mix", 3),
        "lib_poly_mix" => ("poly_mix", 3),
        "lib_sin_mix" => ("sin_mix", 3),
        "lib_bump" => ("bump", 3),
        "lib_x_cos_y" => ("x_cos_y", 1),
        "lib_y_exp_x" => ("y_exp_x", 3),
        _ => return None,
    })
}

fn param(params: &BTreeMap<String, f64>, allowed: &[(&str, f64)], name: &str) -> Result<Vec<f64>> {
    if let Some(k) = params.keys().find(|k| !allowed.iter().any(|(a, _)| a == k)) {
        return Err(Error::Config(format!("unknown parameter '{k}' for builtin '{name}'")));
    }
    Ok(allowed.iter().map(|(k, d)| params.get(*k).copied().unwrap_or(*d)).collect())
}

/// Resolve a built-in field by name.
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<FieldRef> {
    let none = |n: &str| param(params, &[], n).map(|_| ());
    let f: FieldRef = match name {
        "zero" => {
            none(name)?;
            Arc::new(Poly2::new(vec![vec![0.0]]))
        }
        "constant" => {
            let c = param(params, &[("c", 1.0)], name)?[0];
            Arc::new(Poly2::new(vec![vec![c]]))
        }
        // Gluing kernel default: Q(x, t) = 1 + x t / 2.
        "q_default" => {
            none(name)?;
            Arc::new(Poly2::new(vec![vec![1.0], vec![0.0, 0.5]]))
        }
        "sin_pi_y" => {
            none(name)?;
            Arc::new(Analytic::new(name, |_, y| (PI * y).sin()).with_dx(|_, _| 0.0))
        }
        "xy" => {
            none(name)?;
            Arc::new(Poly2::new(vec![vec![0.0], vec![0.0, 1.0]]))
        }
        "x" => {
            none(name)?;
            Arc::new(Poly2::new(vec![vec![0.0], vec![1.0]]))
        }
        "y_sq" => {
            none(name)?;
            Arc::new(Poly2::new(vec![vec![0.0, 0.0, 1.0]]))
        }
        "poly_mix" => {
            none(name)?;
            Arc::new(Poly2::new(vec![vec![0.0, 0.0, 0.0, 1.0], vec![0.0, -1.0], vec![1.0]]))
        }
        "sin_x_cos_y" => {
            none(name)?;
            Arc::new(
                Analytic::new(name, |x, y| (PI * x).sin() * (PI * y).cos())
                    .with_dx(|x, y| PI * (PI * x).cos() * (PI * y).cos()),
            )
        }
        "exp_mix" => {
            none(name)?;
            Arc::new(Analytic::new(name, |x, y| (x - y).exp() - 1.0).with_dx(|x, y| (x - y).exp()))
        }
        "sin_mix" => {
            none(name)?;
            Arc::new(Analytic::new(name, |x, y| (2.0 * x + y).sin()).with_dx(|x, y| 2.0 * (2.0 * x + y).cos()))
        }
        "bump" => {
            none(name)?;
            let g = |x: f64, y: f64| (-((x - 0.5).powi(2) + y * y) / 0.1).exp();
            Arc::new(
                Analytic::new(name, move |x, y| g(x, y) - (-2.5f64).exp())
                    .with_dx(move |x, y| -20.0 * (x - 0.5) * g(x, y)),
            )
        }
        "x_cos_y" => {
            none(name)?;
            Arc::new(Analytic::new(name, |x, y| x * (3.0 * y).cos()).with_dx(|_, y| (3.0 * y).cos()))
        }
        "y_exp_x" => {
            none(name)?;
            Arc::new(Analytic::new(name, |x, y| y * x.exp()).with_dx(|x, y| y * x.exp()))
        }
        "lib_sin_cos" => {
            none(name)?;
            Arc::new(
                Analytic::new(name, |x, y| (PI * x).sin() * (0.5 * PI * y).cos())
                    .with_dx(|x, y| PI * (PI * x).cos() * (0.5 * PI * y).cos()),
            )
        }
        _ => match library_member(name) {
            Some((base, power)) => {
                none(name)?;
                Arc::new(Tapered { base: builtin(base, params)?, power })
            }
            None => return Err(Error::Config(format!("unknown builtin field '{name}'"))),
        },
    };
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_vanishes_at_origin() {
        for name in FORCING_LIBRARY {
            let f = builtin(name, &BTreeMap::new()).unwrap();
            assert!(f.eval(0.0, 0.0).abs() < 1e-15, "{name}");
        }
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        for name in FORCING_LIBRARY.iter().chain(&["q_default", "xy", "bump"]) {
            let f = builtin(name, &BTreeMap::new()).unwrap();
            let (x, y) = (0.37, -0.21);
            let h = 1e-5;
            let fd = (f.eval(x + h, y) - f.eval(x - h, y)) / (2.0 * h);
            assert!((f.dx(x, y) - fd).abs() < 1e-7, "{name}");
        }
    }

    #[test]
    fn library_is_corner_compatible() {
        let h = 1e-4;
        for name in FORCING_LIBRARY {
            let f = builtin(name, &BTreeMap::new()).unwrap();
            assert!(f.eval(0.0, 1.0).abs() < 1e-15, "{name}");
            let fyy = (f.eval(0.0, 1.0 + h) - 2.0 * f.eval(0.0, 1.0) + f.eval(0.0, 1.0 - h)) / (h * h);
            assert!((f.dx(0.0, 1.0) + fyy).abs() < 1e-6, "{name}");
        }
    }

    #[test]
    fn unknown_names_and_params_are_rejected() {
        assert!(builtin("nope", &BTreeMap::new()).is_err());
        let mut p = BTreeMap::new();
        p.insert("k".to_string(), 1.0);
        assert!(builtin("constant", &p).is_err());
    }

    #[test]
    fn grid_table_is_exact_on_bilinear_data() {
        let x = vec![0.0, 0.5, 1.0];
        let y = vec![0.0, 1.0];
        let v = x.iter().map(|a| y.iter().map(|b| 1.0 + a + 2.0 * b).collect()).collect();
        let t = GridTable::new(x, y, v).unwrap();
        assert!((t.eval(0.3, 0.4) - 2.1).abs() < 1e-14);
    }
}
