//! Right-hand sides of the type-line equations, assembled from the forcing
//! by quadrature over the square and over characteristic strips.

use crate::engine::{abel_invert, Grid1D};
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::functions::FieldRef;
use crate::geometry::CharCurve;
use crate::greens::{GluingParams, SeriesTruncation};
use crate::quadrature::{composite, gauss};
use serde::{Deserialize, Serialize};

const SQRT_PI: f64 = 1.772_453_850_905_516;
/// Gaussian variables are cut at |z| <= Z_MAX (tail below exp(-49)).
pub(crate) const Z_MAX: f64 = 7.0;
/// Widest Gauss-8 panel used on Gaussian-weighted integrands.
pub(crate) const Z_PANEL: f64 = 1.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    C1,
    L2Only,
}

/// Forcing f; f1(xi, eta) = f(x, y) / 4 is always derived from it.
#[derive(Debug, Clone)]
pub struct ForcingField {
    pub f: FieldRef,
    pub smoothness: Smoothness,
}

impl ForcingField {
    pub fn new(f: FieldRef, smoothness: Smoothness) -> Result<Self> {
        if smoothness == Smoothness::C1 {
            let v = f.eval(0.0, 0.0);
            if v.abs() > 1e-12 {
                return Err(Error::Data(format!("a C1 forcing must vanish at the origin, f(0,0) = {v}")));
            }
        }
        Ok(ForcingField { f, smoothness })
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.f.eval(x, y)
    }

    pub fn f1(&self, xi: f64, eta: f64) -> f64 {
        0.25 * self.f.eval(0.5 * (xi + eta), 0.5 * (xi - eta))
    }

    /// Identically zero, checked on the polynomial form when available.
    pub fn is_zero(&self) -> bool {
        if let Some((u, l)) = self.f.pieces() {
            let z = |g: &dyn crate::functions::Field2| {
                g.as_poly().is_some_and(|p| p.coeffs.iter().flatten().all(|c| *c == 0.0))
            };
            return z(u) && z(l);
        }
        self.f.as_poly().is_some_and(|p| p.coeffs.iter().flatten().all(|c| *c == 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RhsVariant {
    F0,
    F1,
    F2,
}

#[derive(Debug, Clone, Serialize)]
pub struct RhsProfile {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub variant: RhsVariant,
}

impl RhsProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,value,variant\n");
        for (x, v) in self.grid.nodes.iter().zip(&self.values) {
            s.push_str(&format!("{x},{v},{:?}\n", self.variant));
        }
        s
    }

    /// Trapezoid L2 norm on (0, 1).
    pub fn l2(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        self.grid.cumulative(&sq).last().copied().unwrap_or(0.0).sqrt()
    }
}

/// Breakpoints of [a, b] at most `width` apart.
pub(crate) fn even_breaks(a: f64, b: f64, width: f64) -> Vec<f64> {
    let m = (((b - a) / width).ceil() as usize).max(1);
    (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect()
}

/// F0(x) = integral over [0, x] x [0, 1] of dG/dy(x - x1, 0, y1) f(x1, y1).
/// With s = x - x1 = sigma^2 and y1 = 2 sigma z - 2n per image n the
/// integrand becomes (4/sqrt(pi)) z exp(-z^2) f, smooth up to sigma = 0.
pub fn f0_at(f: &ForcingField, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let rs = x.sqrt();
    let outer = gauss(16);
    let inner = gauss(8);
    let mut total = 0.0;
    for p in 0..2 {
        let (sa, sb) = (rs * p as f64 / 2.0, rs * (p + 1) as f64 / 2.0);
        for (sig, ws) in outer.mapped(sa, sb) {
            let x1 = x - sig * sig;
            let mut c = 0.0;
            // Images with any z inside [-Z_MAX, Z_MAX].
            let n_lo = ((-Z_MAX * sig) - 0.5).floor() as i64;
            let n_hi = (Z_MAX * sig).ceil() as i64;
            for n in n_lo..=n_hi {
                let za = (n as f64 / sig).max(-Z_MAX);
                let zb = ((n as f64 + 0.5) / sig).min(Z_MAX);
                if zb <= za {
                    continue;
                }
                for w in even_breaks(za, zb, Z_PANEL).windows(2) {
                    for (z, wz) in inner.mapped(w[0], w[1]) {
                        let y1 = (2.0 * sig * z - 2.0 * n as f64).clamp(0.0, 1.0);
                        c += wz * z * (-z * z).exp() * f.eval(x1, y1);
                    }
                }
            }
            total += ws * c;
        }
    }
    4.0 / SQRT_PI * total
}

pub fn compute_f0(f: &ForcingField, grid: &Grid1D, _trunc: &SeriesTruncation) -> Result<RhsProfile> {
    let values = map_range(grid.n(), |i| f0_at(f, grid.nodes[i]));
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature("non-finite F0 value".into()));
    }
    Ok(RhsProfile { grid: grid.clone(), values, variant: RhsVariant::F0 })
}

/// S(eta) = integral_{lambda(eta)}^{eta} f1(xi1, eta) d xi1.
pub fn strip_integral(f: &ForcingField, curve: &CharCurve, eta: f64) -> f64 {
    let lam = curve.lambda(eta);
    if eta <= lam {
        return 0.0;
    }
    let mid = 0.5 * (lam + eta);
    composite(&[lam, mid, eta], 16, |xi| f.f1(xi, eta))
}

/// integral_0^x Q(x, t) S(t) dt.
pub fn memory_integral(f: &ForcingField, curve: &CharCurve, params: &GluingParams, x: f64) -> f64 {
    if x <= 0.0 || params.beta == 0.0 {
        return 0.0;
    }
    let breaks = [0.0, 0.125 * x, 0.375 * x, 0.75 * x, x];
    composite(&breaks, 16, |t| params.q.eval(x, t) * strip_integral(f, curve, t))
}

/// F1 = F0 / alpha + 2 S + (2 beta / alpha) integral Q S.
pub fn compute_f1(f: &ForcingField, f0: &RhsProfile, params: &GluingParams, curve: &CharCurve) -> Result<RhsProfile> {
    if params.alpha == 0.0 {
        return Err(Error::Config("F1 needs alpha != 0".into()));
    }
    let g = &f0.grid;
    let (a, b) = (params.alpha, params.beta);
    let values = map_range(g.n(), |i| {
        let x = g.nodes[i];
        f0.values[i] / a + 2.0 * strip_integral(f, curve, x) + 2.0 * b / a * memory_integral(f, curve, params, x)
    });
    Ok(RhsProfile { grid: g.clone(), values, variant: RhsVariant::F1 })
}

/// Right side g = F0 + 2 beta integral Q S of the alpha = 0 first-kind equation.
pub fn first_kind_rhs(f: &ForcingField, f0: &RhsProfile, params: &GluingParams, curve: &CharCurve) -> Vec<f64> {
    let g = &f0.grid;
    map_range(g.n(), |i| f0.values[i] + 2.0 * params.beta * memory_integral(f, curve, params, g.nodes[i]))
}

/// F2 = sqrt(pi) times the Abel inverse of g.
pub fn compute_f2(
    f: &ForcingField,
    params: &GluingParams,
    curve: &CharCurve,
    grid: &Grid1D,
    trunc: &SeriesTruncation,
) -> Result<RhsProfile> {
    if params.beta == 0.0 {
        return Err(Error::Config("F2 needs beta != 0".into()));
    }
    let f0 = compute_f0(f, grid, trunc)?;
    let g = first_kind_rhs(f, &f0, params, curve);
    let phi = abel_invert(&g, grid)?;
    let values = phi.iter().map(|v| SQRT_PI * v).collect();
    Ok(RhsProfile { grid: grid.clone(), values, variant: RhsVariant::F2 })
}

/// F1 when alpha != 0, else F2.
pub fn compute_f_dispatch(
    f: &ForcingField,
    params: &GluingParams,
    curve: &CharCurve,
    grid: &Grid1D,
    trunc: &SeriesTruncation,
) -> Result<RhsProfile> {
    if params.alpha == 0.0 && params.beta == 0.0 {
        return Err(Error::Config("alpha^2 + beta^2 > 0 is required".into()));
    }
    if params.alpha != 0.0 {
        let f0 = compute_f0(f, grid, trunc)?;
        compute_f1(f, &f0, params, curve)
    } else {
        compute_f2(f, params, curve, grid, trunc)
    }
}
