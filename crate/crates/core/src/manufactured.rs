//! Exact polynomial solutions of the mixed problem. A trace tau and a
//! hyperbolic forcing f1(xi, eta) fix u in the hyperbolic part; the gluing
//! relation then fixes u_y(x, +0), and the parabolic part is a polynomial
//! carrying both traces. The forcing is read off region by region.

use crate::error::{Error, Result};
use crate::functions::{Field2, FieldRef, Piecewise, Poly2};
use crate::geometry::{to_characteristic, CharCurve};
use crate::greens::GluingParams;
use crate::rhs::{ForcingField, Smoothness};
use crate::solver::FieldEvaluator;
use std::sync::Arc;

/// Univariate polynomial, ascending coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly1(pub Vec<f64>);

impl Poly1 {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |a, c| a * x + c)
    }

    pub fn deriv(&self) -> Poly1 {
        Poly1(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    /// Antiderivative vanishing at 0.
    pub fn integ(&self) -> Poly1 {
        let mut v = vec![0.0];
        v.extend(self.0.iter().enumerate().map(|(k, c)| c / (k + 1) as f64));
        Poly1(v)
    }

    pub fn add(&self, o: &Poly1) -> Poly1 {
        let n = self.0.len().max(o.0.len());
        Poly1((0..n).map(|k| self.0.get(k).unwrap_or(&0.0) + o.0.get(k).unwrap_or(&0.0)).collect())
    }

    pub fn scale(&self, s: f64) -> Poly1 {
        Poly1(self.0.iter().map(|c| s * c).collect())
    }

    pub fn mul(&self, o: &Poly1) -> Poly1 {
        if self.0.is_empty() || o.0.is_empty() {
            return Poly1::default();
        }
        let mut v = vec![0.0; self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly1(v)
    }

    /// x^k times self.
    pub fn shift(&self, k: usize) -> Poly1 {
        let mut v = vec![0.0; k];
        v.extend_from_slice(&self.0);
        Poly1(v)
    }
}

/// p(x) q(y) as a bivariate polynomial.
fn outer(p: &Poly1, q: &Poly1) -> Poly2 {
    Poly2::new(p.0.iter().map(|a| q.0.iter().map(|b| a * b).collect()).collect())
}

fn add2(a: &Poly2, b: &Poly2, s: f64) -> Poly2 {
    let n = a.coeffs.len().max(b.coeffs.len());
    let row = |p: &Poly2, i: usize| p.coeffs.get(i).cloned().unwrap_or_default();
    Poly2::new(
        (0..n)
            .map(|i| {
                let (ra, rb) = (row(a, i), row(b, i));
                let m = ra.len().max(rb.len());
                (0..m).map(|j| ra.get(j).unwrap_or(&0.0) + s * rb.get(j).unwrap_or(&0.0)).collect()
            })
            .collect(),
    )
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// One member of the family.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub params: GluingParams,
    /// Slope of lambda(eta) = kappa eta.
    pub kappa: f64,
    pub tau: Poly1,
    /// f1(xi, eta) = sum c[p][q] xi^p eta^q.
    pub f1: Poly2,
    pub nu1: Poly1,
    pub nu0: Poly1,
    /// Exact u on y >= 0.
    pub upper: Poly2,
    pub forcing_upper: Poly2,
    pub forcing_lower: Poly2,
}

/// a(y) = (1 - y)^2 (1 + 2 y): a(0) = 1, a'(0) = 0, a(1) = 0.
fn shape_a() -> Poly1 {
    Poly1(vec![1.0, 0.0, -3.0, 2.0])
}

/// b(y) = y (1 - y)^2: b(0) = 0, b'(0) = 1, b(1) = 0.
fn shape_b() -> Poly1 {
    Poly1(vec![0.0, 1.0, -2.0, 1.0])
}

impl ManufacturedCase {
    pub fn new(params: &GluingParams, curve: &CharCurve, tau: Poly1, f1: Poly2) -> Result<Self> {
        let kappa = curve
            .linear_slope()
            .ok_or_else(|| Error::Construction("the manufactured family needs a linear curve".into()))?;
        let q = params
            .q
            .as_poly()
            .ok_or_else(|| Error::Construction("the manufactured family needs a polynomial Q".into()))?
            .clone();
        if tau.eval(0.0).abs() > 1e-14 {
            return Err(Error::Construction("tau(0) must vanish".into()));
        }
        let tp = tau.deriv();
        if params.alpha != 0.0 && tp.eval(0.0).abs() > 1e-14 {
            return Err(Error::Construction("with alpha != 0 the trace equation forces tau'(0) = 0".into()));
        }
        // S(eta) = integral_{kappa eta}^{eta} f1(xi1, eta) d xi1.
        let mut s = Poly1::default();
        for (p, row) in f1.coeffs.iter().enumerate() {
            for (qq, c) in row.iter().enumerate() {
                let k = c * (1.0 - kappa.powi(p as i32 + 1)) / (p + 1) as f64;
                s = s.add(&Poly1(vec![k]).shift(p + qq + 1));
            }
        }
        let nu1 = tp.add(&s.scale(-2.0));
        // nu0 = alpha nu1 + beta integral_0^x Q(x, t) nu1(t) dt.
        let mut mem = Poly1::default();
        for (i, row) in q.coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                mem = mem.add(&nu1.shift(j).integ().shift(i).scale(*c));
            }
        }
        let nu0 = nu1.scale(params.alpha).add(&mem.scale(params.beta));
        let (a, b) = (shape_a(), shape_b());
        let upper = add2(&outer(&tau, &a), &outer(&nu0, &b), 1.0);
        // f = u_x - u_yy above.
        let fu = add2(&outer(&tp, &a), &outer(&nu0.deriv(), &b), 1.0);
        let fu = add2(&fu, &outer(&tau, &a.deriv().deriv()), -1.0);
        let fu = add2(&fu, &outer(&nu0, &b.deriv().deriv()), -1.0);
        // f = 4 f1(x + y, x - y) below.
        let deg = f1.coeffs.iter().enumerate().map(|(p, r)| p + r.len()).max().unwrap_or(1);
        let mut fl = Poly2::new(vec![vec![0.0; deg + 1]; deg + 1]);
        for (p, row) in f1.coeffs.iter().enumerate() {
            for (qq, c) in row.iter().enumerate() {
                if *c == 0.0 {
                    continue;
                }
                for r in 0..=p {
                    for t in 0..=qq {
                        // (x + y)^p (x - y)^q
                        let coef = 4.0 * c * binom(p, r) * binom(qq, t) * if (qq - t) % 2 == 1 { -1.0 } else { 1.0 };
                        fl.coeffs[r + t][(p - r) + (qq - t)] += coef;
                    }
                }
            }
        }
        Ok(ManufacturedCase {
            params: params.clone(),
            kappa,
            tau,
            f1,
            nu1,
            nu0,
            upper,
            forcing_upper: fu,
            forcing_lower: fl,
        })
    }

    /// tau = x^2 - x^3 / 2, f1 = xi eta + eta^2 / 2.
    pub fn standard(params: &GluingParams, curve: &CharCurve) -> Result<Self> {
        Self::new(
            params,
            curve,
            Poly1(vec![0.0, 0.0, 1.0, -0.5]),
            Poly2::new(vec![vec![0.0, 0.0, 0.5], vec![0.0, 1.0]]),
        )
    }

    pub fn forcing(&self) -> ForcingField {
        let f: FieldRef = Arc::new(Piecewise {
            upper: Arc::new(self.forcing_upper.clone()),
            lower: Arc::new(self.forcing_lower.clone()),
        });
        ForcingField { f, smoothness: Smoothness::L2Only }
    }

    /// Exact u in characteristic variables on the hyperbolic side.
    pub fn hyperbolic(&self, xi: f64, eta: f64) -> f64 {
        let k = self.kappa;
        let mut u = self.tau.eval(xi);
        for (p, row) in self.f1.coeffs.iter().enumerate() {
            for (q, c) in row.iter().enumerate() {
                let (p1, q1) = (p as i32 + 1, q as i32 + 1);
                let pq2 = p as i32 + q as i32 + 2;
                u += c / p1 as f64
                    * (xi.powi(p1) * (eta.powi(q1) - xi.powi(q1)) / q1 as f64
                        - k.powi(p1) * (eta.powi(pq2) - xi.powi(pq2)) / pq2 as f64);
            }
        }
        u
    }
}

impl FieldEvaluator for ManufacturedCase {
    fn u(&self, x: f64, y: f64) -> f64 {
        if y >= 0.0 {
            self.upper.eval(x, y)
        } else {
            let p = to_characteristic(x, y);
            self.hyperbolic(p.xi, p.eta)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::builtin;
    use std::collections::BTreeMap;

    fn case(alpha: f64, beta: f64) -> ManufacturedCase {
        let q = builtin("q_default", &BTreeMap::new()).unwrap();
        let p = GluingParams::new(alpha, beta, q).unwrap();
        ManufacturedCase::standard(&p, &CharCurve::linear(0.75).unwrap()).unwrap()
    }

    #[test]
    fn traces_glue() {
        let c = case(1.0, 1.0);
        let h = 1e-5;
        for x in [0.2, 0.5, 0.8] {
            let up = (c.u(x, h) - c.u(x, -h)) / (2.0 * h);
            let _ = up;
            let dy_plus = (c.u(x, h) - c.u(x, 0.0)) / h;
            let dy_minus = (c.u(x, 0.0) - c.u(x, -h)) / h;
            assert!((dy_plus - c.nu0.eval(x)).abs() < 1e-4);
            assert!((dy_minus - c.nu1.eval(x)).abs() < 1e-4);
            assert!((c.u(x, 0.0) - c.hyperbolic(x, x)).abs() < 1e-14);
        }
    }

    #[test]
    fn lower_forcing_matches_wave_operator() {
        let c = case(1.0, 0.0);
        let (x, y, h) = (0.6, -0.1, 1e-3);
        let uxx = (c.u(x + h, y) - 2.0 * c.u(x, y) + c.u(x - h, y)) / (h * h);
        let uyy = (c.u(x, y + h) - 2.0 * c.u(x, y) + c.u(x, y - h)) / (h * h);
        assert!((uxx - uyy - c.forcing_lower.eval(x, y)).abs() < 1e-5);
    }

    #[test]
    fn rejects_nonzero_slope_with_alpha() {
        let q = builtin("q_default", &BTreeMap::new()).unwrap();
        let p = GluingParams::new(1.0, 0.0, q).unwrap();
        let r = ManufacturedCase::new(
            &p,
            &CharCurve::linear(0.75).unwrap(),
            Poly1(vec![0.0, 1.0]),
            Poly2::new(vec![vec![0.0]]),
        );
        assert!(matches!(r, Err(Error::Construction(_))));
    }
}
