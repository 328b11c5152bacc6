//! Mixed-domain geometry: the parabolic square, the hyperbolic region cut
//! off by the curve AC (y = -gamma(x)), and the characteristic map lambda.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Characteristic coordinates xi = x + y, eta = x - y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharPoint {
    pub xi: f64,
    pub eta: f64,
}

pub fn to_characteristic(x: f64, y: f64) -> CharPoint {
    CharPoint { xi: x + y, eta: x - y }
}

pub fn from_characteristic(xi: f64, eta: f64) -> (f64, f64) {
    (0.5 * (xi + eta), 0.5 * (xi - eta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionTag {
    Parabolic,
    Hyperbolic,
    TypeLine,
    Outside,
}

/// Shape of gamma on [0, l].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveShape {
    /// gamma(x) = x (1 - l) / l.
    Linear { l: f64 },
    /// gamma(x) = (1 - l) (x / l)^p.
    Power { l: f64, p: f64 },
    /// gamma(x) = x with l = 1/2: AC is itself a characteristic.
    Degenerate,
    /// Monotone samples (x_k, gamma_k), interpolated by monotone cubics.
    Table { x: Vec<f64>, gamma: Vec<f64> },
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Config("interpolation table needs >= 2 matching samples".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("table abscissae must be strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for k in 1..n - 1 {
                if del[k - 1] * del[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], del[0], del[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Ok(Pchip { x, y, d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (h00, h10) = ((1.0 + 2.0 * s) * (1.0 - s).powi(2), s * (1.0 - s).powi(2));
        let (h01, h11) = (s * s * (3.0 - 2.0 * s), s * s * (s - 1.0));
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// The curve AC together with a tabulated lambda.
#[derive(Debug, Clone)]
pub struct CharCurve {
    shape: CurveShape,
    l: f64,
    table: Option<Pchip>,
    pub root_tol: f64,
    /// lambda on the uniform eta grid k / (len - 1).
    pub lambda_table: Vec<f64>,
}

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
const LAMBDA_TABLE_CELLS: usize = 256;

impl CharCurve {
    /// Build a curve. The degenerate characteristic case must be requested
    /// explicitly via `allow_degenerate`.
    pub fn new(shape: CurveShape, allow_degenerate: bool) -> Result<Self> {
        let (l, table) = match &shape {
            CurveShape::Linear { l } | CurveShape::Power { l, .. } => (*l, None),
            CurveShape::Degenerate => {
                if !allow_degenerate {
                    return Err(Error::Config("degenerate characteristic curve needs allow_degenerate".into()));
                }
                (0.5, None)
            }
            CurveShape::Table { x, gamma } => {
                let p = Pchip::new(x.clone(), gamma.clone())?;
                (*x.last().unwrap(), Some(p))
            }
        };
        if let CurveShape::Power { p, .. } = shape {
            if p.is_nan() || p <= 0.0 {
                return Err(Error::Config(format!("power exponent must be positive, got {p}")));
            }
        }
        if !(l > 0.0 && l <= 1.0) {
            return Err(Error::Geometry(format!("l must lie in (1/2, 1), got {l}")));
        }
        let mut c = CharCurve { shape, l, table, root_tol: DEFAULT_ROOT_TOL, lambda_table: vec![] };
        // Invalid data still yields a curve so validate_curve can report on it;
        // unreachable table entries are NaN.
        c.lambda_table = (0..=LAMBDA_TABLE_CELLS)
            .map(|k| c.lambda_of_eta(k as f64 / LAMBDA_TABLE_CELLS as f64).unwrap_or(f64::NAN))
            .collect();
        Ok(c)
    }

    pub fn linear(l: f64) -> Result<Self> {
        Self::new(CurveShape::Linear { l }, false)
    }

    pub fn degenerate() -> Self {
        Self::new(CurveShape::Degenerate, true).expect("degenerate curve is always valid")
    }

    pub fn shape(&self) -> &CurveShape {
        &self.shape
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Slope kappa when lambda(eta) = kappa * eta exactly.
    pub fn linear_slope(&self) -> Option<f64> {
        match self.shape {
            CurveShape::Linear { l } => Some(2.0 * l - 1.0),
            CurveShape::Degenerate => Some(0.0),
            _ => None,
        }
    }

    pub fn gamma(&self, x: f64) -> f64 {
        match &self.shape {
            CurveShape::Linear { l } => x * (1.0 - l) / l,
            CurveShape::Power { l, p } => (1.0 - l) * (x.max(0.0) / l).powf(*p),
            CurveShape::Degenerate => x,
            CurveShape::Table { .. } => self.table.as_ref().unwrap().eval(x),
        }
    }

    /// lambda(eta) = x* - gamma(x*) with x* + gamma(x*) = eta.
    pub fn lambda_of_eta(&self, eta: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!("eta = {eta} outside [0, 1]")));
        }
        if let Some(k) = self.linear_slope() {
            return Ok(k * eta);
        }
        let x = self.invert_sum(eta)?;
        Ok(x - self.gamma(x))
    }

    /// Infallible lambda for validated curves; eta is clamped to [0, 1].
    pub fn lambda(&self, eta: f64) -> f64 {
        let e = eta.clamp(0.0, 1.0);
        self.lambda_of_eta(e).unwrap_or_else(|_| self.interp_table(e))
    }

    fn interp_table(&self, eta: f64) -> f64 {
        let n = self.lambda_table.len() - 1;
        let s = eta * n as f64;
        let k = (s.floor() as usize).min(n - 1);
        let t = s - k as f64;
        (1.0 - t) * self.lambda_table[k] + t * self.lambda_table[k + 1]
    }

    /// Root of x + gamma(x) = eta on [0, l]: bisection guarded secant steps.
    fn invert_sum(&self, eta: f64) -> Result<f64> {
        let g = |x: f64| x + self.gamma(x) - eta;
        let (mut a, mut b) = (0.0, self.l);
        let (mut fa, mut fb) = (g(a), g(b));
        if fa.abs() <= self.root_tol {
            return Ok(a);
        }
        if fb.abs() <= self.root_tol {
            return Ok(b);
        }
        if fa * fb > 0.0 {
            return Err(Error::Geometry(format!("x + gamma(x) = {eta} has no bracketed root in [0, {}]", self.l)));
        }
        for _ in 0..200 {
            let mut m = b - fb * (b - a) / (fb - fa);
            if !(m > a && m < b) || (b - a) > 0.5 * self.l {
                m = 0.5 * (a + b);
            }
            let fm = g(m);
            if fm == 0.0 {
                return Ok(m);
            }
            if fa * fm < 0.0 {
                b = m;
                fb = fm;
            } else {
                a = m;
                fa = fm;
            }
            // Illinois-style safeguard: force a bisection when one side stalls.
            let mid = 0.5 * (a + b);
            let fmid = g(mid);
            if fmid == 0.0 {
                return Ok(mid);
            }
            if fa * fmid < 0.0 {
                b = mid;
                fb = fmid;
            } else {
                a = mid;
                fa = fmid;
            }
            if b - a <= self.root_tol {
                return Ok(0.5 * (a + b));
            }
        }
        Err(Error::Geometry(format!("root iteration stalled for eta = {eta}")))
    }

    /// Tolerance used for closed-boundary membership tests.
    pub fn edge_tol(&self) -> f64 {
        10.0 * self.root_tol.max(1e-14)
    }

    pub fn classify_point(&self, x: f64, y: f64) -> RegionTag {
        let tol = self.edge_tol();
        if y == 0.0 && (0.0..=1.0).contains(&x) {
            return RegionTag::TypeLine;
        }
        if y > 0.0 {
            return if x > 0.0 && x < 1.0 && y < 1.0 { RegionTag::Parabolic } else { RegionTag::Outside };
        }
        let p = to_characteristic(x, y);
        if p.eta < -tol || p.eta > 1.0 + tol {
            return RegionTag::Outside;
        }
        let lam = self.lambda(p.eta);
        if p.xi >= lam - tol && p.xi <= p.eta + tol {
            RegionTag::Hyperbolic
        } else {
            RegionTag::Outside
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate_curve(self)
    }

    /// Two-column CSV (eta, lambda) of the precomputed table.
    pub fn lambda_csv(&self) -> String {
        let n = self.lambda_table.len() - 1;
        let mut s = String::from("eta,lambda\n");
        for (k, v) in self.lambda_table.iter().enumerate() {
            s.push_str(&format!("{},{}\n", k as f64 / n as f64, v));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveCheck {
    pub name: &'static str,
    pub passed: bool,
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CurveCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

/// Check every curve invariant on a sample set and report measured defects.
pub fn validate_curve(curve: &CharCurve) -> ValidationReport {
    let tol = curve.root_tol.max(1e-12);
    let l = curve.l();
    let samples: Vec<f64> = match curve.shape() {
        CurveShape::Table { x, .. } => x.clone(),
        _ => (0..=512).map(|k| l * k as f64 / 512.0).collect(),
    };
    let gam: Vec<f64> = samples.iter().map(|&x| curve.gamma(x)).collect();
    let mut checks = Vec::new();
    let mut push = |name, defect: f64, ok: bool| checks.push(CurveCheck { name, passed: ok, defect });

    let d0 = curve.gamma(0.0).abs();
    push("gamma(0) = 0", d0, d0 <= tol);
    let de = (l + curve.gamma(l) - 1.0).abs();
    push("l + gamma(l) = 1", de, de <= tol);

    let worst_sum = samples
        .windows(2)
        .zip(gam.windows(2))
        .map(|(x, g)| (x[0] + g[0]) - (x[1] + g[1]))
        .fold(f64::NEG_INFINITY, f64::max);
    push("x + gamma(x) strictly increasing", worst_sum.max(0.0), worst_sum < 0.0);

    let neg = gam.iter().fold(0.0f64, |m, &g| m.max(-g));
    push("gamma >= 0", neg, neg <= tol);
    let drop = gam.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max);
    push("gamma monotone", drop, drop <= tol);

    let strict = !matches!(curve.shape(), CurveShape::Degenerate);
    push("1/2 < l < 1", 0.0, !strict || (l > 0.5 && l < 1.0));

    let mut lam_defect = 0.0f64;
    let mut lam_ok = true;
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=256 {
        let eta = k as f64 / 256.0;
        match curve.lambda_of_eta(eta) {
            Ok(v) => {
                lam_defect = lam_defect.max(-v).max(v - eta).max(prev - v);
                prev = v;
            }
            Err(_) => lam_ok = false,
        }
    }
    push("0 <= lambda(eta) <= eta, monotone", lam_defect.max(0.0), lam_ok && lam_defect <= tol);
    let l0 = curve.lambda_of_eta(0.0).map(f64::abs).unwrap_or(f64::INFINITY);
    push("lambda(0) = 0", l0, l0 <= tol);
    let l1 = curve.lambda_of_eta(1.0).map(|v| (v - (2.0 * l - 1.0)).abs()).unwrap_or(f64::INFINITY);
    push("lambda(1) = 2l - 1", l1, l1 <= 10.0 * tol);

    ValidationReport { checks }
}
