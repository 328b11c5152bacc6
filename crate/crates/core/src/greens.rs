//! Heat Green's function of the unit strip (Dirichlet at y = 0 and y = 1)
//! as an image series, its boundary traces, and the one-dimensional kernels
//! k, k-tilde, k1, K0 of the type-line equation.

use crate::error::{Error, Result};
use crate::functions::FieldRef;
use crate::quadrature::gauss;
use statrs::function::erf::erfc;
use std::f64::consts::PI;

const SQRT_PI: f64 = 1.772_453_850_905_516;
/// Gaussian arguments beyond this are dropped (exp underflows anyway).
const EXP_CUTOFF: f64 = 700.0;

/// Truncation of the image sums at n in [-n, n].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesTruncation {
    /// Hard upper bound on the summation range.
    pub n_max: usize,
    pub tail_tol: f64,
    /// Pick the range per argument from tail_tol (capped by n_max).
    pub adaptive: bool,
}

impl Default for SeriesTruncation {
    fn default() -> Self {
        SeriesTruncation { n_max: 50, tail_tol: 1e-14, adaptive: true }
    }
}

impl SeriesTruncation {
    pub fn fixed(n_max: usize) -> Self {
        SeriesTruncation { n_max, tail_tol: 0.0, adaptive: false }
    }

    /// Summation range for time argument x.
    pub fn terms(&self, x: f64) -> i64 {
        if !self.adaptive {
            return self.n_max.max(1) as i64;
        }
        let spread = (4.0 * x.max(0.0) * (1.0 / self.tail_tol).ln()).sqrt();
        let n = 1 + (spread.ceil() as i64) / 2;
        n.clamp(3, self.n_max.max(3) as i64)
    }
}

/// Parameters of the nonlocal gluing condition.
#[derive(Debug, Clone)]
pub struct GluingParams {
    pub alpha: f64,
    pub beta: f64,
    pub q: FieldRef,
}

impl GluingParams {
    pub fn new(alpha: f64, beta: f64, q: FieldRef) -> Result<Self> {
        if alpha * alpha + beta * beta == 0.0 {
            return Err(Error::Config("gluing parameters need alpha^2 + beta^2 > 0".into()));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::Config("gluing parameters must be finite".into()));
        }
        Ok(GluingParams { alpha, beta, q })
    }
}

fn check_time(x: f64) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("time argument must be positive, got {x}")))
    }
}

fn gauss_term(a: f64, x: f64) -> f64 {
    let e = a * a / (4.0 * x);
    if e > EXP_CUTOFF {
        0.0
    } else {
        (-e).exp()
    }
}

/// G(x, y, y1) by the image series.
pub fn green_g(x: f64, y: f64, y1: f64, trunc: &SeriesTruncation) -> Result<f64> {
    check_time(x)?;
    Ok(green_g_raw(x, y, y1, trunc.terms(x)))
}

pub fn green_g_raw(x: f64, y: f64, y1: f64, n: i64) -> f64 {
    let mut s = 0.0;
    for k in -n..=n {
        let m = 2.0 * k as f64;
        s += gauss_term(y - y1 + m, x) - gauss_term(y + y1 + m, x);
    }
    s / (2.0 * (PI * x).sqrt())
}

/// Boundary trace kernel D(s, y) = dG/dy1 (s, y, 0) = dG/dy (s, 0, y).
pub fn trace_d(s: f64, y: f64, n: i64) -> f64 {
    let mut acc = 0.0;
    for k in -n..=n {
        let a = y + 2.0 * k as f64;
        let e = a * a / (4.0 * s);
        if e <= EXP_CUTOFF {
            acc += a * (-e).exp();
        }
    }
    if acc == 0.0 {
        0.0
    } else {
        acc / (2.0 * SQRT_PI * s * s.sqrt())
    }
}

/// dG/dy at y = 0, as a function of (x, y1).
pub fn green_gy_trace(x: f64, y1: f64, trunc: &SeriesTruncation) -> Result<f64> {
    check_time(x)?;
    Ok(trace_d(x, y1, trunc.terms(x)))
}

/// dG/dy1 at y1 = 0, as a function of (x, y).
pub fn green_gy1_trace(x: f64, y: f64, trunc: &SeriesTruncation) -> Result<f64> {
    check_time(x)?;
    Ok(trace_d(x, y, trunc.terms(x)))
}

/// Image offsets a = y + 2n that contribute to the trace sums for s <= s_max.
#[inline]
fn trace_images(y: f64, s_max: f64) -> impl Iterator<Item = f64> {
    // erfc(|a| / (2 sqrt s)) < 1e-17 once |a| > 12 sqrt(s).
    let reach = 12.0 * s_max.max(0.0).sqrt() + 1.0;
    let lo = ((-reach - y) / 2.0).floor() as i64;
    let hi = ((reach - y) / 2.0).ceil() as i64;
    (lo..=hi).map(move |k| y + 2.0 * k as f64)
}

/// E(s, y) = integral of D(., y) over [0, s]: the boundary response to a
/// unit step in the trace.
pub fn trace_step(s: f64, y: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let r = 0.5 / s.sqrt();
    trace_images(y, s).filter(|a| *a != 0.0).map(|a| a.signum() * erfc(a.abs() * r)).sum()
}

/// First and second moments of the step response:
/// (integral_0^s E, integral_0^s sigma E(sigma) d sigma).
pub fn trace_step_moments(s: f64, y: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    let sq = s.sqrt();
    let (mut m0, mut m1) = (0.0, 0.0);
    for a in trace_images(y, s) {
        if a == 0.0 {
            continue;
        }
        let c = a.abs();
        let u = c / (2.0 * sq);
        let (ec, g) = (erfc(u), if u * u > EXP_CUTOFF { 0.0 } else { (-u * u).exp() });
        let root = c * sq / SQRT_PI * g;
        let sg = a.signum();
        m0 += sg * ((s + 0.5 * c * c) * ec - root);
        m1 += sg * ((0.5 * s * s - c.powi(4) / 24.0) * ec + (c * c / 12.0 - s / 6.0) * root);
    }
    (m0, m1)
}

/// k(x) = (1/sqrt(pi x)) sum_n exp(-n^2/x).
pub fn kernel_k(x: f64, trunc: &SeriesTruncation) -> Result<f64> {
    check_time(x)?;
    Ok(1.0 / (PI * x).sqrt() + ktilde_raw(x, trunc.terms(x)))
}

/// Regular part k(x) - 1/sqrt(pi x).
pub fn kernel_ktilde(x: f64, trunc: &SeriesTruncation) -> Result<f64> {
    check_time(x)?;
    Ok(ktilde_raw(x, trunc.terms(x)))
}

pub(crate) fn ktilde_raw(x: f64, n: i64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 1..=n {
        let e = (k * k) as f64 / x;
        if e > EXP_CUTOFF {
            break;
        }
        s += (-e).exp();
    }
    2.0 * s / (PI * x).sqrt()
}

/// d k-tilde / dx.
pub(crate) fn ktilde_prime_raw(x: f64, n: i64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for k in 1..=n {
        let kk = (k * k) as f64;
        let e = kk / x;
        if e > EXP_CUTOFF {
            break;
        }
        s += (-0.5 + kk / x) * (-e).exp();
    }
    2.0 * s / (SQRT_PI * x * x.sqrt())
}

pub fn kernel_ktilde_prime(x: f64, trunc: &SeriesTruncation) -> Result<f64> {
    check_time(x)?;
    Ok(ktilde_prime_raw(x, trunc.terms(x)))
}

/// k1(x, t) = [k(x - t) + beta Q(x, t)] / alpha.
pub fn kernel_k1(x: f64, t: f64, p: &GluingParams, trunc: &SeriesTruncation) -> Result<f64> {
    if p.alpha == 0.0 {
        return Err(Error::Config("k1 needs alpha != 0".into()));
    }
    if t >= x {
        return Err(Error::Domain(format!("k1 needs t < x, got t = {t}, x = {x}")));
    }
    Ok((kernel_k(x - t, trunc)? + p.beta * p.q.eval(x, t)) / p.alpha)
}

/// Regular part of K0: (1/sqrt(pi)) integral_z^x (x - t)^(-1/2)
/// [k-tilde'(t - z) + beta Q_x(t, z)] dt, via t = x - sigma^2.
pub(crate) fn k0_regular(x: f64, z: f64, p: &GluingParams, trunc: &SeriesTruncation) -> f64 {
    let d = x - z;
    if d <= 0.0 {
        return 0.0;
    }
    let n = trunc.terms(d);
    let rule = gauss(16);
    let r = d.sqrt();
    let mut s = 0.0;
    for k in 0..4 {
        let (a, b) = (r * k as f64 / 4.0, r * (k + 1) as f64 / 4.0);
        for (sig, w) in rule.mapped(a, b) {
            let t = x - sig * sig;
            s += w * 2.0 * (ktilde_prime_raw(t - z, n) + p.beta * p.q.dx(t, z));
        }
    }
    s / SQRT_PI
}

/// Second-kind kernel of the alpha = 0 equation, obtained by Abel-inverting
/// the first-kind equation with kernel k + beta Q.
pub fn kernel_k0(x: f64, z: f64, p: &GluingParams, trunc: &SeriesTruncation) -> Result<f64> {
    if p.beta == 0.0 {
        return Err(Error::Config("K0 needs beta != 0".into()));
    }
    if z >= x {
        return Err(Error::Domain(format!("K0 needs z < x, got z = {z}, x = {x}")));
    }
    Ok(p.beta * p.q.eval(z, z) / (SQRT_PI * (x - z).sqrt()) + k0_regular(x, z, p, trunc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_moments_differentiate_back() {
        let (s, y, h) = (0.3, 0.2, 1e-5);
        let (a0, a1) = trace_step_moments(s + h, y);
        let (b0, b1) = trace_step_moments(s - h, y);
        assert!(((a0 - b0) / (2.0 * h) - trace_step(s, y)).abs() < 1e-8);
        assert!(((a1 - b1) / (2.0 * h) - s * trace_step(s, y)).abs() < 1e-8);
    }

    #[test]
    fn step_is_integral_of_trace_kernel() {
        let (s, y) = (0.2, 0.3);
        let v = crate::quadrature::panels(0.0, s, 64, 16, |t| trace_d(t, y, 10));
        assert!((v - trace_step(s, y)).abs() < 1e-12);
    }
}
