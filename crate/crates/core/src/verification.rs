//! Residual and convergence harness: PDE residuals on the sampled field,
//! boundary and gluing residuals by one-sided differences, manufactured
//! solution errors, and dyadic refinement studies.

use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::geometry::{from_characteristic, CharCurve, RegionTag};
use crate::manufactured::ManufacturedCase;
use crate::solver::{DirectSolution, FieldEvaluator, MethodTag, ProblemSpec, SolutionField};
use serde::Serialize;

/// Residuals below this are treated as exact zeros and skip the order fit.
pub const EXACT_FLOOR: f64 = 1e-12;

pub const HEAT_PDE: &str = "heat_pde";
pub const WAVE_PDE: &str = "wave_pde";
pub const BOUNDARY_ZERO: &str = "boundary_zero";
pub const BOUNDARY_AC: &str = "boundary_ac";
pub const GLUING: &str = "gluing";
pub const UX_CONTINUITY: &str = "ux_continuity";

/// One condition's residual samples and norms.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionResidual {
    pub name: &'static str,
    pub sup: f64,
    pub l2: f64,
    /// (x, y, residual) per sample.
    #[serde(skip)]
    pub samples: Vec<(f64, f64, f64)>,
}

impl ConditionResidual {
    fn new(name: &'static str, samples: Vec<(f64, f64, f64)>, weight: f64) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| !s.2.is_finite()) {
            return Err(Error::Data(format!("{name}: non-finite residual at ({}, {})", s.0, s.1)));
        }
        let sup = samples.iter().fold(0.0f64, |m, s| m.max(s.2.abs()));
        let l2 = (samples.iter().map(|s| s.2 * s.2).sum::<f64>() * weight).sqrt();
        Ok(ConditionResidual { name, sup, l2, samples })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,residual\n");
        for (x, y, r) in &self.samples {
            s.push_str(&format!("{x},{y},{r}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// Type-line grid step.
    pub h: f64,
    /// Output field spacing.
    pub spacing: f64,
    pub conditions: Vec<ConditionResidual>,
}

impl ResidualReport {
    pub fn get(&self, name: &str) -> Option<&ConditionResidual> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn sup(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |c| c.sup)
    }

    pub fn l2(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::NAN, |c| c.l2)
    }
}

/// Largest step <= h (halving) for which every stencil point lies in the
/// closed hyperbolic region.
fn fit_step(curve: &CharCurve, h: f64, pts: impl Fn(f64) -> Vec<(f64, f64)>) -> Option<f64> {
    let mut d = h;
    for _ in 0..40 {
        if pts(d)
            .iter()
            .all(|&(x, y)| matches!(curve.classify_point(x, y), RegionTag::Hyperbolic | RegionTag::TypeLine))
        {
            return Some(d);
        }
        d *= 0.5;
    }
    None
}

/// u_y(x, -0) by a backward three-point difference into the hyperbolic part.
fn nu1_fd(curve: &CharCurve, u: &dyn FieldEvaluator, x: f64, h: f64) -> Option<f64> {
    let d = fit_step(curve, h, |d| vec![(x, -d), (x, -2.0 * d)])?;
    Some((3.0 * u.u(x, 0.0) - 4.0 * u.u(x, -d) + u.u(x, -2.0 * d)) / (2.0 * d))
}

/// Residuals of every condition of the problem for a sampled field, with
/// `u` used where stencils leave the sample grid.
pub fn residuals(spec: &ProblemSpec, field: &SolutionField, u: &dyn FieldEvaluator) -> Result<ResidualReport> {
    let n = field.nx;
    if n < 4 || field.ny != n || field.m != n {
        return Err(Error::Resolution(format!(
            "residual stencils need a square sample grid with at least 4 cells, got {}x{}",
            field.nx, field.ny
        )));
    }
    let h = 1.0 / n as f64;
    let f = &spec.forcing;
    let curve = &spec.curve;
    let p = &spec.params;
    let mut out = Vec::new();

    // u_x - u_yy = f at interior nodes.
    let mut heat = Vec::new();
    for i in 1..n {
        for j in 1..n {
            let (x, y) = (i as f64 * h, j as f64 * h);
            let ux = (field.par(i + 1, j) - field.par(i - 1, j)) / (2.0 * h);
            let uyy = (field.par(i, j + 1) - 2.0 * field.par(i, j) + field.par(i, j - 1)) / (h * h);
            heat.push((x, y, ux - uyy - f.eval(x, y)));
        }
    }
    out.push(ConditionResidual::new(HEAT_PDE, heat, h * h)?);

    // u_xx - u_yy = 4 u_xi_eta = f at nodes whose diagonal neighbours exist.
    let mut wave = Vec::new();
    for i in 1..n as i64 {
        for j in (i + 2)..n as i64 {
            let c =
                [field.hyp(i + 1, j + 1), field.hyp(i + 1, j - 1), field.hyp(i - 1, j + 1), field.hyp(i - 1, j - 1)];
            if c.iter().any(|v| v.is_nan()) || field.hyp(i, j).is_nan() {
                continue;
            }
            let (x, y) = from_characteristic(i as f64 * h, j as f64 * h);
            let mixed = (c[0] - c[1] - c[2] + c[3]) / (4.0 * h * h);
            wave.push((x, y, 4.0 * mixed - f.eval(x, y)));
        }
    }
    out.push(ConditionResidual::new(WAVE_PDE, wave, 0.5 * h * h)?);

    // u = 0 on x = 0 and on y = 1.
    let mut zero = Vec::new();
    for k in 0..=n {
        let t = k as f64 * h;
        zero.push((0.0, t, field.par(0, k)));
        if k > 0 {
            zero.push((t, 1.0, field.par(k, n)));
        }
    }
    out.push(ConditionResidual::new(BOUNDARY_ZERO, zero, h)?);

    // u_x - u_y = 2 u_eta on the curve, backward in eta at fixed xi.
    let ac: Vec<Option<(f64, f64, f64)>> = map_range(n + 1, |k| {
        let eta = k as f64 * h;
        let xi = curve.lambda(eta);
        let d = h;
        if eta - 2.0 * d < xi {
            return None;
        }
        let at = |e: f64| {
            let (x, y) = from_characteristic(xi, e);
            u.u(x, y)
        };
        let ueta = (3.0 * at(eta) - 4.0 * at(eta - d) + at(eta - 2.0 * d)) / (2.0 * d);
        let (x, y) = from_characteristic(xi, eta);
        Some((x, y, 2.0 * ueta))
    });
    out.push(ConditionResidual::new(BOUNDARY_AC, ac.into_iter().flatten().collect(), h)?);

    // u_y(x, +0) = alpha nu1 + beta integral_0^x Q(x, t) nu1(t) dt, with the
    // memory integral by the midpoint rule on the sample cells.
    let mids: Vec<f64> = (0..n).map(|c| (c as f64 + 0.5) * h).collect();
    let nu1_mid: Vec<Option<f64>> = map_range(n, |c| nu1_fd(curve, u, mids[c], h));
    let mut glue = Vec::new();
    let mut ux_cont = Vec::new();
    for i in 1..n {
        let x = i as f64 * h;
        let uy_plus = (-3.0 * field.par(i, 0) + 4.0 * field.par(i, 1) - field.par(i, 2)) / (2.0 * h);
        let Some(nu1) = nu1_fd(curve, u, x, h) else { continue };
        let mut mem = 0.0;
        let mut ok = true;
        for c in 0..i {
            match nu1_mid[c] {
                Some(v) => mem += h * p.q.eval(x, mids[c]) * v,
                None => ok = false,
            }
        }
        if ok {
            glue.push((x, 0.0, uy_plus - p.alpha * nu1 - p.beta * mem));
        }
        // u_x on each side, extrapolated from three rows to the type line.
        let above: Vec<f64> = (1..=3).map(|k| (field.par(i + 1, k) - field.par(i - 1, k)) / (2.0 * h)).collect();
        let d = fit_step(curve, h, |d| vec![(x - d, -3.0 * d), (x + d, -3.0 * d)]);
        if let Some(d) = d {
            let below: Vec<f64> =
                (1..=3).map(|k| (u.u(x + d, -(k as f64) * d) - u.u(x - d, -(k as f64) * d)) / (2.0 * d)).collect();
            let ext = |a: &[f64]| 3.0 * a[0] - 3.0 * a[1] + a[2];
            ux_cont.push((x, 0.0, ext(&above) - ext(&below)));
        }
    }
    out.push(ConditionResidual::new(GLUING, glue, h)?);
    out.push(ConditionResidual::new(UX_CONTINUITY, ux_cont, h)?);
    Ok(ResidualReport { h: spec.grid.h, spacing: h, conditions: out })
}

/// Sup error of a solution against an exact field on the sample grids.
pub fn field_error(field: &SolutionField, exact: &dyn FieldEvaluator) -> f64 {
    let cmp = SolutionField::sample(exact, &CharCurve::degenerate(), field.nx, field.ny, field.method_tag);
    let mut e = 0.0f64;
    for (a, b) in field.parabolic.iter().zip(&cmp.parabolic) {
        e = e.max((a - b).abs());
    }
    let m = field.m as i64;
    for i in 0..=m {
        for j in i..=m {
            let a = field.hyp(i, j);
            if a.is_nan() {
                continue;
            }
            let (x, y) = from_characteristic(i as f64 / m as f64, j as f64 / m as f64);
            e = e.max((a - exact.u(x, y)).abs());
        }
    }
    e
}

#[derive(Debug, Clone, Serialize)]
pub struct ManufacturedReport {
    pub sup_error: f64,
    pub residuals: ResidualReport,
}

/// Solve the problem whose exact solution is `case` and compare.
pub fn manufactured_check(template: &ProblemSpec, case: &ManufacturedCase) -> Result<ManufacturedReport> {
    let mut spec = template.clone();
    spec.forcing = case.forcing();
    let sol = DirectSolution::solve(&spec)?;
    let (nx, ny) = spec.field_resolution;
    let field = SolutionField::sample(&sol, &spec.curve, nx, ny, MethodTag::Direct);
    Ok(ManufacturedReport { sup_error: field_error(&field, case), residuals: residuals(&spec, &field, &sol)? })
}

/// Fitted order of one condition across the refinement ladder.
#[derive(Debug, Clone, Serialize)]
pub struct OrderFit {
    pub name: String,
    /// Sup norm per grid.
    pub sup: Vec<f64>,
    pub l2: Vec<f64>,
    /// log2 ratios of successive sup norms per grid doubling.
    pub pair_orders: Vec<f64>,
    /// Least-squares slope of log(sup) against log(h); None when every
    /// norm is below EXACT_FLOOR.
    pub order: Option<f64>,
    pub spread: f64,
    /// Same fit on the L2 norms.
    pub order_l2: Option<f64>,
}

impl OrderFit {
    pub fn new(name: &str, grids: &[usize], sup: Vec<f64>, l2: Vec<f64>) -> Self {
        let fit = |v: &[f64]| -> Option<f64> {
            if v.iter().all(|r| *r < EXACT_FLOOR) {
                return None;
            }
            let xs: Vec<f64> = grids.iter().map(|&n| (1.0 / n as f64).ln()).collect();
            let ys: Vec<f64> = v.iter().map(|r| r.max(1e-300).ln()).collect();
            let k = xs.len() as f64;
            let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            Some(sxy / sxx)
        };
        let pair_orders: Vec<f64> = sup
            .windows(2)
            .zip(grids.windows(2))
            .map(|(r, g)| (r[0] / r[1]).ln() / (g[1] as f64 / g[0] as f64).ln())
            .collect();
        let spread = pair_orders.iter().fold(f64::NEG_INFINITY, |m: f64, v| m.max(*v))
            - pair_orders.iter().fold(f64::INFINITY, |m: f64, v| m.min(*v));
        OrderFit { name: name.into(), order: fit(&sup), order_l2: fit(&l2), sup, l2, pair_orders, spread }
    }

    /// Exact, or fitted order at least `p`.
    pub fn order_at_least(&self, p: f64) -> bool {
        self.order.map_or(true, |o| o >= p)
    }

    /// Norms decrease except possibly across the coarsest pair.
    pub fn monotone(&self) -> bool {
        self.order.is_none() || self.sup.windows(2).skip(1).all(|w| w[1] <= w[0])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub grids: Vec<usize>,
    pub fits: Vec<OrderFit>,
    /// Sup error against the exact solution, when one is known.
    pub errors: Option<OrderFit>,
}

impl ConvergenceStudy {
    pub fn fit(&self, name: &str) -> Option<&OrderFit> {
        self.fits.iter().find(|f| f.name == name)
    }
}

/// The template with its grids replaced for `n` type-line cells.
pub fn at_resolution(template: &ProblemSpec, n: usize) -> ProblemSpec {
    let mut s = template.clone();
    s.grid = crate::engine::Grid1D::uniform(n);
    s.field_resolution = ProblemSpec::default_resolution(n);
    s
}

/// Run the direct pipeline on each grid and fit orders per condition.
pub fn convergence(
    template: &ProblemSpec,
    grids: &[usize],
    exact: Option<&ManufacturedCase>,
) -> Result<ConvergenceStudy> {
    if grids.len() < 3 {
        return Err(Error::Config(format!("a convergence study needs at least 3 grids, got {}", grids.len())));
    }
    let mut reports = Vec::new();
    let mut errs = Vec::new();
    for &n in grids {
        let mut spec = at_resolution(template, n);
        if let Some(c) = exact {
            spec.forcing = c.forcing();
        }
        let sol = DirectSolution::solve(&spec)?;
        let (nx, ny) = spec.field_resolution;
        let field = SolutionField::sample(&sol, &spec.curve, nx, ny, MethodTag::Direct);
        if let Some(c) = exact {
            errs.push(field_error(&field, c));
        }
        reports.push(residuals(&spec, &field, &sol)?);
    }
    let names = [HEAT_PDE, WAVE_PDE, BOUNDARY_ZERO, BOUNDARY_AC, GLUING, UX_CONTINUITY];
    let fits = names
        .iter()
        .map(|name| {
            let sup = reports.iter().map(|r| r.sup(name)).collect();
            let l2 = reports.iter().map(|r| r.l2(name)).collect();
            OrderFit::new(name, grids, sup, l2)
        })
        .collect();
    let errors = exact.map(|_| OrderFit::new("solution_error", grids, errs.clone(), errs));
    Ok(ConvergenceStudy { grids: grids.to_vec(), fits, errors })
}
