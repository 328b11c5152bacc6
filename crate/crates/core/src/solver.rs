//! Problem B orchestration: trace unknowns on the type line, reconstruction
//! of u in both subdomains, and the closed-kernel representation of the
//! inverse operator.

use crate::engine::{
    resolvent, solve_volterra2, Grid1D, KernelMatrix, ResolventTable, SingularityClass, VolterraKernel,
};
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::geometry::{from_characteristic, to_characteristic, CharCurve, RegionTag};
use crate::greens::{
    green_g_raw, k0_regular, ktilde_raw, trace_step, trace_step_moments, GluingParams, SeriesTruncation,
};
use crate::quadrature::{composite, gauss};
use crate::rhs::{
    compute_f0, compute_f1, even_breaks, first_kind_rhs, strip_integral, ForcingField, RhsProfile, RhsVariant, Z_MAX,
    Z_PANEL,
};
use serde::Serialize;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// One instance of the mixed problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub params: GluingParams,
    pub curve: CharCurve,
    pub forcing: ForcingField,
    /// Type-line grid.
    pub grid: Grid1D,
    /// Output sampling cells (nx, ny) of the parabolic square.
    pub field_resolution: (usize, usize),
    pub trunc: SeriesTruncation,
}

impl ProblemSpec {
    pub fn new(
        params: GluingParams,
        curve: CharCurve,
        forcing: ForcingField,
        grid: Grid1D,
        field_resolution: (usize, usize),
        trunc: SeriesTruncation,
    ) -> Result<Self> {
        if params.alpha == 0.0 && params.beta == 0.0 {
            return Err(Error::Config("alpha^2 + beta^2 > 0 is required".into()));
        }
        let report = curve.validate();
        if !report.passed() {
            return Err(Error::Geometry(format!("curve fails: {}", report.failures().join(", "))));
        }
        if grid.cells() < 4 || field_resolution.0 < 2 || field_resolution.1 < 2 {
            return Err(Error::Config("grids must have at least 4 cells".into()));
        }
        Ok(ProblemSpec { params, curve, forcing, grid, field_resolution, trunc })
    }

    /// Output spacing H tied to the type-line grid: H = 8 h.
    pub fn default_resolution(cells: usize) -> (usize, usize) {
        let m = (cells / 8).max(8);
        (m, m)
    }
}

/// Traces on the type line y = 0.
#[derive(Debug, Clone, Serialize)]
pub struct TraceFunctions {
    pub grid: Grid1D,
    pub tau: Vec<f64>,
    pub tau_prime: Vec<f64>,
    /// u_y(x, +0).
    pub nu0: Vec<f64>,
    /// u_y(x, -0).
    pub nu1: Vec<f64>,
}

impl TraceFunctions {
    /// tau for piecewise-linear tau' (so tau is piecewise quadratic, C1).
    pub fn tau_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= 0.0 {
            return 0.0;
        }
        let (c, s) = g.locate(x.min(1.0));
        let h = g.nodes[c + 1] - g.nodes[c];
        let (p, q) = (self.tau_prime[c], self.tau_prime[c + 1]);
        self.tau[c] + h * (p * s + 0.5 * (q - p) * s * s)
    }

    pub fn tau_prime_at(&self, x: f64) -> f64 {
        self.grid.interp(&self.tau_prime, x.clamp(0.0, 1.0))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,tau,tau_prime,nu0,nu1\n");
        for i in 0..self.grid.n() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                self.grid.nodes[i], self.tau[i], self.tau_prime[i], self.nu0[i], self.nu1[i]
            ));
        }
        s
    }
}

/// k1 = (k + beta Q) / alpha split as a / sqrt(x - t) + b.
pub struct K1Kernel<'a> {
    pub params: &'a GluingParams,
    pub trunc: SeriesTruncation,
}

impl VolterraKernel for K1Kernel<'_> {
    fn singular_part(&self, _x: f64, _t: f64) -> f64 {
        1.0 / (self.params.alpha * SQRT_PI)
    }
    fn regular_part(&self, x: f64, t: f64) -> f64 {
        let d = x - t;
        (ktilde_raw(d, self.trunc.terms(d)) + self.params.beta * self.params.q.eval(x, t)) / self.params.alpha
    }
}

/// The alpha = 0 second-kind kernel K0.
pub struct K0Kernel<'a> {
    pub params: &'a GluingParams,
    pub trunc: SeriesTruncation,
}

impl VolterraKernel for K0Kernel<'_> {
    fn singular_part(&self, _x: f64, z: f64) -> f64 {
        self.params.beta * self.params.q.eval(z, z) / SQRT_PI
    }
    fn regular_part(&self, x: f64, z: f64) -> f64 {
        k0_regular(x, z, self.params, &self.trunc)
    }
}

/// k(x - t) + c Q(x, t), the first-kind kernel of the trace relation.
pub struct TraceRelationKernel<'a> {
    pub params: &'a GluingParams,
    pub q_weight: f64,
    pub trunc: SeriesTruncation,
}

impl VolterraKernel for TraceRelationKernel<'_> {
    fn singular_part(&self, _x: f64, _t: f64) -> f64 {
        1.0 / SQRT_PI
    }
    fn regular_part(&self, x: f64, t: f64) -> f64 {
        let d = x - t;
        let q = if self.q_weight == 0.0 { 0.0 } else { self.q_weight * self.params.q.eval(x, t) };
        ktilde_raw(d, self.trunc.terms(d)) + q
    }
}

/// Kernel matrix of the type-line equation for the spec's regime.
pub fn type_line_matrix(spec: &ProblemSpec) -> Result<KernelMatrix> {
    let p = &spec.params;
    if p.alpha != 0.0 {
        KernelMatrix::build(&K1Kernel { params: p, trunc: spec.trunc }, &spec.grid, SingularityClass::InverseSqrt)
    } else {
        KernelMatrix::build(&K0Kernel { params: p, trunc: spec.trunc }, &spec.grid, SingularityClass::InverseSqrt)
    }
}

/// Full output of the trace solve.
#[derive(Debug, Clone)]
pub struct TraceSolve {
    pub traces: TraceFunctions,
    pub f0: RhsProfile,
    pub rhs: RhsProfile,
    /// Max of |nu0 - alpha nu1 - beta integral Q nu1| over the nodes.
    pub gluing_defect: f64,
}

pub fn solve_trace(spec: &ProblemSpec) -> Result<TraceFunctions> {
    solve_trace_full(spec).map(|s| s.traces)
}

pub fn solve_trace_full(spec: &ProblemSpec) -> Result<TraceSolve> {
    let p = &spec.params;
    let g = &spec.grid;
    let n = g.n();
    let f0 = compute_f0(&spec.forcing, g, &spec.trunc)?;
    let km = type_line_matrix(spec)?;
    let rhs = if p.alpha != 0.0 {
        compute_f1(&spec.forcing, &f0, p, &spec.curve)?
    } else {
        if p.beta == 0.0 {
            return Err(Error::Config("alpha = 0 needs beta != 0".into()));
        }
        let gk = first_kind_rhs(&spec.forcing, &f0, p, &spec.curve);
        let phi = crate::engine::abel_invert(&gk, g)?;
        RhsProfile { grid: g.clone(), values: phi.iter().map(|v| SQRT_PI * v).collect(), variant: RhsVariant::F2 }
    };
    let tau_prime = solve_volterra2(&km, &rhs.values)?;
    let tau = g.cumulative(&tau_prime);
    let strips: Vec<f64> = map_range(n, |i| strip_integral(&spec.forcing, &spec.curve, g.nodes[i]));
    let nu1: Vec<f64> = (0..n).map(|i| tau_prime[i] - 2.0 * strips[i]).collect();
    let kk = KernelMatrix::build(
        &TraceRelationKernel { params: p, q_weight: 0.0, trunc: spec.trunc },
        g,
        SingularityClass::InverseSqrt,
    )?;
    let conv = kk.apply(&tau_prime);
    let nu0: Vec<f64> = (0..n).map(|i| f0.values[i] - conv[i]).collect();

    // Self-check of the nonlocal gluing relation on the computed traces.
    let defect = (1..n)
        .map(|i| {
            let x = g.nodes[i];
            let mem: f64 = (0..i)
                .map(|j| {
                    let (a, b) = (g.nodes[j], g.nodes[j + 1]);
                    0.5 * (b - a) * (p.q.eval(x, a) * nu1[j] + p.q.eval(x, b) * nu1[j + 1])
                })
                .sum();
            (nu0[i] - p.alpha * nu1[i] - p.beta * mem).abs()
        })
        .fold(0.0f64, f64::max);
    let scale = 1.0 + tau_prime.iter().chain(&f0.values).fold(0.0f64, |m, v| m.max(v.abs()));
    if defect.is_nan() || defect > 10.0 * GLUING_SELF_CHECK_C * g.h * scale {
        return Err(Error::GluingResidual(format!("gluing defect {defect:e} at h = {}", g.h)));
    }
    let traces = TraceFunctions { grid: g.clone(), tau, tau_prime, nu0, nu1 };
    Ok(TraceSolve { traces, f0, rhs, gluing_defect: defect })
}

/// Expected gluing defect per unit h and unit data scale.
const GLUING_SELF_CHECK_C: f64 = 1.0;

/// Pointwise access to a solution.
pub trait FieldEvaluator: Sync {
    fn u(&self, x: f64, y: f64) -> f64;
}

/// integral_0^x integral_0^1 G(x - x1, y, y1) f(x1, y1): s = sigma^2, one
/// Gaussian substitution per image, sigma panels graded at y and 1 - y.
pub fn heat_forcing_part(f: &ForcingField, x: f64, y: f64) -> f64 {
    if x <= 0.0 || y <= 0.0 || y >= 1.0 {
        return 0.0;
    }
    let rs = x.sqrt();
    let mut breaks = vec![0.0, rs];
    for scale in [y, 1.0 - y] {
        for k in [1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 0.25, 0.5, 1.0, 2.0] {
            breaks.push(scale * k);
        }
    }
    let breaks = crate::quadrature::breakpoints(0.0, rs, breaks);
    let inner = gauss(8);
    let total = composite(&breaks, 16, |sig| {
        if sig <= 0.0 {
            return 0.0;
        }
        let x1 = x - sig * sig;
        let two_s = 2.0 * sig;
        let mut acc = 0.0;
        // Direct images y1 = y + 2n + 2 sigma z, reflected y1 = 2 sigma z - y - 2n.
        for (sign, shift) in [(1.0, y), (-1.0, -y)] {
            let n_lo = ((-Z_MAX * two_s - 1.0 - shift) / 2.0).floor() as i64;
            let n_hi = ((Z_MAX * two_s + 1.0 - shift) / 2.0).ceil() as i64;
            for n in n_lo..=n_hi {
                let c = shift + 2.0 * n as f64;
                let za = ((0.0 - c) / two_s).max(-Z_MAX);
                let zb = ((1.0 - c) / two_s).min(Z_MAX);
                if zb <= za {
                    continue;
                }
                let mut part = 0.0;
                for w in even_breaks(za, zb, Z_PANEL).windows(2) {
                    for (z, wz) in inner.mapped(w[0], w[1]) {
                        let y1 = (c + two_s * z).clamp(0.0, 1.0);
                        part += wz * (-z * z).exp() * f.eval(x1, y1);
                    }
                }
                acc += sign * part;
            }
        }
        two_s * acc
    });
    total / SQRT_PI
}

/// integral_0^x D(x - x', y) tau(x') dx' for tau with piecewise-linear
/// derivative on the grid (exact, via the step-response moments).
pub fn tau_convolution(grid: &Grid1D, tau_prime: &[f64], x: f64, y: f64) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for c in 0..grid.cells() {
        let (a, b) = (grid.nodes[c], grid.nodes[c + 1]);
        if a >= x {
            break;
        }
        let bb = b.min(x);
        let (sa, sb) = (x - a, x - bb);
        let (pa0, pa1) = prev.unwrap_or_else(|| trace_step_moments(sa, y));
        let (pb0, pb1) = trace_step_moments(sb, y);
        let m = (tau_prime[c + 1] - tau_prime[c]) / (b - a);
        let d0 = pa0 - pb0;
        let d1 = pa1 - pb1;
        total += tau_prime[c] * d0 + m * (sa * d0 - d1);
        prev = Some((pb0, pb1));
    }
    total
}

/// integral_0^x D(x - x', y) phi(x') dx' for phi that is 0 before `start`,
/// jumps to `jump` there and is piecewise linear through (pts, vals) after.
pub fn linear_convolution(start: f64, jump: f64, pts: &[f64], vals: &[f64], x: f64, y: f64) -> f64 {
    if x <= start {
        return 0.0;
    }
    let mut total = jump * trace_step(x - start, y);
    let mut prev_t = start;
    let mut prev_v = jump;
    let mut prev_m = trace_step_moments(x - start, y).0;
    for (&t, &v) in pts.iter().zip(vals) {
        if t <= prev_t {
            continue;
        }
        let (tt, vv) = if t > x { (x, prev_v + (v - prev_v) * (x - prev_t) / (t - prev_t)) } else { (t, v) };
        let m_here = trace_step_moments(x - tt, y).0;
        total += (vv - prev_v) / (tt - prev_t) * (prev_m - m_here);
        prev_t = tt;
        prev_v = vv;
        prev_m = m_here;
        if t >= x {
            break;
        }
    }
    total
}

/// u in the hyperbolic region: tau(xi) plus the characteristic double integral.
pub fn hyperbolic_value(f: &ForcingField, curve: &CharCurve, tau_xi: f64, xi: f64, eta: f64) -> f64 {
    tau_xi + wave_double_integral(f, curve, xi, eta)
}

/// integral_xi^eta d eta1 integral_{lambda(eta1)}^xi f1(xi1, eta1) d xi1.
pub fn wave_double_integral(f: &ForcingField, curve: &CharCurve, xi: f64, eta: f64) -> f64 {
    if eta <= xi {
        return 0.0;
    }
    let inner = gauss(16);
    composite(&[xi, 0.5 * (xi + eta), eta], 16, |e1| {
        let lo = curve.lambda(e1);
        if xi <= lo {
            0.0
        } else {
            inner.integrate(lo, xi, |x1| f.f1(x1, e1))
        }
    })
}

/// Direct pipeline: traces plus both reconstructions.
#[derive(Debug, Clone)]
pub struct DirectSolution {
    pub spec: ProblemSpec,
    pub traces: TraceFunctions,
    pub solve: TraceSolve,
}

impl DirectSolution {
    pub fn solve(spec: &ProblemSpec) -> Result<Self> {
        let solve = solve_trace_full(spec)?;
        Ok(DirectSolution { spec: spec.clone(), traces: solve.traces.clone(), solve })
    }

    pub fn parabolic(&self, x: f64, y: f64) -> f64 {
        if y <= 0.0 {
            return self.traces.tau_at(x);
        }
        if x <= 0.0 || y >= 1.0 {
            return 0.0;
        }
        heat_forcing_part(&self.spec.forcing, x, y) + tau_convolution(&self.traces.grid, &self.traces.tau_prime, x, y)
    }

    pub fn hyperbolic(&self, xi: f64, eta: f64) -> f64 {
        hyperbolic_value(&self.spec.forcing, &self.spec.curve, self.traces.tau_at(xi), xi, eta)
    }

    /// The same field through the Cauchy form on the type line, using
    /// (tau, nu1) instead of the boundary condition on AC.
    pub fn hyperbolic_cauchy(&self, xi: f64, eta: f64) -> f64 {
        let f = &self.spec.forcing;
        let tr = &self.traces;
        let nu1 = |t: f64| tr.tau_prime_at(t) - 2.0 * strip_integral(f, &self.spec.curve, t);
        let int_nu1 = composite(&even_breaks(xi, eta, 1.0 / 16.0), 16, nu1);
        let tri = if eta > xi {
            composite(&[xi, 0.5 * (xi + eta), eta], 16, |x1| gauss(16).integrate(x1, eta, |e1| f.f1(x1, e1)))
        } else {
            0.0
        };
        0.5 * (tr.tau_at(xi) + tr.tau_at(eta) - int_nu1) - tri
    }
}

impl FieldEvaluator for DirectSolution {
    fn u(&self, x: f64, y: f64) -> f64 {
        if y >= 0.0 {
            self.parabolic(x, y)
        } else {
            let p = to_characteristic(x, y);
            self.hyperbolic(p.xi, p.eta)
        }
    }
}

pub fn reconstruct_hyperbolic(spec: &ProblemSpec, traces: &TraceFunctions, xi: f64, eta: f64) -> Result<f64> {
    let (x, y) = from_characteristic(xi, eta);
    match spec.curve.classify_point(x, y) {
        RegionTag::Hyperbolic | RegionTag::TypeLine => {
            Ok(hyperbolic_value(&spec.forcing, &spec.curve, traces.tau_at(xi), xi, eta))
        }
        _ => Err(Error::Geometry(format!("({x}, {y}) is not in the hyperbolic region"))),
    }
}

pub fn reconstruct_parabolic(spec: &ProblemSpec, traces: &TraceFunctions, x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::Geometry(format!("({x}, {y}) is not in the parabolic region")));
    }
    if y == 0.0 {
        return Ok(traces.tau_at(x));
    }
    if x == 0.0 || y == 1.0 {
        return Ok(0.0);
    }
    Ok(heat_forcing_part(&spec.forcing, x, y) + tau_convolution(&traces.grid, &traces.tau_prime, x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MethodTag {
    Direct,
    KernelForm,
}

/// u on a uniform (nx + 1) x (ny + 1) node grid of the square and on the
/// (xi, eta) grid of spacing 1/m clipped to the hyperbolic region.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionField {
    pub nx: usize,
    pub ny: usize,
    /// Row-major in x: index i * (ny + 1) + j for (i / nx, j / ny).
    pub parabolic: Vec<f64>,
    pub m: usize,
    /// Index i * (m + 1) + j for (xi, eta) = (i / m, j / m); NaN outside.
    pub hyperbolic: Vec<f64>,
    pub method_tag: MethodTag,
}

impl SolutionField {
    pub fn sample(eval: &dyn FieldEvaluator, curve: &CharCurve, nx: usize, ny: usize, tag: MethodTag) -> Self {
        let parabolic = map_range((nx + 1) * (ny + 1), |k| {
            let (i, j) = (k / (ny + 1), k % (ny + 1));
            eval.u(i as f64 / nx as f64, j as f64 / ny as f64)
        });
        let m = nx;
        let tol = curve.edge_tol();
        let hyperbolic = map_range((m + 1) * (m + 1), |k| {
            let (i, j) = (k / (m + 1), k % (m + 1));
            let (xi, eta) = (i as f64 / m as f64, j as f64 / m as f64);
            if xi > eta || xi < curve.lambda(eta) - tol {
                return f64::NAN;
            }
            let (x, y) = from_characteristic(xi, eta);
            eval.u(x, y.min(0.0))
        });
        SolutionField { nx, ny, parabolic, m, hyperbolic, method_tag: tag }
    }

    pub fn par(&self, i: usize, j: usize) -> f64 {
        self.parabolic[i * (self.ny + 1) + j]
    }

    /// Hyperbolic sample at (xi, eta) = (i / m, j / m); NaN outside.
    pub fn hyp(&self, i: i64, j: i64) -> f64 {
        let m = self.m as i64;
        if i < 0 || j < 0 || i > m || j > m {
            return f64::NAN;
        }
        self.hyperbolic[(i * (m + 1) + j) as usize]
    }

    /// Largest |u| over all samples.
    pub fn max_abs(&self) -> f64 {
        self.parabolic.iter().chain(self.hyperbolic.iter().filter(|v| !v.is_nan())).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Square samples, y = 0 rows tagged as the type line.
    pub fn parabolic_csv(&self) -> String {
        let mut s = String::from("x,y,u,region\n");
        self.push_parabolic(&mut s);
        s
    }

    /// Triangle samples below the type line.
    pub fn hyperbolic_csv(&self) -> String {
        let mut s = String::from("x,y,u,region\n");
        self.push_hyperbolic(&mut s);
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,y,u,region\n");
        self.push_parabolic(&mut s);
        self.push_hyperbolic(&mut s);
        s
    }

    fn push_parabolic(&self, s: &mut String) {
        for i in 0..=self.nx {
            for j in 0..=self.ny {
                let (x, y) = (i as f64 / self.nx as f64, j as f64 / self.ny as f64);
                let region = if j == 0 { "type_line" } else { "parabolic" };
                s.push_str(&format!("{x},{y},{},{region}\n", self.par(i, j)));
            }
        }
    }

    fn push_hyperbolic(&self, s: &mut String) {
        for i in 0..=self.m {
            for j in 0..=self.m {
                let v = self.hyp(i as i64, j as i64);
                // xi = eta is the type line, already written with the square.
                if v.is_nan() || i == j {
                    continue;
                }
                let (x, y) = from_characteristic(i as f64 / self.m as f64, j as f64 / self.m as f64);
                s.push_str(&format!("{x},{y},{v},hyperbolic\n"));
            }
        }
    }
}

/// Source location of a kernel column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    Parabolic { x1: f64, y1: f64 },
    Hyperbolic { xi1: f64, eta1: f64 },
}

impl Source {
    pub fn from_xy(x1: f64, y1: f64) -> Self {
        if y1 > 0.0 {
            Source::Parabolic { x1, y1 }
        } else {
            let p = to_characteristic(x1, y1);
            Source::Hyperbolic { xi1: p.xi, eta1: p.eta }
        }
    }
}

/// tau(x_i) produced by a unit point source: zero before `start`, `jump`
/// just after it, then `values` at the grid nodes beyond `start`.
#[derive(Debug, Clone)]
pub struct SourceResponse {
    pub start: f64,
    pub jump: f64,
    /// Per grid node; 0 at nodes <= start.
    pub values: Vec<f64>,
}

impl SourceResponse {
    pub fn at(&self, grid: &Grid1D, x: f64) -> f64 {
        if x <= self.start {
            return 0.0;
        }
        let (c, s) = grid.locate(x);
        let (a, b) = (grid.nodes[c], grid.nodes[c + 1]);
        if a <= self.start {
            // Between start and the first node after it.
            let t = (x - self.start) / (b - self.start);
            return (1.0 - t) * self.jump + t * self.values[c + 1];
        }
        (1.0 - s) * self.values[c] + s * self.values[c + 1]
    }

    /// integral_0^x D(x - x', y) response(x') dx'.
    pub fn convolve(&self, grid: &Grid1D, x: f64, y: f64) -> f64 {
        let first = grid.nodes.partition_point(|&v| v <= self.start);
        linear_convolution(self.start, self.jump, &grid.nodes[first..], &self.values[first..], x, y)
    }
}

/// Sub-cells per grid cell in the Stieltjes sums.
const SUBCELLS: usize = 2;

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    dm: f64,
    /// Index into the shared sub-cells, when the piece is one.
    shared: Option<usize>,
}

/// Closed-form kernel K(x, y; x1, y1) of the inverse operator, built from
/// the type-line resolvent and the Green traces.
pub struct ClosedKernel {
    pub spec: ProblemSpec,
    /// Gamma1 (alpha != 0) or R1 (alpha = 0).
    pub table: ResolventTable,
    /// Sub-node abscissae shared by all sources (grid nodes refined SUBCELLS times).
    sub_nodes: Vec<f64>,
    /// W(x_i, t) at sub-cell midpoints, row i holds cells below x_i.
    w_mid: Vec<Vec<f64>>,
}

impl ClosedKernel {
    pub fn build(spec: &ProblemSpec) -> Result<Self> {
        let km = type_line_matrix(spec)?;
        let table = if spec.params.alpha != 0.0 {
            resolvent(&K1Kernel { params: &spec.params, trunc: spec.trunc }, &km, crate::engine::DEFAULT_SERIES_TOL)?
        } else {
            resolvent(&K0Kernel { params: &spec.params, trunc: spec.trunc }, &km, crate::engine::DEFAULT_SERIES_TOL)?
        };
        let g = &spec.grid;
        let mut sub_nodes = Vec::with_capacity(g.cells() * SUBCELLS + 1);
        for c in 0..g.cells() {
            for k in 0..SUBCELLS {
                sub_nodes.push(g.nodes[c] + (g.nodes[c + 1] - g.nodes[c]) * k as f64 / SUBCELLS as f64);
            }
        }
        sub_nodes.push(1.0);
        let w_mid = map_range(g.n(), |i| {
            (0..i * SUBCELLS).map(|k| table.gamma1_at(i, 0.5 * (sub_nodes[k] + sub_nodes[k + 1]))).collect()
        });
        Ok(ClosedKernel { spec: spec.clone(), table, sub_nodes, w_mid })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.spec.grid
    }

    /// Stieltjes sums jump W(x_i, start) + sum_k dM_k W(x_i, t_k) with t_k
    /// the piece midpoints; shared sub-cells reuse the precomputed weights.
    fn stieltjes(&self, start: f64, jump: f64, masses: &[Piece]) -> Vec<f64> {
        let g = self.grid();
        map_range(g.n(), |i| {
            if g.nodes[i] <= start {
                return 0.0;
            }
            let mut acc = if jump == 0.0 { 0.0 } else { jump * self.table.gamma1_at(i, start) };
            for p in masses {
                if p.a >= g.nodes[i] {
                    break;
                }
                if p.dm == 0.0 {
                    continue;
                }
                let w = match p.shared {
                    Some(k) => self.w_mid[i][k],
                    None => self.table.gamma1_at(i, 0.5 * (p.a + p.b)),
                };
                acc += p.dm * w;
            }
            acc
        })
    }

    /// Partition of [start, 1]: the head piece up to the next sub-node, split
    /// into SUBCELLS parts, then the shared sub-cells.
    fn partition(&self, start: f64) -> Vec<Piece> {
        let k0 = self.sub_nodes.partition_point(|&v| v <= start);
        let mut out = Vec::new();
        if k0 < self.sub_nodes.len() {
            let head_end = self.sub_nodes[k0];
            let whole = k0 >= 1 && self.sub_nodes[k0 - 1] == start;
            if whole {
                out.push(Piece { a: start, b: head_end, dm: 0.0, shared: Some(k0 - 1) });
            } else {
                for k in 0..SUBCELLS {
                    let a = start + (head_end - start) * k as f64 / SUBCELLS as f64;
                    let b = start + (head_end - start) * (k + 1) as f64 / SUBCELLS as f64;
                    out.push(Piece { a, b, dm: 0.0, shared: None });
                }
            }
            for k in k0..self.sub_nodes.len() - 1 {
                out.push(Piece { a: self.sub_nodes[k], b: self.sub_nodes[k + 1], dm: 0.0, shared: Some(k) });
            }
        }
        out
    }

    /// Fill dM from a cumulative M with M(start) = 0.
    fn masses_from(&self, start: f64, m_at: impl Fn(f64) -> f64) -> Vec<Piece> {
        let mut parts = self.partition(start);
        let mut prev = 0.0;
        for p in &mut parts {
            let m = m_at(p.b);
            p.dm = m - prev;
            prev = m;
        }
        parts
    }

    /// tau response at every grid node to a unit point source.
    pub fn source_response(&self, src: Source) -> SourceResponse {
        let p = &self.spec.params;
        let (start, jump, masses) = match src {
            Source::Parabolic { x1, y1 } if p.alpha != 0.0 => {
                (x1, 0.0, self.masses_from(x1, |t| trace_step(t - x1, y1) / p.alpha))
            }
            Source::Parabolic { x1, y1 } => {
                // M = A[D(. - x1, y1)] / sqrt(pi) with A the Abel integral; the
                // trace-kernel mass of each piece is spread evenly over it.
                let mut parts = self.partition(x1);
                let mut e_prev = 0.0;
                let de: Vec<f64> = parts
                    .iter()
                    .map(|q| {
                        let e = trace_step(q.b - x1, y1);
                        let d = e - e_prev;
                        e_prev = e;
                        d
                    })
                    .collect();
                let mut m_prev = 0.0;
                for k in 0..parts.len() {
                    let t = parts[k].b;
                    let mut abel = 0.0;
                    for (m, q) in parts[..=k].iter().enumerate() {
                        if de[m] != 0.0 {
                            abel += de[m] * 2.0 * ((t - q.a).sqrt() - (t - q.b).max(0.0).sqrt()) / (q.b - q.a);
                        }
                    }
                    let m_here = abel / SQRT_PI;
                    parts[k].dm = m_here - m_prev;
                    m_prev = m_here;
                }
                (x1, 0.0, parts)
            }
            Source::Hyperbolic { eta1, .. } if p.alpha != 0.0 => {
                let c = p.beta / p.alpha;
                let mut parts = self.partition(eta1);
                if c != 0.0 {
                    for q in &mut parts {
                        q.dm = c * gauss(4).integrate(q.a, q.b, |s| p.q.eval(s, eta1));
                    }
                }
                (eta1, 1.0, parts)
            }
            Source::Hyperbolic { eta1, .. } => {
                let m_at = |t: f64| {
                    let r = (t - eta1).max(0.0).sqrt();
                    p.beta / SQRT_PI * gauss(8).integrate(0.0, r, |v| 2.0 * p.q.eval(t - v * v, eta1))
                };
                (eta1, 0.0, self.masses_from(eta1, m_at))
            }
        };
        SourceResponse { start, jump, values: self.stieltjes(start, jump, &masses) }
    }

    /// K(x, y; x1, y1).
    pub fn eval(&self, x: f64, y: f64, x1: f64, y1: f64) -> Result<f64> {
        let curve = &self.spec.curve;
        for (a, b) in [(x, y), (x1, y1)] {
            if curve.classify_point(a, b) == RegionTag::Outside {
                return Err(Error::Geometry(format!("({a}, {b}) lies outside the domain")));
            }
        }
        let src = Source::from_xy(x1, y1);
        Ok(self.eval_with(x, y, src, &self.source_response(src)))
    }

    /// K for a precomputed source response.
    pub fn eval_with(&self, x: f64, y: f64, src: Source, resp: &SourceResponse) -> f64 {
        let g = self.grid();
        if y > 0.0 {
            let mut k = resp.convolve(g, x, y);
            if let Source::Parabolic { x1, y1 } = src {
                if x > x1 {
                    let s = x - x1;
                    k += green_g_raw(s, y, y1, self.spec.trunc.terms(s));
                }
            }
            k
        } else {
            let p = to_characteristic(x, y);
            let mut k = resp.at(g, p.xi);
            if let Source::Hyperbolic { xi1, eta1 } = src {
                if p.eta > eta1 && eta1 > p.xi && p.xi > xi1 {
                    k += 0.5;
                }
            }
            k
        }
    }
}

/// Kernel-form solution u = integral K f, organised as: tau from the
/// source responses integrated against f, then the Green and wave blocks.
pub struct KernelSolution {
    pub spec: ProblemSpec,
    /// integral of K_tau(x_i; src) f(src) over all sources, per grid node.
    pub tau_nodes: Vec<f64>,
}

/// y1 panel breaks for parabolic sources, refined toward y1 = 0 where the
/// trace response varies fastest.
const Y1_BREAKS: [f64; 7] = [0.0, 1.0 / 256.0, 1.0 / 64.0, 1.0 / 16.0, 0.25, 0.5, 1.0];

pub fn apply_linv_kernel(kernel: &ClosedKernel) -> Result<KernelSolution> {
    let spec = &kernel.spec;
    let g = &spec.grid;
    let f = &spec.forcing;
    let n = g.n();
    let gx = gauss(4);
    let gy = gauss(8);
    // Parabolic sources: Gauss-4 per grid cell in x1, graded Gauss-8 in y1.
    let cols: Vec<Vec<f64>> = map_range(g.cells(), |c| {
        let mut acc = vec![0.0; n];
        for (x1, wx) in gx.mapped(g.nodes[c], g.nodes[c + 1]) {
            for w in Y1_BREAKS.windows(2) {
                for (y1, wy) in gy.mapped(w[0], w[1]) {
                    let fv = f.eval(x1, y1);
                    if fv == 0.0 {
                        continue;
                    }
                    let r = kernel.source_response(Source::Parabolic { x1, y1 });
                    for (a, v) in acc.iter_mut().zip(&r.values) {
                        *a += wx * wy * fv * v;
                    }
                }
            }
        }
        acc
    });
    // Hyperbolic sources: Gauss-4 per grid cell in eta1; the response does
    // not depend on xi1, so the xi1 integral of f (times dx dy = d xi d eta / 2)
    // is taken first.
    let hcols: Vec<Vec<f64>> = map_range(g.cells(), |c| {
        let mut acc = vec![0.0; n];
        for (eta1, we) in gx.mapped(g.nodes[c], g.nodes[c + 1]) {
            let lam = spec.curve.lambda(eta1);
            let fx = 0.5
                * composite(&[lam, 0.5 * (lam + eta1), eta1], 8, |xi1| {
                    let (x1, y1) = from_characteristic(xi1, eta1);
                    f.eval(x1, y1)
                });
            if fx == 0.0 {
                continue;
            }
            let r = kernel.source_response(Source::Hyperbolic { xi1: lam, eta1 });
            for (a, v) in acc.iter_mut().zip(&r.values) {
                *a += we * fx * v;
            }
        }
        acc
    });
    let mut tau_nodes = vec![0.0; n];
    for col in cols.iter().chain(&hcols) {
        for (t, v) in tau_nodes.iter_mut().zip(col) {
            *t += v;
        }
    }
    Ok(KernelSolution { spec: spec.clone(), tau_nodes })
}

impl FieldEvaluator for KernelSolution {
    fn u(&self, x: f64, y: f64) -> f64 {
        let g = &self.spec.grid;
        if y > 0.0 {
            if x <= 0.0 || y >= 1.0 {
                return 0.0;
            }
            heat_forcing_part(&self.spec.forcing, x, y)
                + linear_convolution(0.0, 0.0, &g.nodes[1..], &self.tau_nodes[1..], x, y)
        } else {
            let p = to_characteristic(x, y);
            g.interp(&self.tau_nodes, p.xi.clamp(0.0, 1.0))
                + wave_double_integral(&self.spec.forcing, &self.spec.curve, p.xi, p.eta)
        }
    }
}

/// One-off evaluation of K(x, y; x1, y1); builds the resolvent table.
pub fn assemble_closed_kernel(spec: &ProblemSpec, x: f64, y: f64, x1: f64, y1: f64) -> Result<f64> {
    ClosedKernel::build(spec)?.eval(x, y, x1, y1)
}
