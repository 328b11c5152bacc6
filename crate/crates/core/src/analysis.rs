//! Numerical evidence for the operator claims: the inverse operator's kernel
//! is square integrable, its iterates obey the Gamma-function bound, the
//! operator norms' n-th roots go to zero, and Lu - lambda u = f is solvable
//! for every lambda.

use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::functions::FORCING_LIBRARY;
use crate::geometry::{from_characteristic, CharCurve};
use crate::greens::green_g_raw;
use crate::quadrature::{breakpoints, composite, gauss};
use crate::rhs::ForcingField;
use crate::solver::{
    apply_linv_kernel, solve_trace_full, ClosedKernel, DirectSolution, FieldEvaluator, MethodTag, ProblemSpec,
    SolutionField, Source,
};
use crate::verification::at_resolution;
use num_complex::Complex64;
use serde::Serialize;
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// A quadrature point of the domain.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

/// n4 x n4 cell midpoints of the square plus n4 x n4 points of the
/// hyperbolic region (n4 eta strips, each cut into n4 xi cells).
pub fn sample_points(curve: &CharCurve, n4: usize) -> Vec<SamplePoint> {
    let h = 1.0 / n4 as f64;
    let mut pts = Vec::with_capacity(2 * n4 * n4);
    for i in 0..n4 {
        for j in 0..n4 {
            pts.push(SamplePoint { x: (i as f64 + 0.5) * h, y: (j as f64 + 0.5) * h, weight: h * h });
        }
    }
    for k in 0..n4 {
        let eta = (k as f64 + 0.5) * h;
        let lam = curve.lambda(eta);
        let dxi = (eta - lam) / n4 as f64;
        for m in 0..n4 {
            let xi = lam + (m as f64 + 0.5) * dxi;
            let (x, y) = from_characteristic(xi, eta);
            pts.push(SamplePoint { x, y, weight: 0.5 * h * dxi });
        }
    }
    pts
}

/// Kernel samples K(p_i; p_j) on a point set and its iterates.
#[derive(Debug, Clone, Serialize)]
pub struct IteratedKernelStack {
    pub points: Vec<SamplePoint>,
    /// iterates[n - 1] is K_n, row-major (target, source).
    #[serde(skip)]
    pub iterates: Vec<Vec<f64>>,
    /// max sqrt(x - x1) |K| over samples with x > x1.
    pub m_measured: f64,
    /// The same maximum including the offset near-diagonal evaluations.
    pub m_widened: f64,
    pub offset: f64,
}

impl IteratedKernelStack {
    /// A stack from explicit samples (used for synthetic kernels).
    pub fn from_samples(points: Vec<SamplePoint>, k1: Vec<f64>) -> Self {
        let n = points.len();
        assert_eq!(k1.len(), n * n);
        let mut m = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let d = points[i].x - points[j].x;
                if d > 0.0 {
                    m = m.max(d.sqrt() * k1[i * n + j].abs());
                }
            }
        }
        IteratedKernelStack { points, iterates: vec![k1], m_measured: m, m_widened: m, offset: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn m(&self) -> f64 {
        self.m_widened
    }

    pub fn k(&self, order: usize) -> &[f64] {
        &self.iterates[order - 1]
    }
}

/// Sample the closed kernel on `sample_points(n4)`. Pairs with x1 >= x are
/// zero by causality; same-x pairs sit on the singular set and are stored
/// as zero, while M is widened by evaluating them with the source moved
/// back by `offset`.
pub fn sample_closed_kernel(kernel: &ClosedKernel, n4: usize) -> Result<IteratedKernelStack> {
    let spec = &kernel.spec;
    let points = sample_points(&spec.curve, n4);
    let n = points.len();
    let offset = 1.0 / (3.0 * n4 as f64);
    // One response per source point, reused down its column.
    let responses = map_range(n, |j| {
        let p = points[j];
        let src = Source::from_xy(p.x, p.y);
        (src, kernel.source_response(src))
    });
    let cols: Vec<Vec<f64>> = map_range(n, |j| {
        let (src, resp) = &responses[j];
        (0..n)
            .map(|i| {
                let t = points[i];
                if points[j].x >= t.x {
                    0.0
                } else {
                    kernel.eval_with(t.x, t.y, *src, resp)
                }
            })
            .collect()
    });
    let mut k1 = vec![0.0; n * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            k1[i * n + j] = *v;
        }
    }
    let mut stack = IteratedKernelStack::from_samples(points.clone(), k1);
    // Widening: same-column pairs with the source shifted to x - offset.
    let extra: Vec<f64> = map_range(n, |j| {
        let p = points[j];
        let x1 = p.x - offset;
        if x1 <= 0.0 || p.y <= 0.0 {
            return 0.0;
        }
        let src = Source::from_xy(x1, p.y);
        let resp = kernel.source_response(src);
        let mut m = 0.0f64;
        for t in points.iter().filter(|t| (t.x - p.x).abs() < 1e-12 && t.y > 0.0) {
            m = m.max(offset.sqrt() * kernel.eval_with(t.x, t.y, src, &resp).abs());
        }
        m
    });
    stack.m_widened = extra.iter().fold(stack.m_measured, |a, b| a.max(*b));
    stack.offset = offset;
    Ok(stack)
}

/// K_n = K W K_{n-1} with W the point weights.
pub fn iterate_kernels(stack: &mut IteratedKernelStack, n_max: usize) {
    let n = stack.n();
    let w: Vec<f64> = stack.points.iter().map(|p| p.weight).collect();
    while stack.iterates.len() < n_max {
        let k1 = &stack.iterates[0];
        let prev = stack.iterates.last().unwrap();
        let next: Vec<f64> = map_range(n, |i| {
            let mut row = vec![0.0; n];
            for m in 0..n {
                let a = k1[i * n + m] * w[m];
                if a == 0.0 {
                    continue;
                }
                let pr = &prev[m * n..(m + 1) * n];
                for (r, v) in row.iter_mut().zip(pr) {
                    *r += a * v;
                }
            }
            row
        })
        .into_iter()
        .flatten()
        .collect();
        for v in &next {
            if !v.is_finite() {
                // Numeric overflow guard: stop iterating rather than emit infinities.
                return;
            }
        }
        stack.iterates.push(next);
    }
}

/// (sqrt(pi) M)^n (3/2)^(n-1) d^(n/2 - 1) / Gamma(n/2).
pub fn iterate_bound(m: f64, n: usize, d: f64) -> f64 {
    let nf = n as f64;
    (SQRT_PI * m).powi(n as i32) * 1.5f64.powi(n as i32 - 1) * d.powf(0.5 * nf - 1.0) / gamma(0.5 * nf)
}

#[derive(Debug, Clone, Serialize)]
pub struct IterateBoundRow {
    pub n: usize,
    /// Smallest bound / |K_n| over samples with K_n != 0.
    pub min_slack: f64,
    pub violations: usize,
    /// Nonzero samples with x1 >= x.
    pub causality_breaks: usize,
}

pub fn check_iterate_bounds(stack: &IteratedKernelStack) -> Vec<IterateBoundRow> {
    let n = stack.n();
    let m = stack.m();
    stack
        .iterates
        .iter()
        .enumerate()
        .map(|(idx, kn)| {
            let order = idx + 1;
            let mut row = IterateBoundRow { n: order, min_slack: f64::INFINITY, violations: 0, causality_breaks: 0 };
            for i in 0..n {
                for j in 0..n {
                    let v = kn[i * n + j].abs();
                    let d = stack.points[i].x - stack.points[j].x;
                    if d <= 0.0 {
                        if v != 0.0 {
                            row.causality_breaks += 1;
                        }
                        continue;
                    }
                    if v == 0.0 {
                        continue;
                    }
                    let slack = iterate_bound(m, order, d) / v;
                    row.min_slack = row.min_slack.min(slack);
                    // Equality is attained where M is measured; allow for rounding.
                    if slack < 1.0 - 1e-12 {
                        row.violations += 1;
                    }
                }
            }
            row
        })
        .collect()
}

/// (3/2 sqrt(pi) M)^n / Gamma(1 + n/2).
pub fn bound_curve(m: f64, n: usize) -> f64 {
    (1.5 * SQRT_PI * m).powi(n as i32) / gamma(1.0 + 0.5 * n as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub m: f64,
    pub m_measured: f64,
    pub norms: Vec<f64>,
    pub roots: Vec<f64>,
    pub bound_curve: Vec<f64>,
    pub sobolev_ratio: Vec<f64>,
}

impl NormReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,norm,root,bound\n");
        for k in 0..self.norms.len() {
            s.push_str(&format!("{},{},{},{}\n", k + 1, self.norms[k], self.roots[k], self.bound_curve[k]));
        }
        s
    }

    /// Last root below the first, and the tail (from n = 3) non-increasing.
    pub fn eventually_decreasing(&self) -> bool {
        let r = &self.roots;
        if r.len() < 2 {
            return false;
        }
        r[r.len() - 1] < r[0] && r.windows(2).skip(2).all(|w| w[1] <= w[0])
    }

    pub fn below_bound_from(&self, n0: usize) -> bool {
        self.roots.iter().zip(&self.bound_curve).enumerate().skip(n0 - 1).all(|(_, (r, b))| r < b)
    }
}

/// L2(Omega x Omega) norms of the iterates and their n-th roots.
pub fn quasinilpotency_trend(stack: &IteratedKernelStack) -> NormReport {
    let n = stack.n();
    let w: Vec<f64> = stack.points.iter().map(|p| p.weight).collect();
    let norms: Vec<f64> = stack
        .iterates
        .iter()
        .map(|kn| {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += w[i] * w[j] * kn[i * n + j] * kn[i * n + j];
                }
            }
            s.sqrt()
        })
        .collect();
    let roots = norms.iter().enumerate().map(|(k, v)| v.powf(1.0 / (k + 1) as f64)).collect();
    let bound = (1..=norms.len()).map(|k| bound_curve(stack.m(), k)).collect();
    NormReport { m: stack.m(), m_measured: stack.m_measured, norms, roots, bound_curve: bound, sobolev_ratio: vec![] }
}

/// Squared L2 norm over the parabolic pairs of B = theta(x - x1) G(x - x1, y, y1),
/// by quadrature of the image series: integral_0^1 (1 - s) I(s) ds with
/// I(s) = integral integral G(s, y, y1)^2 dy dy1 and s = v^2.
pub fn b_block_norm_sq() -> f64 {
    let inner = |s: f64| -> f64 {
        let r = s.sqrt();
        let terms = 1 + (6.0 * r).ceil() as i64;
        let rule = gauss(16);
        let outer_breaks = breakpoints(0.0, 1.0, (1..8).map(|k| k as f64 / 8.0));
        composite(&outer_breaks, 16, |y| {
            let extra = [-8.0, -4.0, -2.0, -1.0, 1.0, 2.0, 4.0, 8.0].map(|k| y + k * r);
            let br = breakpoints(0.0, 1.0, extra);
            let mut acc = 0.0;
            for w in br.windows(2) {
                acc += rule.integrate(w[0], w[1], |y1| {
                    let g = green_g_raw(s, y, y1, terms);
                    g * g
                });
            }
            acc
        })
    };
    let vb = breakpoints(0.0, 1.0, [0.02, 0.05, 0.1, 0.2, 0.4, 0.7]);
    composite(&vb, 16, |v| {
        let s = v * v;
        if s == 0.0 {
            return 0.0;
        }
        2.0 * v * (1.0 - s) * inner(s)
    })
}

/// Closed form of the same norm from the sine expansion of G:
/// sum_k [1 / (2 k^2 pi^2) - (1 - exp(-2 k^2 pi^2)) / (4 k^4 pi^4)].
pub fn b_block_norm_sq_series(terms: usize) -> f64 {
    (1..=terms)
        .map(|k| {
            let a = 2.0 * (k as f64 * PI).powi(2);
            1.0 / a - (1.0 - (-a).exp()) / (a * a)
        })
        .sum()
}

/// Discrete L2 norm of f over both subregions.
pub fn forcing_l2(f: &ForcingField, curve: &CharCurve) -> f64 {
    let br = breakpoints(0.0, 1.0, (1..8).map(|k| k as f64 / 8.0));
    let upper = composite(&br, 8, |x| composite(&br, 8, |y| f.eval(x, y).powi(2)));
    let lower = 0.5
        * composite(&br, 8, |eta| {
            let lam = curve.lambda(eta);
            composite(&[lam, 0.5 * (lam + eta), eta], 8, |xi| {
                let (x, y) = from_characteristic(xi, eta);
                f.eval(x, y.min(-1e-300)).powi(2)
            })
        });
    (upper + lower).sqrt()
}

/// Discrete H1 norm of a sampled field: cell-averaged values and
/// differences on the square and on the (xi, eta) cells of the triangle.
pub fn field_h1(field: &SolutionField) -> f64 {
    let n = field.nx;
    let h = 1.0 / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..field.ny {
            let hy = 1.0 / field.ny as f64;
            let (a, b, c, d) = (field.par(i, j), field.par(i + 1, j), field.par(i, j + 1), field.par(i + 1, j + 1));
            let u = 0.25 * (a + b + c + d);
            let ux = 0.5 * ((b - a) + (d - c)) / h;
            let uy = 0.5 * ((c - a) + (d - b)) / hy;
            s += h * hy * (u * u + ux * ux + uy * uy);
        }
    }
    let m = field.m as i64;
    let hm = 1.0 / m as f64;
    for i in 0..m {
        for j in i..m {
            let (a, b, c, d) = (field.hyp(i, j), field.hyp(i + 1, j), field.hyp(i, j + 1), field.hyp(i + 1, j + 1));
            if [a, b, c, d].iter().any(|v| v.is_nan()) {
                continue;
            }
            let u = 0.25 * (a + b + c + d);
            let uxi = 0.5 * ((b - a) + (d - c)) / hm;
            let ueta = 0.5 * ((c - a) + (d - b)) / hm;
            let (ux, uy) = (uxi + ueta, uxi - ueta);
            s += 0.5 * hm * hm * (u * u + ux * ux + uy * uy);
        }
    }
    s.sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct AprioriRow {
    pub forcing: String,
    pub grids: Vec<usize>,
    /// ||F|| / ||f|| per grid.
    pub rhs_ratio: Vec<f64>,
    /// ||u||_1 / ||f||_0 per grid.
    pub sobolev_ratio: Vec<f64>,
}

impl AprioriRow {
    /// Largest max/min ratio across grids of either quantity.
    pub fn spread(&self) -> f64 {
        let s = |v: &[f64]| {
            let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(*x), b.max(*x)));
            if hi == 0.0 {
                1.0
            } else {
                hi / lo
            }
        };
        s(&self.rhs_ratio).max(s(&self.sobolev_ratio))
    }
}

/// Stability ratios for each named builtin forcing on each grid.
pub fn check_apriori(template: &ProblemSpec, forcings: &[&str], grids: &[usize]) -> Result<Vec<AprioriRow>> {
    let mut fields = Vec::new();
    for name in forcings {
        let field = crate::functions::builtin(name, &Default::default())?;
        fields.push((name.to_string(), ForcingField::new(field, template.forcing.smoothness)?));
    }
    check_apriori_fields(template, &fields, grids)
}

/// Stability ratios for arbitrary labelled forcings.
pub fn check_apriori_fields(
    template: &ProblemSpec,
    forcings: &[(String, ForcingField)],
    grids: &[usize],
) -> Result<Vec<AprioriRow>> {
    let mut rows = Vec::new();
    for (name, forcing) in forcings {
        let fnorm = forcing_l2(forcing, &template.curve);
        let mut row =
            AprioriRow { forcing: name.clone(), grids: grids.to_vec(), rhs_ratio: vec![], sobolev_ratio: vec![] };
        for &n in grids {
            let mut spec = at_resolution(template, n);
            spec.forcing = forcing.clone();
            if fnorm == 0.0 {
                row.rhs_ratio.push(0.0);
                row.sobolev_ratio.push(0.0);
                continue;
            }
            let ts = solve_trace_full(&spec)?;
            let sol = DirectSolution { spec: spec.clone(), traces: ts.traces.clone(), solve: ts.clone() };
            let (nx, ny) = spec.field_resolution;
            let sf = SolutionField::sample(&sol, &spec.curve, nx, ny, MethodTag::Direct);
            row.rhs_ratio.push(ts.rhs.l2() / fnorm);
            row.sobolev_ratio.push(field_h1(&sf) / fnorm);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// The default library, for callers that want every member.
pub fn library() -> Vec<&'static str> {
    FORCING_LIBRARY.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectralMethod {
    Neumann,
    /// Forward substitution in x order, used when the Neumann terms grow
    /// so large that summing them would cancel away the answer.
    Causal,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSolution {
    pub lambda: (f64, f64),
    pub method: SpectralMethod,
    pub iterations: usize,
    /// Largest Neumann term relative to L^{-1} f.
    pub peak_growth: f64,
    /// Relative residual of u - lambda L^{-1} u - L^{-1} f on the points.
    pub residual: f64,
    #[serde(skip)]
    pub u: Vec<Complex64>,
}

/// Terms larger than this relative to the data would lose every digit of
/// the (much smaller) sum.
const NEUMANN_GROWTH_LIMIT: f64 = 1e6;
pub const SPECTRAL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 500;

/// Solve u = L^{-1} f + lambda L^{-1} u on the stack's points, where
/// `linv_f` holds L^{-1} f at those points.
pub fn solve_spectral(stack: &IteratedKernelStack, lambda: Complex64, linv_f: &[f64]) -> Result<SpectralSolution> {
    let n = stack.n();
    let k = stack.k(1);
    let w: Vec<f64> = stack.points.iter().map(|p| p.weight).collect();
    let b: Vec<Complex64> = linv_f.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let apply = |v: &[Complex64]| -> Vec<Complex64> {
        map_range(n, |i| {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let kij = k[i * n + j];
                if kij != 0.0 {
                    s += v[j] * (kij * w[j]);
                }
            }
            s * lambda
        })
    };
    let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let bnorm = norm(&b).max(1e-300);
    let residual = |u: &[Complex64]| {
        let ku = apply(u);
        let r: Vec<Complex64> = (0..n).map(|i| u[i] - ku[i] - b[i]).collect();
        norm(&r) / bnorm
    };

    let mut u = b.clone();
    let mut term = b.clone();
    let mut peak = 1.0f64;
    let mut method = SpectralMethod::Neumann;
    let mut iterations = 0;
    loop {
        if lambda == Complex64::new(0.0, 0.0) {
            break;
        }
        iterations += 1;
        if iterations > SPECTRAL_MAX_ITER {
            return Err(Error::IterationBudget(format!(
                "Neumann iteration for lambda = {lambda} not converged after {SPECTRAL_MAX_ITER} steps"
            )));
        }
        term = apply(&term);
        let tn = norm(&term);
        peak = peak.max(tn / bnorm);
        if peak > NEUMANN_GROWTH_LIMIT {
            method = SpectralMethod::Causal;
            break;
        }
        for (a, t) in u.iter_mut().zip(&term) {
            *a += t;
        }
        if tn < SPECTRAL_TOL * bnorm.max(1.0) {
            break;
        }
    }
    if method == SpectralMethod::Causal {
        // K(p_i; p_j) = 0 unless x_j < x_i, so the system is triangular in x order.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| stack.points[a].x.total_cmp(&stack.points[b].x));
        u = vec![Complex64::new(0.0, 0.0); n];
        for &i in &order {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let kij = k[i * n + j];
                if kij != 0.0 {
                    s += u[j] * (kij * w[j]);
                }
            }
            u[i] = b[i] + lambda * s;
        }
    }
    let res = residual(&u);
    Ok(SpectralSolution { lambda: (lambda.re, lambda.im), method, iterations, peak_growth: peak, residual: res, u })
}

/// L^{-1} f at the stack's points through the kernel-form pipeline.
pub fn linv_at_points(kernel: &ClosedKernel, points: &[SamplePoint]) -> Result<Vec<f64>> {
    let sol = apply_linv_kernel(kernel)?;
    Ok(map_range(points.len(), |i| sol.u(points[i].x, points[i].y)))
}
