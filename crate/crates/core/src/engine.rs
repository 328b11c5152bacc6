//! Weakly singular Volterra machinery: product-integration kernel matrices,
//! second-kind marching, first-kind (Abel-type) marching, and resolvents by
//! Neumann series of discretely composed iterated kernels.

use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::quadrature::gauss;
use serde::Serialize;
use std::f64::consts::PI;

/// Nodes 0 = x_0 < ... < x_{n-1} = 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid1D {
    pub nodes: Vec<f64>,
    /// Largest step.
    pub h: f64,
    pub uniform: bool,
}

impl Grid1D {
    /// `cells` equal cells, hence `cells + 1` nodes, so dyadic refinement nests.
    pub fn uniform(cells: usize) -> Self {
        assert!(cells >= 1);
        let nodes = (0..=cells).map(|i| i as f64 / cells as f64).collect();
        Grid1D { nodes, h: 1.0 / cells as f64, uniform: true }
    }

    /// x_i = (i / cells)^2, refined near 0.
    pub fn graded(cells: usize) -> Self {
        assert!(cells >= 1);
        let nodes: Vec<f64> = (0..=cells).map(|i| (i as f64 / cells as f64).powi(2)).collect();
        let h = nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        Grid1D { nodes, h, uniform: false }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Cell index c and local coordinate s in [0, 1] with x = x_c + s h_c.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let last = self.cells();
        let c = if self.uniform {
            ((x * last as f64).floor().max(0.0) as usize).min(last - 1)
        } else {
            self.nodes.partition_point(|&v| v <= x).clamp(1, last) - 1
        };
        let (a, b) = (self.nodes[c], self.nodes[c + 1]);
        (c, ((x - a) / (b - a)).clamp(0.0, 1.0))
    }

    /// Piecewise-linear interpolation of nodal values.
    pub fn interp(&self, v: &[f64], x: f64) -> f64 {
        let (c, s) = self.locate(x);
        (1.0 - s) * v[c] + s * v[c + 1]
    }

    /// Running trapezoid integral with value 0 at x_0.
    pub fn cumulative(&self, v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(v.len());
        let mut acc = 0.0;
        out.push(0.0);
        for c in 0..self.cells() {
            acc += 0.5 * (self.nodes[c + 1] - self.nodes[c]) * (v[c] + v[c + 1]);
            out.push(acc);
        }
        out
    }
}

/// A Volterra kernel split as a(x, t) / sqrt(x - t) + b(x, t) with a, b
/// bounded on 0 <= t <= x <= 1.
pub trait VolterraKernel: Sync {
    fn singular_part(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
    fn regular_part(&self, x: f64, t: f64) -> f64;

    fn eval(&self, x: f64, t: f64) -> f64 {
        let a = self.singular_part(x, t);
        let b = self.regular_part(x, t);
        if a == 0.0 {
            b
        } else {
            a / (x - t).sqrt() + b
        }
    }
}

/// Kernel from closures.
pub struct FnKernel<A, B> {
    pub a: Option<A>,
    pub b: B,
}

impl<B: Fn(f64, f64) -> f64 + Sync> FnKernel<fn(f64, f64) -> f64, B> {
    pub fn regular(b: B) -> Self {
        FnKernel { a: None, b }
    }
}

impl<A: Fn(f64, f64) -> f64 + Sync, B: Fn(f64, f64) -> f64 + Sync> FnKernel<A, B> {
    pub fn weakly_singular(a: A, b: B) -> Self {
        FnKernel { a: Some(a), b }
    }
}

impl<A: Fn(f64, f64) -> f64 + Sync, B: Fn(f64, f64) -> f64 + Sync> VolterraKernel for FnKernel<A, B> {
    fn singular_part(&self, x: f64, t: f64) -> f64 {
        self.a.as_ref().map_or(0.0, |a| a(x, t))
    }
    fn regular_part(&self, x: f64, t: f64) -> f64 {
        (self.b)(x, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SingularityClass {
    Regular,
    InverseSqrt,
}

/// Exact moments of (x - t)^(-1/2) against the two linear hat functions of a
/// cell; p = sqrt(x - t_a), q = sqrt(x - t_b), written without cancellation.
#[inline]
pub fn inv_sqrt_cell_weights(h: f64, p: f64, q: f64) -> (f64, f64) {
    let s = p + q;
    let c = 2.0 * h / (3.0 * s * s);
    (c * (p + 2.0 * q), c * (2.0 * p + q))
}

/// Lower-triangular product-integration weights. For row i and cell
/// c < i, `left`/`right` are the weights of phi(x_c) and phi(x_{c+1}) in
/// the integral of kappa(x_i, t) phi(t) over that cell.
#[derive(Debug, Clone, Serialize)]
pub struct KernelMatrix {
    pub grid: Grid1D,
    pub singularity_class: SingularityClass,
    left: Vec<f64>,
    right: Vec<f64>,
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i.saturating_sub(1)) / 2
}

/// How far sqrt(x - t) |kappa| may grow between two probe distances before
/// the kernel is deemed more singular than declared.
const PROBE_GROWTH: f64 = 3.0;

impl KernelMatrix {
    pub fn build(kernel: &dyn VolterraKernel, grid: &Grid1D, class: SingularityClass) -> Result<Self> {
        probe_singularity(kernel, grid, class)?;
        let rows: Vec<(Vec<f64>, Vec<f64>)> = map_range(grid.n(), |i| {
            let xi = grid.nodes[i];
            let mut l = Vec::with_capacity(i);
            let mut r = Vec::with_capacity(i);
            for c in 0..i {
                let (ta, tb) = (grid.nodes[c], grid.nodes[c + 1]);
                let h = tb - ta;
                let (mut wl, mut wr) = (0.5 * h * kernel.regular_part(xi, ta), 0.5 * h * kernel.regular_part(xi, tb));
                if class == SingularityClass::InverseSqrt {
                    let (pa, pb) = inv_sqrt_cell_weights(h, (xi - ta).sqrt(), (xi - tb).max(0.0).sqrt());
                    wl += pa * kernel.singular_part(xi, ta);
                    wr += pb * kernel.singular_part(xi, tb);
                }
                l.push(wl);
                r.push(wr);
            }
            (l, r)
        });
        let mut left = Vec::with_capacity(row_offset(grid.n()));
        let mut right = Vec::with_capacity(row_offset(grid.n()));
        for (l, r) in rows {
            left.extend(l);
            right.extend(r);
        }
        Ok(KernelMatrix { grid: grid.clone(), singularity_class: class, left, right })
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Cell weights (left, right) of row i, cell c < i.
    #[inline]
    pub fn cell(&self, i: usize, c: usize) -> (f64, f64) {
        let k = row_offset(i) + c;
        (self.left[k], self.right[k])
    }

    /// Assembled weight W[i][j] (zero above the diagonal).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if j > i || i == 0 {
            return 0.0;
        }
        let mut w = 0.0;
        if j < i {
            w += self.cell(i, j).0;
        }
        if j >= 1 {
            w += self.cell(i, j - 1).1;
        }
        w
    }

    /// Integral of kappa(x_i, t) phi(t) over [x_from, x_i].
    pub fn apply_from(&self, i: usize, from: usize, phi: &[f64]) -> f64 {
        let base = row_offset(i);
        (from..i).map(|c| self.left[base + c] * phi[c] + self.right[base + c] * phi[c + 1]).sum()
    }

    pub fn apply_row(&self, i: usize, phi: &[f64]) -> f64 {
        self.apply_from(i, 0, phi)
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        map_range(self.n(), |i| self.apply_row(i, phi))
    }

    /// Dense CSV of W for debugging.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut s = String::new();
        s.push_str(&(0..n).map(|j| format!("w{j}")).collect::<Vec<_>>().join(","));
        s.push('\n');
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{}", self.weight(i, j))).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

fn probe_singularity(kernel: &dyn VolterraKernel, grid: &Grid1D, class: SingularityClass) -> Result<()> {
    for &x in grid.nodes.iter().skip(1) {
        let d1 = 1e-3 * grid.h.min(x);
        let d2 = 1e-2 * d1;
        let (v1, v2) = (kernel.eval(x, x - d1).abs(), kernel.eval(x, x - d2).abs());
        let (m1, m2) = match class {
            SingularityClass::InverseSqrt => (v1 * d1.sqrt(), v2 * d2.sqrt()),
            SingularityClass::Regular => (v1, v2),
        };
        if !m2.is_finite() || (m2 > PROBE_GROWTH * m1 && m2 > 1.0) {
            return Err(Error::Singularity(format!(
                "kernel near the diagonal at x = {x} grows faster than the {class:?} class allows"
            )));
        }
    }
    Ok(())
}

/// phi + K phi = rhs by forward marching.
pub fn solve_volterra2(k: &KernelMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = k.n();
    if rhs.len() != n {
        return Err(Error::Data(format!("rhs has {} values for {} nodes", rhs.len(), n)));
    }
    let mut phi = vec![0.0; n];
    phi[0] = rhs[0];
    for i in 1..n {
        let diag = 1.0 + k.cell(i, i - 1).1;
        if diag.abs() < 1e-8 {
            return Err(Error::Marching(format!("1 + W[{i}][{i}] = {diag:e}")));
        }
        let known = k.apply_row(i, &phi) - k.cell(i, i - 1).1 * phi[i];
        phi[i] = (rhs[i] - known) / diag;
    }
    Ok(phi)
}

/// K phi = g for a first-kind kernel with a nonvanishing 1/sqrt part, by
/// product-trapezoid collocation. phi(x_0) is tied to the next two nodes by
/// linear extrapolation, so the first two rows form a 2x2 system.
pub fn solve_volterra1(k: &KernelMatrix, g: &[f64]) -> Result<Vec<f64>> {
    let n = k.n();
    if g.len() != n {
        return Err(Error::Data(format!("rhs has {} values for {} nodes", g.len(), n)));
    }
    if n < 3 {
        return Err(Error::Resolution("first-kind solve needs at least 2 cells".into()));
    }
    let w = |i, j| k.weight(i, j);
    let (a11, a12) = (2.0 * w(1, 0) + w(1, 1), -w(1, 0));
    let (a21, a22) = (2.0 * w(2, 0) + w(2, 1), w(2, 2) - w(2, 0));
    let det = a11 * a22 - a12 * a21;
    if det.abs() < 1e-14 {
        return Err(Error::Marching("singular starting system".into()));
    }
    let mut phi = vec![0.0; n];
    phi[1] = (g[1] * a22 - a12 * g[2]) / det;
    phi[2] = (a11 * g[2] - a21 * g[1]) / det;
    phi[0] = 2.0 * phi[1] - phi[2];
    for i in 3..n {
        let diag = k.cell(i, i - 1).1;
        if diag.abs() < 1e-14 {
            return Err(Error::Marching(format!("W[{i}][{i}] = {diag:e}")));
        }
        let known = k.apply_row(i, &phi) - diag * phi[i];
        phi[i] = (g[i] - known) / diag;
    }
    Ok(phi)
}

/// The pure Abel kernel (x - t)^(-1/2) on a grid.
pub fn abel_matrix(grid: &Grid1D) -> KernelMatrix {
    let k = FnKernel::weakly_singular(|_, _| 1.0, |_, _| 0.0);
    KernelMatrix::build(&k, grid, SingularityClass::InverseSqrt).expect("Abel kernel is admissible")
}

/// integral_0^x phi(t) (x - t)^(-1/2) dt for piecewise-linear phi.
pub fn forward_abel(phi: &[f64], grid: &Grid1D) -> Vec<f64> {
    abel_matrix(grid).apply(phi)
}

/// Solve integral_0^x phi(t) (x - t)^(-1/2) dt = g(x).
pub fn abel_invert(g: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if g.first().map_or(true, |g0| g0.abs() > 1e-10 * scale) {
        return Err(Error::Data(format!("Abel data must vanish at 0, got {:e}", g[0])));
    }
    solve_volterra1(&abel_matrix(grid), g)
}

/// Resolvent of phi + K phi = F, so that phi = F + integral Gamma F.
/// Gamma = -kappa + gamma_hat with gamma_hat the bounded tail of the series.
#[derive(Debug, Clone, Serialize)]
pub struct ResolventTable {
    pub grid: Grid1D,
    /// Gamma(x_i, x_j), packed lower triangle with diagonal; the diagonal is
    /// NaN when the kernel has a 1/sqrt part.
    pub gamma: Vec<f64>,
    /// Bounded part sum_{n >= 2} (-1)^n kappa_n, same packing.
    pub gamma_hat: Vec<f64>,
    /// Gamma1(x_i, x_j) = 1 + integral_{x_j}^{x_i} Gamma(z, x_j) dz.
    pub gamma1: Vec<f64>,
    pub terms_used: usize,
}

#[inline]
pub fn tri(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl ResolventTable {
    pub fn gamma(&self, i: usize, j: usize) -> f64 {
        self.gamma[tri(i, j)]
    }
    pub fn gamma_hat(&self, i: usize, j: usize) -> f64 {
        self.gamma_hat[tri(i, j)]
    }
    pub fn gamma1(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.gamma1[tri(i, j)]
        }
    }

    /// Gamma1(x_i, t) with t interpolated linearly between columns.
    pub fn gamma1_at(&self, i: usize, t: f64) -> f64 {
        let x = self.grid.nodes[i];
        if t >= x {
            return 1.0;
        }
        let (c, s) = self.grid.locate(t);
        let right = if c + 1 > i { 1.0 } else { self.gamma1(i, c + 1) };
        (1.0 - s) * self.gamma1(i, c) + s * right
    }

    /// F + integral Gamma F, using the kernel weights for the -kappa part.
    pub fn apply(&self, k: &KernelMatrix, f: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        map_range(g.n(), |i| {
            let mut hat = 0.0;
            for c in 0..i {
                let h = g.nodes[c + 1] - g.nodes[c];
                hat += 0.5 * h * (self.gamma_hat(i, c) * f[c] + self.gamma_hat(i, c + 1) * f[c + 1]);
            }
            f[i] - k.apply_row(i, f) + hat
        })
    }
}

pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
const MAX_TERMS: usize = 200;

/// kappa_2(x, t) = integral_t^x kappa(x, z) kappa(z, t) dz with
/// z = t + (x - t) sin^2(theta), which removes both endpoint singularities.
fn kappa2(kernel: &dyn VolterraKernel, x: f64, t: f64) -> f64 {
    let d = x - t;
    let sd = d.sqrt();
    let rule = gauss(16);
    let mut s = 0.0;
    for k in 0..2 {
        let (lo, hi) = (0.25 * PI * k as f64, 0.25 * PI * (k + 1) as f64);
        for (th, w) in rule.mapped(lo, hi) {
            let (sn, cs) = th.sin_cos();
            let z = t + d * sn * sn;
            let (a1, b1) = (kernel.singular_part(x, z), kernel.regular_part(x, z));
            let (a2, b2) = (kernel.singular_part(z, t), kernel.regular_part(z, t));
            s += w * 2.0 * (a1 * a2 + a1 * b2 * sd * sn + b1 * a2 * sd * cs + b1 * b2 * d * sn * cs);
        }
    }
    s
}

/// Neumann series for the resolvent, stopping when the newest iterate's
/// sup norm drops below `series_tol`.
pub fn resolvent(kernel: &dyn VolterraKernel, k: &KernelMatrix, series_tol: f64) -> Result<ResolventTable> {
    let g = &k.grid;
    let n = g.n();
    let size = tri(n - 1, n - 1) + 1;
    // kappa_2 on all node pairs, diagonal included.
    let rows: Vec<Vec<f64>> = map_range(n, |i| (0..=i).map(|j| kappa2(kernel, g.nodes[i], g.nodes[j])).collect());
    let mut term: Vec<f64> = rows.into_iter().flatten().collect();
    let mut hat = term.clone();
    let mut terms_used = 2;
    let mut sup = term.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut sign = 1.0;
    while sup >= series_tol {
        if terms_used >= MAX_TERMS {
            return Err(Error::Divergence(format!("resolvent series still at {sup:e} after {MAX_TERMS} terms")));
        }
        // kappa_{m+1}(x_i, x_j) = integral_{x_j}^{x_i} kappa(x_i, z) kappa_m(z, x_j) dz.
        let prev = &term;
        let rows: Vec<Vec<f64>> = map_range(n, |i| {
            let mut row = vec![0.0; i + 1];
            for (j, slot) in row.iter_mut().enumerate().take(i) {
                let mut acc = 0.0;
                for c in j..i {
                    let (l, r) = k.cell(i, c);
                    acc += l * prev[tri(c, j)] + r * prev[tri(c + 1, j)];
                }
                *slot = acc;
            }
            row
        });
        term = rows.into_iter().flatten().collect();
        sign = -sign;
        sup = 0.0;
        for (h, v) in hat.iter_mut().zip(&term) {
            *h += sign * v;
            sup = sup.max(v.abs());
        }
        terms_used += 1;
    }
    debug_assert_eq!(hat.len(), size);

    let mut gamma = vec![0.0; size];
    for i in 0..n {
        for j in 0..=i {
            let kap = if j < i {
                kernel.eval(g.nodes[i], g.nodes[j])
            } else if kernel.singular_part(g.nodes[i], g.nodes[i]) == 0.0 {
                kernel.regular_part(g.nodes[i], g.nodes[i])
            } else {
                f64::NAN
            };
            gamma[tri(i, j)] = -kap + hat[tri(i, j)];
        }
    }

    // Gamma1 column by column: the kappa part in v = sqrt(z - x_j), the
    // bounded part by the trapezoid rule.
    let rule = gauss(8);
    let cols: Vec<Vec<f64>> = map_range(n, |j| {
        let xj = g.nodes[j];
        let mut out = vec![1.0; n - j];
        let (mut kap_acc, mut hat_acc) = (0.0, 0.0);
        for m in j..n - 1 {
            let (za, zb) = (g.nodes[m], g.nodes[m + 1]);
            let (va, vb) = ((za - xj).sqrt(), (zb - xj).sqrt());
            kap_acc += rule.integrate(va, vb, |v| {
                let z = xj + v * v;
                2.0 * (kernel.singular_part(z, xj) + v * kernel.regular_part(z, xj))
            });
            hat_acc += 0.5 * (zb - za) * (hat[tri(m, j)] + hat[tri(m + 1, j)]);
            out[m + 1 - j] = 1.0 - kap_acc + hat_acc;
        }
        out
    });
    let mut gamma1 = vec![0.0; size];
    for (j, col) in cols.iter().enumerate() {
        for (off, v) in col.iter().enumerate() {
            gamma1[tri(j + off, j)] = *v;
        }
    }
    Ok(ResolventTable { grid: g.clone(), gamma, gamma_hat: hat, gamma1, terms_used })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_weights_integrate_linears_exactly() {
        let (x, ta, tb) = (1.0f64, 0.3f64, 0.5f64);
        let (wa, wb) = inv_sqrt_cell_weights(tb - ta, (x - ta).sqrt(), (x - tb).sqrt());
        // integral of (x - t)^(-1/2) and t (x - t)^(-1/2) over [ta, tb].
        let m0 = 2.0 * ((x - ta).sqrt() - (x - tb).sqrt());
        let f = |t: f64| -2.0 / 3.0 * (x - t).sqrt() * (2.0 * x + t);
        let m1 = f(tb) - f(ta);
        assert!((wa + wb - m0).abs() < 1e-15);
        assert!((wa * ta + wb * tb - m1).abs() < 1e-15);
    }

    #[test]
    fn locate_and_interp() {
        let g = Grid1D::uniform(4);
        assert_eq!(g.locate(1.0), (3, 1.0));
        assert!((g.interp(&[0.0, 1.0, 2.0, 3.0, 4.0], 0.6) - 2.4).abs() < 1e-14);
        let gg = Grid1D::graded(4);
        let (c, s) = gg.locate(0.5);
        assert_eq!(c, 2);
        assert!((gg.nodes[2] + s * (gg.nodes[3] - gg.nodes[2]) - 0.5).abs() < 1e-14);
    }
}
