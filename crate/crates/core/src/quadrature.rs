//! Gauss-Legendre rules and small composite helpers.

use gauss_quad::GaussLegendre;
use std::sync::OnceLock;

/// A rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    fn new(n: usize) -> Self {
        let g = GaussLegendre::new(n.try_into().expect("order must be >= 2"));
        let (nodes, weights) = g.iter().map(|(x, w)| (*x, *w)).unzip();
        Rule { nodes, weights }
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (c + r * x, r * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Cached Gauss-Legendre rule of the given order.
pub fn gauss(order: usize) -> &'static Rule {
    static CACHE: [OnceLock<Rule>; 5] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = match order {
        4 => 0,
        8 => 1,
        16 => 2,
        32 => 3,
        64 => 4,
        _ => panic!("unsupported Gauss order {order}"),
    };
    CACHE[slot].get_or_init(|| Rule::new(order))
}

/// Composite rule over consecutive breakpoints; empty or reversed panels skipped.
pub fn composite<F: FnMut(f64) -> f64>(breaks: &[f64], order: usize, mut f: F) -> f64 {
    let rule = gauss(order);
    breaks.windows(2).filter(|w| w[1] > w[0]).map(|w| rule.integrate(w[0], w[1], &mut f)).sum()
}

/// `m` equal panels on [a, b].
pub fn panels<F: FnMut(f64) -> f64>(a: f64, b: f64, m: usize, order: usize, f: F) -> f64 {
    let breaks: Vec<f64> = (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect();
    composite(&breaks, order, f)
}

/// Sorted, deduplicated breakpoints clipped to [a, b].
pub fn breakpoints(a: f64, b: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> =
        std::iter::once(a).chain(extra.into_iter().filter(|&t| t > a && t < b)).chain(std::iter::once(b)).collect();
    v.sort_by(|p, q| p.total_cmp(q));
    v.dedup_by(|p, q| (*p - *q).abs() <= 1e-15 * (1.0 + q.abs()));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_is_exact_for_polynomials() {
        for &n in &[4usize, 8, 16, 32, 64] {
            let r = gauss(n);
            let deg = 2 * n - 1;
            let got = r.integrate(0.0, 2.0, |x| x.powi(deg as i32));
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!((got / exact - 1.0).abs() < 1e-12, "order {n}");
        }
    }

    #[test]
    fn composite_handles_kinks_at_breaks() {
        let v = composite(&[-1.0, 0.0, 1.0], 8, |x: f64| x.abs());
        assert!((v - 1.0).abs() < 1e-14);
    }
}
