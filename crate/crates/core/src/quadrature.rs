//! Gauss-Legendre quadrature on mapped intervals.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_NODES: usize = 256;
/// Half-width of the integration window in standard deviations.
pub const DEFAULT_WINDOW: f64 = 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
    window: T,
}

impl<T: Real> Default for QuadratureRule<T> {
    fn default() -> Self {
        Self::gauss_legendre(DEFAULT_NODES, T::lit(DEFAULT_WINDOW)).expect("valid defaults")
    }
}

impl<T: Real> QuadratureRule<T> {
    pub fn gauss_legendre(node_count: usize, window: T) -> Result<Self> {
        if node_count < 2 {
            return Err(Error::invalid("nodes", "need at least 2 quadrature nodes"));
        }
        if !(window > T::zero()) || !window.is_finite() {
            return Err(Error::invalid("window", "must be positive"));
        }
        let (nodes, weights) = legendre_nodes(node_count);
        Ok(Self {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
            window,
        })
    }

    /// Default window with `node_count` nodes.
    pub fn with_nodes(node_count: usize) -> Result<Self> {
        Self::gauss_legendre(node_count, T::lit(DEFAULT_WINDOW))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn window(&self) -> T {
        self.window
    }

    /// Same window, twice the nodes.
    pub fn refined(&self) -> Self {
        Self::gauss_legendre(2 * self.node_count(), self.window).expect("refinement of a valid rule")
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        if a == b {
            return T::zero();
        }
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Like [`integrate`](Self::integrate) but errors on a non-finite integrand.
    pub fn try_integrate<F: FnMut(T) -> Result<T>>(&self, a: T, b: T, mut f: F) -> Result<T> {
        if a == b {
            return Ok(T::zero());
        }
        let mut acc = T::zero();
        for (x, w) in self.mapped(a, b) {
            let v = f(x)?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("integrand is {v} at {x}")));
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Composite rule over the sub-intervals delimited by `breaks`
    /// (points outside `(a, b)` are ignored).
    pub fn try_integrate_split<F: FnMut(T) -> Result<T>>(
        &self,
        a: T,
        b: T,
        breaks: &[T],
        mut f: F,
    ) -> Result<T> {
        let mut cuts: Vec<T> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
        cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
        let mut lo = a;
        let mut acc = T::zero();
        for hi in cuts.into_iter().chain(std::iter::once(b)) {
            acc += self.try_integrate(lo, hi, &mut f)?;
            lo = hi;
        }
        Ok(acc)
    }
}

/// Nodes and weights on `[-1, 1]` by Newton iteration on the three-term
/// Legendre recurrence.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
