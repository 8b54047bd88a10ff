//! Gauss–Legendre quadrature, including the rule on (0,1) used to integrate
//! out the latent cluster factor.

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on (-1, 1).
///
/// Computed by Newton iteration on the Legendre polynomial recurrence; nodes
/// are accurate to machine precision for the orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess for the i-th positive root.
        let mut z = ((i as f64 + 0.75) / (n as f64 + 0.5) * std::f64::consts::PI).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(z) and its derivative.
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p0 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Quadrature rule on the open unit interval, used for the latent factor.
///
/// Weights sum to one, nodes are strictly interior and increasing.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl QuadratureRule {
    /// `n`-point Gauss–Legendre rule mapped from (-1,1) to (0,1).
    pub fn gauss_legendre(n: usize) -> Self {
        let (raw_nodes, raw_weights) = gauss_legendre(n);
        let nodes: Vec<f64> = raw_nodes.iter().map(|&x| 0.5 * (x + 1.0)).collect();
        let weights: Vec<f64> = raw_weights.iter().map(|&w| 0.5 * w).collect();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        QuadratureRule { nodes, weights, log_weights }
    }

    /// Gauss–Legendre rule pushed through v = (1 - cos(pi t))/2, which
    /// clusters nodes quadratically at both endpoints.
    ///
    /// Per-observation copula densities can spike near v = 0 or 1 for
    /// clusters whose responses all sit in one tail, and the latent-factor
    /// integrand is their product; the plain affine map needs several
    /// hundred nodes for such clusters while this map is stable at Q = 100.
    pub fn gauss_legendre_cosine(n: usize) -> Self {
        let pi = std::f64::consts::PI;
        let (raw_nodes, raw_weights) = gauss_legendre(n);
        let nodes: Vec<f64> = raw_nodes
            .iter()
            .map(|&x| {
                let t = 0.5 * (x + 1.0);
                0.5 * (1.0 - (pi * t).cos())
            })
            .collect();
        let mut weights: Vec<f64> = raw_nodes
            .iter()
            .zip(&raw_weights)
            .map(|(&x, &w)| {
                let t = 0.5 * (x + 1.0);
                0.5 * w * 0.5 * pi * (pi * t).sin()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= total;
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        QuadratureRule { nodes, weights, log_weights }
    }

    /// The rule used for the latent factor unless the caller overrides it.
    pub fn latent_default(n: usize) -> Self {
        Self::gauss_legendre_cosine(n)
    }

    /// Validate an externally supplied rule against the invariants the
    /// likelihood relies on.
    pub fn from_parts(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::dimension("quadrature nodes/weights length mismatch"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("quadrature weights sum to {sum}, expected 1")));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::domain("quadrature weights must be positive"));
        }
        let interior = nodes.iter().all(|&v| v > 0.0 && v < 1.0);
        let increasing = nodes.windows(2).all(|w| w[0] < w[1]);
        if !interior || !increasing {
            return Err(Error::domain("quadrature nodes must be interior and increasing"));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(QuadratureRule { nodes, weights, log_weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// Integrate a function over (0,1) with this rule.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&v, &w)| w * f(v)).sum()
    }
}

/// Integrate `f` over [a, b] with an `n`-point Gauss–Legendre rule.
pub fn integrate_interval(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes.iter().zip(&weights).map(|(&x, &w)| w * f(mid + half * x)).sum::<f64>() * half
}
