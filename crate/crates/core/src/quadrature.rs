//! Discrete measures used in place of the stationary density: product
//! Gauss rules for the Gaussian and Gamma fixtures, tensor grids for other
//! densities and the empirical measure of a sample.

use gauss_quad::{GaussHermite, GaussLaguerre, GaussLegendre};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{NpcError, Result};
use crate::model::DensityModel;

/// Nodes and weights of a discrete measure, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    points: Vec<f64>,
    dimension: usize,
    weights: Vec<f64>,
    label: String,
}

impl QuadratureRule {
    pub fn new(points: Vec<f64>, dimension: usize, weights: Vec<f64>, label: &str) -> Result<Self> {
        if dimension == 0 || points.len() != dimension * weights.len() {
            return Err(NpcError::DimensionMismatch {
                expected: dimension * weights.len(),
                found: points.len(),
            });
        }
        if weights.is_empty() {
            return Err(NpcError::InvalidParameter("quadrature rule has no nodes".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(NpcError::InvalidParameter(format!(
                "quadrature weights must be positive, found {w}"
            )));
        }
        Ok(QuadratureRule {
            points,
            dimension,
            weights,
            label: label.to_string(),
        })
    }

    /// Tensor Gauss-Hermite rule exact for polynomials of degree
    /// `2 order - 1` per coordinate under a Gaussian density.
    pub fn gauss_hermite(density: &DensityModel, order: usize) -> Result<Self> {
        let (mean, factor) = density.gaussian_parameters().ok_or_else(|| {
            NpcError::InvalidParameter("Gauss-Hermite rule needs a Gaussian density".into())
        })?;
        let n = mean.len();
        let rule = GaussHermite::new(order.max(2))
            .map_err(|e| NpcError::InvalidParameter(format!("Gauss-Hermite order: {e}")))?;
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let nodes: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (std::f64::consts::SQRT_2 * x, w / sqrt_pi))
            .collect();
        let (zs, weights) = tensor(&nodes, n);
        let mut points = Vec::with_capacity(zs.len());
        for z in zs.chunks(n) {
            let x = mean + factor * DVector::from_column_slice(z);
            points.extend(x.iter());
        }
        QuadratureRule::new(points, n, weights, &format!("gauss_hermite(order={order})"))
    }

    /// Generalized Gauss-Laguerre rule for a Gamma density, exact for
    /// polynomials of degree `2 order - 1`.
    pub fn gauss_laguerre(density: &DensityModel, order: usize) -> Result<Self> {
        let (shape, rate) = density.gamma_parameters().ok_or_else(|| {
            NpcError::InvalidParameter("Gauss-Laguerre rule needs a Gamma density".into())
        })?;
        let rule = GaussLaguerre::new(order.max(2), shape - 1.0)
            .map_err(|e| NpcError::InvalidParameter(format!("Gauss-Laguerre order: {e}")))?;
        let pairs = rule.as_node_weight_pairs();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let points = pairs.iter().map(|p| p.0 / rate).collect();
        let weights = pairs.iter().map(|p| p.1 / total).collect();
        QuadratureRule::new(points, 1, weights, &format!("gauss_laguerre(order={order})"))
    }

    /// Tensor Gauss-Legendre grid on a box, weighted by `q` and normalized
    /// to unit mass; suitable for densities known up to a constant.
    pub fn tensor_grid(
        density: &DensityModel,
        lower: &[f64],
        upper: &[f64],
        points_per_dim: usize,
    ) -> Result<Self> {
        let n = density.dimension();
        if lower.len() != n || upper.len() != n {
            return Err(NpcError::DimensionMismatch {
                expected: n,
                found: lower.len(),
            });
        }
        if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
            return Err(NpcError::InvalidParameter("grid bounds must satisfy lower < upper".into()));
        }
        let rule = GaussLegendre::new(points_per_dim.max(2))
            .map_err(|e| NpcError::InvalidParameter(format!("Gauss-Legendre order: {e}")))?;
        let unit: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        let (us, base) = tensor(&unit, n);
        let mut points = Vec::with_capacity(us.len());
        let mut weights = Vec::with_capacity(base.len());
        let mut log_q = Vec::with_capacity(base.len());
        for (u, w) in us.chunks(n).zip(&base) {
            let x: Vec<f64> = (0..n)
                .map(|i| 0.5 * (lower[i] + upper[i]) + 0.5 * (upper[i] - lower[i]) * u[i])
                .collect();
            log_q.push(density.log_q(&x));
            points.extend_from_slice(&x);
            weights.push(*w);
        }
        let peak = log_q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (w, l) in weights.iter_mut().zip(&log_q) {
            *w *= (l - peak).exp();
        }
        let total: f64 = weights.iter().sum();
        // Nodes where q underflows carry no mass; drop them rather than
        // reject the grid.
        let mut kept_points = Vec::with_capacity(points.len());
        let mut kept_weights = Vec::with_capacity(weights.len());
        for (x, w) in points.chunks(n).zip(&weights) {
            if *w / total > 0.0 {
                kept_points.extend_from_slice(x);
                kept_weights.push(w / total);
            }
        }
        QuadratureRule::new(
            kept_points,
            n,
            kept_weights,
            &format!("tensor_grid(points_per_dim={points_per_dim})"),
        )
    }

    /// Equal weights `1/T` on the rows of `states`.
    pub fn empirical(states: &[f64], dimension: usize) -> Result<Self> {
        if dimension == 0 || states.len() % dimension != 0 {
            return Err(NpcError::DimensionMismatch {
                expected: dimension,
                found: states.len(),
            });
        }
        let t = states.len() / dimension;
        QuadratureRule::new(states.to_vec(), dimension, vec![1.0 / t as f64; t], "empirical")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.chunks(self.dimension).zip(self.weights.iter().copied())
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Tensor product of a one-dimensional rule; returns flattened points and
/// product weights.
fn tensor(nodes: &[(f64, f64)], n: usize) -> (Vec<f64>, Vec<f64>) {
    let k = nodes.len();
    let total = k.pow(n as u32);
    let mut points = Vec::with_capacity(total * n);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut w = 1.0;
        for _ in 0..n {
            let (x, wi) = nodes[rest % k];
            points.push(x);
            w *= wi;
            rest /= k;
        }
        weights.push(w);
    }
    (points, weights)
}
