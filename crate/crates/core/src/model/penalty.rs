use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{NpcError, Result};
use crate::expr::Expr;
use crate::numdiff;

/// Scalar penalization `varsigma(x) = exp(v(x))` used by the existence
/// criteria, where `Sigma >= varsigma^2 I`.
#[derive(Debug, Clone)]
pub enum Penalty {
    /// `varsigma` constant.
    Constant(f64),
    /// `v = (beta/2) log(1 + |x|^2) + log(lower_bound)/2`, so
    /// `varsigma^2 = lower_bound (1 + |x|^2)^beta`.
    Polynomial { beta: f64, lower_bound: f64 },
    /// `v = a |x|^2`.
    ExpQuadratic { a: f64 },
    /// `v` given by an expression; derivatives by finite differences.
    Custom(Expr),
}

/// Serializable description of a [`Penalty`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    Constant { value: f64 },
    Polynomial { beta: f64, lower_bound: f64 },
    ExpQuadratic { a: f64 },
    Custom { v: String },
}

impl PenaltySpec {
    pub fn build(&self, dimension: usize) -> Result<Penalty> {
        Ok(match self {
            PenaltySpec::Constant { value } => Penalty::Constant(*value),
            PenaltySpec::Polynomial { beta, lower_bound } => {
                if !(*lower_bound > 0.0) {
                    return Err(NpcError::InvalidParameter(format!(
                        "polynomial penalty lower bound must be positive, found {lower_bound}"
                    )));
                }
                Penalty::Polynomial {
                    beta: *beta,
                    lower_bound: *lower_bound,
                }
            }
            PenaltySpec::ExpQuadratic { a } => Penalty::ExpQuadratic { a: *a },
            PenaltySpec::Custom { v } => Penalty::Custom(Expr::parse(v, dimension)?),
        })
    }
}

impl Penalty {
    pub fn v(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        match self {
            Penalty::Constant(c) => c.ln(),
            Penalty::Polynomial { beta, lower_bound } => {
                0.5 * beta * (1.0 + r2).ln() + 0.5 * lower_bound.ln()
            }
            Penalty::ExpQuadratic { a } => a * r2,
            Penalty::Custom(e) => e.eval(x),
        }
    }

    pub fn varsigma(&self, x: &[f64]) -> f64 {
        match self {
            Penalty::Constant(c) => *c,
            _ => self.v(x).exp(),
        }
    }

    /// `varsigma(x)^2`, rejecting non-positive values.
    pub fn varsigma2(&self, x: &[f64]) -> Result<f64> {
        let s = self.varsigma(x);
        if !(s > 0.0) || !s.is_finite() {
            return Err(NpcError::NonPositivePenalty {
                value: s,
                point: x.to_vec(),
            });
        }
        Ok(match self {
            Penalty::Polynomial { beta, lower_bound } => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                lower_bound * (1.0 + r2).powf(*beta)
            }
            _ => s * s,
        })
    }

    pub fn grad_v(&self, x: &[f64]) -> DVector<f64> {
        let n = x.len();
        let r2: f64 = x.iter().map(|c| c * c).sum();
        match self {
            Penalty::Constant(_) => DVector::zeros(n),
            Penalty::Polynomial { beta, .. } => DVector::from_column_slice(x) * (beta / (1.0 + r2)),
            Penalty::ExpQuadratic { a } => DVector::from_column_slice(x) * (2.0 * a),
            Penalty::Custom(e) => numdiff::gradient(|y| e.eval(y), x),
        }
    }

    pub fn hessian_v(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let r2: f64 = x.iter().map(|c| c * c).sum();
        match self {
            Penalty::Constant(_) => DMatrix::zeros(n, n),
            Penalty::Polynomial { beta, .. } => {
                let d = 1.0 + r2;
                DMatrix::from_fn(n, n, |i, j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    beta * (id / d - 2.0 * x[i] * x[j] / (d * d))
                })
            }
            Penalty::ExpQuadratic { a } => DMatrix::identity(n, n) * (2.0 * a),
            Penalty::Custom(e) => numdiff::hessian(|y| e.eval(y), x),
        }
    }
}
