use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::space::{Domain, StateSpace};
use crate::error::{NpcError, Result};
use crate::expr::Expr;
use crate::linalg;
use crate::numdiff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    Analytic,
    #[default]
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityFamily {
    Gaussian,
    Gamma,
    StudentT,
    Custom,
}

#[derive(Debug, Clone)]
enum Kind {
    Gaussian {
        mean: DVector<f64>,
        precision: DMatrix<f64>,
        /// Cholesky factor of the covariance.
        factor: DMatrix<f64>,
        log_norm: f64,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    StudentT {
        nu: f64,
        log_norm: f64,
    },
    Custom {
        log_density: Expr,
    },
}

/// A stationary density `q`, accessed through `log q` and its derivatives.
/// `h = -(1/2) log q` is derived from the same quantities.
#[derive(Debug, Clone)]
pub struct DensityModel {
    space: StateSpace,
    kind: Kind,
    mode: DerivativeMode,
}

impl DensityModel {
    pub fn gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.shape() != (n, n) {
            return Err(NpcError::DimensionMismatch {
                expected: n,
                found: covariance.nrows(),
            });
        }
        let factor = linalg::cholesky(&covariance)
            .map_err(|_| NpcError::InvalidParameter("covariance must be positive definite".into()))?;
        let inv_factor = linalg::solve_lower(&factor, &DMatrix::identity(n, n));
        let precision = inv_factor.transpose() * &inv_factor;
        let log_det: f64 = factor.diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let log_norm = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(DensityModel {
            space: StateSpace::full(n),
            kind: Kind::Gaussian {
                mean,
                precision,
                factor,
                log_norm,
            },
            mode: DerivativeMode::Analytic,
        })
    }

    pub fn standard_normal(n: usize) -> Self {
        Self::gaussian(DVector::zeros(n), DMatrix::identity(n, n)).expect("identity covariance")
    }

    /// Gamma density with the given shape and rate on the positive half-line.
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) {
            return Err(NpcError::InvalidParameter(format!(
                "gamma shape and rate must be positive (shape {shape}, rate {rate})"
            )));
        }
        Ok(DensityModel {
            space: StateSpace::new(1, Domain::PositiveOrthant)?,
            kind: Kind::Gamma { shape, rate },
            mode: DerivativeMode::Analytic,
        })
    }

    /// Multivariate Student-t with `nu` degrees of freedom, identity scale.
    pub fn student_t(dimension: usize, nu: f64) -> Result<Self> {
        if !(nu > 0.0) || dimension == 0 {
            return Err(NpcError::InvalidParameter(format!(
                "student-t needs nu > 0 and dimension >= 1 (nu {nu}, n {dimension})"
            )));
        }
        let n = dimension as f64;
        let log_norm = ln_gamma(0.5 * (nu + n))
            - ln_gamma(0.5 * nu)
            - 0.5 * n * (nu * std::f64::consts::PI).ln();
        Ok(DensityModel {
            space: StateSpace::full(dimension),
            kind: Kind::StudentT { nu, log_norm },
            mode: DerivativeMode::Analytic,
        })
    }

    /// `log q` given up to an additive constant by an expression.
    pub fn custom(space: StateSpace, log_density: Expr) -> Result<Self> {
        if log_density.arity() > space.dimension() {
            return Err(NpcError::InvalidParameter(
                "log-density references a coordinate beyond the dimension".into(),
            ));
        }
        Ok(DensityModel {
            space,
            kind: Kind::Custom { log_density },
            mode: DerivativeMode::FiniteDifference,
        })
    }

    /// Same density, derivatives forced to the given mode. Custom densities
    /// have no analytic derivatives and stay in finite-difference mode.
    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = match self.kind {
            Kind::Custom { .. } => DerivativeMode::FiniteDifference,
            _ => mode,
        };
        self
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }

    pub fn family(&self) -> DensityFamily {
        match self.kind {
            Kind::Gaussian { .. } => DensityFamily::Gaussian,
            Kind::Gamma { .. } => DensityFamily::Gamma,
            Kind::StudentT { .. } => DensityFamily::StudentT,
            Kind::Custom { .. } => DensityFamily::Custom,
        }
    }

    /// Gaussian mean and covariance factor, when applicable.
    pub fn gaussian_parameters(&self) -> Option<(&DVector<f64>, &DMatrix<f64>)> {
        match &self.kind {
            Kind::Gaussian { mean, factor, .. } => Some((mean, factor)),
            _ => None,
        }
    }

    /// Gamma shape and rate, when applicable.
    pub fn gamma_parameters(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::Gamma { shape, rate } => Some((shape, rate)),
            _ => None,
        }
    }

    pub fn log_q(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Gaussian {
                mean,
                precision,
                log_norm,
                ..
            } => {
                let d = DVector::from_column_slice(x) - mean;
                log_norm - 0.5 * d.dot(&(precision * &d))
            }
            Kind::Gamma { shape, rate } => {
                (shape - 1.0) * x[0].ln() - rate * x[0] + shape * rate.ln() - ln_gamma(*shape)
            }
            Kind::StudentT { nu, log_norm } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let n = x.len() as f64;
                log_norm - 0.5 * (nu + n) * (1.0 + r2 / nu).ln()
            }
            Kind::Custom { log_density } => log_density.eval(x),
        }
    }

    pub fn q(&self, x: &[f64]) -> f64 {
        self.log_q(x).exp()
    }

    pub fn grad_log_q(&self, x: &[f64]) -> DVector<f64> {
        if self.mode == DerivativeMode::FiniteDifference {
            return numdiff::gradient(|y| self.log_q(y), x);
        }
        match &self.kind {
            Kind::Gaussian {
                mean, precision, ..
            } => -(precision * (DVector::from_column_slice(x) - mean)),
            Kind::Gamma { shape, rate } => DVector::from_element(1, (shape - 1.0) / x[0] - rate),
            Kind::StudentT { nu, .. } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let n = x.len() as f64;
                DVector::from_column_slice(x) * (-(nu + n) / (nu + r2))
            }
            Kind::Custom { .. } => unreachable!("custom densities use finite differences"),
        }
    }

    pub fn hessian_log_q(&self, x: &[f64]) -> DMatrix<f64> {
        if self.mode == DerivativeMode::FiniteDifference {
            return numdiff::hessian(|y| self.log_q(y), x);
        }
        match &self.kind {
            Kind::Gaussian { precision, .. } => -precision,
            Kind::Gamma { shape, .. } => DMatrix::from_element(1, 1, -(shape - 1.0) / (x[0] * x[0])),
            Kind::StudentT { nu, .. } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let n = x.len();
                let c = nu + n as f64;
                let d = nu + r2;
                DMatrix::from_fn(n, n, |i, j| {
                    let id = if i == j { 1.0 } else { 0.0 };
                    -c * (id / d - 2.0 * x[i] * x[j] / (d * d))
                })
            }
            Kind::Custom { .. } => unreachable!("custom densities use finite differences"),
        }
    }

    /// Gradient of `h = -(1/2) log q`.
    pub fn grad_h(&self, x: &[f64]) -> DVector<f64> {
        self.grad_log_q(x) * -0.5
    }

    /// Hessian of `h = -(1/2) log q`.
    pub fn hessian_h(&self, x: &[f64]) -> DMatrix<f64> {
        self.hessian_log_q(x) * -0.5
    }

    /// Exact draw from the density, where a sampler is known.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Gaussian { mean, factor, .. } => {
                let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                Some((mean + factor * z).as_slice().to_vec())
            }
            Kind::Gamma { shape, rate } => {
                let g = Gamma::new(*shape, 1.0 / rate).ok()?;
                Some(vec![g.sample(rng)])
            }
            Kind::StudentT { nu, .. } => {
                let chi = ChiSquared::new(*nu).ok()?;
                let scale = (nu / chi.sample(rng)).sqrt();
                Some(
                    (0..self.dimension())
                        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                )
            }
            Kind::Custom { .. } => None,
        }
    }
}
