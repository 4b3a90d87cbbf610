//! Analytic fixtures: Ornstein-Uhlenbeck, Cox-Ingersoll-Ross, Student-t.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    DensityModel, DerivativeMode, DiffusionModel, DiffusionSpec, Domain, Drift, StateSpace,
};
use crate::error::{NpcError, Result};
use crate::expr::Expr;
use crate::linalg;

/// Mean-reversion parameter of the OU fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Kappa {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Kappa {
    fn matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        match self {
            Kappa::Scalar(k) => Ok(DMatrix::identity(n, n) * *k),
            Kappa::Matrix(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(NpcError::DimensionMismatch {
                        expected: n,
                        found: rows.len(),
                    });
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

/// Reversible OU process `dx = -kappa x dt + sigma dB` with stationary law
/// `N(0, (sigma^2/2) kappa^{-1})`. `kappa` must be symmetric positive
/// definite for the process to be reversible with `Sigma = sigma^2 I`.
pub fn make_ou(n: usize, kappa: &Kappa, sigma: f64) -> Result<DiffusionModel> {
    if n == 0 || !(sigma > 0.0) {
        return Err(NpcError::InvalidParameter(format!(
            "OU needs n >= 1 and sigma > 0 (n {n}, sigma {sigma})"
        )));
    }
    let k = kappa.matrix(n)?;
    if linalg::max_asymmetry(&k) > 1e-12 {
        return Err(NpcError::InvalidParameter("OU kappa must be symmetric".into()));
    }
    let l = linalg::cholesky(&k)
        .map_err(|_| NpcError::InvalidParameter("OU kappa must be positive definite".into()))?;
    let inv_l = linalg::solve_lower(&l, &DMatrix::identity(n, n));
    let mut covariance = inv_l.transpose() * inv_l * (0.5 * sigma * sigma);
    linalg::symmetrize(&mut covariance);
    let density = DensityModel::gaussian(DVector::zeros(n), covariance)?;
    let diffusion = DiffusionSpec::constant(DMatrix::identity(n, n) * (sigma * sigma))?
        .with_mode(DerivativeMode::Analytic);
    DiffusionModel::reversible(density, diffusion)
}

/// CIR process `dx = kappa (theta - x) dt + sigma sqrt(x) dB` with its
/// Gamma(2 kappa theta / sigma^2, rate 2 kappa / sigma^2) stationary law.
pub fn make_cir(kappa: f64, theta: f64, sigma: f64) -> Result<DiffusionModel> {
    if !(kappa > 0.0 && theta > 0.0 && sigma > 0.0) {
        return Err(NpcError::InvalidParameter(format!(
            "CIR parameters must be positive (kappa {kappa}, theta {theta}, sigma {sigma})"
        )));
    }
    let s2 = sigma * sigma;
    let density = DensityModel::gamma(2.0 * kappa * theta / s2, 2.0 * kappa / s2)?;
    let diffusion = DiffusionSpec::square_root(StateSpace::new(1, Domain::PositiveOrthant)?, s2)?
        .with_mode(DerivativeMode::Analytic);
    DiffusionModel::reversible(density, diffusion)
}

/// Reversible diffusion with a Student-t(`nu`) stationary density and
/// `Sigma(x) = (1 + |x|^2)^beta I`.
pub fn make_student(n: usize, nu: f64, beta: f64) -> Result<DiffusionModel> {
    let density = DensityModel::student_t(n, nu)?;
    let diffusion = DiffusionSpec::radial(n, 1.0, beta)?.with_mode(DerivativeMode::Analytic);
    DiffusionModel::reversible(density, diffusion)
}

/// Model from expressions: `log q` up to a constant, the `n x n` entries
/// of `Sigma` (row-major) and optionally an explicit drift. Without a
/// drift the model is reversible.
pub fn make_custom(
    space: StateSpace,
    log_density: &str,
    sigma: &[Vec<String>],
    drift: Option<&[String]>,
) -> Result<DiffusionModel> {
    let n = space.dimension();
    if sigma.len() != n || sigma.iter().any(|row| row.len() != n) {
        return Err(NpcError::DimensionMismatch {
            expected: n,
            found: sigma.len(),
        });
    }
    let density = DensityModel::custom(space.clone(), Expr::parse(log_density, n)?)?;
    let entries = sigma
        .iter()
        .flatten()
        .map(|s| Expr::parse(s, n))
        .collect::<Result<Vec<_>>>()?;
    let diffusion = DiffusionSpec::custom(space, entries)?;
    let model = DiffusionModel::reversible(density, diffusion)?;
    match drift {
        None => Ok(model),
        Some(d) => {
            let entries = d.iter().map(|s| Expr::parse(s, n)).collect::<Result<Vec<_>>>()?;
            model.with_drift(Drift::Custom(entries))
        }
    }
}
