//! Truncated eigen-expansions: transition operator, resolvent and long-run
//! variance acting on NPC coefficients.
//!
//! The expansions are exact only for functions in the span of the basis.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{NpcError, Result};
use crate::extract::NpcSet;
use crate::quadrature::QuadratureRule;

/// `delta_j >= ADMISSIBLE * delta_max` for modes entering the long-run
/// variance.
pub const ADMISSIBLE: f64 = 1e-10;

/// A function represented by its coefficients `c_j = <phi, psi_j>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFunction {
    pub coefficients: Vec<f64>,
}

impl SpectralFunction {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(NpcError::NonFinite("spectral coefficients".into()));
        }
        Ok(SpectralFunction { coefficients })
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// `sqrt(sum c_j^2)`, the L2(q) norm of the truncated expansion.
    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    fn check(&self, npcs: &NpcSet) -> Result<()> {
        if self.len() != npcs.len() {
            return Err(NpcError::DimensionMismatch {
                expected: npcs.len(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// `c_j = a_j' w` with `w_k = int B_k phi dmu` under `measure`.
pub fn project<F: Fn(&[f64]) -> f64>(phi: F, npcs: &NpcSet, measure: &QuadratureRule) -> Result<SpectralFunction> {
    let m = npcs.basis.len();
    if measure.dimension() != npcs.basis.dimension() {
        return Err(NpcError::DimensionMismatch {
            expected: npcs.basis.dimension(),
            found: measure.dimension(),
        });
    }
    let mut w = DVector::zeros(m);
    let mut psi = DVector::zeros(m);
    for (x, wt) in measure.iter() {
        npcs.basis.eval_into(x, psi.as_mut_slice());
        w.axpy(wt * phi(x), &psi, 1.0);
    }
    SpectralFunction::new((0..npcs.len()).map(|j| npcs.coefficient(j).dot(&w)).collect())
}

/// Coefficients of `b . Psi` given the Gram matrix `W` of the basis.
pub fn project_basis_coefficients(
    b: &[f64],
    npcs: &NpcSet,
    w: &nalgebra::DMatrix<f64>,
) -> Result<SpectralFunction> {
    if b.len() != npcs.basis.len() || w.nrows() != b.len() {
        return Err(NpcError::DimensionMismatch {
            expected: npcs.basis.len(),
            found: b.len(),
        });
    }
    let wb = w * DVector::from_column_slice(b);
    SpectralFunction::new((0..npcs.len()).map(|j| npcs.coefficient(j).dot(&wb)).collect())
}

/// `exp(-t F)`: `c_j -> exp(-t delta_j) c_j`.
pub fn transition_apply(sf: &SpectralFunction, t: f64, npcs: &NpcSet) -> Result<SpectralFunction> {
    sf.check(npcs)?;
    if !(t >= 0.0) {
        return Err(NpcError::InvalidParameter(format!("time must be >= 0, found {t}")));
    }
    SpectralFunction::new(
        sf.coefficients
            .iter()
            .zip(&npcs.delta)
            .map(|(c, d)| c * (-t * d).exp())
            .collect(),
    )
}

/// `(alpha + F)^{-1}`: `c_j -> c_j / (alpha + delta_j)`.
pub fn resolvent_apply(sf: &SpectralFunction, alpha: f64, npcs: &NpcSet) -> Result<SpectralFunction> {
    sf.check(npcs)?;
    if !(alpha > 0.0) {
        return Err(NpcError::InvalidParameter(format!("alpha must be positive, found {alpha}")));
    }
    SpectralFunction::new(
        sf.coefficients
            .iter()
            .zip(&npcs.delta)
            .map(|(c, d)| c / (alpha + d))
            .collect(),
    )
}

/// Spectral density at frequency zero, `g = sum_{j>=1} 2 c_j^2 / delta_j`.
/// The `j = 0` (constant) coefficient is dropped.
pub fn longrun_variance(sf: &SpectralFunction, npcs: &NpcSet) -> Result<f64> {
    sf.check(npcs)?;
    let d_max = npcs.delta.iter().cloned().fold(0.0, f64::max);
    let tol = ADMISSIBLE * d_max;
    let mut g = 0.0;
    for j in 1..npcs.len() {
        let d = npcs.delta[j];
        if !(d > tol) {
            return Err(NpcError::Inadmissible(format!(
                "mode {j} has delta {d:e} <= {tol:e}"
            )));
        }
        g += 2.0 * sf.coefficients[j].powi(2) / d;
    }
    Ok(g)
}

/// `sum_j c_j psi_j(x)`.
pub fn evaluate(sf: &SpectralFunction, npcs: &NpcSet, x: &[f64]) -> Result<f64> {
    sf.check(npcs)?;
    Ok(npcs
        .evaluate_all(x)
        .iter()
        .zip(&sf.coefficients)
        .map(|(p, c)| p * c)
        .sum())
}
