//! Densities, diffusion matrices, the reversible drift construction, the
//! generator and the potential functions behind the existence criteria.

mod density;
mod diffusion;
mod fixtures;
mod penalty;
mod space;
mod spec;

use nalgebra::{DMatrix, DVector};

pub use density::{DensityFamily, DensityModel, DerivativeMode};
pub use diffusion::DiffusionSpec;
pub use fixtures::{make_cir, make_custom, make_ou, make_student, Kappa};
pub use penalty::{Penalty, PenaltySpec};
pub use space::{Domain, StateSpace, BOUNDARY_INSET};
pub use spec::{AffineDrift, CustomExpressions, FamilyParams, ModelSpec};

use crate::error::{NpcError, Result};
use crate::expr::Expr;
use crate::function::ScalarFunction;

/// Drift of a [`DiffusionModel`].
#[derive(Debug, Clone)]
pub enum Drift {
    /// The drift implied by `(q, Sigma)` under reversibility.
    Reversible,
    /// Reversible drift plus `matrix * x + offset`. Stationarity of `q` is
    /// preserved only when `div(q (matrix x + offset)) = 0`.
    ReversiblePlusAffine {
        matrix: DMatrix<f64>,
        offset: DVector<f64>,
    },
    /// Fully user-specified drift.
    Custom(Vec<Expr>),
}

/// A diffusion `dx = mu(x) dt + Lambda(x) dB` with stationary density `q`.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    density: DensityModel,
    diffusion: DiffusionSpec,
    drift: Drift,
}

impl DiffusionModel {
    pub fn reversible(density: DensityModel, diffusion: DiffusionSpec) -> Result<Self> {
        if density.dimension() != diffusion.dimension() {
            return Err(NpcError::DimensionMismatch {
                expected: density.dimension(),
                found: diffusion.dimension(),
            });
        }
        let diffusion = diffusion.with_space(density.space().clone());
        Ok(DiffusionModel {
            density,
            diffusion,
            drift: Drift::Reversible,
        })
    }

    pub fn with_drift(mut self, drift: Drift) -> Result<Self> {
        let n = self.dimension();
        match &drift {
            Drift::Reversible => {}
            Drift::ReversiblePlusAffine { matrix, offset } => {
                if matrix.shape() != (n, n) || offset.len() != n {
                    return Err(NpcError::DimensionMismatch {
                        expected: n,
                        found: offset.len(),
                    });
                }
            }
            Drift::Custom(entries) => {
                if entries.len() != n || entries.iter().any(|e| e.arity() > n) {
                    return Err(NpcError::DimensionMismatch {
                        expected: n,
                        found: entries.len(),
                    });
                }
            }
        }
        self.drift = drift;
        Ok(self)
    }

    pub fn density(&self) -> &DensityModel {
        &self.density
    }

    pub fn diffusion(&self) -> &DiffusionSpec {
        &self.diffusion
    }

    pub fn drift_spec(&self) -> &Drift {
        &self.drift
    }

    pub fn space(&self) -> &StateSpace {
        self.density.space()
    }

    pub fn dimension(&self) -> usize {
        self.density.dimension()
    }

    pub fn is_reversible(&self) -> bool {
        matches!(self.drift, Drift::Reversible)
    }

    pub fn drift(&self, x: &[f64]) -> Result<DVector<f64>> {
        match &self.drift {
            Drift::Reversible => reversible_drift(&self.density, &self.diffusion, x),
            Drift::ReversiblePlusAffine { matrix, offset } => {
                let base = reversible_drift(&self.density, &self.diffusion, x)?;
                Ok(base + matrix * DVector::from_column_slice(x) + offset)
            }
            Drift::Custom(entries) => {
                self.space().check(x)?;
                Ok(DVector::from_iterator(x.len(), entries.iter().map(|e| e.eval(x))))
            }
        }
    }

    /// Drift evaluated without the domain check; used by the integrator,
    /// which applies its own boundary policy.
    pub(crate) fn drift_unchecked(&self, x: &[f64]) -> DVector<f64> {
        match &self.drift {
            Drift::Reversible => reversible_drift_unchecked(&self.density, &self.diffusion, x),
            Drift::ReversiblePlusAffine { matrix, offset } => {
                reversible_drift_unchecked(&self.density, &self.diffusion, x)
                    + matrix * DVector::from_column_slice(x)
                    + offset
            }
            Drift::Custom(entries) => {
                DVector::from_iterator(x.len(), entries.iter().map(|e| e.eval(x)))
            }
        }
    }
}

fn reversible_drift_unchecked(
    density: &DensityModel,
    diffusion: &DiffusionSpec,
    x: &[f64],
) -> DVector<f64> {
    // Product-rule form: mu_j = (1/2)[sum_i d sigma_ij/dy_i + sum_i sigma_ij d log q/dy_i].
    let sigma = diffusion.sigma(x);
    (diffusion.div_terms(x) + sigma.transpose() * density.grad_log_q(x)) * 0.5
}

/// Drift of the reversible diffusion with stationary density `q` and
/// diffusion matrix `Sigma`, computed without dividing by `q`.
pub fn reversible_drift(
    density: &DensityModel,
    diffusion: &DiffusionSpec,
    x: &[f64],
) -> Result<DVector<f64>> {
    density.space().check(x)?;
    Ok(reversible_drift_unchecked(density, diffusion, x))
}

/// Drift of the time-reversed process, `mu* = -mu + 2 mu_rev`.
pub fn reverse_time_drift(model: &DiffusionModel, x: &[f64]) -> Result<DVector<f64>> {
    let forward = model.drift(x)?;
    let reversible = reversible_drift(&model.density, &model.diffusion, x)?;
    Ok(reversible * 2.0 - forward)
}

/// `A phi(x) = (1/2) trace(Sigma Hess phi) + mu . grad phi`. For a
/// reversible model this is `-F_o phi(x)`.
pub fn generator_apply(model: &DiffusionModel, phi: &dyn ScalarFunction, x: &[f64]) -> Result<f64> {
    let mu = model.drift(x)?;
    let sigma = model.diffusion.sigma(x);
    let hess = phi.hessian(x);
    let grad = phi.gradient(x);
    Ok(0.5 * sigma.component_mul(&hess).sum() + mu.dot(&grad))
}

/// Potential `V` of the unitarily transformed form:
/// `-sum sigma_ij h_ij - sum (d sigma_ij/dy_i)(dh/dy_j) + grad h' Sigma grad h`.
pub fn potential(density: &DensityModel, diffusion: &DiffusionSpec, x: &[f64]) -> Result<f64> {
    density.space().check(x)?;
    let sigma = diffusion.sigma(x);
    let hess_h = density.hessian_h(x);
    let grad_h = density.grad_h(x);
    let div = diffusion.div_terms(x);
    Ok(-sigma.component_mul(&hess_h).sum() - div.dot(&grad_h) + grad_h.dot(&(&sigma * &grad_h)))
}

/// `V_check = varsigma^2 (-trace h'' - 2 grad varsigma . grad h / varsigma + |grad h|^2)`.
pub fn scalar_check_potential(density: &DensityModel, penalty: &Penalty, x: &[f64]) -> Result<f64> {
    density.space().check(x)?;
    let s2 = penalty.varsigma2(x)?;
    let grad_h = density.grad_h(x);
    let trace_h = density.hessian_h(x).trace();
    // grad varsigma / varsigma = grad v.
    let grad_v = penalty.grad_v(x);
    Ok(s2 * (-trace_h - 2.0 * grad_v.dot(&grad_h) + grad_h.norm_squared()))
}

/// `W_check = (varsigma^2 + c)(grad v . grad v) + (varsigma^2 - c) trace v''`.
pub fn check_potential_w(penalty: &Penalty, lower_bound: f64, x: &[f64]) -> Result<f64> {
    if !(lower_bound > 0.0) {
        return Err(NpcError::InvalidParameter(format!(
            "lower bound must be positive, found {lower_bound}"
        )));
    }
    let s2 = penalty.varsigma2(x)?;
    if s2 < lower_bound * (1.0 - 1e-12) {
        return Err(NpcError::LowerBoundViolated {
            value: s2,
            lower_bound,
            point: x.to_vec(),
        });
    }
    let grad_v = penalty.grad_v(x);
    let trace_v = penalty.hessian_v(x).trace();
    Ok((s2 + lower_bound) * grad_v.norm_squared() + (s2 - lower_bound) * trace_v)
}

/// Local variance `grad phi' Sigma grad phi` of `phi(x_t)`.
pub fn local_variance(diffusion: &DiffusionSpec, grad_phi: &DVector<f64>, x: &[f64]) -> Result<f64> {
    diffusion.space().check(x)?;
    if grad_phi.len() != diffusion.dimension() {
        return Err(NpcError::DimensionMismatch {
            expected: diffusion.dimension(),
            found: grad_phi.len(),
        });
    }
    Ok(grad_phi.dot(&(diffusion.sigma(x) * grad_phi)).max(0.0))
}

#[cfg(test)]
mod tests;
