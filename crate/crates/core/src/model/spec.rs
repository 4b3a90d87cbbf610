//! JSON model specification.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fixtures::{make_cir, make_custom, make_ou, make_student, Kappa};
use super::{DiffusionModel, Domain, Drift, StateSpace};
use crate::error::{NpcError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    Ou { kappa: Kappa, sigma: f64 },
    Cir { kappa: f64, theta: f64, sigma: f64 },
    Student { nu: f64, beta: f64 },
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomExpressions {
    pub log_density: String,
    /// Row-major `n x n` entries of `Sigma`.
    pub sigma: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<String>>,
}

/// Added to the reversible drift: `matrix * x + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineDrift {
    pub matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub family: FamilyParams,
    pub dimension: usize,
    #[serde(default)]
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expressions: Option<CustomExpressions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_adjustment: Option<AffineDrift>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    pub fn build(&self) -> Result<DiffusionModel> {
        let n = self.dimension;
        let model = match &self.family {
            FamilyParams::Ou { kappa, sigma } => {
                self.require_domain(&Domain::Full)?;
                make_ou(n, kappa, *sigma)?
            }
            FamilyParams::Cir {
                kappa,
                theta,
                sigma,
            } => {
                if n != 1 {
                    return Err(NpcError::InvalidParameter("cir family is one-dimensional".into()));
                }
                self.require_domain(&Domain::PositiveOrthant)?;
                make_cir(*kappa, *theta, *sigma)?
            }
            FamilyParams::Student { nu, beta } => {
                self.require_domain(&Domain::Full)?;
                make_student(n, *nu, *beta)?
            }
            FamilyParams::Custom => {
                let exprs = self.expressions.as_ref().ok_or_else(|| {
                    NpcError::InvalidParameter("custom family requires `expressions`".into())
                })?;
                make_custom(
                    StateSpace::new(n, self.domain.clone())?,
                    &exprs.log_density,
                    &exprs.sigma,
                    exprs.drift.as_deref(),
                )?
            }
        };
        match &self.drift_adjustment {
            None => Ok(model),
            Some(adj) => {
                if adj.matrix.len() != n || adj.matrix.iter().any(|r| r.len() != n) {
                    return Err(NpcError::DimensionMismatch {
                        expected: n,
                        found: adj.matrix.len(),
                    });
                }
                let matrix = DMatrix::from_fn(n, n, |i, j| adj.matrix[i][j]);
                let offset = match &adj.offset {
                    Some(o) => DVector::from_column_slice(o),
                    None => DVector::zeros(n),
                };
                model.with_drift(Drift::ReversiblePlusAffine { matrix, offset })
            }
        }
    }

    fn require_domain(&self, expected: &Domain) -> Result<()> {
        if &self.domain == expected || self.domain == Domain::Full && expected != &Domain::Full {
            Ok(())
        } else {
            Err(NpcError::InvalidParameter(format!(
                "domain {:?} is incompatible with the {:?} family",
                self.domain, self.family
            )))
        }
    }
}
