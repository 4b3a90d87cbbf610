use serde::{Deserialize, Serialize};

use crate::error::{NpcError, Result};

/// Inset applied at orthant and box boundaries.
pub const BOUNDARY_INSET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    #[default]
    Full,
    PositiveOrthant,
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl Domain {
    fn label(&self) -> &'static str {
        match self {
            Domain::Full => "full-space",
            Domain::PositiveOrthant => "positive-orthant",
            Domain::Box { .. } => "box",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    dimension: usize,
    domain: Domain,
}

impl StateSpace {
    pub fn new(dimension: usize, domain: Domain) -> Result<Self> {
        if dimension == 0 {
            return Err(NpcError::InvalidParameter("dimension must be at least 1".into()));
        }
        if let Domain::Box { lower, upper } = &domain {
            if lower.len() != dimension || upper.len() != dimension {
                return Err(NpcError::DimensionMismatch {
                    expected: dimension,
                    found: lower.len().min(upper.len()),
                });
            }
            if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                return Err(NpcError::InvalidParameter(
                    "box bounds must satisfy lower < upper".into(),
                ));
            }
        }
        Ok(StateSpace { dimension, domain })
    }

    pub fn full(dimension: usize) -> Self {
        StateSpace {
            dimension: dimension.max(1),
            domain: Domain::Full,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.domain, Domain::Full)
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        match &self.domain {
            Domain::Full => (f64::NEG_INFINITY, f64::INFINITY),
            Domain::PositiveOrthant => (BOUNDARY_INSET, f64::INFINITY),
            Domain::Box { lower, upper } => (lower[i] + BOUNDARY_INSET, upper[i] - BOUNDARY_INSET),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension
            && x.iter().enumerate().all(|(i, &xi)| {
                let (lo, hi) = self.bounds(i);
                xi.is_finite() && xi >= lo && xi <= hi
            })
    }

    /// Rejects points outside the inset interior, reporting coordinates.
    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(NpcError::DimensionMismatch {
                expected: self.dimension,
                found: x.len(),
            });
        }
        if self.contains(x) {
            Ok(())
        } else {
            Err(NpcError::OutsideDomain {
                point: x.to_vec(),
                domain: self.domain.label().into(),
            })
        }
    }

    /// Projects onto the inset interior.
    pub fn clamp(&self, x: &mut [f64]) {
        for (i, xi) in x.iter_mut().enumerate() {
            let (lo, hi) = self.bounds(i);
            *xi = xi.clamp(lo, hi);
        }
    }
}
