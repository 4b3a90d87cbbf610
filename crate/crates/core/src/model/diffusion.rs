use nalgebra::{DMatrix, DVector};

use super::density::DerivativeMode;
use super::space::StateSpace;
use crate::error::{NpcError, Result};
use crate::expr::Expr;
use crate::linalg;
use crate::numdiff;

#[derive(Debug, Clone)]
enum Kind {
    Constant(DMatrix<f64>),
    /// `Sigma(x) = scale2 * diag(x)`, the square-root (CIR-type) diffusion.
    SquareRoot { scale2: f64 },
    /// `Sigma(x) = lower_bound * (1 + |x|^2)^beta * I`.
    Radial { lower_bound: f64, beta: f64 },
    /// Row-major entries.
    Custom(Vec<Expr>),
}

/// State-dependent diffusion matrix `Sigma(x)`, its factor and the
/// divergence terms `sum_i d sigma_ij / d y_i`.
#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    space: StateSpace,
    kind: Kind,
    mode: DerivativeMode,
}

impl DiffusionSpec {
    pub fn constant(sigma: DMatrix<f64>) -> Result<Self> {
        let n = sigma.nrows();
        if sigma.ncols() != n || n == 0 {
            return Err(NpcError::InvalidParameter("constant diffusion must be square".into()));
        }
        if linalg::max_asymmetry(&sigma) > 1e-12 || linalg::cholesky(&sigma).is_err() {
            return Err(NpcError::InvalidParameter(
                "constant diffusion must be symmetric positive definite".into(),
            ));
        }
        Ok(DiffusionSpec {
            space: StateSpace::full(n),
            kind: Kind::Constant(sigma),
            mode: DerivativeMode::FiniteDifference,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n)).expect("identity is positive definite")
    }

    pub fn square_root(space: StateSpace, scale2: f64) -> Result<Self> {
        if !(scale2 > 0.0) {
            return Err(NpcError::InvalidParameter(format!(
                "square-root diffusion scale must be positive, found {scale2}"
            )));
        }
        Ok(DiffusionSpec {
            space,
            kind: Kind::SquareRoot { scale2 },
            mode: DerivativeMode::FiniteDifference,
        })
    }

    pub fn radial(dimension: usize, lower_bound: f64, beta: f64) -> Result<Self> {
        if !(lower_bound > 0.0) {
            return Err(NpcError::InvalidParameter(format!(
                "radial diffusion lower bound must be positive, found {lower_bound}"
            )));
        }
        Ok(DiffusionSpec {
            space: StateSpace::full(dimension),
            kind: Kind::Radial { lower_bound, beta },
            mode: DerivativeMode::FiniteDifference,
        })
    }

    pub fn custom(space: StateSpace, entries: Vec<Expr>) -> Result<Self> {
        let n = space.dimension();
        if entries.len() != n * n {
            return Err(NpcError::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        if entries.iter().any(|e| e.arity() > n) {
            return Err(NpcError::InvalidParameter(
                "diffusion entry references a coordinate beyond the dimension".into(),
            ));
        }
        Ok(DiffusionSpec {
            space,
            kind: Kind::Custom(entries),
            mode: DerivativeMode::FiniteDifference,
        })
    }

    pub fn with_space(mut self, space: StateSpace) -> Self {
        self.space = space;
        self
    }

    /// Divergence terms in the given mode; custom entries stay in
    /// finite-difference mode.
    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = match self.kind {
            Kind::Custom(_) => DerivativeMode::FiniteDifference,
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

    pub fn sigma(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dimension();
        match &self.kind {
            Kind::Constant(s) => s.clone(),
            Kind::SquareRoot { scale2 } => {
                DMatrix::from_diagonal(&DVector::from_iterator(n, x.iter().map(|v| scale2 * v)))
            }
            Kind::Radial { lower_bound, beta } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                DMatrix::identity(n, n) * (lower_bound * (1.0 + r2).powf(*beta))
            }
            Kind::Custom(entries) => DMatrix::from_fn(n, n, |i, j| entries[i * n + j].eval(x)),
        }
    }

    /// `Lambda` with `Lambda Lambda' = Sigma(x)`: the Cholesky factor, or the
    /// symmetric square root when `Sigma(x)` is only semidefinite.
    pub fn factor(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dimension();
        match &self.kind {
            Kind::SquareRoot { scale2 } => Ok(DMatrix::from_diagonal(&DVector::from_iterator(
                n,
                x.iter().map(|v| (scale2 * v).max(0.0).sqrt()),
            ))),
            Kind::Radial { lower_bound, beta } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Ok(DMatrix::identity(n, n) * (lower_bound * (1.0 + r2).powf(*beta)).sqrt())
            }
            _ => {
                let sigma = self.sigma(x);
                match linalg::cholesky(&sigma) {
                    Ok(l) => Ok(l),
                    // Singular but positive semidefinite: symmetric square root.
                    Err(e) => {
                        let (values, vectors) = linalg::symmetric_eigen_ascending(sigma.clone());
                        let scale = values.amax().max(1.0);
                        if values[0] < -1e-12 * scale {
                            return Err(NpcError::Factorization(format!(
                                "diffusion matrix at {x:?}: {e}"
                            )));
                        }
                        let root = values.map(|v| v.max(0.0).sqrt());
                        Ok(&vectors * DMatrix::from_diagonal(&root) * vectors.transpose())
                    }
                }
            }
        }
    }

    /// Entry `j` is `sum_i d sigma_ij / d y_i`.
    pub fn div_terms(&self, x: &[f64]) -> DVector<f64> {
        let n = self.dimension();
        if self.mode == DerivativeMode::FiniteDifference {
            let mut out = DVector::zeros(n);
            for i in 0..n {
                let partial = numdiff::matrix_partial(|y| self.sigma(y), x, i);
                for j in 0..n {
                    out[j] += partial[(i, j)];
                }
            }
            return out;
        }
        match &self.kind {
            Kind::Constant(_) => DVector::zeros(n),
            Kind::SquareRoot { scale2 } => DVector::from_element(n, *scale2),
            Kind::Radial { lower_bound, beta } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let c = lower_bound * beta * 2.0 * (1.0 + r2).powf(beta - 1.0);
                DVector::from_iterator(n, x.iter().map(|v| c * v))
            }
            Kind::Custom(_) => unreachable!("custom diffusions use finite differences"),
        }
    }

    /// Checks symmetry (1e-12) and positive definiteness at each probe.
    pub fn validate_at<'a, I>(&self, points: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        for x in points {
            let s = self.sigma(x);
            if linalg::max_asymmetry(&s) > 1e-12 {
                return Err(NpcError::InvalidParameter(format!(
                    "diffusion matrix is not symmetric at {x:?}"
                )));
            }
            linalg::cholesky(&s).map_err(|e| {
                NpcError::InvalidParameter(format!("diffusion matrix not positive definite at {x:?}: {e}"))
            })?;
        }
        Ok(())
    }

    /// Smallest eigenvalue of `Sigma(x)`.
    pub fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        let (values, _) = linalg::symmetric_eigen_ascending(self.sigma(x));
        values[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::space::Domain;

    fn probes(n: usize) -> Vec<Vec<f64>> {
        (0..6)
            .map(|k| (0..n).map(|i| 0.3 + 0.7 * k as f64 + 0.2 * i as f64).collect())
            .collect()
    }

    #[test]
    fn factor_reconstructs_sigma() {
        let specs = vec![
            DiffusionSpec::constant(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap(),
            DiffusionSpec::square_root(StateSpace::new(2, Domain::PositiveOrthant).unwrap(), 0.7)
                .unwrap(),
            DiffusionSpec::radial(2, 1.0, 1.5).unwrap(),
            DiffusionSpec::custom(
                StateSpace::full(2),
                ["2 + x1^2", "0.3", "0.3", "1 + x2^2"]
                    .iter()
                    .map(|s| Expr::parse(s, 2).unwrap())
                    .collect(),
            )
            .unwrap(),
        ];
        for spec in specs {
            let pts = probes(2);
            spec.validate_at(pts.iter().map(|p| p.as_slice())).unwrap();
            for x in &pts {
                let l = spec.factor(x).unwrap();
                assert!((&l * l.transpose() - spec.sigma(x)).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn analytic_divergence_matches_finite_differences() {
        let specs = vec![
            DiffusionSpec::square_root(StateSpace::new(1, Domain::PositiveOrthant).unwrap(), 1.3)
                .unwrap(),
            DiffusionSpec::radial(3, 0.5, 2.0).unwrap(),
            DiffusionSpec::constant(DMatrix::identity(3, 3) * 2.0).unwrap(),
        ];
        for spec in specs {
            let n = spec.dimension();
            let analytic = spec.clone().with_mode(DerivativeMode::Analytic);
            for x in probes(n) {
                let (a, f) = (analytic.div_terms(&x), spec.div_terms(&x));
                for (u, v) in a.iter().zip(f.iter()) {
                    assert!((u - v).abs() <= 1e-5 * (1.0 + u.abs()), "{u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn rejects_indefinite_constant() {
        assert!(DiffusionSpec::constant(DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0])).is_err());
        assert!(DiffusionSpec::radial(1, 0.0, 1.0).is_err());
    }
}
