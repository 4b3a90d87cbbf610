use nalgebra::{DMatrix, DVector};

use crate::expr::Expr;
use crate::numdiff;

/// A twice-differentiable scalar function of the state.
///
/// Derivatives default to central finite differences; analytic
/// implementations override them.
pub trait ScalarFunction: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        numdiff::gradient(|y| self.value(y), x)
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        numdiff::hessian(|y| self.value(y), x)
    }
}

impl ScalarFunction for Expr {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

/// Wraps a closure; derivatives by finite differences.
pub struct FnScalar<F>(pub F);

impl<F> ScalarFunction for FnScalar<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// Value, gradient and Hessian supplied as closures.
pub struct Analytic<F, G, H> {
    pub value: F,
    pub gradient: G,
    pub hessian: H,
}

impl<F, G, H> ScalarFunction for Analytic<F, G, H>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> DVector<f64> + Send + Sync,
    H: Fn(&[f64]) -> DMatrix<f64> + Send + Sync,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        (self.gradient)(x)
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.hessian)(x)
    }
}

/// A constant function.
pub struct Constant(pub f64);

impl ScalarFunction for Constant {
    fn value(&self, _x: &[f64]) -> f64 {
        self.0
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::zeros(x.len())
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
}

/// The coordinate projection `x -> x[index]`.
pub struct Coordinate(pub usize);

impl ScalarFunction for Coordinate {
    fn value(&self, x: &[f64]) -> f64 {
        x[self.0]
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        g[self.0] = 1.0;
        g
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
}
