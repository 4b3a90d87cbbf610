//! Central finite differences.
//!
//! First derivatives use the step `cbrt(eps) * (1 + |x_i|)`. Second
//! derivatives taken from function values use `eps^(1/4) * (1 + |x_i|)`,
//! which balances truncation against cancellation for that stencil.

use nalgebra::{DMatrix, DVector};

pub fn first_step(xi: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + xi.abs())
}

pub fn second_step(xi: f64) -> f64 {
    f64::EPSILON.powf(0.25) * (1.0 + xi.abs())
}

pub fn gradient<F>(f: F, x: &[f64]) -> DVector<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    DVector::from_fn(x.len(), |i, _| {
        let h = first_step(x[i]);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        (up - down) / (2.0 * h)
    })
}

pub fn hessian<F>(f: F, x: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let mut probe = x.to_vec();
    let centre = f(x);
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let hi = second_step(x[i]);
        probe[i] = x[i] + hi;
        let up = f(&probe);
        probe[i] = x[i] - hi;
        let down = f(&probe);
        probe[i] = x[i];
        out[(i, i)] = (up - 2.0 * centre + down) / (hi * hi);
        for j in 0..i {
            let hj = second_step(x[j]);
            let mut corner = |si: f64, sj: f64| {
                probe[i] = x[i] + si * hi;
                probe[j] = x[j] + sj * hj;
                let v = f(&probe);
                probe[i] = x[i];
                probe[j] = x[j];
                v
            };
            let value = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0)
                + corner(-1.0, -1.0))
                / (4.0 * hi * hj);
            out[(i, j)] = value;
            out[(j, i)] = value;
        }
    }
    out
}

/// Partial derivative of a matrix-valued map along coordinate `i`.
pub fn matrix_partial<F>(f: F, x: &[f64], i: usize) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    let mut probe = x.to_vec();
    let h = first_step(x[i]);
    probe[i] = x[i] + h;
    let up = f(&probe);
    probe[i] = x[i] - h;
    let down = f(&probe);
    (up - down) / (2.0 * h)
}
