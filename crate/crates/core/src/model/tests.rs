use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::function::{Analytic, Constant, FnScalar};
use crate::numdiff;

fn ou() -> DiffusionModel {
    make_ou(1, &Kappa::Scalar(1.0), 2f64.sqrt()).unwrap()
}

fn cir() -> DiffusionModel {
    make_cir(1.0, 1.0, 1.0).unwrap()
}

fn skew_gaussian() -> DiffusionModel {
    let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    DiffusionModel::reversible(DensityModel::standard_normal(2), DiffusionSpec::identity(2))
        .unwrap()
        .with_drift(Drift::ReversiblePlusAffine {
            matrix: s,
            offset: DVector::zeros(2),
        })
        .unwrap()
}

/// Probabilists' Hermite He_0..He_deg at x.
fn hermite(deg: usize, x: f64) -> Vec<f64> {
    let mut h = vec![1.0, x];
    for k in 1..deg {
        h.push(x * h[k] - k as f64 * h[k - 1]);
    }
    h.truncate(deg + 1);
    h
}

/// Generalized Laguerre L_j^(alpha)(y).
fn laguerre(j: usize, alpha: f64, y: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..j {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - y) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn probes(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..100)
        .map(|_| (0..n).map(|_| rng.gen_range(lo..hi)).collect())
        .collect()
}

#[test]
fn ou_drift_is_linear() {
    let mu = reversible_drift(ou().density(), ou().diffusion(), &[0.5]).unwrap();
    assert!((mu[0] + 0.5).abs() < 1e-12);
}

#[test]
fn cir_drift_matches_mean_reversion_and_quotient_rule() {
    let m = cir();
    let mu = m.drift(&[2.0]).unwrap();
    assert!((mu[0] + 1.0).abs() < 1e-12);
    // (1/2q) d(q sigma^2 x)/dx by finite differences of log(q x).
    for &x in &[0.3, 1.0, 2.0, 4.5] {
        let g = numdiff::gradient(|y| m.density().log_q(y) + y[0].ln(), &[x])[0];
        let fd = 0.5 * x * g;
        assert!((m.drift(&[x]).unwrap()[0] - fd).abs() < 1e-7);
    }
    let fd_mode = make_cir(1.0, 1.0, 1.0).unwrap();
    let fd_mode = DiffusionModel::reversible(
        fd_mode.density().clone().with_mode(DerivativeMode::FiniteDifference),
        fd_mode.diffusion().clone().with_mode(DerivativeMode::FiniteDifference),
    )
    .unwrap();
    assert!((fd_mode.drift(&[2.0]).unwrap()[0] + 1.0).abs() < 1e-6);
}

#[test]
fn drift_vanishes_at_mode_with_identity_diffusion() {
    let density = DensityModel::gaussian(
        DVector::from_vec(vec![0.3, -1.2]),
        DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
    )
    .unwrap();
    let mu = reversible_drift(&density, &DiffusionSpec::identity(2), &[0.3, -1.2]).unwrap();
    assert!(mu.amax() < 1e-12);
}

#[test]
fn domain_violation_reports_coordinates() {
    let err = cir().drift(&[-1.0]).unwrap_err();
    assert!(err.to_string().contains("-1"), "{err}");
}

#[test]
fn reversible_fixtures_are_fixed_points_of_time_reversal() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cases: Vec<(DiffusionModel, Vec<Vec<f64>>)> = vec![
        (ou(), probes(&mut rng, 1, -4.0, 4.0)),
        (cir(), probes(&mut rng, 1, 0.05, 6.0)),
        (make_student(2, 3.0, 1.5).unwrap(), probes(&mut rng, 2, -5.0, 5.0)),
        (
            make_ou(2, &Kappa::Matrix(vec![vec![1.0, 0.3], vec![0.3, 2.0]]), 1.0).unwrap(),
            probes(&mut rng, 2, -3.0, 3.0),
        ),
    ];
    for (model, points) in cases {
        for x in &points {
            let d = reverse_time_drift(&model, x).unwrap() - model.drift(x).unwrap();
            assert!(d.amax() < 1e-10);
        }
    }
}

#[test]
fn skew_drift_reverses_rotation() {
    let m = skew_gaussian();
    let mu = m.drift(&[1.0, 0.0]).unwrap();
    let star = reverse_time_drift(&m, &[1.0, 0.0]).unwrap();
    assert!((mu - DVector::from_vec(vec![-0.5, -1.0])).amax() < 1e-12);
    assert!((star - DVector::from_vec(vec![-0.5, 1.0])).amax() < 1e-12);
}

#[test]
fn drift_average_identity_holds() {
    let m = skew_gaussian();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let avg = (m.drift(&x).unwrap() + reverse_time_drift(&m, &x).unwrap()) * 0.5;
        let rev = reversible_drift(m.density(), m.diffusion(), &x).unwrap();
        assert!((avg - rev).amax() < 1e-12);
    }
}

#[test]
fn generator_examples() {
    let m = ou();
    let id = FnScalar(|x: &[f64]| x[0]);
    assert!((generator_apply(&m, &id, &[0.7]).unwrap() + 0.7).abs() < 1e-8);
    assert_eq!(generator_apply(&m, &Constant(3.0), &[0.7]).unwrap(), 0.0);
    let he2 = Analytic {
        value: |x: &[f64]| x[0] * x[0] - 1.0,
        gradient: |x: &[f64]| DVector::from_element(1, 2.0 * x[0]),
        hessian: |_: &[f64]| DMatrix::from_element(1, 1, 2.0),
    };
    assert!(generator_apply(&m, &he2, &[1.0]).unwrap().abs() < 1e-12);
}

#[test]
fn hermite_functions_are_ou_eigenfunctions() {
    let m = ou();
    for j in 0..6 {
        let f = Analytic {
            value: move |x: &[f64]| hermite(j, x[0])[j],
            gradient: move |x: &[f64]| {
                let h = hermite(j, x[0]);
                DVector::from_element(1, if j >= 1 { j as f64 * h[j - 1] } else { 0.0 })
            },
            hessian: move |x: &[f64]| {
                let h = hermite(j, x[0]);
                let d2 = if j >= 2 { (j * (j - 1)) as f64 * h[j - 2] } else { 0.0 };
                DMatrix::from_element(1, 1, d2)
            },
        };
        for &x in &[-2.3, -0.4, 0.0, 0.9, 3.1] {
            let a = generator_apply(&m, &f, &[x]).unwrap();
            let target = -(j as f64) * f.value(&[x]);
            assert!((a - target).abs() <= 1e-8 * (1.0 + target.abs()), "j {j} x {x}");
        }
    }
}

#[test]
fn tensor_hermite_functions_are_eigenfunctions_of_2d_ou() {
    let m = make_ou(2, &Kappa::Scalar(1.0), 2f64.sqrt()).unwrap();
    let (a, b) = (2usize, 1usize);
    let f = Analytic {
        value: move |x: &[f64]| hermite(a, x[0])[a] * hermite(b, x[1])[b],
        gradient: move |x: &[f64]| {
            let (h0, h1) = (hermite(a, x[0]), hermite(b, x[1]));
            DVector::from_vec(vec![a as f64 * h0[a - 1] * h1[b], h0[a] * b as f64 * h1[b - 1]])
        },
        hessian: move |x: &[f64]| {
            let (h0, h1) = (hermite(a, x[0]), hermite(b, x[1]));
            let off = a as f64 * h0[a - 1] * b as f64 * h1[b - 1];
            DMatrix::from_row_slice(2, 2, &[2.0 * h0[0] * h1[b], off, off, 0.0])
        },
    };
    for x in [[0.3, -1.1], [1.7, 0.4], [-2.0, 2.5]] {
        let target = -3.0 * f.value(&x);
        let got = generator_apply(&m, &f, &x).unwrap();
        assert!((got - target).abs() <= 1e-8 * (1.0 + target.abs()));
    }
}

#[test]
fn laguerre_functions_are_cir_eigenfunctions() {
    // kappa = 1, theta = 1.5, sigma = 1: shape 3, rate 2, alpha = 2.
    let m = make_cir(1.0, 1.5, 1.0).unwrap();
    let (alpha, rate) = (2.0, 2.0);
    for j in 0..5 {
        let f = Analytic {
            value: move |x: &[f64]| laguerre(j, alpha, rate * x[0]),
            gradient: move |x: &[f64]| {
                let d = if j >= 1 { -laguerre(j - 1, alpha + 1.0, rate * x[0]) } else { 0.0 };
                DVector::from_element(1, rate * d)
            },
            hessian: move |x: &[f64]| {
                let d2 = if j >= 2 { laguerre(j - 2, alpha + 2.0, rate * x[0]) } else { 0.0 };
                DMatrix::from_element(1, 1, rate * rate * d2)
            },
        };
        for &x in &[0.1, 0.8, 1.5, 3.0, 6.0] {
            let target = -(j as f64) * f.value(&[x]);
            let got = generator_apply(&m, &f, &[x]).unwrap();
            assert!((got - target).abs() <= 1e-8 * (1.0 + target.abs()), "j {j} x {x}");
        }
    }
}

/// Smooth bump supported on |x - c| < r.
fn bump(c: Vec<f64>, r: f64) -> impl Fn(&[f64]) -> f64 + Send + Sync {
    move |x: &[f64]| {
        let d2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (r * r);
        if d2 < 1.0 {
            (-1.0 / (1.0 - d2)).exp()
        } else {
            0.0
        }
    }
}

#[test]
fn generator_integrates_to_zero_against_stationary_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let skew = skew_gaussian();
    for trial in 0..10 {
        let r = rng.gen_range(0.4..1.5);
        // One-dimensional fixtures on a trapezoid grid across the support.
        for (model, c) in [(ou(), rng.gen_range(-2.0..2.0)), (cir(), rng.gen_range(1.6..3.0))] {
            let phi = FnScalar(bump(vec![c], r));
            let k = 4000;
            let h = 2.0 * r / k as f64;
            let mut total = 0.0;
            for i in 1..k {
                let x = [c - r + i as f64 * h];
                total += generator_apply(&model, &phi, &x).unwrap() * model.density().q(&x) * h;
            }
            assert!(total.abs() < 1e-6, "trial {trial}: {total}");
        }
        // Skew-augmented 2-D Gaussian: stationarity survives the rotation.
        let c = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let phi = FnScalar(bump(c.clone(), r));
        let k = 160;
        let h = 2.0 * r / k as f64;
        let mut total = 0.0;
        for i in 1..k {
            for j in 1..k {
                let x = [c[0] - r + i as f64 * h, c[1] - r + j as f64 * h];
                total += generator_apply(&skew, &phi, &x).unwrap() * skew.density().q(&x) * h * h;
            }
        }
        assert!(total.abs() < 1e-5, "trial {trial}: {total}");
    }
}

#[test]
fn potential_examples() {
    for n in 1..=3 {
        let density = DensityModel::standard_normal(n);
        let sigma = DiffusionSpec::identity(n);
        let mut x = vec![0.0; n];
        assert!((potential(&density, &sigma, &x).unwrap() + n as f64 / 2.0).abs() < 1e-12);
        x[0] = 2.0 / 2f64.sqrt();
        x[n - 1] = 2.0 / 2f64.sqrt();
        if n == 1 {
            x[0] = 2.0;
        }
        let v = potential(&density, &sigma, &x).unwrap();
        assert!((v - (1.0 - n as f64 / 2.0)).abs() < 1e-10);
    }
    let student = DensityModel::student_t(1, 3.0).unwrap();
    let vs: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&r| potential(&student, &DiffusionSpec::identity(1), &[r]).unwrap().abs())
        .collect();
    assert!(vs[0] > vs[1] && vs[1] > vs[2] && vs[2] < 1e-5);
}

#[test]
fn scalar_check_potential_examples() {
    let density = DensityModel::standard_normal(1);
    for &x in &[-1.3, 0.0, 2.0] {
        let a = scalar_check_potential(&density, &Penalty::Constant(1.0), &[x]).unwrap();
        let b = potential(&density, &DiffusionSpec::identity(1), &[x]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
    let pen = Penalty::ExpQuadratic { a: 0.25 };
    let got = scalar_check_potential(&density, &pen, &[2.0]).unwrap();
    assert!((got + 1.5 * E * E).abs() < 1e-10);
    // Same value through the expanded square: s^2 (|h' - v'|^2 - v'^2 - h'').
    let (h1, v1, h2) = (1.0, 1.0, 0.5);
    assert!((got - E * E * ((h1 - v1) * (h1 - v1) - v1 * v1 - h2)).abs() < 1e-10);

    let student = DensityModel::student_t(1, 3.0).unwrap();
    let poly = Penalty::Polynomial {
        beta: 2.0,
        lower_bound: 1.0,
    };
    let vals: Vec<f64> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&r| scalar_check_potential(&student, &poly, &[r]).unwrap())
        .collect();
    assert!((vals[0] + 213.310019794514).abs() < 1e-8);
    assert!(vals[1] < vals[0] && vals[2] < vals[1]);
    assert!(scalar_check_potential(&student, &Penalty::Constant(0.0), &[1.0]).is_err());
}

#[test]
fn check_potential_w_examples() {
    assert_eq!(check_potential_w(&Penalty::Constant(1.0), 1.0, &[3.0, -2.0]).unwrap(), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.gen_range(1..5);
        let beta = rng.gen_range(0.1..3.0);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let r2: f64 = x.iter().map(|c| c * c).sum();
        let p = Penalty::Polynomial {
            beta,
            lower_bound: 1.0,
        };
        let gv2 = beta * beta * r2 / (1.0 + r2).powi(2);
        let trace = beta * (n as f64 + (n as f64 - 2.0) * r2) / (1.0 + r2).powi(2);
        assert!((p.grad_v(&x).norm_squared() - gv2).abs() < 1e-10);
        assert!((p.hessian_v(&x).trace() - trace).abs() < 1e-10);
        let s2 = (1.0 + r2).powf(beta);
        let w = check_potential_w(&p, 1.0, &x).unwrap();
        assert!((w - ((s2 + 1.0) * gv2 + (s2 - 1.0) * trace)).abs() < 1e-9 * (1.0 + w.abs()));
    }
    let p = Penalty::Polynomial {
        beta: 1.0,
        lower_bound: 1.0,
    };
    let far = check_potential_w(&p, 1.0, &[1e3, 0.0]).unwrap();
    let r2: f64 = 1e6;
    assert!(far > 1.0 && (far - (r2 * r2 + 4.0 * r2) / (1.0 + r2).powi(2)).abs() < 1e-12);
    assert!(check_potential_w(&p, 0.0, &[1.0, 0.0]).is_err());
    assert!(check_potential_w(&Penalty::Constant(0.5), 1.0, &[1.0, 0.0]).is_err());
}

#[test]
fn local_variance_examples() {
    let two = DiffusionSpec::constant(DMatrix::from_element(1, 1, 2.0)).unwrap();
    assert_eq!(local_variance(&two, &DVector::zeros(1), &[0.2]).unwrap(), 0.0);
    assert_eq!(local_variance(&two, &DVector::from_element(1, 1.0), &[0.2]).unwrap(), 2.0);
    let c = cir();
    let lv = local_variance(c.diffusion(), &DVector::from_element(1, 1.0), &[3.0]).unwrap();
    assert!((lv - 3.0).abs() < 1e-12);
}

#[test]
fn finite_difference_mode_matches_analytic_mode() {
    let fixtures = [
        (ou(), vec![vec![0.4], vec![-1.7], vec![2.9]]),
        (cir(), vec![vec![0.3], vec![1.1], vec![4.0]]),
        (
            make_student(2, 3.0, 1.5).unwrap(),
            vec![vec![0.4, -0.2], vec![2.0, 3.0], vec![-6.0, 1.0]],
        ),
        (
            make_ou(2, &Kappa::Matrix(vec![vec![1.0, 0.3], vec![0.3, 2.0]]), 1.3).unwrap(),
            vec![vec![0.1, 0.7], vec![-1.5, 2.0]],
        ),
    ];
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-5 * (1.0 + a.abs().max(b.abs()));
    for (m, points) in &fixtures {
        let fd_density = m.density().clone().with_mode(DerivativeMode::FiniteDifference);
        let fd_diffusion = m.diffusion().clone().with_mode(DerivativeMode::FiniteDifference);
        for x in points {
            let pairs = [
                (m.density().grad_log_q(x), fd_density.grad_log_q(x)),
                (m.diffusion().div_terms(x), fd_diffusion.div_terms(x)),
            ];
            for (a, b) in pairs {
                assert!(a.iter().zip(b.iter()).all(|(a, b)| close(*a, *b)), "{a} vs {b}");
            }
            let (a, b) = (m.density().hessian_h(x), fd_density.hessian_h(x));
            assert!(a.iter().zip(b.iter()).all(|(a, b)| close(*a, *b)), "{a} vs {b}");
            let a = potential(m.density(), m.diffusion(), x).unwrap();
            let b = potential(&fd_density, &fd_diffusion, x).unwrap();
            assert!(close(a, b), "{a} vs {b}");
        }
    }
}

#[test]
fn custom_model_reproduces_ou() {
    let m = make_custom(
        StateSpace::full(1),
        "-x1^2/2",
        &[vec!["2".to_string()]],
        None,
    )
    .unwrap();
    for &x in &[-1.0, 0.5, 2.0] {
        assert!((m.drift(&[x]).unwrap()[0] + x).abs() < 1e-7);
    }
    let explicit = make_custom(
        StateSpace::full(1),
        "-x1^2/2",
        &[vec!["2".to_string()]],
        Some(&["-x1".to_string()]),
    )
    .unwrap();
    assert!(!explicit.is_reversible());
    assert!((explicit.drift(&[0.5]).unwrap()[0] + 0.5).abs() < 1e-15);
}

#[test]
fn ou_rejects_nonsymmetric_or_indefinite_kappa() {
    assert!(make_ou(2, &Kappa::Matrix(vec![vec![1.0, 0.5], vec![0.0, 1.0]]), 1.0).is_err());
    assert!(make_ou(2, &Kappa::Matrix(vec![vec![1.0, 2.0], vec![2.0, 1.0]]), 1.0).is_err());
    assert!(make_ou(1, &Kappa::Scalar(1.0), 0.0).is_err());
}

#[test]
fn ou_stationary_variance_matches_sigma_over_two_kappa() {
    let m = make_ou(2, &Kappa::Matrix(vec![vec![2.0, 0.0], vec![0.0, 0.5]]), 1.0).unwrap();
    let (_, l) = m.density().gaussian_parameters().unwrap();
    let cov = l * l.transpose();
    assert!((cov[(0, 0)] - 0.25).abs() < 1e-14 && (cov[(1, 1)] - 1.0).abs() < 1e-14);
}
