use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

use super::*;
use crate::extract::{assemble_population, assemble_sample, solve_gevp, RidgePolicy};
use crate::model::{make_cir, make_ou, DensityModel, DiffusionSpec, Drift, Kappa};
use crate::quadrature::QuadratureRule;
use crate::sieve::{make_hermite, make_laguerre};
use crate::simulate::sample_stationary;

fn ou() -> DiffusionModel {
    make_ou(1, &Kappa::Scalar(1.0), 2f64.sqrt()).unwrap()
}

fn ou_path() -> &'static SamplePath {
    static PATH: OnceLock<SamplePath> = OnceLock::new();
    PATH.get_or_init(|| sample_stationary(&ou(), 0.1, 100_000, 1000, 20, 2024, None).unwrap())
}

fn population(m: usize) -> (FormMatrices, NpcSet) {
    let model = ou();
    let basis = make_hermite(1, m - 1, true).unwrap();
    let rule = QuadratureRule::gauss_hermite(model.density(), m + 2).unwrap();
    let f = assemble_population(&basis, model.density(), model.diffusion(), &rule, RidgePolicy::Auto)
        .unwrap();
    let npcs = solve_gevp(&f, m).unwrap();
    (f, npcs)
}

#[test]
fn ar_test_passes_on_ou_for_first_three_components() {
    let (_, npcs) = population(6);
    for j in 1..=3 {
        let r = ar_test(ou_path(), &npcs, j).unwrap();
        assert!(r.pass, "{r:?}");
    }
    let r = ar_test(ou_path(), &npcs, 1).unwrap();
    assert!((r.statistic - (-0.1f64).exp()).abs() < 3.0 * r.standard_error.unwrap());
}

#[test]
fn ar_test_has_power() {
    let (_, npcs) = population(6);
    // CIR with kappa = 3 has delta_1 = 3.
    let mut wrong = npcs.clone();
    wrong.delta[1] = 3.0;
    assert!(!ar_test(ou_path(), &wrong, 1).unwrap().pass);
    let shuffled = ou_path().shuffled(1);
    let r = ar_test(&shuffled, &npcs, 1).unwrap();
    assert!(!r.pass && r.statistic.abs() < 0.02);
}

#[test]
fn ar_test_rejects_bad_input() {
    let (_, npcs) = population(4);
    assert!(ar_test(ou_path(), &npcs, 0).is_err());
    let short = SamplePath::from_states(vec![0.1; 50], 1, 0.1).unwrap();
    assert!(ar_test(&short, &npcs, 1).is_err());
    let flat = SamplePath::from_states(vec![0.1; 200], 1, 0.1).unwrap();
    assert!(matches!(ar_test(&flat, &npcs, 1), Err(NpcError::DegenerateRegressor(_))));
}

#[test]
fn orthogonality_on_own_and_foreign_forms() {
    let (f, npcs) = population(6);
    assert!(orthogonality_report(&npcs, &f).unwrap().pass);

    let basis = make_hermite(1, 1, false).unwrap();
    let path = SamplePath::from_states(vec![-1.0, 1.0], 1, 1.0).unwrap();
    let sigma = DiffusionSpec::constant(DMatrix::from_element(1, 1, 2.0)).unwrap();
    let two = assemble_sample(&basis, &sigma, &path, RidgePolicy::Auto).unwrap();
    let r = orthogonality_report(&solve_gevp(&two, 2).unwrap(), &two).unwrap();
    assert_eq!(r.statistic, 0.0);

    let sample = assemble_sample(&npcs.basis, ou().diffusion(), ou_path(), RidgePolicy::Auto).unwrap();
    let foreign = orthogonality_report(&npcs, &sample).unwrap();
    assert!(foreign.statistic > 1e-6 && !foreign.required);
}

#[test]
fn approximation_bounds_on_ou() {
    let (f, npcs) = population(5);
    let r = approx_bound_check(&f, &npcs, 1.0, 2, 200, 1).unwrap();
    assert!(r.pass, "{r:?}");
    assert!((r.statistic - 1.0 / 3.0).abs() < 1e-8);
    assert!(approx_bound_check(&f, &npcs, 1.0, 5, 10, 1).unwrap().pass);
    for n in 1..5 {
        let r = approx_bound_check(&f, &npcs, 0.7, n, 100, n as u64).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.metadata["min_random_minus_bound"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn approximation_bounds_on_cir() {
    let model = make_cir(1.0, 1.5, 1.0).unwrap();
    let (shape, rate) = model.density().gamma_parameters().unwrap();
    let basis = make_laguerre(4, shape - 1.0, rate, true).unwrap();
    let rule = QuadratureRule::gauss_laguerre(model.density(), 7).unwrap();
    let f = assemble_population(&basis, model.density(), model.diffusion(), &rule, RidgePolicy::Auto)
        .unwrap();
    let npcs = solve_gevp(&f, 5).unwrap();
    for n in 1..5 {
        assert!(approx_bound_check(&f, &npcs, 1.0, n, 100, 9).unwrap().pass);
    }
}

#[test]
fn approximation_bound_needs_population_forms() {
    let (_, npcs) = population(4);
    let sample = assemble_sample(&npcs.basis, ou().diffusion(), ou_path(), RidgePolicy::Auto).unwrap();
    assert!(approx_bound_check(&sample, &npcs, 1.0, 1, 5, 1).is_err());
}

#[test]
fn longrun_batch_means_on_ou() {
    let r = longrun_mc(ou_path(), |x| x[0], 100, Some(2.0)).unwrap();
    assert!(r.pass, "{r:?}");
    let (_, npcs) = population(6);
    let psi2 = longrun_mc(ou_path(), |x| npcs.evaluate(x, 2), 100, Some(1.0)).unwrap();
    assert!(psi2.pass, "{psi2:?}");
    // Shuffling removes the persistence: the estimate collapses to s Var(x).
    let iid = longrun_mc(&ou_path().shuffled(3), |x| x[0], 100, None).unwrap();
    assert!(!iid.required && (iid.statistic - 0.1).abs() < 0.05);
    let text = serde_json::to_string(&iid).unwrap();
    let back: ValidationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.tolerance, f64::INFINITY);
    assert!(longrun_mc(ou_path(), |x| x[0], 5, None).is_err());
}

#[test]
fn drift_identity_examples() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
    let probes: Vec<Vec<f64>> = (0..20)
        .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
        .collect();
    let base = DiffusionModel::reversible(DensityModel::standard_normal(2), DiffusionSpec::identity(2))
        .unwrap();
    let r = drift_identity_check(&base, &probes).unwrap();
    assert!(r.pass && r.statistic == 0.0);
    let skew = base
        .clone()
        .with_drift(Drift::ReversiblePlusAffine {
            matrix: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            offset: DVector::zeros(2),
        })
        .unwrap();
    assert!(drift_identity_check(&skew, &probes).unwrap().pass);
    let corrupted = base
        .with_drift(Drift::ReversiblePlusAffine {
            matrix: DMatrix::zeros(2, 2),
            offset: DVector::from_vec(vec![0.5, 0.0]),
        })
        .unwrap();
    let bad = drift_identity_check(&corrupted, &probes).unwrap();
    assert!(!bad.pass);
    assert!(bad.metadata["stationarity_residual"].as_f64().unwrap() > 1e-3);
}

#[test]
fn reports_are_deterministic() {
    let (f, npcs) = population(5);
    let a = serde_json::to_string(&approx_bound_check(&f, &npcs, 1.0, 2, 50, 4).unwrap()).unwrap();
    let b = serde_json::to_string(&approx_bound_check(&f, &npcs, 1.0, 2, 50, 4).unwrap()).unwrap();
    assert_eq!(a, b);
}
