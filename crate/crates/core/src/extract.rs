//! Form matrices `V`, `W` and the generalized eigenproblem `V a = delta W a`
//! whose solutions are the estimated principal components.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NpcError, Result};
use crate::linalg;
use crate::model::{DensityModel, DiffusionSpec};
use crate::quadrature::QuadratureRule;
use crate::sieve::SieveBasis;
use crate::simulate::SamplePath;

/// Relative ridge steps tried, in units of `trace(W)/m`.
pub const RIDGE_LADDER: [f64; 3] = [1e-12, 1e-10, 1e-8];
/// Condition estimate above which `W` is regularized.
pub const MAX_CONDITION: f64 = 1e12;
const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Sample {
        t: usize,
        interval: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Population { quadrature: String, nodes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RidgePolicy {
    /// Escalate through [`RIDGE_LADDER`] only when needed.
    Auto,
    /// Always add `tau * trace(W)/m * I`.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct FormMatrices {
    pub v: DMatrix<f64>,
    /// After any ridge.
    pub w: DMatrix<f64>,
    pub provenance: Provenance,
    pub basis: SieveBasis,
    /// Absolute ridge added to the diagonal of `W`.
    pub ridge: f64,
    pub warnings: Vec<String>,
}

/// Weighted sums `sum w_i G_i Sigma(x_i) G_i' / 2` and `sum w_i Psi_i Psi_i'`
/// over fixed-size chunks reduced in order, so the result does not depend
/// on the number of threads.
fn accumulate(
    basis: &SieveBasis,
    diffusion: &DiffusionSpec,
    rule: &QuadratureRule,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = basis.len();
    let n = basis.dimension();
    if rule.dimension() != n || diffusion.dimension() != n {
        return Err(NpcError::DimensionMismatch {
            expected: n,
            found: rule.dimension(),
        });
    }
    let idx: Vec<usize> = (0..rule.len()).collect();
    let partials: Vec<Result<(DMatrix<f64>, DMatrix<f64>)>> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut v = DMatrix::zeros(m, m);
            let mut w = DMatrix::zeros(m, m);
            let mut psi = DVector::zeros(m);
            let mut g = DMatrix::zeros(m, n);
            for &i in chunk {
                let x = rule.point(i);
                let wt = rule.weights()[i];
                diffusion.space().check(x)?;
                basis.eval_into(x, psi.as_mut_slice());
                basis.eval_grad_into(x, &mut g);
                let gs = &g * diffusion.sigma(x);
                v.gemm(0.5 * wt, &gs, &g.transpose(), 1.0);
                w.ger(wt, &psi, &psi, 1.0);
            }
            Ok((v, w))
        })
        .collect();
    let mut v = DMatrix::zeros(m, m);
    let mut w = DMatrix::zeros(m, m);
    for part in partials {
        let (pv, pw) = part?;
        v += pv;
        w += pw;
    }
    if v.iter().chain(w.iter()).any(|x| !x.is_finite()) {
        return Err(NpcError::NonFinite("form matrices".into()));
    }
    linalg::symmetrize(&mut v);
    linalg::symmetrize(&mut w);
    Ok((v, w))
}

/// Adds a ridge to `W` per `policy`; returns the absolute ridge.
pub fn regularize(w: &mut DMatrix<f64>, policy: RidgePolicy, warnings: &mut Vec<String>) -> Result<f64> {
    let m = w.nrows();
    let unit = w.trace() / m as f64;
    let acceptable = |w: &DMatrix<f64>| {
        linalg::cholesky(w)
            .map(|l| linalg::condition_estimate(&l))
            .ok()
    };
    match policy {
        RidgePolicy::Fixed(tau) => {
            if !(tau >= 0.0) {
                return Err(NpcError::InvalidParameter(format!("ridge must be >= 0, found {tau}")));
            }
            let ridge = tau * unit;
            for i in 0..m {
                w[(i, i)] += ridge;
            }
            match acceptable(w) {
                Some(_) => Ok(ridge),
                None => Err(NpcError::Factorization(format!(
                    "W is not positive definite with fixed ridge {ridge:e}"
                ))),
            }
        }
        RidgePolicy::Auto => {
            let mut last = f64::INFINITY;
            match acceptable(w) {
                Some(c) if c <= MAX_CONDITION => return Ok(0.0),
                Some(c) => last = c,
                None => {}
            }
            let base = w.clone();
            for tau in RIDGE_LADDER {
                let ridge = tau * unit;
                *w = base.clone();
                for i in 0..m {
                    w[(i, i)] += ridge;
                }
                match acceptable(w) {
                    Some(c) if c <= MAX_CONDITION => {
                        warnings.push(format!("ridge {ridge:e} added to W (condition {c:e})"));
                        return Ok(ridge);
                    }
                    Some(c) => last = c,
                    None => last = f64::INFINITY,
                }
            }
            let ridge = RIDGE_LADDER[RIDGE_LADDER.len() - 1] * unit;
            if last.is_finite() {
                warnings.push(format!(
                    "W remains ill-conditioned (condition {last:e}) after maximal ridge {ridge:e}"
                ));
                Ok(ridge)
            } else {
                Err(NpcError::Factorization(format!(
                    "W is not positive definite after maximal ridge {ridge:e} (trace/m {unit:e})"
                )))
            }
        }
    }
}

/// `V = (1/2T) sum G_i Sigma(x_i) G_i'` and `W = (1/T) sum Psi_i Psi_i'`
/// over the sampled states.
pub fn assemble_sample(
    basis: &SieveBasis,
    diffusion: &DiffusionSpec,
    path: &SamplePath,
    policy: RidgePolicy,
) -> Result<FormMatrices> {
    let rule = QuadratureRule::empirical(path.states(), path.dimension())?;
    let (v, mut w) = accumulate(basis, diffusion, &rule)?;
    let mut warnings = Vec::new();
    if path.len() < basis.len() {
        warnings.push(format!(
            "T = {} is smaller than m = {}; W is singular in exact arithmetic",
            path.len(),
            basis.len()
        ));
    }
    let ridge = regularize(&mut w, policy, &mut warnings)?;
    Ok(FormMatrices {
        v,
        w,
        provenance: Provenance::Sample {
            t: path.len(),
            interval: path.interval,
            seed: path.seed,
        },
        basis: basis.clone(),
        ridge,
        warnings,
    })
}

/// Population forms `V_kl = (1/2) int grad B_k' Sigma grad B_l q` and
/// `W_kl = int B_k B_l q` under a quadrature rule for `q`.
pub fn assemble_population(
    basis: &SieveBasis,
    density: &DensityModel,
    diffusion: &DiffusionSpec,
    rule: &QuadratureRule,
    policy: RidgePolicy,
) -> Result<FormMatrices> {
    if density.dimension() != basis.dimension() {
        return Err(NpcError::DimensionMismatch {
            expected: basis.dimension(),
            found: density.dimension(),
        });
    }
    let (v, mut w) = accumulate(basis, diffusion, rule)?;
    let mut warnings = Vec::new();
    let ridge = regularize(&mut w, policy, &mut warnings)?;
    Ok(FormMatrices {
        v,
        w,
        provenance: Provenance::Population {
            quadrature: rule.label().to_string(),
            nodes: rule.len(),
        },
        basis: basis.clone(),
        ridge,
        warnings,
    })
}

/// Principal components `psi_j = a_j . Psi` with `a_j' W a_l = 1{j=l}` and
/// `a_j' V a_l = delta_j 1{j=l}`, `delta` ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpcSet {
    pub delta: Vec<f64>,
    pub coefficients: Vec<Vec<f64>>,
    pub basis: SieveBasis,
    pub normalization: String,
    pub ridge: f64,
    pub provenance: Provenance,
    pub sign_convention: String,
    /// Groups of indices with numerically equal eigenvalues; vectors within
    /// a group are an arbitrary orthonormal rotation.
    pub clusters: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Relative gap below which neighbouring eigenvalues form a cluster.
pub const CLUSTER_TOLERANCE: f64 = 1e-8;

/// The `k` smallest generalized eigenpairs of `(V, W)` by Cholesky
/// reduction.
pub fn solve_gevp(forms: &FormMatrices, k: usize) -> Result<NpcSet> {
    let m = forms.w.nrows();
    if k == 0 || k > m {
        return Err(NpcError::InvalidParameter(format!("k must be in 1..={m}, found {k}")));
    }
    let l = linalg::cholesky(&forms.w).map_err(|e| {
        NpcError::Factorization(format!("W after ridge {:e}: {e}", forms.ridge))
    })?;
    let eig = linalg::generalized_symmetric_eigen_with_factor(&forms.v, &l);
    let mut coefficients = Vec::with_capacity(k);
    for j in 0..k {
        let mut a = eig.vectors.column(j).into_owned();
        let norm = a.dot(&(&forms.w * &a)).sqrt();
        a /= norm;
        let mut lead = 0;
        for i in 1..m {
            if a[i].abs() > a[lead].abs() {
                lead = i;
            }
        }
        if a[lead] < 0.0 {
            a.neg_mut();
        }
        coefficients.push(a.as_slice().to_vec());
    }
    let delta: Vec<f64> = eig.values.iter().take(k).copied().collect();
    let mut clusters = Vec::new();
    let mut current = vec![0];
    for j in 1..k {
        if (delta[j] - delta[j - 1]).abs() < CLUSTER_TOLERANCE * (1.0 + delta[j - 1].abs()) {
            current.push(j);
        } else {
            if current.len() > 1 {
                clusters.push(current.clone());
            }
            current = vec![j];
        }
    }
    if current.len() > 1 {
        clusters.push(current);
    }
    Ok(NpcSet {
        delta,
        coefficients,
        basis: forms.basis.clone(),
        normalization: "a_j' W a_j = 1".into(),
        ridge: forms.ridge,
        provenance: forms.provenance.clone(),
        sign_convention: "largest-magnitude coefficient positive".into(),
        clusters,
        warnings: forms.warnings.clone(),
    })
}

impl NpcSet {
    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn coefficient(&self, j: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.coefficients[j])
    }

    /// The m x k coefficient matrix.
    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let m = self.basis.len();
        DMatrix::from_fn(m, self.len(), |i, j| self.coefficients[j][i])
    }

    /// `psi_j(x)`.
    pub fn evaluate(&self, x: &[f64], j: usize) -> f64 {
        self.basis.eval(x).dot(&self.coefficient(j))
    }

    /// `psi_0(x), ..., psi_{k-1}(x)`.
    pub fn evaluate_all(&self, x: &[f64]) -> DVector<f64> {
        self.coefficient_matrix().transpose() * self.basis.eval(x)
    }

    pub fn evaluate_grad(&self, x: &[f64], j: usize) -> DVector<f64> {
        self.basis.eval_grad(x).transpose() * self.coefficient(j)
    }

    /// `psi_j` at every state of a path.
    pub fn series(&self, path: &SamplePath, j: usize) -> Vec<f64> {
        let a = self.coefficient(j);
        let mut psi = DVector::zeros(self.basis.len());
        path.iter()
            .map(|x| {
                self.basis.eval_into(x, psi.as_mut_slice());
                psi.dot(&a)
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("NpcSet serializes")
    }
}
