//! Euler-Maruyama simulation of a [`DiffusionModel`] and Monte Carlo
//! conditional expectations.
//!
//! Every path owns a ChaCha8 stream selected by `(seed, path index)`, so
//! results do not depend on thread scheduling.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NpcError, Result};
use crate::function::ScalarFunction;
use crate::model::{DiffusionModel, StateSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// No boundary: the domain is all of n-space.
    None,
    /// Coefficients are evaluated at the state clamped into the inset
    /// domain; the recorded state is clamped as well.
    FullTruncation,
}

impl BoundaryPolicy {
    pub fn for_space(space: &StateSpace) -> Self {
        if space.is_bounded() {
            BoundaryPolicy::FullTruncation
        } else {
            BoundaryPolicy::None
        }
    }
}

/// A discretely sampled path: `len()` states spaced `interval` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath {
    states: Vec<f64>,
    dimension: usize,
    pub interval: f64,
    pub burn_in: usize,
    pub substeps: usize,
    pub seed: Option<u64>,
    pub boundary_policy: BoundaryPolicy,
}

impl SamplePath {
    /// Wraps externally supplied states (row-major).
    pub fn from_states(states: Vec<f64>, dimension: usize, interval: f64) -> Result<Self> {
        if dimension == 0 || states.is_empty() || states.len() % dimension != 0 {
            return Err(NpcError::DimensionMismatch {
                expected: dimension,
                found: states.len(),
            });
        }
        if !(interval > 0.0) {
            return Err(NpcError::InvalidParameter(format!(
                "sampling interval must be positive, found {interval}"
            )));
        }
        if let Some(step) = states.iter().position(|v| !v.is_finite()) {
            return Err(NpcError::NonFiniteState { step: step / dimension });
        }
        Ok(SamplePath {
            states,
            dimension,
            interval,
            burn_in: 0,
            substeps: 1,
            seed: None,
            boundary_policy: BoundaryPolicy::None,
        })
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.states.chunks_exact(self.dimension)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Column `i` of the states.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        self.iter().map(|x| x[i]).collect()
    }

    /// The same states in a seeded random order.
    pub fn shuffled(&self, seed: u64) -> SamplePath {
        use rand::seq::SliceRandom;
        let mut rows: Vec<&[f64]> = self.iter().collect();
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut out = self.clone();
        out.states = rows.concat();
        out
    }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One Euler-Maruyama integrator bound to a model.
struct Stepper<'a> {
    model: &'a DiffusionModel,
    policy: BoundaryPolicy,
    dt: f64,
    sqrt_dt: f64,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a DiffusionModel, dt: f64) -> Self {
        Stepper {
            model,
            policy: BoundaryPolicy::for_space(model.space()),
            dt,
            sqrt_dt: dt.sqrt(),
            scratch: vec![0.0; model.dimension()],
        }
    }

    fn step(&mut self, x: &mut [f64], rng: &mut ChaCha8Rng, index: usize) -> Result<()> {
        self.scratch.copy_from_slice(x);
        if self.policy == BoundaryPolicy::FullTruncation {
            self.model.space().clamp(&mut self.scratch);
        }
        let mu = self.model.drift_unchecked(&self.scratch);
        let lambda = self.model.diffusion().factor(&self.scratch)?;
        let n = x.len();
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let shock = lambda * z;
        for i in 0..n {
            x[i] += mu[i] * self.dt + shock[i] * self.sqrt_dt;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NpcError::NonFiniteState { step: index });
        }
        Ok(())
    }

    fn record(&self, x: &[f64], out: &mut Vec<f64>) {
        let start = out.len();
        out.extend_from_slice(x);
        if self.policy == BoundaryPolicy::FullTruncation {
            self.model.space().clamp(&mut out[start..]);
        }
    }
}

/// Euler-Maruyama path of `steps + 1` states (including `x0`) at spacing
/// `dt`.
pub fn integrate(model: &DiffusionModel, x0: &[f64], dt: f64, steps: usize, seed: u64) -> Result<SamplePath> {
    model.space().check(x0)?;
    if !(dt > 0.0) {
        return Err(NpcError::InvalidParameter(format!("dt must be positive, found {dt}")));
    }
    let mut stepper = Stepper::new(model, dt);
    let mut rng = stream(seed, 0);
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity((steps + 1) * x0.len());
    stepper.record(&x, &mut states);
    for k in 0..steps {
        stepper.step(&mut x, &mut rng, k + 1)?;
        stepper.record(&x, &mut states);
    }
    Ok(SamplePath {
        states,
        dimension: x0.len(),
        interval: dt,
        burn_in: 0,
        substeps: 1,
        seed: Some(seed),
        boundary_policy: stepper.policy,
    })
}

/// Path of `t` states spaced `interval` apart, each recorded after
/// `substeps` Euler steps, after discarding `burn_in` recorded states.
/// The initial state is an exact stationary draw when the density has a
/// sampler, else `x0`.
pub fn sample_stationary(
    model: &DiffusionModel,
    interval: f64,
    t: usize,
    burn_in: usize,
    substeps: usize,
    seed: u64,
    x0: Option<&[f64]>,
) -> Result<SamplePath> {
    if substeps == 0 || t == 0 {
        return Err(NpcError::InvalidParameter("substeps and T must be at least 1".into()));
    }
    if !(interval > 0.0) {
        return Err(NpcError::InvalidParameter(format!(
            "sampling interval must be positive, found {interval}"
        )));
    }
    let mut rng = stream(seed, 0);
    let mut x = match x0 {
        Some(x) => x.to_vec(),
        None => model.density().sample(&mut rng).ok_or_else(|| {
            NpcError::InvalidParameter("no stationary sampler for this density; supply x0".into())
        })?,
    };
    let mut stepper = Stepper::new(model, interval / substeps as f64);
    if stepper.policy == BoundaryPolicy::FullTruncation {
        model.space().clamp(&mut x);
    }
    model.space().check(&x)?;
    let mut states = Vec::with_capacity(t * x.len());
    let mut step = 0;
    for k in 0..burn_in + t {
        if k > 0 {
            for _ in 0..substeps {
                step += 1;
                stepper.step(&mut x, &mut rng, step)?;
            }
        }
        if k >= burn_in {
            stepper.record(&x, &mut states);
        }
    }
    Ok(SamplePath {
        states,
        dimension: x.len(),
        interval,
        burn_in,
        substeps,
        seed: Some(seed),
        boundary_policy: stepper.policy,
    })
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub paths: usize,
}

impl McEstimate {
    fn from_values(values: &[f64]) -> Self {
        // Deviations from the first draw keep a constant sample exact.
        let n = values.len() as f64;
        let base = values[0];
        let shift = values.iter().map(|v| v - base).sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v - base - shift).powi(2)).sum();
        McEstimate {
            mean: base + shift,
            standard_error: (ss / (n - 1.0) / n).sqrt(),
            paths: values.len(),
        }
    }
}

/// Terminal states at horizon `t` of `npaths` independent paths from `x`.
pub fn terminal_states(
    model: &DiffusionModel,
    x: &[f64],
    t: f64,
    npaths: usize,
    substeps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    model.space().check(x)?;
    if !(t >= 0.0) || substeps == 0 {
        return Err(NpcError::InvalidParameter("horizon must be >= 0 and substeps >= 1".into()));
    }
    if t == 0.0 {
        return Ok(vec![x.to_vec(); npaths]);
    }
    (0..npaths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, p as u64);
            let mut stepper = Stepper::new(model, t / substeps as f64);
            let mut y = x.to_vec();
            for k in 0..substeps {
                stepper.step(&mut y, &mut rng, k + 1)?;
            }
            if stepper.policy == BoundaryPolicy::FullTruncation {
                model.space().clamp(&mut y);
            }
            Ok(y)
        })
        .collect()
}

/// Monte Carlo estimate of `E[phi(x_t) | x_0 = x]`.
pub fn conditional_mc(
    model: &DiffusionModel,
    phi: &dyn ScalarFunction,
    x: &[f64],
    t: f64,
    npaths: usize,
    substeps: usize,
    seed: u64,
) -> Result<McEstimate> {
    if npaths < 2 {
        return Err(NpcError::InvalidParameter("conditional_mc needs at least 2 paths".into()));
    }
    if t == 0.0 {
        model.space().check(x)?;
        return Ok(McEstimate {
            mean: phi.value(x),
            standard_error: 0.0,
            paths: npaths,
        });
    }
    let ends = terminal_states(model, x, t, npaths, substeps, seed)?;
    let values: Vec<f64> = ends.iter().map(|y| phi.value(y)).collect();
    Ok(McEstimate::from_values(&values))
}
