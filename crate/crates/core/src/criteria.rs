//! Numerical checks of the existence criteria for a density and a
//! penalization.
//!
//! Limits at infinity are replaced by trend tests over a geometric radius
//! ladder, evaluated along a declared set of ray directions. Verdicts are
//! three-valued because a finite ladder cannot certify a limit.

use std::collections::BTreeMap;

use gauss_quad::GaussLegendre;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{NpcError, Result};
use crate::model::{
    check_potential_w, potential, scalar_check_potential, DensityModel, DiffusionSpec, Domain, Penalty,
    StateSpace,
};

/// Quasi-random ray directions added to the `2n` coordinate directions.
pub const QUASI_RANDOM_RAYS: usize = 32;
/// A diverging sequence must end above this multiple of its midpoint value.
pub const DIVERGENCE_FACTOR: f64 = 10.0;
/// Values at or below this magnitude count as zero.
pub const VANISHING_TOLERANCE: f64 = 1e-12;
/// Relative increment below which a cumulative integral has saturated.
pub const SATURATION_TOLERANCE: f64 = 1e-3;
/// Relative increment above which a cumulative integral is still growing.
pub const GROWTH_TOLERANCE: f64 = 1e-2;

const CIRCLE_NODES: usize = 64;
const POLAR_NODES: usize = 16;
const AZIMUTH_NODES: usize = 32;
const MONTE_CARLO_NODES: usize = 4096;
const SEGMENT_ORDER: usize = 16;
const SEGMENT_PIECES: usize = 8;

/// Surface area of the unit sphere in `R^n` (2 for `n = 1`).
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

/// Radius ladder, surface quadrature on the unit sphere and ray directions.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    dimension: usize,
    radii: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    rays: Vec<f64>,
    rule: &'static str,
    seed: u64,
}

impl RadialGrid {
    /// `{2, 4, ..., 1024}`.
    pub fn default_ladder() -> Vec<f64> {
        (1..=10).map(|k| 2f64.powi(k)).collect()
    }

    pub fn standard(dimension: usize, seed: u64) -> Result<Self> {
        Self::new(dimension, Self::default_ladder(), seed)
    }

    pub fn new(dimension: usize, radii: Vec<f64>, seed: u64) -> Result<Self> {
        if dimension == 0 {
            return Err(NpcError::InvalidParameter("dimension must be at least 1".into()));
        }
        if radii.len() < 3 {
            return Err(NpcError::InvalidParameter(format!(
                "radius ladder needs at least 3 radii, found {}",
                radii.len()
            )));
        }
        if !(radii[0] > 0.0) || radii.windows(2).any(|w| !(w[0] < w[1])) || radii.iter().any(|r| !r.is_finite()) {
            return Err(NpcError::InvalidParameter(
                "radius ladder must be positive and strictly increasing".into(),
            ));
        }
        let (nodes, weights, rule) = surface_rule(dimension, seed);
        Ok(RadialGrid {
            dimension,
            radii,
            nodes,
            weights,
            rays: rays(dimension),
            rule,
            seed,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rule(&self) -> &str {
        self.rule
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn surface_area(&self) -> f64 {
        sphere_area(self.dimension)
    }

    /// Surface nodes with their weights.
    pub fn surface(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.nodes.chunks(self.dimension).zip(self.weights.iter().copied())
    }

    pub fn rays(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.rays.chunks(self.dimension)
    }

    pub fn ray_count(&self) -> usize {
        self.rays.len() / self.dimension
    }

    /// Rays pointing into `space`. On the positive orthant the rays are
    /// folded by taking absolute values and those touching the boundary
    /// are dropped.
    pub fn rays_in(&self, space: &StateSpace) -> Result<Vec<Vec<f64>>> {
        if space.dimension() != self.dimension {
            return Err(NpcError::DimensionMismatch {
                expected: self.dimension,
                found: space.dimension(),
            });
        }
        let out: Vec<Vec<f64>> = match space.domain() {
            Domain::Full => self.rays().map(<[f64]>::to_vec).collect(),
            Domain::PositiveOrthant => {
                let mut out: Vec<Vec<f64>> = Vec::new();
                for ray in self.rays() {
                    let folded: Vec<f64> = ray.iter().map(|c| c.abs()).collect();
                    if folded.iter().all(|&c| c > 0.0) && !out.contains(&folded) {
                        out.push(folded);
                    }
                }
                out
            }
            Domain::Box { .. } => {
                return Err(NpcError::InvalidParameter(
                    "tail criteria need an unbounded state space".into(),
                ))
            }
        };
        if out.is_empty() {
            return Err(NpcError::InvalidParameter("no ray direction lies inside the state space".into()));
        }
        Ok(out)
    }
}

fn surface_rule(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, &'static str) {
    use std::f64::consts::PI;
    match n {
        1 => (vec![1.0, -1.0], vec![1.0, 1.0], "two-point"),
        2 => {
            let mut nodes = Vec::with_capacity(2 * CIRCLE_NODES);
            for k in 0..CIRCLE_NODES {
                let a = 2.0 * PI * k as f64 / CIRCLE_NODES as f64;
                nodes.extend_from_slice(&[a.cos(), a.sin()]);
            }
            (nodes, vec![2.0 * PI / CIRCLE_NODES as f64; CIRCLE_NODES], "trapezoid")
        }
        3 => {
            let gl = GaussLegendre::new(POLAR_NODES).expect("fixed order is valid");
            let mut nodes = Vec::new();
            let mut weights = Vec::new();
            for &(z, wz) in gl.as_node_weight_pairs() {
                let s = (1.0 - z * z).sqrt();
                for k in 0..AZIMUTH_NODES {
                    let a = 2.0 * PI * k as f64 / AZIMUTH_NODES as f64;
                    nodes.extend_from_slice(&[s * a.cos(), s * a.sin(), z]);
                    weights.push(wz * 2.0 * PI / AZIMUTH_NODES as f64);
                }
            }
            (nodes, weights, "gauss-legendre-trapezoid")
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut nodes = Vec::with_capacity(n * MONTE_CARLO_NODES);
            for _ in 0..MONTE_CARLO_NODES {
                let mut z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = z.iter().map(|c| c * c).sum::<f64>().sqrt();
                z.iter_mut().for_each(|c| *c /= norm);
                nodes.extend(z);
            }
            let w = sphere_area(n) / MONTE_CARLO_NODES as f64;
            (nodes, vec![w; MONTE_CARLO_NODES], "monte-carlo")
        }
    }
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut p = 2u64;
    while out.len() < count {
        if out.iter().all(|&q| p % q != 0) {
            out.push(p);
        }
        p += 1;
    }
    out
}

fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Coordinate directions, then Halton points mapped to the sphere through
/// Box-Muller.
fn rays(n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = sign;
            out.extend(e);
        }
    }
    if n == 1 {
        return out;
    }
    let pairs = n.div_ceil(2);
    let bases = primes(2 * pairs);
    for k in 1..=QUASI_RANDOM_RAYS as u64 {
        let mut z = Vec::with_capacity(2 * pairs);
        for p in 0..pairs {
            let u1 = halton(k, bases[2 * p]);
            let u2 = halton(k, bases[2 * p + 1]);
            let rad = (-2.0 * u1.ln()).sqrt();
            let ang = 2.0 * std::f64::consts::PI * u2;
            z.push(rad * ang.cos());
            z.push(rad * ang.sin());
        }
        z.truncate(n);
        let norm = z.iter().map(|c| c * c).sum::<f64>().sqrt();
        out.extend(z.iter().map(|c| c / norm));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionId {
    ScalarA,
    ScalarB,
    CoreNattract,
    CoreNattract2,
    DivergentPotential,
    ThinTail,
    AlgebraicTail,
}

/// The proxy standing in for a limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    /// Last three values strictly increasing and the final value above
    /// `DIVERGENCE_FACTOR` times the magnitude at the ladder midpoint.
    Diverges,
    /// Final magnitude negligible, or below a tenth of the midpoint
    /// magnitude with the last three magnitudes non-increasing.
    Vanishes,
    /// Cumulative integral over nested limits still growing.
    IntegralDiverges,
    /// Cumulative integral over nested limits has stopped growing.
    IntegralSaturates,
    /// Pointwise lower bound at every probe.
    Bounded,
}

fn nan_vec<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    let v: Vec<Option<f64>> = Deserialize::deserialize(d)?;
    Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
}

fn nan_f64<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    let v: Option<f64> = Deserialize::deserialize(d)?;
    Ok(v.unwrap_or(f64::NAN))
}

/// Infinities do not survive JSON; saturate them.
fn finite(x: f64) -> f64 {
    if x == f64::INFINITY {
        f64::MAX
    } else if x == f64::NEG_INFINITY {
        f64::MIN
    } else {
        x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartReport {
    pub id: CriterionId,
    pub label: String,
    pub test: Trend,
    pub verdict: Verdict,
    /// Worst value over rays at each ladder radius.
    #[serde(deserialize_with = "nan_vec")]
    pub witnesses: Vec<f64>,
    #[serde(deserialize_with = "nan_f64")]
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub verdict: Verdict,
    pub ladder: Vec<f64>,
    /// Witness values of the leading quantity per radius.
    #[serde(deserialize_with = "nan_vec")]
    pub witnesses: Vec<f64>,
    /// Trend statistic of the deciding part.
    #[serde(deserialize_with = "nan_f64")]
    pub statistic: f64,
    pub parts: Vec<PartReport>,
    pub rays: usize,
    pub surface_rule: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub auxiliary: BTreeMap<String, Vec<f64>>,
}

impl CriterionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn part(&self, label: &str) -> Option<&PartReport> {
        self.parts.iter().find(|p| p.label == label)
    }
}

/// Verdict and statistic of a divergence trend.
pub fn diverges(values: &[f64]) -> (Verdict, f64) {
    let k = values.len();
    let last = values[k - 1];
    let mid = values[k / 2];
    if values.iter().any(|v| v.is_nan()) {
        return (Verdict::Inconclusive, f64::NAN);
    }
    let stat = if mid != 0.0 {
        last / mid.abs()
    } else if last > 0.0 {
        f64::INFINITY
    } else if last < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    let increasing = values[k - 3] < values[k - 2] && values[k - 2] < last;
    if increasing && last > 0.0 && last > DIVERGENCE_FACTOR * mid.abs() {
        (Verdict::Satisfied, stat)
    } else if last <= mid {
        (Verdict::Violated, stat)
    } else {
        (Verdict::Inconclusive, stat)
    }
}

/// Verdict and statistic of a vanishing trend.
pub fn vanishes(values: &[f64]) -> (Verdict, f64) {
    let k = values.len();
    if values.iter().any(|v| v.is_nan()) {
        return (Verdict::Inconclusive, f64::NAN);
    }
    let a: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let last = a[k - 1];
    let mid = a[k / 2];
    if last <= VANISHING_TOLERANCE {
        return (Verdict::Satisfied, 0.0);
    }
    let stat = if mid > 0.0 { last / mid } else { f64::INFINITY };
    let non_increasing = a[k - 3] >= a[k - 2] && a[k - 2] >= last;
    if non_increasing && last < mid / DIVERGENCE_FACTOR {
        (Verdict::Satisfied, stat)
    } else if last >= mid {
        (Verdict::Violated, stat)
    } else {
        (Verdict::Inconclusive, stat)
    }
}

/// Relative increment of the last step of a cumulative log-integral.
fn increments(log_cum: &[f64]) -> Vec<f64> {
    log_cum.windows(2).map(|w| (w[1] - w[0]).exp_m1()).collect()
}

/// Divergence of a cumulative integral given `log` of its values.
pub fn integral_diverges(log_cum: &[f64]) -> (Verdict, f64) {
    let k = log_cum.len();
    let last = log_cum[k - 1];
    if last == f64::INFINITY {
        return (Verdict::Satisfied, f64::INFINITY);
    }
    if log_cum.iter().any(|v| v.is_nan()) {
        return (Verdict::Inconclusive, f64::NAN);
    }
    let inc = increments(log_cum);
    let m = inc.len();
    let stat = inc[m - 1];
    if inc[m - 2] > 0.0 && stat > GROWTH_TOLERANCE {
        (Verdict::Satisfied, stat)
    } else if stat < SATURATION_TOLERANCE && stat <= inc[m - 2] {
        (Verdict::Violated, stat)
    } else {
        (Verdict::Inconclusive, stat)
    }
}

/// Saturation of a cumulative integral given `log` of its values.
pub fn integral_saturates(log_cum: &[f64]) -> (Verdict, f64) {
    let (v, stat) = integral_diverges(log_cum);
    let flipped = match v {
        Verdict::Satisfied => Verdict::Violated,
        Verdict::Violated => Verdict::Satisfied,
        Verdict::Inconclusive => Verdict::Inconclusive,
    };
    (flipped, stat)
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if terms.iter().any(|t| t.is_nan()) {
        return f64::NAN;
    }
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `log` of the integral of `exp(log_f)` over `[a, b]`.
fn log_segment<F: Fn(f64) -> Result<f64>>(log_f: &F, a: f64, b: f64, rule: &[(f64, f64)]) -> Result<f64> {
    let h = (b - a) / SEGMENT_PIECES as f64;
    let mut terms = Vec::with_capacity(SEGMENT_PIECES * rule.len());
    for p in 0..SEGMENT_PIECES {
        let lo = a + p as f64 * h;
        for &(u, w) in rule {
            let t = lo + 0.5 * h * (u + 1.0);
            terms.push((0.5 * h * w).ln() + log_f(t)?);
        }
    }
    Ok(log_sum_exp(&terms))
}

/// `log int_start^{r_k} exp(log_f)` for every ladder radius.
fn log_cumulative<F: Fn(f64) -> Result<f64>>(log_f: F, start: f64, radii: &[f64]) -> Result<Vec<f64>> {
    let gl = GaussLegendre::new(SEGMENT_ORDER).expect("fixed order is valid");
    let rule = gl.as_node_weight_pairs();
    let mut acc = f64::NEG_INFINITY;
    let mut a = start;
    let mut out = Vec::with_capacity(radii.len());
    for &b in radii {
        let seg = log_segment(&log_f, a, b, rule)?;
        acc = log_sum_exp(&[acc, seg]);
        out.push(acc);
        a = b;
    }
    Ok(out)
}

fn scale(ray: &[f64], r: f64) -> Vec<f64> {
    ray.iter().map(|c| c * r).collect()
}

/// Applies `trend` to each ray's sequence and aggregates: one violating ray
/// violates the part; satisfaction needs every ray.
fn aggregate(
    id: CriterionId,
    label: &str,
    test: Trend,
    radii: &[f64],
    rays: &[Vec<f64>],
    per_ray: Vec<Vec<f64>>,
) -> PartReport {
    let judge = match test {
        Trend::Diverges => diverges,
        Trend::Vanishes => vanishes,
        Trend::IntegralDiverges => integral_diverges,
        Trend::IntegralSaturates => integral_saturates,
        Trend::Bounded => unreachable!("bounds are aggregated separately"),
    };
    let worst = |vals: Vec<f64>| -> f64 {
        match test {
            Trend::Diverges | Trend::IntegralDiverges => vals.into_iter().fold(f64::INFINITY, f64::min),
            _ => vals.into_iter().map(f64::abs).fold(0.0, f64::max),
        }
    };
    let witnesses: Vec<f64> = (0..radii.len())
        .map(|k| finite(worst(per_ray.iter().map(|s| s[k]).collect())))
        .collect();
    let results: Vec<(Verdict, f64)> = per_ray.iter().map(|s| judge(s)).collect();
    let lower_is_worse = matches!(test, Trend::Diverges | Trend::IntegralDiverges);
    let mut verdict = Verdict::Satisfied;
    let mut statistic = results[0].1;
    let mut direction = None;
    for (i, &(v, stat)) in results.iter().enumerate() {
        match v {
            Verdict::Violated => {
                if verdict != Verdict::Violated {
                    verdict = Verdict::Violated;
                    statistic = stat;
                    direction = Some(rays[i].clone());
                }
            }
            Verdict::Inconclusive => {
                if verdict == Verdict::Satisfied {
                    verdict = Verdict::Inconclusive;
                    statistic = stat;
                    direction = Some(rays[i].clone());
                }
            }
            Verdict::Satisfied => {
                if verdict == Verdict::Satisfied {
                    let worse = if lower_is_worse { stat < statistic } else { stat > statistic };
                    if worse {
                        statistic = stat;
                    }
                }
            }
        }
    }
    let witness_radius = direction.as_ref().map(|_| radii[radii.len() - 1]);
    PartReport {
        id,
        label: label.into(),
        test,
        verdict,
        witnesses,
        statistic: finite(statistic),
        witness_radius,
        witness_direction: direction,
    }
}

fn combine(parts: &[PartReport]) -> Verdict {
    if parts.iter().any(|p| p.verdict == Verdict::Violated) {
        Verdict::Violated
    } else if parts.iter().all(|p| p.verdict == Verdict::Satisfied) {
        Verdict::Satisfied
    } else {
        Verdict::Inconclusive
    }
}

/// Statistic of the part that decided the verdict.
fn deciding_statistic(parts: &[PartReport], verdict: Verdict) -> f64 {
    parts
        .iter()
        .find(|p| p.verdict == verdict)
        .map(|p| p.statistic)
        .unwrap_or(parts[0].statistic)
}

fn report(
    criterion: &str,
    grid: &RadialGrid,
    ray_count: usize,
    verdict: Verdict,
    witnesses: Vec<f64>,
    parts: Vec<PartReport>,
) -> CriterionReport {
    CriterionReport {
        criterion: criterion.into(),
        verdict,
        ladder: grid.radii.clone(),
        witnesses: witnesses.into_iter().map(finite).collect(),
        statistic: deciding_statistic(&parts, verdict),
        parts,
        rays: ray_count,
        surface_rule: grid.rule.into(),
        seed: grid.seed,
        auxiliary: BTreeMap::new(),
    }
}

fn check_dimensions(grid: &RadialGrid, n: usize) -> Result<()> {
    if grid.dimension != n {
        return Err(NpcError::DimensionMismatch {
            expected: n,
            found: grid.dimension,
        });
    }
    Ok(())
}

/// Evaluates `f` at `r * ray` for every ray and radius, rays in parallel.
fn along_rays<F>(rays: &[Vec<f64>], radii: &[f64], f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    rays.par_iter()
        .map(|ray| radii.iter().map(|&r| f(&scale(ray, r))).collect::<Result<Vec<f64>>>())
        .collect()
}

/// Scalar case with `Sigma = varsigma^2`: (a) `int 1/(varsigma^2 q)`
/// diverges in each tail and (b) `-sign(x)[varsigma q'/q + varsigma']`
/// diverges.
pub fn check_scalar(density: &DensityModel, penalty: &Penalty, grid: &RadialGrid) -> Result<CriterionReport> {
    if density.dimension() != 1 {
        return Err(NpcError::InvalidParameter(format!(
            "the scalar criterion needs n = 1, found n = {}",
            density.dimension()
        )));
    }
    check_dimensions(grid, 1)?;
    let rays = grid.rays_in(density.space())?;
    let radii = grid.radii();
    let integrals: Vec<Vec<f64>> = rays
        .par_iter()
        .map(|ray| {
            let s = ray[0];
            // Orthants start the integral at the boundary inset.
            let start = if density.space().is_bounded() { crate::model::BOUNDARY_INSET } else { 0.0 };
            log_cumulative(
                |t| {
                    let x = [s * t];
                    Ok(-penalty.varsigma2(&x)?.ln() - density.log_q(&x))
                },
                start,
                radii,
            )
        })
        .collect::<Result<_>>()?;
    let part_a = aggregate(CriterionId::ScalarA, "a", Trend::IntegralDiverges, radii, &rays, integrals);
    let values = along_rays(&rays, radii, |x| {
        let s = x[0].signum();
        let varsigma = penalty.varsigma2(x)?.sqrt();
        Ok(-s * varsigma * (density.grad_log_q(x)[0] + penalty.grad_v(x)[0]))
    })?;
    let part_b = aggregate(CriterionId::ScalarB, "b", Trend::Diverges, radii, &rays, values);
    let witnesses = part_b.witnesses.clone();
    let parts = vec![part_a, part_b];
    let verdict = combine(&parts);
    Ok(report("scalar", grid, rays.len(), verdict, witnesses, parts))
}

fn log_kappa(density: &DensityModel, diffusion: &DiffusionSpec, r: f64, grid: &RadialGrid) -> f64 {
    let space = density.space();
    let terms: Vec<f64> = grid
        .surface()
        .filter_map(|(u, w)| {
            let x = scale(u, r);
            if !space.contains(&x) {
                return None;
            }
            let sigma = diffusion.sigma(&x);
            let mut a = 0.0;
            for i in 0..u.len() {
                for j in 0..u.len() {
                    a += u[i] * sigma[(i, j)] * u[j];
                }
            }
            (a > 0.0).then(|| a.ln() + density.log_q(&x) + w.ln())
        })
        .collect();
    if terms.is_empty() {
        f64::NEG_INFINITY
    } else {
        log_sum_exp(&terms)
    }
}

/// `kappa(r) = int_{|x|=1} x' Sigma(rx) x q(rx) dS(x)` by surface
/// quadrature. Points outside the state space carry no density.
pub fn kappa_radial(density: &DensityModel, diffusion: &DiffusionSpec, r: f64, grid: &RadialGrid) -> Result<f64> {
    check_dimensions(grid, density.dimension())?;
    if !(r > 0.0) {
        return Err(NpcError::InvalidParameter(format!("radius must be positive, found {r}")));
    }
    Ok(log_kappa(density, diffusion, r, grid).exp())
}

/// Core condition: `int_1^inf kappa^{-1} r^{1-n} dr` diverges, or the
/// sufficient `int_1^inf kappa r^{n-3} dr` converges.
pub fn check_core(density: &DensityModel, diffusion: &DiffusionSpec, grid: &RadialGrid) -> Result<CriterionReport> {
    let n = density.dimension();
    check_dimensions(grid, n)?;
    let radii = grid.radii();
    if !(radii[0] > 1.0) {
        return Err(NpcError::InvalidParameter(
            "the core check integrates from 1 and needs a ladder above 1".into(),
        ));
    }
    let nf = n as f64;
    let lk = |r: f64| log_kappa(density, diffusion, r, grid);
    let (nattract, nattract2) = rayon::join(
        || log_cumulative(|r| Ok(-lk(r) + (1.0 - nf) * r.ln()), 1.0, radii),
        || log_cumulative(|r| Ok(lk(r) + (nf - 3.0) * r.ln()), 1.0, radii),
    );
    let one = vec![vec![1.0]];
    let part_a = aggregate(
        CriterionId::CoreNattract,
        "nattract",
        Trend::IntegralDiverges,
        radii,
        &one,
        vec![nattract?],
    );
    let part_b = aggregate(
        CriterionId::CoreNattract2,
        "nattract2",
        Trend::IntegralSaturates,
        radii,
        &one,
        vec![nattract2?],
    );
    let strip = |mut p: PartReport| {
        p.witness_direction = None;
        p
    };
    let (part_a, part_b) = (strip(part_a), strip(part_b));
    // The second integral is only sufficient, so its failure is not a
    // counter-witness.
    let verdict = if part_a.verdict == Verdict::Satisfied || part_b.verdict == Verdict::Satisfied {
        Verdict::Satisfied
    } else if part_a.verdict == Verdict::Violated {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    let witnesses: Vec<f64> = radii.iter().map(|&r| lk(r).exp()).collect();
    let parts = vec![part_a, part_b];
    Ok(report("core", grid, 0, verdict, witnesses, parts))
}

/// Divergent potential: `Sigma >= lower_bound I` at every probe and
/// `V -> +inf` along every ray.
pub fn check_divergent_potential(
    density: &DensityModel,
    diffusion: &DiffusionSpec,
    lower_bound: f64,
    grid: &RadialGrid,
) -> Result<CriterionReport> {
    if !(lower_bound > 0.0) {
        return Err(NpcError::InvalidParameter(format!(
            "lower bound must be positive, found {lower_bound}"
        )));
    }
    check_dimensions(grid, density.dimension())?;
    let rays = grid.rays_in(density.space())?;
    let radii = grid.radii();
    let eig = along_rays(&rays, radii, |x| Ok(diffusion.min_eigenvalue(x)))?;
    let mut bound_witness: Vec<f64> = vec![f64::INFINITY; radii.len()];
    let mut lowest = (f64::INFINITY, 0usize, 0usize);
    for (i, s) in eig.iter().enumerate() {
        for (k, &e) in s.iter().enumerate() {
            bound_witness[k] = bound_witness[k].min(e);
            if e < lowest.0 {
                lowest = (e, i, k);
            }
        }
    }
    let bounded = lowest.0 >= lower_bound * (1.0 - 1e-12);
    let bound = PartReport {
        id: CriterionId::DivergentPotential,
        label: "lower_bound".into(),
        test: Trend::Bounded,
        verdict: if bounded { Verdict::Satisfied } else { Verdict::Violated },
        witnesses: bound_witness.into_iter().map(finite).collect(),
        statistic: finite(lowest.0),
        witness_radius: (!bounded).then(|| radii[lowest.2]),
        witness_direction: (!bounded).then(|| rays[lowest.1].clone()),
    };
    let values = along_rays(&rays, radii, |x| potential(density, diffusion, x))?;
    let pot = aggregate(CriterionId::DivergentPotential, "potential", Trend::Diverges, radii, &rays, values);
    let witnesses = pot.witnesses.clone();
    let parts = vec![bound, pot];
    let verdict = combine(&parts);
    Ok(report("divergent_potential", grid, rays.len(), verdict, witnesses, parts))
}

/// Thin tails with `varsigma = exp(v)`: (a) `|grad v| / |grad h| -> 0` and
/// (b) `varsigma^2 (-trace h'' + |grad h|^2) -> +inf`.
pub fn check_thin_tail(density: &DensityModel, penalty: &Penalty, grid: &RadialGrid) -> Result<CriterionReport> {
    check_dimensions(grid, density.dimension())?;
    let rays = grid.rays_in(density.space())?;
    let radii = grid.radii();
    let ratio = along_rays(&rays, radii, |x| {
        let gv = penalty.grad_v(x).norm();
        let gh = density.grad_h(x).norm();
        Ok(if gv == 0.0 { 0.0 } else { gv / gh })
    })?;
    let part_a = aggregate(CriterionId::ThinTail, "a", Trend::Vanishes, radii, &rays, ratio);
    let values = along_rays(&rays, radii, |x| {
        let s2 = penalty.varsigma2(x)?;
        let gh = density.grad_h(x);
        Ok(s2 * (-density.hessian_h(x).trace() + gh.norm_squared()))
    })?;
    let part_b = aggregate(CriterionId::ThinTail, "b", Trend::Diverges, radii, &rays, values);
    let witnesses = part_b.witnesses.clone();
    let parts = vec![part_a, part_b];
    let verdict = combine(&parts);
    Ok(report("thin_tail", grid, rays.len(), verdict, witnesses, parts))
}

/// Algebraic tails with `varsigma = exp(v) >= sqrt(lower_bound)`:
/// (a) `grad v . grad v - trace v'' -> 0` and
/// (b) `varsigma^2 trace[v'' - h''] + varsigma^2 |grad h - grad v|^2 -> +inf`.
/// The leading witnesses are `V_check + W_check`.
pub fn check_algebraic_tail(
    density: &DensityModel,
    penalty: &Penalty,
    lower_bound: f64,
    grid: &RadialGrid,
) -> Result<CriterionReport> {
    check_dimensions(grid, density.dimension())?;
    let rays = grid.rays_in(density.space())?;
    let radii = grid.radii();
    let total = along_rays(&rays, radii, |x| {
        Ok(scalar_check_potential(density, penalty, x)? + check_potential_w(penalty, lower_bound, x)?)
    })?;
    let total_witness: Vec<f64> = (0..radii.len())
        .map(|k| total.iter().map(|s| s[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let a_values = along_rays(&rays, radii, |x| {
        Ok(penalty.grad_v(x).norm_squared() - penalty.hessian_v(x).trace())
    })?;
    let part_a = aggregate(CriterionId::AlgebraicTail, "a", Trend::Vanishes, radii, &rays, a_values);
    let b_values = along_rays(&rays, radii, |x| {
        let s2 = penalty.varsigma2(x)?;
        let diff = density.grad_h(x) - penalty.grad_v(x);
        Ok(s2 * (penalty.hessian_v(x) - density.hessian_h(x)).trace() + s2 * diff.norm_squared())
    })?;
    let part_b = aggregate(CriterionId::AlgebraicTail, "b", Trend::Diverges, radii, &rays, b_values);
    let parts = vec![part_a, part_b];
    let verdict = combine(&parts);
    let mut out = report("algebraic_tail", grid, rays.len(), verdict, total_witness, parts);
    let first = &rays[0];
    let mut neg_grad = Vec::with_capacity(radii.len());
    let mut trace = Vec::with_capacity(radii.len());
    for &r in radii {
        let x = scale(first, r);
        neg_grad.push(-penalty.grad_v(&x).norm_squared());
        trace.push(penalty.hessian_v(&x).trace());
    }
    out.auxiliary.insert("neg_grad_v_squared".into(), neg_grad);
    out.auxiliary.insert("trace_hessian_v".into(), trace);
    Ok(out)
}
