//! Sieve bases: tensor Hermite and Laguerre polynomials, Gaussian radial
//! basis functions and tensor B-splines, each with the constant first.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{NpcError, Result};

/// Which multi-indices of a tensor family are kept.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Every coordinate degree up to the cap.
    #[default]
    Tensor,
    /// `prod (d_i + 1) <= max_degree + 1`.
    HyperbolicCross,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SieveFamily {
    /// Probabilists' Hermite polynomials He_d, divided by sqrt(d!) when
    /// `normalized`.
    HermiteTensor {
        max_degree: usize,
        #[serde(default = "yes")]
        normalized: bool,
        #[serde(default)]
        truncation: Truncation,
    },
    /// Generalized Laguerre polynomials L_d^(alpha), orthonormal under the
    /// Gamma(alpha + 1, 1) law when `normalized`.
    Laguerre {
        max_degree: usize,
        alpha: f64,
        #[serde(default = "yes")]
        normalized: bool,
    },
    /// `exp(-|x - c|^2 / (2 w^2))`; widths default to the median pairwise
    /// center distance.
    GaussianRbf {
        centers: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        widths: Option<Vec<f64>>,
    },
    /// Tensor B-splines of the given order (degree + 1) on `[lower, upper]`
    /// with clamped end knots.
    BsplineTensor {
        lower: Vec<f64>,
        upper: Vec<f64>,
        interior: Vec<Vec<f64>>,
        order: usize,
    },
}

/// Serialized form of a [`SieveBasis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveSpec {
    #[serde(flatten)]
    pub family: SieveFamily,
    pub dimension: usize,
    /// Per-coordinate affine map `z = (x - shift) / scale` applied before
    /// evaluating polynomial families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec<f64>>,
    /// Fit `shift`/`scale` to the sample mean and standard deviation when
    /// a sample is available and no explicit transform is given.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SieveSpec", into = "SieveSpec")]
pub struct SieveBasis {
    spec: SieveSpec,
    shift: Vec<f64>,
    scale: Vec<f64>,
    indices: Vec<Vec<usize>>,
}

impl TryFrom<SieveSpec> for SieveBasis {
    type Error = NpcError;

    fn try_from(spec: SieveSpec) -> Result<Self> {
        SieveBasis::from_spec(spec)
    }
}

impl From<SieveBasis> for SieveSpec {
    fn from(b: SieveBasis) -> Self {
        b.spec
    }
}

fn invalid(msg: impl Into<String>) -> NpcError {
    NpcError::InvalidParameter(msg.into())
}

fn median_pairwise_distance(centers: &[Vec<f64>]) -> f64 {
    let mut d = Vec::new();
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let s: f64 = centers[i]
                .iter()
                .zip(&centers[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            d.push(s.sqrt());
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    let k = d.len();
    if k % 2 == 1 {
        d[k / 2]
    } else {
        0.5 * (d[k / 2 - 1] + d[k / 2])
    }
}

/// Multi-indices `0 <= d_i < counts[i]` ordered by total degree, then
/// lexicographically; the zero index comes first.
fn graded_indices(counts: &[usize], keep: impl Fn(&[usize]) -> bool) -> Vec<Vec<usize>> {
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let idx: Vec<usize> = counts
            .iter()
            .map(|&c| {
                let d = rest % c;
                rest /= c;
                d
            })
            .collect();
        if keep(&idx) {
            out.push(idx);
        }
    }
    out.sort_by(|a, b| {
        let (sa, sb): (usize, usize) = (a.iter().sum(), b.iter().sum());
        sa.cmp(&sb).then_with(|| b.cmp(a))
    });
    out
}

fn clamped_knots(lower: f64, upper: f64, interior: &[f64], order: usize) -> Vec<f64> {
    let mut t = vec![lower; order];
    t.extend_from_slice(interior);
    t.extend(std::iter::repeat(upper).take(order));
    t
}

/// Values and derivatives of all B-splines of `order` on knot vector `t`
/// at `x`, clamped into the knot range.
fn bspline_values(t: &[f64], order: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    let count = t.len() - order;
    let (lo, hi) = (t[0], t[t.len() - 1]);
    let inside = x >= lo && x <= hi;
    let x = x.clamp(lo, hi);
    // Degree-0 indicators; the right end belongs to the last nonempty span.
    let spans = t.len() - 1;
    let mut b: Vec<f64> = (0..spans)
        .map(|i| {
            let in_span = t[i] <= x && x < t[i + 1];
            let at_end = x == hi && t[i] < t[i + 1] && t[i + 1] == hi;
            if in_span || at_end {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut lower_order = Vec::new();
    for k in 2..=order {
        if k == order {
            lower_order = b.clone();
        }
        let next: Vec<f64> = (0..t.len() - k)
            .map(|i| {
                let mut v = 0.0;
                let d1 = t[i + k - 1] - t[i];
                if d1 > 0.0 {
                    v += (x - t[i]) / d1 * b[i];
                }
                let d2 = t[i + k] - t[i + 1];
                if d2 > 0.0 {
                    v += (t[i + k] - x) / d2 * b[i + 1];
                }
                v
            })
            .collect();
        b = next;
    }
    b.truncate(count);
    let deriv = if order < 2 || !inside {
        vec![0.0; count]
    } else {
        let p = (order - 1) as f64;
        (0..count)
            .map(|i| {
                let mut d = 0.0;
                let d1 = t[i + order - 1] - t[i];
                if d1 > 0.0 {
                    d += lower_order[i] / d1;
                }
                let d2 = t[i + order] - t[i + 1];
                if d2 > 0.0 {
                    d -= lower_order[i + 1] / d2;
                }
                p * d
            })
            .collect()
    };
    (b, deriv)
}

impl SieveBasis {
    pub fn from_spec(mut spec: SieveSpec) -> Result<Self> {
        let n = spec.dimension;
        if n == 0 {
            return Err(invalid("basis dimension must be at least 1"));
        }
        let shift = spec.shift.clone().unwrap_or_else(|| vec![0.0; n]);
        let scale = spec.scale.clone().unwrap_or_else(|| vec![1.0; n]);
        if shift.len() != n || scale.len() != n {
            return Err(NpcError::DimensionMismatch {
                expected: n,
                found: shift.len().min(scale.len()),
            });
        }
        if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(invalid("basis scales must be positive"));
        }
        let indices = match &mut spec.family {
            SieveFamily::HermiteTensor {
                max_degree,
                truncation,
                ..
            } => {
                let cap = *max_degree;
                let rule = *truncation;
                graded_indices(&vec![cap + 1; n], |d| match rule {
                    Truncation::Tensor => true,
                    Truncation::HyperbolicCross => {
                        d.iter().map(|di| di + 1).product::<usize>() <= cap + 1
                    }
                })
            }
            SieveFamily::Laguerre {
                max_degree, alpha, ..
            } => {
                if !(*alpha > -1.0) {
                    return Err(invalid(format!("Laguerre alpha must exceed -1, found {alpha}")));
                }
                graded_indices(&vec![*max_degree + 1; n], |_| true)
            }
            SieveFamily::GaussianRbf { centers, widths } => {
                if centers.is_empty() || centers.iter().any(|c| c.len() != n) {
                    return Err(invalid("RBF centers must be non-empty points of the basis dimension"));
                }
                let w = match widths.take() {
                    Some(w) => w,
                    None => {
                        if centers.len() < 2 {
                            return Err(invalid("a single RBF center needs an explicit width"));
                        }
                        vec![median_pairwise_distance(centers); centers.len()]
                    }
                };
                if w.len() != centers.len() || w.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(invalid("RBF widths must be positive, one per center"));
                }
                *widths = Some(w);
                (0..=centers.len()).map(|k| vec![k]).collect()
            }
            SieveFamily::BsplineTensor {
                lower,
                upper,
                interior,
                order,
            } => {
                if lower.len() != n || upper.len() != n || interior.len() != n {
                    return Err(NpcError::DimensionMismatch {
                        expected: n,
                        found: lower.len(),
                    });
                }
                if *order < 1 {
                    return Err(invalid("spline order must be at least 1"));
                }
                for i in 0..n {
                    let mut knots = vec![lower[i]];
                    knots.extend_from_slice(&interior[i]);
                    knots.push(upper[i]);
                    if knots.windows(2).any(|w| !(w[0] < w[1])) {
                        return Err(invalid("spline knots must be strictly increasing inside the bounds"));
                    }
                }
                let counts: Vec<usize> = interior.iter().map(|k| k.len() + *order).collect();
                graded_indices(&counts, |_| true)
            }
        };
        let basis = SieveBasis {
            spec,
            shift,
            scale,
            indices,
        };
        if basis.len() < 2 {
            return Err(invalid("a sieve basis needs at least two functions"));
        }
        Ok(basis)
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn spec(&self) -> &SieveSpec {
        &self.spec
    }

    pub fn family(&self) -> &SieveFamily {
        &self.spec.family
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension
    }

    /// Basis size `m`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Every family puts the constant function first.
    pub fn includes_constant(&self) -> bool {
        true
    }

    /// Multi-index of each basis function (center index for RBFs, where 0
    /// is the constant).
    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Same family with the affine map set explicitly.
    pub fn with_transform(&self, shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.shift = Some(shift);
        spec.scale = Some(scale);
        SieveBasis::from_spec(spec)
    }

    /// Fits the affine map to the sample mean and standard deviation of
    /// `states` (row-major) when the spec asks for it and gives no explicit
    /// transform; otherwise returns the basis unchanged.
    pub fn fit_transform(&self, states: &[f64]) -> Result<Self> {
        if !self.spec.standardize || self.spec.shift.is_some() || self.spec.scale.is_some() {
            return Ok(self.clone());
        }
        let (mean, sd) = HermiteScaling::standardize(states, self.dimension())?;
        self.with_transform(mean, sd)
    }

    fn univariate(&self, coord: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
        let z = (x - self.shift[coord]) / self.scale[coord];
        let inv = 1.0 / self.scale[coord];
        match &self.spec.family {
            SieveFamily::HermiteTensor {
                max_degree,
                normalized,
                ..
            } => {
                let mut v = vec![1.0; max_degree + 1];
                if *max_degree >= 1 {
                    v[1] = z;
                }
                for k in 1..*max_degree {
                    v[k + 1] = z * v[k] - k as f64 * v[k - 1];
                }
                let mut d: Vec<f64> = (0..=*max_degree)
                    .map(|k| if k == 0 { 0.0 } else { k as f64 * v[k - 1] * inv })
                    .collect();
                if *normalized {
                    let mut norm = 1.0;
                    for k in 0..=*max_degree {
                        if k > 0 {
                            norm *= (k as f64).sqrt();
                        }
                        v[k] /= norm;
                        d[k] /= norm;
                    }
                }
                (v, d)
            }
            SieveFamily::Laguerre {
                max_degree,
                alpha,
                normalized,
            } => {
                let v = laguerre_all(*max_degree, *alpha, z);
                let shifted = laguerre_all(*max_degree, alpha + 1.0, z);
                let mut v = v;
                let mut d: Vec<f64> = (0..=*max_degree)
                    .map(|k| if k == 0 { 0.0 } else { -shifted[k - 1] * inv })
                    .collect();
                if *normalized {
                    for k in 1..=*max_degree {
                        let kf = k as f64;
                        let log_norm2 =
                            ln_gamma(kf + alpha + 1.0) - ln_gamma(alpha + 1.0) - ln_gamma(kf + 1.0);
                        let norm = (0.5 * log_norm2).exp();
                        v[k] /= norm;
                        d[k] /= norm;
                    }
                }
                (v, d)
            }
            SieveFamily::BsplineTensor {
                lower,
                upper,
                interior,
                order,
            } => {
                let t = clamped_knots(lower[coord], upper[coord], &interior[coord], *order);
                let (v, d) = bspline_values(&t, *order, z);
                (v, d.into_iter().map(|g| g * inv).collect())
            }
            SieveFamily::GaussianRbf { .. } => unreachable!("RBFs are not tensor products"),
        }
    }

    /// `Psi(x)`, the m-vector of basis values.
    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        self.eval_into(x, out.as_mut_slice());
        out
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.spec.family {
            SieveFamily::GaussianRbf { centers, widths } => {
                let widths = widths.as_ref().expect("widths resolved at construction");
                out[0] = 1.0;
                for (k, (c, w)) in centers.iter().zip(widths).enumerate() {
                    out[k + 1] = rbf(x, c, *w);
                }
            }
            _ => {
                let tables: Vec<Vec<f64>> =
                    (0..x.len()).map(|i| self.univariate(i, x[i]).0).collect();
                let spline = matches!(self.spec.family, SieveFamily::BsplineTensor { .. });
                for (slot, idx) in out.iter_mut().zip(&self.indices) {
                    *slot = if spline && idx.iter().all(|d| *d == 0) {
                        1.0
                    } else {
                        idx.iter().enumerate().map(|(i, d)| tables[i][*d]).product()
                    };
                }
            }
        }
    }

    /// The m x n matrix whose row k is the gradient of B_k at x.
    pub fn eval_grad(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.len(), self.dimension());
        self.eval_grad_into(x, &mut out);
        out
    }

    pub fn eval_grad_into(&self, x: &[f64], out: &mut DMatrix<f64>) {
        let n = self.dimension();
        match &self.spec.family {
            SieveFamily::GaussianRbf { centers, widths } => {
                let widths = widths.as_ref().expect("widths resolved at construction");
                out.row_mut(0).fill(0.0);
                for (k, (c, w)) in centers.iter().zip(widths).enumerate() {
                    let b = rbf(x, c, *w);
                    for i in 0..n {
                        out[(k + 1, i)] = -(x[i] - c[i]) / (w * w) * b;
                    }
                }
            }
            _ => {
                let tables: Vec<(Vec<f64>, Vec<f64>)> =
                    (0..n).map(|i| self.univariate(i, x[i])).collect();
                let spline = matches!(self.spec.family, SieveFamily::BsplineTensor { .. });
                for (k, idx) in self.indices.iter().enumerate() {
                    if spline && idx.iter().all(|d| *d == 0) {
                        out.row_mut(k).fill(0.0);
                        continue;
                    }
                    for i in 0..n {
                        out[(k, i)] = (0..n)
                            .map(|l| if l == i { tables[l].1[idx[l]] } else { tables[l].0[idx[l]] })
                            .product();
                    }
                }
            }
        }
    }

    /// Embeds coefficients on this basis into a larger basis of the same
    /// family whose index set contains this one.
    pub fn embed(&self, coefficients: &DVector<f64>, larger: &SieveBasis) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(larger.len());
        for (idx, c) in self.indices.iter().zip(coefficients.iter()) {
            let pos = larger
                .indices
                .iter()
                .position(|j| j == idx)
                .ok_or_else(|| invalid("basis is not nested in the larger basis"))?;
            out[pos] = *c;
        }
        Ok(out)
    }
}

fn rbf(x: &[f64], c: &[f64], w: f64) -> f64 {
    let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
    (-d2 / (2.0 * w * w)).exp()
}

fn laguerre_all(max_degree: usize, alpha: f64, z: f64) -> Vec<f64> {
    let mut v = vec![1.0; max_degree + 1];
    if max_degree >= 1 {
        v[1] = 1.0 + alpha - z;
    }
    for k in 1..max_degree {
        let kf = k as f64;
        v[k + 1] = ((2.0 * kf + 1.0 + alpha - z) * v[k] - (kf + alpha) * v[k - 1]) / (kf + 1.0);
    }
    v
}

/// Per-coordinate sample standardization for polynomial bases.
pub struct HermiteScaling;

impl HermiteScaling {
    /// Sample mean and standard deviation of each column of `states`.
    pub fn standardize(states: &[f64], dimension: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if dimension == 0 || states.len() % dimension != 0 || states.len() < 2 * dimension {
            return Err(invalid("standardization needs at least two states"));
        }
        let t = (states.len() / dimension) as f64;
        let mut mean = vec![0.0; dimension];
        for row in states.chunks(dimension) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x / t;
            }
        }
        let mut var = vec![0.0; dimension];
        for row in states.chunks(dimension) {
            for i in 0..dimension {
                var[i] += (row[i] - mean[i]).powi(2) / (t - 1.0);
            }
        }
        let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        if sd.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid("a coordinate has zero sample variance"));
        }
        Ok((mean, sd))
    }
}

pub fn make_hermite(n: usize, max_degree: usize, normalized: bool) -> Result<SieveBasis> {
    SieveBasis::from_spec(SieveSpec {
        family: SieveFamily::HermiteTensor {
            max_degree,
            normalized,
            truncation: Truncation::Tensor,
        },
        dimension: n,
        shift: None,
        scale: None,
        standardize: false,
    })
}

/// One-dimensional Laguerre basis in `z = rate * x`, orthonormal (when
/// normalized) under Gamma(alpha + 1, rate).
pub fn make_laguerre(max_degree: usize, alpha: f64, rate: f64, normalized: bool) -> Result<SieveBasis> {
    if !(rate > 0.0) {
        return Err(invalid("Laguerre rate must be positive"));
    }
    SieveBasis::from_spec(SieveSpec {
        family: SieveFamily::Laguerre {
            max_degree,
            alpha,
            normalized,
        },
        dimension: 1,
        shift: None,
        scale: Some(vec![1.0 / rate]),
        standardize: false,
    })
}

pub fn make_rbf(centers: Vec<Vec<f64>>, widths: Option<Vec<f64>>) -> Result<SieveBasis> {
    let n = centers.first().map_or(0, Vec::len);
    SieveBasis::from_spec(SieveSpec {
        family: SieveFamily::GaussianRbf { centers, widths },
        dimension: n,
        shift: None,
        scale: None,
        standardize: false,
    })
}

/// Tensor B-splines with the given interior knots per coordinate. The
/// splines sum to one, so the constant takes the place of the first
/// tensor spline: m = prod(#interior_i + order).
pub fn make_bspline(
    lower: Vec<f64>,
    upper: Vec<f64>,
    interior: Vec<Vec<f64>>,
    order: usize,
) -> Result<SieveBasis> {
    let n = lower.len();
    SieveBasis::from_spec(SieveSpec {
        family: SieveFamily::BsplineTensor {
            lower,
            upper,
            interior,
            order,
        },
        dimension: n,
        shift: None,
        scale: None,
        standardize: false,
    })
}
