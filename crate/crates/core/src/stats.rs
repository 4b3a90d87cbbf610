//! Small sample statistics shared by the simulation and validation code.

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Sample autocorrelation at `lag`.
pub fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let m = mean(x);
    let denom: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let num: f64 = x.windows(lag + 1).map(|w| (w[0] - m) * (w[lag] - m)).sum();
    num / denom
}

/// Means of `batches` consecutive equal-length blocks; a remainder at the
/// end is dropped.
pub fn batch_means(x: &[f64], batches: usize) -> Vec<f64> {
    let len = x.len() / batches;
    x.chunks_exact(len).take(batches).map(mean).collect()
}

/// Standard error of the overall mean from non-overlapping batch means.
pub fn batch_means_se(x: &[f64], batches: usize) -> f64 {
    let means = batch_means(x, batches);
    (variance(&means) / batches as f64).sqrt()
}
