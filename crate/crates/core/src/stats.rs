//! Small statistical helpers shared by the estimators and checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random stream used throughout the crate.
pub type SimRng = ChaCha8Rng;

/// Independent stream keyed by `(seed, index)`.
///
/// Draw `i` of any parallel loop uses `substream(seed, i)`, so results do
/// not depend on how work is split across threads.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Unit Pareto variate with survivor function `1/v`, `v >= 1`.
pub fn unit_pareto<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    1.0 / u
}

/// Sample quantile, Hyndman–Fan type 7 (linear interpolation between order
/// statistics). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `sample` and a continuous distribution function.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (f - lo).abs().max((hi - f).abs())
        })
        .fold(0.0, f64::max)
}
