//! Systematic resampling.

use rand::Rng;

/// Draws `weights.len()` source indices with a single uniform offset.
///
/// Weights need not be normalised. Returns `None` when they sum to zero.
pub fn systematic<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<Vec<usize>> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    if n == 0 || !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let step = total / n as f64;
    let mut pointer = rng.gen::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut j = 0;
    for _ in 0..n {
        while pointer > cumulative && j + 1 < n {
            j += 1;
            cumulative += weights[j];
        }
        out.push(j);
        pointer += step;
    }
    Some(out)
}
