//! Least-squares slopes and their bootstrap intervals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least squares of `ys` on `xs`. Fewer than two distinct `xs` give NaN.
pub fn ols(xs: &[f64], ys: &[f64]) -> Line {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    Line {
        slope,
        intercept: my - slope * mx,
    }
}

/// Percentile interval (2.5%, 97.5%) of the OLS slope over pairs-bootstrap resamples.
pub fn bootstrap_slope(xs: &[f64], ys: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = xs.len();
    let mut slopes = Vec::with_capacity(resamples);
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    for _ in 0..resamples {
        for i in 0..n {
            let j = rng.random_range(0..n);
            bx[i] = xs[j];
            by[i] = ys[j];
        }
        let s = ols(&bx, &by).slope;
        if s.is_finite() {
            slopes.push(s);
        }
    }
    percentile_interval(&mut slopes)
}

pub(crate) fn percentile_interval(v: &mut [f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    v.sort_by(f64::total_cmp);
    let at = |q: f64| v[((q * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
    (at(0.025), at(0.975))
}

/// Integers from a geometric grid of `points` values spanning `[lo, hi]`, deduplicated.
pub fn geometric_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    assert!(lo >= 1 && hi >= lo);
    if hi - lo < points as u64 {
        return (lo..=hi).collect();
    }
    let (l, h) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..points)
        .map(|i| (l + (h - l) * i as f64 / (points - 1) as f64).exp().round() as u64)
        .map(|k| k.clamp(lo, hi))
        .collect();
    out.dedup();
    out
}
