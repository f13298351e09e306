//! Safeguarded Newton for increasing functions on a bracket.

use crate::error::{Error, Result};

/// How Newton steps are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Scale {
    /// Plain Newton on `F(u) - target`.
    Linear,
    /// Newton on `ln F(u) - ln target`; suited to `F(u) ~ c u^p` near 0.
    Log,
}

const MAX_ITER: usize = 200;

/// Solve `F(u) = target` for `u` in `[0, hi]`, where `eval(u)` returns
/// `(F(u), F'(u))` with `F` increasing and `F(0) = 0`.
pub(crate) fn solve_increasing<E>(eval: E, target: f64, hi: f64, guess: f64, scale: Scale) -> Result<f64>
where
    E: Fn(f64) -> (f64, f64),
{
    if !(target.is_finite() && target >= 0.0) {
        return Err(Error::Solver(format!("target {target} is not a finite non-negative value")));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let (f_hi, _) = eval(hi);
    if target >= f_hi {
        if target <= f_hi * (1.0 + 4.0 * f64::EPSILON) {
            return Ok(hi);
        }
        return Err(Error::Solver(format!("target {target} exceeds F(hi) = {f_hi}")));
    }
    let mut lo = 0.0_f64;
    let mut hi = hi;
    let mut u = if guess > 0.0 && guess < hi { guess } else { 0.5 * hi };
    for _ in 0..MAX_ITER {
        let (f, df) = eval(u);
        if f == target {
            return Ok(u);
        }
        if f < target {
            lo = u;
        } else {
            hi = u;
        }
        let step = match scale {
            Scale::Linear => (f - target) / df,
            Scale::Log => (f / target).ln() * f / df,
        };
        let mut next = u - step;
        if !(next > lo && next < hi) || !step.is_finite() {
            next = if lo == 0.0 { hi * 0.0625 } else { 0.5 * (lo + hi) };
            if lo > 0.0 && hi / lo > 4.0 {
                next = (lo * hi).sqrt();
            }
        }
        if (next - u).abs() <= 2.0 * f64::EPSILON * u || next == lo || next == hi {
            return Ok(next);
        }
        u = next;
    }
    Err(Error::Solver(format!("no convergence for target {target} after {MAX_ITER} iterations")))
}
