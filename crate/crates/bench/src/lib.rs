//! Shared fixtures for the criterion benches.

use hyplab::{CutFunction, FactorMap, Point};

pub fn linear_map() -> FactorMap {
    FactorMap::new(CutFunction::linear()).expect("linear cut is valid")
}

pub fn sym_map(alpha: f64) -> FactorMap {
    FactorMap::new(CutFunction::symmetric_power(alpha).expect("alpha > 0")).expect("valid cut")
}

/// Evenly spread starting points, avoiding the branch point.
pub fn starts(n: usize) -> Vec<Point> {
    (0..n).map(|i| Point::from_x((i as f64 + 0.37) / n as f64)).collect()
}
