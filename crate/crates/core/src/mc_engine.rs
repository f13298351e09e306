//! Seeded parallel sampling, censored tail fits, Birkhoff averages,
//! correlation estimates and uniformity tests.
//!
//! Work is cut into fixed-size chunks; chunk `i` draws from ChaCha8 stream
//! `i` of the run seed, and chunk results are merged in index order. Output
//! therefore depends on the seed only, never on the number of workers.

use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::factor_map::{FactorMap, Point};
use crate::fit;

/// Samples per chunk. Fixed so results are independent of the worker count.
pub const CHUNK: usize = 4096;
pub const BOOTSTRAP_RESAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub seed: u64,
    pub n_samples: usize,
    /// Worker threads; 0 means all available cores.
    pub workers: usize,
}

impl SampleConfig {
    pub fn new(seed: u64, n_samples: usize) -> Self {
        SampleConfig {
            seed,
            n_samples,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn chunks(&self) -> usize {
        self.n_samples.div_ceil(CHUNK)
    }
}

/// The generator for chunk `chunk` of a run.
pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// A uniform draw from the open interval (0, 1) on the 2^-53 grid offset by half a step.
#[inline]
pub fn uniform_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// A uniform draw from (0, 1) that is never equal to any value in `exclude`.
#[inline]
pub fn uniform_excluding(rng: &mut impl RngCore, exclude: &[f64]) -> f64 {
    loop {
        let u = uniform_open(rng);
        if !exclude.contains(&u) {
            return u;
        }
    }
}

fn run_in_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// Apply `f(rng, count)` to every chunk of the run; results come back in
/// chunk order.
pub fn map_chunks<T, F>(cfg: &SampleConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let n = cfg.n_samples;
    run_in_pool(cfg.workers, || {
        (0..cfg.chunks())
            .into_par_iter()
            .map(|i| {
                let count = CHUNK.min(n - i * CHUNK);
                f(&mut chunk_rng(cfg.seed, i), count)
            })
            .collect()
    })
}

/// Apply `f` to every item in parallel, preserving order.
pub fn map_items<I, T, F>(workers: usize, items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync,
{
    run_in_pool(workers, || items.par_iter().map(&f).collect())
}

/// `cfg.n_samples` uniform values in (0, 1), none equal to 0, a or 1.
pub fn sample_uniform(cfg: &SampleConfig, a: f64) -> Vec<f64> {
    map_chunks(cfg, |rng, count| {
        (0..count).map(|_| uniform_excluding(rng, &[a])).collect::<Vec<_>>()
    })
    .concat()
}

/// Kolmogorov-Smirnov distance of the sample from Uniform(0, 1).
pub fn ks_uniform(sample: &[f64]) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / n - u).max(u - i as f64 / n))
        .fold(0.0, f64::max)
}

/// 1%-level critical value of the KS distance, asymptotic form.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    /// Critical value at the 1% level.
    pub critical: f64,
    pub pass: bool,
}

/// Pearson chi-square test of bin counts against equal expected counts.
pub fn chi_square_equal(counts: &[u64]) -> ChiSquareTest {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = counts.len() - 1;
    let critical = ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.99);
    ChiSquareTest {
        statistic,
        dof,
        critical,
        pass: statistic < critical,
    }
}

fn bin_of(u: f64, bins: usize) -> usize {
    ((u * bins as f64) as usize).min(bins - 1)
}

/// Chi-square uniformity of f(x) over uniform x, `bins` equal bins.
pub fn pushforward_test(map: &FactorMap, cfg: &SampleConfig, bins: usize) -> Result<ChiSquareTest> {
    let parts = map_chunks(cfg, |rng, count| -> Result<Vec<u64>> {
        let mut h = vec![0u64; bins];
        for _ in 0..count {
            let x = uniform_excluding(rng, &[map.a()]);
            h[bin_of(map.eval(x)?, bins)] += 1;
        }
        Ok(h)
    });
    let mut counts = vec![0u64; bins];
    for part in parts {
        for (c, v) in counts.iter_mut().zip(part?) {
            *c += v;
        }
    }
    Ok(chi_square_equal(&counts))
}

/// Chi-square uniformity of the square map's image of uniform points on a
/// `grid` × `grid` lattice.
pub fn gbt_test(map: &FactorMap, cfg: &SampleConfig, grid: usize) -> Result<ChiSquareTest> {
    let parts = map_chunks(cfg, |rng, count| -> Result<Vec<u64>> {
        let mut h = vec![0u64; grid * grid];
        for _ in 0..count {
            let x = uniform_excluding(rng, &[map.a()]);
            let y = uniform_open(rng);
            let (u, v) = map.gbt_step(x, y)?;
            h[bin_of(u, grid) * grid + bin_of(v, grid)] += 1;
        }
        Ok(h)
    });
    let mut counts = vec![0u64; grid * grid];
    for part in parts {
        for (c, v) in counts.iter_mut().zip(part?) {
            *c += v;
        }
    }
    Ok(chi_square_equal(&counts))
}

// ---- censored tails ---------------------------------------------------------

/// A time observed exactly, or known only to exceed `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Obs {
    pub value: u64,
    pub censored: bool,
}

impl Obs {
    pub fn exact(value: u64) -> Self {
        Obs {
            value,
            censored: false,
        }
    }

    pub fn censored(value: u64) -> Self {
        Obs {
            value,
            censored: true,
        }
    }
}

/// Observations grouped by value: (value, events, censored).
#[derive(Debug, Clone)]
struct Grouped {
    rows: Vec<(u64, u64, u64)>,
    total: u64,
}

impl Grouped {
    fn new(obs: &[Obs]) -> Self {
        let mut v = obs.to_vec();
        v.sort_unstable();
        let mut rows: Vec<(u64, u64, u64)> = Vec::new();
        for o in v {
            match rows.last_mut() {
                Some(r) if r.0 == o.value => {
                    if o.censored {
                        r.2 += 1
                    } else {
                        r.1 += 1
                    }
                }
                _ => rows.push((o.value, u64::from(!o.censored), u64::from(o.censored))),
            }
        }
        Grouped {
            rows,
            total: obs.len() as u64,
        }
    }

    /// Kaplan-Meier P{X > n} at each (ascending) n, with Greenwood standard
    /// errors and the number still known to exceed n.
    fn survival(&self, ns: &[u64]) -> Vec<(f64, f64, u64)> {
        let mut out = Vec::with_capacity(ns.len());
        let mut s = 1.0;
        let mut greenwood = 0.0;
        let mut at_risk = self.total;
        let mut rows = self.rows.iter().peekable();
        for &n in ns {
            while let Some(&&(v, d, c)) = rows.peek() {
                if v > n {
                    break;
                }
                if d > 0 && at_risk > 0 {
                    let (r, d) = (at_risk as f64, d as f64);
                    s *= 1.0 - d / r;
                    if r > d {
                        greenwood += d / (r * (r - d));
                    }
                }
                at_risk -= d + c;
                rows.next();
            }
            out.push((s, s * greenwood.sqrt(), at_risk));
        }
        out
    }

    /// A multinomial resample of the same size.
    fn resample(&self, rng: &mut ChaCha8Rng) -> Grouped {
        let mut left = self.total;
        let mut mass_left = 1.0f64;
        let mut rows = Vec::with_capacity(self.rows.len());
        for &(v, d, c) in &self.rows {
            let mut take = |k: u64| -> u64 {
                if left == 0 || k == 0 {
                    return 0;
                }
                let p = (k as f64 / self.total as f64 / mass_left).clamp(0.0, 1.0);
                mass_left -= k as f64 / self.total as f64;
                let draw = Binomial::new(left, p).map(|b| b.sample(rng)).unwrap_or(left);
                left -= draw;
                draw
            };
            let nd = take(d);
            let nc = take(c);
            if nd + nc > 0 {
                rows.push((v, nd, nc));
            }
        }
        Grouped {
            rows,
            total: self.total - left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    /// Log-log slope of P{X > n} against n.
    pub exponent: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub fit_range: (u64, u64),
    pub n_samples: usize,
    pub n_censored: usize,
    /// (n, P{X > n}) at the fitted grid points.
    pub points: Vec<(u64, f64)>,
}

const FIT_POINTS: usize = 40;
const MIN_FIT_POINTS: usize = 20;

fn fit_survival(g: &Grouped, grid: &[u64]) -> Option<(fit::Line, Vec<(u64, f64)>)> {
    let surv = g.survival(grid);
    let pts: Vec<(u64, f64)> = grid
        .iter()
        .zip(&surv)
        .filter(|(_, s)| s.0 > 0.0)
        .map(|(&n, s)| (n, s.0))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    Some((fit::ols(&xs, &ys), pts))
}

/// Power-law exponent of the survival function over `fit_range`.
///
/// Survival is the Kaplan-Meier estimate, so a censored observation counts
/// as surviving every n below its censoring point and is never dropped.
/// The interval is the 2.5-97.5% percentile range of 200 bootstrap refits.
pub fn tail_fit(obs: &[Obs], fit_range: (u64, u64), seed: u64) -> Result<TailEstimate> {
    let (lo, hi) = fit_range;
    if lo < 1 || hi <= lo {
        return Err(Error::InvalidParams(format!("fit range ({lo}, {hi}) is empty")));
    }
    let grid = fit::geometric_grid(lo, hi, FIT_POINTS);
    let g = Grouped::new(obs);
    let (line, points) = fit_survival(&g, &grid).ok_or_else(|| Error::InsufficientTail {
        found: g.survival(&grid).iter().filter(|s| s.0 > 0.0).count(),
        needed: MIN_FIT_POINTS,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .filter_map(|_| fit_survival(&g.resample(&mut rng), &grid).map(|f| f.0.slope))
        .collect();
    let (ci_low, ci_high) = fit::percentile_interval(&mut slopes);
    Ok(TailEstimate {
        exponent: line.slope,
        intercept: line.intercept,
        ci_low: ci_low.min(line.slope),
        ci_high: ci_high.max(line.slope),
        fit_range,
        n_samples: obs.len(),
        n_censored: obs.iter().filter(|o| o.censored).count(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub n: u64,
    /// Observations known to exceed n.
    pub count: u64,
    /// Kaplan-Meier P{X > n}.
    pub fraction: f64,
    pub stderr: f64,
}

/// Survival table at the given ascending n.
pub fn tail_rows(obs: &[Obs], ns: &[u64]) -> Vec<TailRow> {
    let g = Grouped::new(obs);
    ns.iter()
        .zip(g.survival(ns))
        .map(|(&n, (fraction, stderr, count))| TailRow {
            n,
            count,
            fraction,
            stderr,
        })
        .collect()
}

// ---- Birkhoff averages --------------------------------------------------------

/// Functions averaged along orbits.
#[derive(Clone)]
pub enum Observable {
    /// ln f'.
    LogDerivative,
    /// -ln dist_δ(x, {0, a, 1}).
    NegLogDistDelta { delta: f64 },
    Constant(f64),
    /// Indicator of a union of intervals [lo, hi).
    Indicator(Vec<(f64, f64)>),
    Custom(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl Observable {
    #[inline]
    fn eval(&self, map: &FactorMap, p: Point, log_deriv: f64) -> f64 {
        match self {
            Observable::LogDerivative => log_deriv,
            Observable::NegLogDistDelta { delta } => {
                let d = map.dist_exceptional(p);
                if d <= *delta {
                    -d.ln()
                } else {
                    0.0
                }
            }
            Observable::Constant(c) => *c,
            Observable::Indicator(iv) => {
                let x = p.x();
                f64::from(u8::from(iv.iter().any(|&(lo, hi)| x >= lo && x < hi)))
            }
            Observable::Custom(f) => f(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Birkhoff {
    pub mean: f64,
    pub steps: u64,
    /// The orbit hit a before `steps` reached the request.
    pub truncated: bool,
}

/// (1/N) Σ_{j<N} obs(f^j x).
pub fn birkhoff_average(map: &FactorMap, obs: &Observable, x: f64, n: u64) -> Result<Birkhoff> {
    if n < 1000 {
        return Err(Error::Domain {
            what: "N",
            value: n as f64,
            domain: "N >= 1000",
        });
    }
    if !(x > 0.0 && x < 1.0) || x == map.a() {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "(0, 1) without a",
        });
    }
    let mut p = Point::from_x(x);
    let mut sum = 0.0;
    let mut steps = 0;
    let need_deriv = matches!(obs, Observable::LogDerivative);
    while steps < n {
        let (next, lf) = if need_deriv {
            match map.step(p) {
                Ok(s) => (s.next, s.log_deriv),
                Err(_) => break,
            }
        } else {
            match map.advance(p) {
                Ok(q) => (q, 0.0),
                Err(_) => break,
            }
        };
        sum += obs.eval(map, p, lf);
        steps += 1;
        p = next;
    }
    Ok(Birkhoff {
        mean: sum / steps.max(1) as f64,
        steps,
        truncated: steps < n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleAverage {
    pub mean: f64,
    pub stderr: f64,
    pub per_start: Vec<f64>,
    pub truncated: usize,
}

/// Birkhoff averages from `cfg.n_samples` uniform starts, `steps` each.
pub fn ensemble_birkhoff(map: &FactorMap, obs: &Observable, cfg: &SampleConfig, steps: u64) -> Result<EnsembleAverage> {
    let starts = sample_uniform(cfg, map.a());
    let runs = map_items(cfg.workers, &starts, |&x| birkhoff_average(map, obs, x, steps));
    let runs: Vec<Birkhoff> = runs.into_iter().collect::<Result<_>>()?;
    let per_start: Vec<f64> = runs.iter().map(|r| r.mean).collect();
    let n = per_start.len() as f64;
    let mean = per_start.iter().sum::<f64>() / n;
    let var = per_start.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(EnsembleAverage {
        mean,
        stderr: (var / n).sqrt(),
        truncated: runs.iter().filter(|r| r.truncated).count(),
        per_start,
    })
}

// ---- correlations -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub n: u64,
    pub c: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub rows: Vec<CorrelationRow>,
    /// n with Ĉ(n) > 3 stderr, used for the slope.
    pub usable: Vec<u64>,
    pub slope: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone)]
struct CorrAcc {
    n: f64,
    sv: f64,
    sw: Vec<f64>,
    svw: Vec<f64>,
    svw2: Vec<f64>,
}

impl CorrAcc {
    fn new(k: usize) -> Self {
        CorrAcc {
            n: 0.0,
            sv: 0.0,
            sw: vec![0.0; k],
            svw: vec![0.0; k],
            svw2: vec![0.0; k],
        }
    }

    fn merge(&mut self, o: &CorrAcc) {
        self.n += o.n;
        self.sv += o.sv;
        for i in 0..self.sw.len() {
            self.sw[i] += o.sw[i];
            self.svw[i] += o.svw[i];
            self.svw2[i] += o.svw2[i];
        }
    }
}

/// Ensemble estimate Ĉ(n) = mean(v(x) w(f^n x)) - mean(v) mean(w ∘ f^n)
/// over uniform x, at each n of the ascending `n_grid`.
pub fn correlation_decay<V, W>(map: &FactorMap, v: V, w: W, n_grid: &[u64], cfg: &SampleConfig) -> Result<CorrelationResult>
where
    V: Fn(Point) -> f64 + Sync,
    W: Fn(Point) -> f64 + Sync,
{
    if n_grid.is_empty() || n_grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidParams("n_grid must be non-empty and strictly increasing".into()));
    }
    let k = n_grid.len();
    let n_last = *n_grid.last().expect("non-empty");
    let parts = map_chunks(cfg, |rng, count| {
        let mut acc = CorrAcc::new(k);
        'sample: for _ in 0..count {
            let mut p = Point::from_x(uniform_excluding(rng, &[map.a()]));
            let vx = v(p);
            let mut vals = vec![0.0; k];
            let mut gi = 0;
            for step in 0..=n_last {
                if step == n_grid[gi] {
                    vals[gi] = w(p);
                    gi += 1;
                    if gi == k {
                        break;
                    }
                }
                match map.advance(p) {
                    Ok(q) => p = q,
                    Err(_) => continue 'sample,
                }
            }
            acc.n += 1.0;
            acc.sv += vx;
            for (i, &val) in vals.iter().enumerate().take(k) {
                let vw = vx * val;
                acc.sw[i] += val;
                acc.svw[i] += vw;
                acc.svw2[i] += vw * vw;
            }
        }
        acc
    });
    let mut acc = CorrAcc::new(k);
    for part in &parts {
        acc.merge(part);
    }
    let n = acc.n;
    let vbar = acc.sv / n;
    let rows: Vec<CorrelationRow> = (0..k)
        .map(|i| {
            let m = acc.svw[i] / n;
            let var = (acc.svw2[i] / n - m * m).max(0.0);
            CorrelationRow {
                n: n_grid[i],
                c: m - vbar * acc.sw[i] / n,
                stderr: (var / n).sqrt(),
            }
        })
        .collect();
    let usable: Vec<u64> = rows
        .iter()
        .filter(|r| r.n >= 1 && r.c > 3.0 * r.stderr)
        .map(|r| r.n)
        .collect();
    let mut warnings = Vec::new();
    if usable.len() < 10 {
        warnings.push(format!("only {} usable n above the noise floor", usable.len()));
    }
    let slope = (usable.len() >= 2).then(|| {
        let pts: Vec<&CorrelationRow> = rows.iter().filter(|r| usable.contains(&r.n)).collect();
        let xs: Vec<f64> = pts.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|r| r.c.ln()).collect();
        fit::ols(&xs, &ys).slope
    });
    Ok(CorrelationResult {
        rows,
        usable,
        slope,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutfunc::CutFunction;
    use rand::Rng;

    fn linear() -> FactorMap {
        FactorMap::new(CutFunction::linear()).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_worker_independent() {
        let cfg = SampleConfig::new(42, 3 * CHUNK + 17);
        let a = sample_uniform(&cfg.with_workers(1), 0.5);
        let b = sample_uniform(&cfg.with_workers(4), 0.5);
        assert_eq!(a, b);
        assert_eq!(a.len(), cfg.n_samples);
        assert!(a.iter().all(|&u| u > 0.0 && u < 1.0 && u != 0.5));
        let c = sample_uniform(&SampleConfig::new(43, 100), 0.5);
        assert_ne!(a[..100], c[..]);
    }

    #[test]
    fn ks_accepts_uniform_sample() {
        let cfg = SampleConfig::new(1, 1_000_000);
        let s = sample_uniform(&cfg, 0.5);
        assert!(ks_uniform(&s) < ks_critical_1pct(s.len()));
        let skewed: Vec<f64> = s.iter().map(|u| u * u).collect();
        assert!(ks_uniform(&skewed) > ks_critical_1pct(s.len()));
    }

    #[test]
    fn chi_square_critical_values() {
        // Tabulated 99% quantiles.
        let t = chi_square_equal(&vec![100; 100]);
        assert!((t.critical - 134.642).abs() < 1e-2);
        assert_eq!(t.statistic, 0.0);
        let t = chi_square_equal(&vec![10; 400]);
        assert!((t.critical - 466.0).abs() < 2.0);
        assert!(!chi_square_equal(&[10, 1000]).pass);
    }

    fn pareto(rng: &mut ChaCha8Rng, p: f64) -> u64 {
        // P{X > n} = n^{-p} for integer n ≥ 1.
        let u = uniform_open(rng);
        u.powf(-1.0 / p).floor() as u64
    }

    #[test]
    fn tail_fit_recovers_synthetic_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let obs: Vec<Obs> = (0..1_000_000).map(|_| Obs::exact(pareto(&mut rng, 2.0))).collect();
        let t = tail_fit(&obs, (3, 300), 1).unwrap();
        assert!((t.exponent + 2.0).abs() < 0.1, "{t:?}");
        assert!(t.ci_low <= t.exponent && t.exponent <= t.ci_high);
        assert!(t.ci_high - t.ci_low < 0.2);
    }

    #[test]
    fn tail_fit_with_censoring() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let obs: Vec<Obs> = (0..1_000_000)
            .map(|_| {
                let x = pareto(&mut rng, 1.5);
                if x > 10_000 {
                    Obs::censored(10_000)
                } else {
                    Obs::exact(x)
                }
            })
            .collect();
        let t = tail_fit(&obs, (10, 3000), 2).unwrap();
        assert!(t.n_censored > 0);
        assert!((t.exponent + 1.5).abs() < 0.15, "{t:?}");
        // Censoring at random times is handled without bias.
        let obs2: Vec<Obs> = obs
            .iter()
            .map(|o| {
                if !o.censored && rng.random::<f64>() < 0.01 {
                    Obs::censored(o.value / 2)
                } else {
                    *o
                }
            })
            .collect();
        let t2 = tail_fit(&obs2, (10, 3000), 2).unwrap();
        assert!((t2.exponent + 1.5).abs() < 0.15, "{t2:?}");
    }

    #[test]
    fn tail_fit_rejects_constant_data() {
        let obs = vec![Obs::exact(7); 10_000];
        assert!(matches!(tail_fit(&obs, (1, 100), 0), Err(Error::InsufficientTail { .. })));
    }

    #[test]
    fn tail_fit_is_scale_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let obs: Vec<Obs> = (0..50_000).map(|_| Obs::exact(pareto(&mut rng, 1.0))).collect();
        let tripled: Vec<Obs> = obs.iter().flat_map(|&o| [o, o, o]).collect();
        let a = tail_fit(&obs, (2, 500), 0).unwrap();
        let b = tail_fit(&tripled, (2, 500), 0).unwrap();
        assert!((a.exponent - b.exponent).abs() < 1e-12);
    }

    #[test]
    fn tail_rows_km_without_censoring_is_empirical() {
        let obs: Vec<Obs> = (1..=10).map(Obs::exact).collect();
        let rows = tail_rows(&obs, &[0, 3, 10]);
        assert_eq!(rows[0].fraction, 1.0);
        assert!((rows[1].fraction - 0.7).abs() < 1e-15);
        assert_eq!(rows[1].count, 7);
        assert_eq!(rows[2].fraction, 0.0);
    }

    #[test]
    fn birkhoff_constant_and_errors() {
        let m = linear();
        let b = birkhoff_average(&m, &Observable::Constant(1.0), 0.3, 5000).unwrap();
        assert_eq!(b.mean, 1.0);
        assert_eq!(b.steps, 5000);
        assert!(birkhoff_average(&m, &Observable::Constant(1.0), 0.3, 10).is_err());
    }

    #[test]
    fn birkhoff_log_derivative_near_half() {
        let m = linear();
        let b = birkhoff_average(&m, &Observable::LogDerivative, 0.1234, 2_000_000).unwrap();
        assert!((b.mean - 0.5).abs() < 0.05, "{b:?}");
    }

    #[test]
    fn pushforward_and_gbt_are_uniform() {
        let m = linear();
        let cfg = SampleConfig::new(3, 200_000);
        assert!(pushforward_test(&m, &cfg, 100).unwrap().pass);
        assert!(gbt_test(&m, &cfg, 20).unwrap().pass);
    }

    #[test]
    fn correlation_basics() {
        let m = linear();
        let cfg = SampleConfig::new(8, 20_000);
        let r = correlation_decay(&m, |p| p.x() - 0.5, |p| p.x() - 0.5, &[0, 1, 2, 5], &cfg).unwrap();
        // Ĉ(0) is the variance of x - 1/2 under Lebesgue, 1/12.
        assert!((r.rows[0].c - 1.0 / 12.0).abs() < 0.01);
        let flat = correlation_decay(&m, |_| 1.0, |p| p.x(), &[0, 3, 10], &cfg).unwrap();
        for row in flat.rows {
            assert!(row.c.abs() < 1e-12);
        }
    }
}
