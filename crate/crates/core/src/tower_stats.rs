//! First-return statistics over the base Δ_0 = [x_0, y_0], and the
//! escape-time statistics that control hyperbolic times.
//!
//! Nothing here builds a tower explicitly. A tower point (x, l) projects to
//! f^l(x), and normalized Lebesgue measure on the tower projects to Lebesgue
//! measure on [0, 1], so tower tails are computed from uniform samples
//! downstairs. [`tower_pushforward_check`] compares both routes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factor_map::{FactorMap, Point};
use crate::fit;
use crate::hyptimes::{orbit_times, HypParams, Hit};
use crate::mc_engine::{self, map_chunks, tail_rows, uniform_excluding, uniform_open, Obs, SampleConfig, TailRow};
use crate::partition::{IntervalId, PartitionTable, Side};

/// Step budget for simulated return times.
pub const RETURN_HORIZON: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnRecord {
    pub x: f64,
    /// Simulated first return; `None` if censored or singular.
    pub r: Option<u64>,
    /// n + 1 when x ∈ I_n ∪ I'_n; `None` past the table.
    pub analytic_r: Option<u64>,
    pub singular: bool,
}

fn analytic_return(t: &PartitionTable, p: Point) -> Result<Option<u64>> {
    Ok(match t.locate_point(p)? {
        IntervalId {
            side: Side::I | Side::Ip,
            k: Some(n),
        } => Some(n as u64 + 1),
        IntervalId {
            side: Side::DeepCenter, ..
        } => None,
        id => {
            return Err(Error::Domain {
                what: "x",
                value: p.x(),
                domain: match id.side {
                    Side::J | Side::DeepZero => "Δ_0 (point lies left of x_0)",
                    _ => "Δ_0 (point lies right of y_0)",
                },
            })
        }
    })
}

/// Simulated first return to Δ_0; stops early when the orbit hits a.
fn simulate_return(map: &FactorMap, t: &PartitionTable, p: Point, horizon: u64) -> (Option<u64>, bool) {
    let mut p = p;
    for k in 1..=horizon {
        match map.advance(p) {
            Ok(q) => p = q,
            Err(_) => return (None, true),
        }
        if t.in_base(p) {
            return (Some(k), false);
        }
    }
    (None, false)
}

/// R(x) = min{k > 0 : f^k x ∈ Δ_0}, by simulation and from the partition.
pub fn return_time(map: &FactorMap, t: &PartitionTable, x: f64) -> Result<ReturnRecord> {
    if !(x > t.x0() && x < t.y0()) || x == map.a() {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "(x_0, y_0) without a",
        });
    }
    return_time_point(map, t, Point::from_x(x))
}

pub fn return_time_point(map: &FactorMap, t: &PartitionTable, p: Point) -> Result<ReturnRecord> {
    let analytic_r = analytic_return(t, p)?;
    let (r, singular) = simulate_return(map, t, p, RETURN_HORIZON);
    Ok(ReturnRecord {
        x: p.x(),
        r,
        analytic_r,
        singular,
    })
}

/// A uniform point of Δ_0 other than a, with offsets from a kept exact.
fn sample_base(map: &FactorMap, t: &PartitionTable, rng: &mut ChaCha8Rng) -> Point {
    let (left, right) = (map.a() - t.x0(), t.y0() - map.a());
    loop {
        let u = uniform_open(rng) * (left + right);
        if u == left {
            continue;
        }
        return if u < left {
            left_of_a(map, left - u)
        } else {
            right_of_a(map, u - left)
        };
    }
}

/// The point a - off.
pub(crate) fn left_of_a(map: &FactorMap, off: f64) -> Point {
    if map.a() - off <= 0.5 {
        Point::Low(map.a() - off)
    } else {
        Point::High(map.a_high() + off)
    }
}

/// The point a + off.
pub(crate) fn right_of_a(map: &FactorMap, off: f64) -> Point {
    if map.a() + off <= 0.5 {
        Point::Low(map.a() + off)
    } else {
        Point::High(map.a_high() - off)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnCheckRow {
    pub n: u64,
    /// Monte Carlo P{R ≥ n}.
    pub sampled: f64,
    /// P{R ≥ n} summed from the table.
    pub exact: f64,
    /// Binomial standard error at the exact value.
    pub stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnTailReport {
    pub estimate: mc_engine::TailEstimate,
    pub rows: Vec<TailRow>,
    pub check: Vec<ReturnCheckRow>,
    /// Samples whose simulated R differs from the table value.
    pub mismatches: usize,
    pub censored: usize,
    pub warnings: Vec<String>,
}

impl ReturnTailReport {
    pub fn max_abs_z(&self) -> f64 {
        self.check.iter().map(|c| c.z.abs()).fold(0.0, f64::max)
    }
}

/// Default fit window for return-time tails at `n` samples: the top decade
/// of n whose expected count n · P{R > n} is at least 10, from the table.
pub fn default_return_fit_range(t: &PartitionTable, n: usize) -> (u64, u64) {
    let mut hi = 20u64;
    while t.return_tail(hi + 2) * n as f64 >= 10.0 {
        hi += 1;
    }
    (hi / 10, hi)
}

/// The points 1, 2, 5, 10, 20, 50, ... up to `hi`.
pub fn check_points(lo: u64, hi: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut decade = 1u64;
    while decade <= hi {
        for m in [1, 2, 5] {
            let n = m * decade;
            if n >= lo && n <= hi {
                out.push(n);
            }
        }
        decade *= 10;
    }
    out
}

/// Tail of R under normalized Lebesgue measure on Δ_0, fitted on
/// `fit_range`, with the Monte Carlo tail checked against the table.
pub fn return_tail(map: &FactorMap, t: &PartitionTable, cfg: &SampleConfig, fit_range: (u64, u64)) -> Result<ReturnTailReport> {
    if cfg.n_samples < 100_000 {
        return Err(Error::Domain {
            what: "N",
            value: cfg.n_samples as f64,
            domain: "N >= 1e5",
        });
    }
    let parts = map_chunks(cfg, |rng, count| -> Result<(Vec<Obs>, usize)> {
        let mut obs = Vec::with_capacity(count);
        let mut mismatches = 0;
        for _ in 0..count {
            let p = sample_base(map, t, rng);
            let rec = return_time_point(map, t, p)?;
            if rec.r.is_some() && rec.analytic_r.is_some() && rec.r != rec.analytic_r {
                mismatches += 1;
            }
            obs.push(match rec.r {
                Some(r) => Obs::exact(r),
                None => Obs::censored(rec.analytic_r.unwrap_or(RETURN_HORIZON).min(RETURN_HORIZON)),
            });
        }
        Ok((obs, mismatches))
    });
    let mut obs = Vec::with_capacity(cfg.n_samples);
    let mut mismatches = 0;
    for part in parts {
        let (o, m) = part?;
        obs.extend(o);
        mismatches += m;
    }
    let censored = obs.iter().filter(|o| o.censored).count();
    let mut warnings = Vec::new();
    if censored > 0 {
        warnings.push(format!("{censored} return times censored"));
    }
    let estimate = mc_engine::tail_fit(&obs, fit_range, cfg.seed)?;
    let grid = fit::geometric_grid(fit_range.0, fit_range.1, 40);
    let rows = tail_rows(&obs, &grid);
    let points = check_points(2, fit_range.1);
    // P{R ≥ n} = P{R > n - 1}.
    let shifted: Vec<u64> = points.iter().map(|n| n - 1).collect();
    let n = obs.len() as f64;
    let check = points
        .iter()
        .zip(tail_rows(&obs, &shifted))
        .map(|(&k, row)| {
            let exact = t.return_tail(k);
            let stderr = (exact * (1.0 - exact) / n).sqrt();
            let z = if stderr > 0.0 {
                (row.fraction - exact) / stderr
            } else {
                0.0
            };
            ReturnCheckRow {
                n: k,
                sampled: row.fraction,
                exact,
                stderr,
                z,
            }
        })
        .collect();
    Ok(ReturnTailReport {
        estimate,
        rows,
        check,
        mismatches,
        censored,
        warnings,
    })
}

/// N̄ = ∫ N dm for the given k0: the mass beyond x_k0 and y_k0 minus the
/// mass of J_0 ∪ J'_0.
pub fn psi_mean_at(t: &PartitionTable, k0: usize) -> Result<f64> {
    if k0 == 0 || k0 > t.depth() {
        return Err(Error::InvalidParams(format!("k0 = {k0} outside 1..={}", t.depth())));
    }
    let mean = t.x(k0) + t.one_minus_y(k0) - (t.m_j(0) + t.m_jp(0));
    if mean >= 0.0 {
        return Err(Error::Positivity(mean));
    }
    Ok(mean)
}

pub fn psi_mean(params: &HypParams, t: &PartitionTable) -> Result<f64> {
    psi_mean_at(t, params.k0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LdRecord {
    pub n: u64,
    pub epsilon: f64,
    /// Fraction of samples with |(1/n) Σ_{k<n} N(f^k x) - N̄| ≥ ε.
    pub fraction: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdReport {
    pub mean_counter: f64,
    pub records: Vec<LdRecord>,
    /// Log-log slope of the fraction over the grid points where it is positive.
    pub slope: Option<f64>,
    /// (sample, n) pairs with H ≥ n that were checked for membership in the
    /// deviation set at level -N̄.
    pub inclusion_checked: u64,
    pub inclusion_violations: u64,
    /// Orbits that hit a before the last grid point; excluded.
    pub truncated: usize,
}

/// m{|N - N̄| ≥ ε}, read off the table.
pub fn ld_fraction_n1(params: &HypParams, t: &PartitionTable, epsilon: f64) -> f64 {
    let k0 = params.k0;
    let minus = t.m_j(0) + t.m_jp(0);
    let plus = t.x(k0) + t.one_minus_y(k0);
    let mean = params.mean_counter;
    [(-1.0, minus), (0.0, 1.0 - minus - plus), (1.0, plus)]
        .iter()
        .filter(|(v, _)| (v - mean).abs() >= epsilon)
        .map(|(_, m)| m)
        .sum()
}

/// Measure of the large-deviation sets of the Birkhoff sums of N - N̄ at each
/// n of the ascending `n_grid`, over uniform samples of [0, 1].
pub fn ld_tail(map: &FactorMap, params: &HypParams, cfg: &SampleConfig, epsilon: f64, n_grid: &[u64]) -> Result<LdReport> {
    let mean = params.mean_counter;
    if !(epsilon > 0.0 && epsilon < -mean) {
        return Err(Error::Domain {
            what: "epsilon",
            value: epsilon,
            domain: "(0, -N̄)",
        });
    }
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("n_grid must be positive and strictly increasing".into()));
    }
    let n_last = *n_grid.last().expect("non-empty");
    let g = n_grid.len();
    let parts = map_chunks(cfg, |rng, count| {
        let mut hits = vec![0u64; g];
        let (mut checked, mut violations, mut truncated) = (0u64, 0u64, 0usize);
        'sample: for _ in 0..count {
            let mut p = Point::from_x(uniform_excluding(rng, &[map.a()]));
            let mut sample_hits = vec![false; g];
            let mut sum: i64 = 0;
            let mut escaped = false;
            let mut gi = 0;
            let (mut s_checked, mut s_viol) = (0u64, 0u64);
            for n in 1..=n_last {
                sum += params.counter(p) as i64;
                escaped |= sum < 0;
                if n == n_grid[gi] {
                    let dev = (sum as f64 / n as f64 - mean).abs();
                    sample_hits[gi] = dev >= epsilon;
                    if !escaped {
                        // H ≥ n here, so the sample must deviate by at least -N̄.
                        s_checked += 1;
                        s_viol += u64::from(dev < -mean);
                    }
                    gi += 1;
                }
                if n < n_last {
                    match map.advance(p) {
                        Ok(q) => p = q,
                        Err(_) => {
                            truncated += 1;
                            continue 'sample;
                        }
                    }
                }
            }
            for (h, s) in hits.iter_mut().zip(&sample_hits) {
                *h += u64::from(*s);
            }
            checked += s_checked;
            violations += s_viol;
        }
        (hits, checked, violations, truncated)
    });
    let mut hits = vec![0u64; g];
    let (mut checked, mut violations, mut truncated) = (0, 0, 0);
    for (h, c, v, tr) in parts {
        for (a, b) in hits.iter_mut().zip(h) {
            *a += b;
        }
        checked += c;
        violations += v;
        truncated += tr;
    }
    let used = (cfg.n_samples - truncated) as f64;
    let records: Vec<LdRecord> = n_grid
        .iter()
        .zip(&hits)
        .map(|(&n, &count)| LdRecord {
            n,
            epsilon,
            fraction: count as f64 / used,
            count,
        })
        .collect();
    let pos: Vec<&LdRecord> = records.iter().filter(|r| r.fraction > 0.0).collect();
    let slope = (pos.len() >= 2).then(|| {
        let xs: Vec<f64> = pos.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = pos.iter().map(|r| r.fraction.ln()).collect();
        fit::ols(&xs, &ys).slope
    });
    Ok(LdReport {
        mean_counter: mean,
        records,
        slope,
        inclusion_checked: checked,
        inclusion_violations: violations,
        truncated,
    })
}

/// Per-sample first hyperbolic time h and escape time H, with the checks
/// that tie them together.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypSamples {
    pub n_max: u64,
    pub h: Vec<Obs>,
    pub escape: Vec<Obs>,
    /// Samples where max{1, H} was found but is not a hyperbolic time.
    pub escape_not_hyperbolic: usize,
    /// Samples with h > H + 1 (censored h counts once H is known).
    pub order_violations: usize,
    pub singular: usize,
    pub warnings: Vec<String>,
}

fn as_obs(hit: Hit) -> Obs {
    match hit {
        Hit::Found(n) => Obs::exact(n),
        Hit::Censored { horizon, .. } => Obs::censored(horizon),
    }
}

/// Sample h and H from uniform starts, scanning each orbit up to `n_max`.
pub fn hyp_time_samples(map: &FactorMap, params: &HypParams, cfg: &SampleConfig, n_max: u64) -> HypSamples {
    let parts = map_chunks(cfg, |rng, count| {
        let mut h = Vec::with_capacity(count);
        let mut escape = Vec::with_capacity(count);
        let (mut not_hyp, mut order, mut singular) = (0, 0, 0);
        for _ in 0..count {
            let p = Point::from_x(uniform_excluding(rng, &[map.a()]));
            let ot = orbit_times(map, params, p, n_max);
            if matches!(ot.h, Hit::Censored { singular: true, .. }) {
                singular += 1;
            }
            not_hyp += usize::from(ot.escape_is_hyperbolic == Some(false));
            if let Hit::Found(big_h) = ot.escape {
                let h_lower = match ot.h {
                    Hit::Found(v) => v,
                    Hit::Censored { horizon, .. } => horizon + 1,
                };
                order += usize::from(h_lower > big_h + 1);
            }
            h.push(as_obs(ot.h));
            escape.push(as_obs(ot.escape));
        }
        (h, escape, not_hyp, order, singular)
    });
    let mut out = HypSamples {
        n_max,
        h: Vec::with_capacity(cfg.n_samples),
        escape: Vec::with_capacity(cfg.n_samples),
        escape_not_hyperbolic: 0,
        order_violations: 0,
        singular: 0,
        warnings: Vec::new(),
    };
    for (h, e, nh, o, s) in parts {
        out.h.extend(h);
        out.escape.extend(e);
        out.escape_not_hyperbolic += nh;
        out.order_violations += o;
        out.singular += s;
    }
    for (name, obs) in [("h", &out.h), ("H", &out.escape)] {
        let frac = obs.iter().filter(|o| o.censored).count() as f64 / obs.len().max(1) as f64;
        if frac > 0.01 {
            out.warnings
                .push(format!("{:.2}% of {name} values censored at {n_max}", 100.0 * frac));
        }
    }
    out
}

impl HypSamples {
    /// Mean of min(h, cap) for cap ≤ n_max.
    pub fn truncated_mean_h(&self, cap: u64) -> f64 {
        assert!(cap <= self.n_max);
        let s: u64 = self.h.iter().map(|o| if o.censored { cap } else { o.value.min(cap) }).sum();
        s as f64 / self.h.len() as f64
    }

    /// Grid points n where the tail of h exceeds the tail of H shifted by
    /// one: P{h > n} > P{H ≥ n}.
    pub fn sandwich_failures(&self, ns: &[u64]) -> Vec<u64> {
        let shifted: Vec<u64> = ns.iter().map(|n| n.saturating_sub(1)).collect();
        let h = tail_rows(&self.h, ns);
        let big = tail_rows(&self.escape, &shifted);
        ns.iter()
            .zip(h.iter().zip(&big))
            .filter(|(&n, (a, b))| n >= 1 && a.fraction > b.fraction)
            .map(|(&n, _)| n)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypTailReport {
    pub h: mc_engine::TailEstimate,
    pub escape: mc_engine::TailEstimate,
    pub h_rows: Vec<TailRow>,
    pub escape_rows: Vec<TailRow>,
    pub sandwich_failures: Vec<u64>,
    pub escape_not_hyperbolic: usize,
    pub order_violations: usize,
    pub warnings: Vec<String>,
}

/// Tails of h and H with power-law fits on `fit_range`.
pub fn hyp_tails(map: &FactorMap, params: &HypParams, cfg: &SampleConfig, fit_range: (u64, u64), n_max: u64) -> Result<HypTailReport> {
    if fit_range.1 > n_max {
        return Err(Error::InvalidParams(format!(
            "fit range ends at {} beyond the horizon {n_max}",
            fit_range.1
        )));
    }
    let s = hyp_time_samples(map, params, cfg, n_max);
    let grid = fit::geometric_grid(fit_range.0, fit_range.1, 40);
    Ok(HypTailReport {
        h: mc_engine::tail_fit(&s.h, fit_range, cfg.seed)?,
        escape: mc_engine::tail_fit(&s.escape, fit_range, cfg.seed)?,
        h_rows: tail_rows(&s.h, &grid),
        escape_rows: tail_rows(&s.escape, &grid),
        sandwich_failures: s.sandwich_failures(&grid),
        escape_not_hyperbolic: s.escape_not_hyperbolic,
        order_violations: s.order_violations,
        warnings: s.warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    /// Max of |ln (f^R)'(x) - ln (f^R)'(y)| over sampled same-branch pairs.
    pub max: f64,
    /// (n, max over pairs in I_n ∪ I'_n) for every n sampled.
    pub by_n: Vec<(usize, f64)>,
    /// Max of |ln f'(x) - ln f'(y)| over the same pairs.
    pub single_step: f64,
    /// Max over the same pairs of Σ_{j<R} |ln f'(f^j x) - ln f'(f^j y)|, the
    /// step-by-step bound with no cancellation.
    pub stepwise_sum: f64,
    pub pairs: usize,
}

/// ln (f^R)' along the return orbit of p, with the log-derivatives per step.
fn return_log_derivs(map: &FactorMap, t: &PartitionTable, p: Point, r: u64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(r as usize);
    let mut p = p;
    for _ in 0..r {
        let s = map.step(p)?;
        out.push(s.log_deriv);
        p = s.next;
    }
    if !t.in_base(p) {
        return Err(Error::Solver(format!("orbit did not return to the base after {r} steps")));
    }
    Ok(out)
}

/// Distortion of the return map on the branches I_n and I'_n for n ≤ 1000.
///
/// Pairs are drawn from interval endpoints (nudged inside) and midpoints,
/// where the extremes sit, plus one uniform point per branch.
pub fn distortion_probe(map: &FactorMap, t: &PartitionTable, pairs: usize, seed: u64) -> Result<DistortionReport> {
    if pairs < 1000 {
        return Err(Error::Domain {
            what: "pairs",
            value: pairs as f64,
            domain: "pairs >= 1000",
        });
    }
    let n_top = t.depth().min(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_n = vec![0.0f64; n_top + 1];
    let mut seen = vec![false; n_top + 1];
    let (mut single_step, mut stepwise_sum) = (0.0f64, 0.0f64);
    for _ in 0..pairs {
        // Log-uniform over 1..=n_top so deep branches are well represented.
        let n = ((n_top as f64).powf(rng.random::<f64>()).floor() as usize).clamp(1, n_top);
        let right = rng.random::<bool>();
        let (near, far) = if right {
            (t.xp_offset(n + 1), t.xp_offset(n))
        } else {
            (t.yp_offset(n + 1), t.yp_offset(n))
        };
        // Keep endpoint picks a few ulps of a inside the branch.
        let nudge = (1e-9f64).max(64.0 * f64::EPSILON * map.a() / (far - near)).min(0.25);
        let mut pick = || -> f64 {
            let theta = match rng.random_range(0..4) {
                0 => nudge,
                1 => 0.5,
                2 => 1.0 - nudge,
                _ => uniform_open(&mut rng),
            };
            near + theta * (far - near)
        };
        let (ox, oy) = (pick(), pick());
        let to_point = |off: f64| if right { right_of_a(map, off) } else { left_of_a(map, off) };
        let r = n as u64 + 1;
        let lx = return_log_derivs(map, t, to_point(ox), r)?;
        let ly = return_log_derivs(map, t, to_point(oy), r)?;
        let d = (lx.iter().sum::<f64>() - ly.iter().sum::<f64>()).abs();
        by_n[n] = by_n[n].max(d);
        seen[n] = true;
        single_step = single_step.max((lx[0] - ly[0]).abs());
        stepwise_sum = stepwise_sum.max(lx.iter().zip(&ly).map(|(a, b)| (a - b).abs()).sum());
    }
    let by_n: Vec<(usize, f64)> = (1..=n_top).filter(|&n| seen[n]).map(|n| (n, by_n[n])).collect();
    Ok(DistortionReport {
        max: by_n.iter().map(|b| b.1).fold(0.0, f64::max),
        by_n,
        single_step,
        stepwise_sum,
        pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PushforwardRow {
    pub n: u64,
    /// P{H ≥ n} from uniform samples of [0, 1].
    pub uniform: f64,
    pub uniform_stderr: f64,
    /// The same tail from weighted samples of tower coordinates (x, l).
    pub tower: f64,
    pub tower_stderr: f64,
    pub z: f64,
}

/// Tail of H two ways: uniformly downstairs, and from tower coordinates
/// (x uniform in Δ_0, level l uniform below R(x), weight R(x) m(Δ_0))
/// projected by (x, l) ↦ f^l x.
pub fn tower_pushforward_check(
    map: &FactorMap,
    params: &HypParams,
    t: &PartitionTable,
    cfg: &SampleConfig,
    ns: &[u64],
    n_max: u64,
) -> Result<Vec<PushforwardRow>> {
    let base_mass = t.y0() - t.x0();
    let escape_of = |p: Point| match orbit_times(map, params, p, n_max).escape {
        Hit::Found(v) => Obs::exact(v),
        Hit::Censored { horizon, .. } => Obs::censored(horizon),
    };
    let uniform: Vec<Obs> = map_chunks(cfg, |rng, count| {
        (0..count)
            .map(|_| escape_of(Point::from_x(uniform_excluding(rng, &[map.a()]))))
            .collect::<Vec<_>>()
    })
    .concat();
    let tower_cfg = SampleConfig {
        seed: cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
        ..*cfg
    };
    let weighted: Vec<(Obs, f64)> = map_chunks(&tower_cfg, |rng, count| -> Result<Vec<(Obs, f64)>> {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let p = sample_base(map, t, rng);
            let (Some(r), _) = simulate_return(map, t, p, RETURN_HORIZON) else {
                return Err(Error::Solver("return time censored in tower sampling".into()));
            };
            let level = rng.random_range(0..r);
            let mut q = p;
            for _ in 0..level {
                q = map.advance(q)?;
            }
            out.push((escape_of(q), r as f64 * base_mass));
        }
        Ok(out)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .concat();

    let nu = uniform.len() as f64;
    let nt = weighted.len() as f64;
    Ok(ns
        .iter()
        .map(|&n| {
            // H ≥ n; a value censored at c ≥ n - 1 is known to satisfy it.
            let ge = |o: &Obs| if o.censored { o.value + 1 >= n } else { o.value >= n };
            let pu = uniform.iter().filter(|o| ge(o)).count() as f64 / nu;
            let su = (pu * (1.0 - pu) / nu).sqrt();
            let vals: Vec<f64> = weighted.iter().map(|(o, w)| if ge(o) { *w } else { 0.0 }).collect();
            let pt = vals.iter().sum::<f64>() / nt;
            let var = vals.iter().map(|v| (v - pt).powi(2)).sum::<f64>() / (nt - 1.0);
            let st = (var / nt).sqrt();
            let se = (su * su + st * st).sqrt();
            PushforwardRow {
                n,
                uniform: pu,
                uniform_stderr: su,
                tower: pt,
                tower_stderr: st,
                z: if se > 0.0 { (pu - pt) / se } else { 0.0 },
            }
        })
        .collect())
}
