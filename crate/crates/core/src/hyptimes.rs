//! (σ, δ)-hyperbolic times, their parameters, and the escape statistic H.
//!
//! A time n ≥ 1 is hyperbolic for x when for every lookback 1 ≤ l ≤ n
//!
//! 1. Σ_{j=n-l}^{n-1} ln f'(f^j x) ≥ l ln(1/σ), and
//! 2. ln dist_δ(f^{n-l} x) ≥ b l ln σ.
//!
//! Condition 1 holds at n exactly when T_n = Σ_{j<n} (ln f'(f^j x) + ln σ)
//! is at least every earlier T_m, so a running maximum decides it. For
//! condition 2, each visited point f^m x forbids the times n < m + l*_m,
//! where l*_m is the least l with ln dist_δ(f^m x) ≥ b l ln σ; the running
//! maximum of those horizons decides it. Log-derivatives are summed in
//! fixed point (2^-64 resolution) so that the running-maximum scan and the
//! direct double loop make bit-identical decisions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor_map::{FactorMap, Point};
use crate::partition::PartitionTable;

pub const DEFAULT_B: f64 = 0.2;
const SIGMA_SAFETY: f64 = 1.001;
const PROBE_SEED: u64 = 0x00B0_57A7;
const PROBE_SAMPLES: usize = 4000;

/// Fixed-point image of a log value; clamps +inf so sums cannot overflow.
#[inline]
fn quantize(v: f64) -> i128 {
    const SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64
    (v.min(1e6) * SCALE).round() as i128
}

/// Optional replacements for derived quantities. Each is validated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub sigma: Option<f64>,
    pub delta: Option<f64>,
    pub k0: Option<usize>,
    /// Choose k0 so that the mean counter is at most `-drift * m(J_0 ∪ J'_0)`
    /// instead of merely negative. Must lie in [0, 1); 0 gives the minimal k0.
    pub drift: Option<f64>,
}

/// Interval endpoints the counter N needs, kept in both charts.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Landmarks {
    a: f64,
    a_hi: f64,
    x0: f64,
    x1: f64,
    x_k0: f64,
    s0: f64,
    s1: f64,
    s_k0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypParams {
    pub b: f64,
    pub beta: f64,
    #[serde(rename = "B")]
    pub b_const: f64,
    pub sigma: f64,
    pub delta: f64,
    pub k0: usize,
    pub k1: usize,
    #[serde(rename = "kb")]
    pub k_b: usize,
    #[serde(rename = "K")]
    pub lyapunov: f64,
    #[serde(rename = "sigma_gt_exp_minus_K")]
    pub sigma_gt_exp_minus_k: bool,
    /// The exceptional set {0, a, 1}.
    pub exceptional: [f64; 3],
    /// ∫ N dm; negative by the choice of k0.
    pub mean_counter: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    marks: Landmarks,
}

/// ln f'(x_k) and ln f'(y_k) for k ≥ 1, read off the table:
/// f(x_k) = x_{k-1} and f(y_k) = y_{k-1}.
fn log_deriv_at_landmarks(map: &FactorMap, t: &PartitionTable, k: usize) -> (f64, f64) {
    let c = map.cut();
    let lx = -(-c.comp_near0(t.x(k - 1))).ln_1p();
    let ly = -(-c.phi_near1(t.one_minus_y(k - 1))).ln_1p();
    (lx, ly)
}

/// Derive (σ, δ, k0, k1, k_b, K, B) for the given b.
pub fn derive_params(map: &FactorMap, t: &PartitionTable, b: f64, ov: &Overrides) -> Result<HypParams> {
    if !(b > 0.0 && b < 0.25) {
        return Err(Error::InfeasibleB(b));
    }
    let depth = t.depth();
    let mut warnings = Vec::new();
    let base_mass = t.m_j(0) + t.m_jp(0);

    let drift = ov.drift.unwrap_or(0.0);
    if !(0.0..1.0).contains(&drift) {
        return Err(Error::InvalidParams(format!("drift {drift} not in [0, 1)")));
    }
    let tail_ok = |k: usize| t.x(k) + t.one_minus_y(k) < (1.0 - drift) * base_mass;
    let k0 = match ov.k0 {
        Some(k) => {
            if k == 0 || k > depth || !tail_ok(k) {
                return Err(Error::InvalidParams(format!(
                    "k0 = {k} does not make the tail beyond J_k0 lighter than J_0 ∪ J'_0"
                )));
            }
            k
        }
        None => (1..=depth)
            .find(|&k| tail_ok(k))
            .ok_or_else(|| Error::Resolution("no admissible k0 within the table".into()))?,
    };

    // f' is increasing on (0, a) and decreasing on (a, 1), so its minimum on
    // [x_k, y_k] sits at an endpoint.
    let min_log_deriv = |k: usize| {
        let (lx, ly) = log_deriv_at_landmarks(map, t, k);
        lx.min(ly)
    };
    let l1 = min_log_deriv(1);
    let lk0 = min_log_deriv(k0);
    // σ² e^{l1} ≥ 1 and σ e^{lk0} ≥ 1.
    let sigma_min = (-0.5 * l1).exp().max((-lk0).exp());
    let sigma = match ov.sigma {
        Some(s) => {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::InvalidParams(format!("sigma = {s} must lie in (0, 1)")));
            }
            if s < sigma_min {
                return Err(Error::InvalidParams(format!(
                    "sigma = {s} is below the admissible minimum {sigma_min}"
                )));
            }
            s
        }
        None => sigma_min * SIGMA_SAFETY,
    };
    if sigma >= 1.0 {
        return Err(Error::InvalidParams(format!("derived sigma = {sigma} is not below 1")));
    }
    let ln_sigma = sigma.ln();

    // k_b: dist(I_j ∪ I'_j, a) ≥ σ^{bj} for all resolved j ≥ k_b. Past the
    // table the distances decay like j^{-1-1/α'}, slower than σ^{bj} once
    // j ≥ (1 + 1/α') / (b |ln σ|).
    let alpha_min = map.cut().alpha().min(map.cut().alpha_prime());
    let crossover = (1.0 + 1.0 / alpha_min) / (b * ln_sigma.abs());
    if (depth as f64) < crossover {
        return Err(Error::Resolution(format!(
            "table depth {depth} is below the tail margin {crossover:.0} needed to certify k_b"
        )));
    }
    let holds = |j: usize| {
        let bound = b * ln_sigma * j as f64;
        t.xp_offset(j + 1).ln() >= bound && t.yp_offset(j + 1).ln() >= bound
    };
    let mut k_b = depth;
    while k_b > 1 && holds(k_b - 1) {
        k_b -= 1;
    }
    if !holds(depth) {
        return Err(Error::Resolution("distance bound fails at the deepest resolved index".into()));
    }

    let delta_max = t
        .xp_offset(k_b)
        .min(t.yp_offset(k_b))
        .min(t.x(k_b))
        .min(t.one_minus_y(k_b))
        * (1.0 - 1e-9);
    let delta = match ov.delta {
        Some(d) => {
            if !(d > 0.0 && d <= delta_max) {
                return Err(Error::InvalidParams(format!(
                    "delta = {d} must lie in (0, {delta_max:e}] for k_b = {k_b}"
                )));
            }
            d
        }
        None => delta_max,
    };

    // k1: σ · max f' on [0, x_k] ∪ [y_k, 1] < 1; that max is attained at x_k or y_k.
    let k1 = (1..=depth)
        .find(|&k| {
            let (lx, ly) = log_deriv_at_landmarks(map, t, k);
            ln_sigma + lx.max(ly) < 0.0
        })
        .ok_or_else(|| Error::Resolution("no k1 within the table".into()))?;

    let lyapunov = map.cut().entropy_integral()?;
    let sigma_gt = sigma > (-lyapunov).exp();
    if !sigma_gt {
        warnings.push(format!(
            "sigma = {sigma} ≤ exp(-K) = {}; positive density of hyperbolic times is not guaranteed",
            (-lyapunov).exp()
        ));
    }
    let probe = nondegeneracy_probe(map, PROBE_SAMPLES, PROBE_SEED)?;
    if !probe.pass {
        warnings.push("non-degeneracy probe did not stabilize".into());
    }
    let mean_counter = t.x(k0) + t.one_minus_y(k0) - base_mass;

    Ok(HypParams {
        b,
        beta: 1.0,
        b_const: probe.b_fit,
        sigma,
        delta,
        k0,
        k1,
        k_b,
        lyapunov,
        sigma_gt_exp_minus_k: sigma_gt,
        exceptional: [0.0, map.a(), 1.0],
        mean_counter,
        warnings,
        marks: Landmarks {
            a: map.a(),
            a_hi: map.a_high(),
            x0: t.x(0),
            x1: t.x(1),
            x_k0: t.x(k0),
            s0: t.one_minus_y(0),
            s1: t.one_minus_y(1),
            s_k0: t.one_minus_y(k0),
        },
    })
}

impl HypParams {
    /// dist(p, {0, a, 1}) if at most δ, else 1.
    #[inline]
    pub fn dist_delta_point(&self, map: &FactorMap, p: Point) -> f64 {
        let d = map.dist_exceptional(p);
        if d <= self.delta {
            d
        } else {
            1.0
        }
    }

    /// The counter N: -1 on J_0 ∪ J'_0, +1 on [0, x_k0) ∪ [y_k0, 1], 0 elsewhere.
    /// Endpoints follow the partition's larger-x convention.
    #[inline]
    pub fn counter(&self, p: Point) -> i8 {
        let m = &self.marks;
        // Left of a: compare x; right of a: compare 1 - x.
        let (left, v) = match p {
            Point::Low(v) => (v < m.a, if v < m.a { v } else { 1.0 - v }),
            Point::High(w) => (w > m.a_hi, if w > m.a_hi { 1.0 - w } else { w }),
        };
        if left {
            if v < m.x_k0 {
                1
            } else if v >= m.x1 && v < m.x0 {
                -1
            } else {
                0
            }
        } else if v <= m.s_k0 {
            1
        } else if v > m.s1 && v <= m.s0 {
            -1
        } else {
            0
        }
    }

    fn horizon_scale(&self) -> f64 {
        self.b * self.sigma.ln()
    }
}

/// dist_δ on plain coordinates.
pub fn dist_delta(x: f64, exceptional: &[f64], delta: f64) -> f64 {
    let d = exceptional.iter().map(|s| (x - s).abs()).fold(f64::INFINITY, f64::min);
    if d <= delta {
        d
    } else {
        1.0
    }
}

/// Condition 2 for one lookback; shared by the scanner and the oracle.
#[inline]
fn distance_ok(ln_dist: f64, bls: f64, l: u64) -> bool {
    ln_dist >= bls * l as f64
}

/// Least l ≥ 1 with `distance_ok(ln_dist, bls, l)`; u64::MAX if none.
fn quarantine(ln_dist: f64, bls: f64) -> u64 {
    if distance_ok(ln_dist, bls, 1) {
        return 1;
    }
    if !ln_dist.is_finite() {
        return u64::MAX;
    }
    let mut l = (ln_dist / bls).ceil().max(1.0) as u64;
    while !distance_ok(ln_dist, bls, l) {
        l += 1;
    }
    while l > 1 && distance_ok(ln_dist, bls, l - 1) {
        l -= 1;
    }
    l
}

/// Streaming hyperbolic-time detector, O(1) per step.
#[derive(Debug, Clone)]
pub struct HypScanner {
    q_sigma: i128,
    bls: f64,
    total: i128,
    best: i128,
    horizon: u64,
    n: u64,
}

impl HypScanner {
    pub fn new(params: &HypParams) -> Self {
        HypScanner {
            q_sigma: quantize(-params.sigma.ln()),
            bls: params.horizon_scale(),
            total: 0,
            best: 0,
            horizon: 0,
            n: 0,
        }
    }

    /// Feed f^n x through its log-derivative and ln dist_δ. Returns whether
    /// n + 1 is a hyperbolic time.
    #[inline]
    pub fn push(&mut self, log_deriv: f64, ln_dist_delta: f64) -> bool {
        let m = self.n;
        self.horizon = self.horizon.max(m.saturating_add(quarantine(ln_dist_delta, self.bls)));
        self.total += quantize(log_deriv) - self.q_sigma;
        self.n += 1;
        let hyperbolic = self.total >= self.best && self.n >= self.horizon;
        self.best = self.best.max(self.total);
        hyperbolic
    }

    pub fn steps(&self) -> u64 {
        self.n
    }
}

/// Direct check of both conditions over every lookback, given the first n
/// log-derivatives and ln dist_δ values of an orbit. O(n).
pub fn is_hyperbolic_on(params: &HypParams, log_derivs: &[f64], ln_dists: &[f64], n: usize) -> bool {
    assert!(n >= 1 && log_derivs.len() >= n && ln_dists.len() >= n);
    let qs = quantize(-params.sigma.ln());
    let bls = params.horizon_scale();
    let mut sum: i128 = 0;
    for l in 1..=n {
        let j = n - l;
        sum += quantize(log_derivs[j]);
        if sum < l as i128 * qs || !distance_ok(ln_dists[j], bls, l as u64) {
            return false;
        }
    }
    true
}

/// Log-derivatives and ln dist_δ along the first n points of the orbit of p.
fn orbit_logs(map: &FactorMap, params: &HypParams, p: Point, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lf = Vec::with_capacity(n);
    let mut ld = Vec::with_capacity(n);
    let mut p = p;
    for _ in 0..n {
        let s = map.step(p)?;
        lf.push(s.log_deriv);
        ld.push(params.dist_delta_point(map, p).ln());
        p = s.next;
    }
    Ok((lf, ld))
}

/// Is n a hyperbolic time for x? Reference implementation; hitting a
/// returns `SingularInput` (the answer is indeterminate).
pub fn is_hyperbolic_time(map: &FactorMap, params: &HypParams, x: f64, n: usize) -> Result<bool> {
    check_start(map, x)?;
    if n == 0 {
        return Err(Error::Domain {
            what: "n",
            value: 0.0,
            domain: "n >= 1",
        });
    }
    let (lf, ld) = orbit_logs(map, params, Point::from_x(x), n)?;
    Ok(is_hyperbolic_on(params, &lf, &ld, n))
}

/// Outcome of a bounded search for a time along an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hit {
    Found(u64),
    /// Not found within the horizon; `singular` if the orbit landed on a.
    Censored { horizon: u64, singular: bool },
}

impl Hit {
    pub fn found(self) -> Option<u64> {
        match self {
            Hit::Found(n) => Some(n),
            Hit::Censored { .. } => None,
        }
    }
}

fn check_start(map: &FactorMap, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) || x == map.a() {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "(0, 1) without a",
        });
    }
    Ok(())
}

/// First hyperbolic time h ≤ n_max, by the streaming scan.
pub fn first_hyperbolic_time(map: &FactorMap, params: &HypParams, x: f64, n_max: u64) -> Result<Hit> {
    check_start(map, x)?;
    Ok(first_hyperbolic_time_point(map, params, Point::from_x(x), n_max))
}

pub fn first_hyperbolic_time_point(map: &FactorMap, params: &HypParams, p: Point, n_max: u64) -> Hit {
    let mut scan = HypScanner::new(params);
    let mut p = p;
    for n in 1..=n_max {
        let Ok(s) = map.step(p) else {
            return Hit::Censored {
                horizon: n - 1,
                singular: true,
            };
        };
        if scan.push(s.log_deriv, params.dist_delta_point(map, p).ln()) {
            return Hit::Found(n);
        }
        p = s.next;
    }
    Hit::Censored {
        horizon: n_max,
        singular: false,
    }
}

/// Naive first hyperbolic time: tests every n with the direct check. O(n²).
pub fn first_hyperbolic_time_naive(map: &FactorMap, params: &HypParams, x: f64, n_max: u64) -> Result<Hit> {
    check_start(map, x)?;
    let mut lf = Vec::new();
    let mut ld = Vec::new();
    let mut p = Point::from_x(x);
    for n in 1..=n_max as usize {
        let Ok(s) = map.step(p) else {
            return Ok(Hit::Censored {
                horizon: n as u64 - 1,
                singular: true,
            });
        };
        lf.push(s.log_deriv);
        ld.push(params.dist_delta_point(map, p).ln());
        if is_hyperbolic_on(params, &lf, &ld, n) {
            return Ok(Hit::Found(n as u64));
        }
        p = s.next;
    }
    Ok(Hit::Censored {
        horizon: n_max,
        singular: false,
    })
}

/// H = min{n ≥ 0 : Σ_{k≤n} N(f^k x) < 0}, searched for n ≤ n_max.
pub fn first_passage_h(map: &FactorMap, params: &HypParams, x: f64, n_max: u64) -> Result<Hit> {
    check_start(map, x)?;
    Ok(first_passage_point(map, params, Point::from_x(x), n_max))
}

pub fn first_passage_point(map: &FactorMap, params: &HypParams, p: Point, n_max: u64) -> Hit {
    let mut sum: i64 = 0;
    let mut p = p;
    for n in 0..=n_max {
        let c = params.counter(p);
        sum += c as i64;
        if sum < 0 {
            // The walk can only drop on a -1 step.
            assert_eq!(c, -1, "first passage below zero off J_0 ∪ J'_0");
            return Hit::Found(n);
        }
        if n == n_max {
            break;
        }
        match map.advance(p) {
            Ok(q) => p = q,
            Err(_) => {
                return Hit::Censored {
                    horizon: n,
                    singular: true,
                }
            }
        }
    }
    Hit::Censored {
        horizon: n_max,
        singular: false,
    }
}

/// h, H and whether max{1, H} is itself hyperbolic, from a single pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrbitTimes {
    pub h: Hit,
    pub escape: Hit,
    /// Some(b) once H is found: whether max{1, H} is a hyperbolic time.
    pub escape_is_hyperbolic: Option<bool>,
}

pub fn orbit_times(map: &FactorMap, params: &HypParams, p: Point, n_max: u64) -> OrbitTimes {
    let mut scan = HypScanner::new(params);
    let (mut h, mut escape, mut escape_hyp) = (None, None, None);
    let mut sum: i64 = 0;
    let mut p = p;
    // Whether the current time n is hyperbolic (meaningful for n ≥ 1).
    let mut last_hyp = false;
    let mut n: u64 = 0;
    let singular = loop {
        // Invariant: p = f^n x.
        if escape.is_none() {
            sum += params.counter(p) as i64;
            if sum < 0 {
                escape = Some(n);
                if n >= 1 {
                    escape_hyp = Some(last_hyp);
                }
            }
        }
        let done = h.is_some() && escape.is_some() && escape_hyp.is_some();
        if done || n >= n_max {
            break false;
        }
        let Ok(s) = map.step(p) else { break true };
        last_hyp = scan.push(s.log_deriv, params.dist_delta_point(map, p).ln());
        n += 1;
        p = s.next;
        if last_hyp && h.is_none() {
            h = Some(n);
        }
        if escape == Some(0) && n == 1 {
            escape_hyp = Some(last_hyp);
        }
    };
    let censor = |horizon: u64| Hit::Censored { horizon, singular };
    OrbitTimes {
        h: h.map_or_else(|| censor(n), Hit::Found),
        escape: escape.map_or_else(|| censor(n), Hit::Found),
        escape_is_hyperbolic: escape_hyp,
    }
}

/// Running fraction of hyperbolic times in [1, N] at N/10 checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub theta: f64,
    pub checkpoints: Vec<(u64, f64)>,
    pub steps: u64,
    pub truncated: bool,
}

impl DensityReport {
    /// Relative spread of the checkpoints in the second half.
    pub fn last_half_variation(&self) -> f64 {
        let tail: Vec<f64> = self.checkpoints[self.checkpoints.len() / 2..]
            .iter()
            .map(|c| c.1)
            .collect();
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        (hi - lo) / hi
    }
}

pub fn hyperbolic_time_density(map: &FactorMap, params: &HypParams, x: f64, n: u64) -> Result<DensityReport> {
    check_start(map, x)?;
    if n < 10 {
        return Err(Error::Domain {
            what: "N",
            value: n as f64,
            domain: "N >= 10",
        });
    }
    let mut scan = HypScanner::new(params);
    let mut p = Point::from_x(x);
    let mut count = 0u64;
    let mut checkpoints = Vec::with_capacity(10);
    let mut steps = 0;
    let mut truncated = false;
    for i in 1..=n {
        let Ok(s) = map.step(p) else {
            truncated = true;
            break;
        };
        if scan.push(s.log_deriv, params.dist_delta_point(map, p).ln()) {
            count += 1;
        }
        steps = i;
        if i % (n / 10) == 0 && checkpoints.len() < 10 {
            checkpoints.push((i, count as f64 / i as f64));
        }
        p = s.next;
    }
    Ok(DensityReport {
        theta: count as f64 / steps.max(1) as f64,
        checkpoints,
        steps,
        truncated,
    })
}

/// Empirical regularity constant B for the exceptional set with β = 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonDegeneracy {
    pub beta: f64,
    /// Fitted constant, strictly above 1.
    #[serde(rename = "B")]
    pub b_fit: f64,
    /// Smallest B with (1/B) d ≤ f' ≤ B / d on the sample.
    pub b_derivative: f64,
    /// Smallest B with |ln f'(y) - ln f'(z)| ≤ B |y - z| / d on the sample.
    pub b_log_lipschitz: f64,
    /// max of both bounds per decade of distance, shallow to deep.
    pub by_decade: Vec<f64>,
    pub pass: bool,
}

/// Sample points at log-uniform distances from each exceptional point and
/// fit the smallest B consistent with both regularity bounds.
pub fn nondegeneracy_probe(map: &FactorMap, samples: usize, seed: u64) -> Result<NonDegeneracy> {
    const DECADES: usize = 12;
    if samples < 1000 {
        return Err(Error::Domain {
            what: "samples",
            value: samples as f64,
            domain: ">= 1000",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = 0.5 * map.a().min(map.a_high());
    // Log-derivative at distance t from anchor i ∈ {0, a-, a+, 1}.
    let log_deriv = |anchor: usize, t: f64| -> Result<f64> {
        Ok(match anchor {
            0 => map.step(Point::Low(t))?.log_deriv,
            1 => map.step_below_a(t)?.log_deriv,
            2 => map.step_above_a(t)?.log_deriv,
            _ => map.step(Point::High(t))?.log_deriv,
        })
    };
    let mut by_decade = vec![0.0f64; DECADES];
    let (mut b_der, mut b_lip) = (0.0f64, 0.0f64);
    for i in 0..samples {
        let anchor = i % 4;
        let depth: f64 = rng.random::<f64>() * DECADES as f64;
        let t = reach * 10f64.powf(-depth);
        let lz = log_deriv(anchor, t)?;
        let der = (t.ln() - lz).max(lz + t.ln()).exp();
        let t2 = t * (1.0 + (rng.random::<f64>() - 0.5));
        let lip = if t2 == t {
            0.0
        } else {
            (log_deriv(anchor, t2)? - lz).abs() * t / (t2 - t).abs()
        };
        b_der = b_der.max(der);
        b_lip = b_lip.max(lip);
        let slot = &mut by_decade[(depth as usize).min(DECADES - 1)];
        *slot = slot.max(der).max(lip);
    }
    // B must exceed 1; apply the same safety factor as for σ.
    let b_fit = b_der.max(b_lip).max(1.0) * SIGMA_SAFETY;
    let shallow = by_decade[..DECADES - 3].iter().cloned().fold(0.0, f64::max);
    let deep = by_decade[DECADES - 3..].iter().cloned().fold(0.0, f64::max);
    Ok(NonDegeneracy {
        beta: 1.0,
        b_fit,
        b_derivative: b_der,
        b_log_lipschitz: b_lip,
        by_decade,
        pass: b_fit.is_finite() && deep <= 1.5 * shallow,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutfunc::CutFunction;
    use crate::partition::{build_partition, IntervalId, Side};

    fn setup(alpha: Option<f64>) -> (FactorMap, PartitionTable, HypParams) {
        let cut = match alpha {
            None => CutFunction::linear(),
            Some(a) => CutFunction::symmetric_power(a).unwrap(),
        };
        let map = FactorMap::new(cut).unwrap();
        let t = build_partition(&map, 1e-15, 20_000).unwrap();
        let p = derive_params(&map, &t, DEFAULT_B, &Overrides::default()).unwrap();
        (map, t, p)
    }

    #[test]
    fn linear_params() {
        let (_, t, p) = setup(None);
        assert!((p.lyapunov - 0.5).abs() < 1e-6);
        // Independent scan for k0: first k with 2 x_k < 2 m(J_0).
        let k0 = (1..).find(|&k| 2.0 * t.x(k) < 2.0 * (t.x(0) - t.x(1))).unwrap();
        assert_eq!(p.k0, k0);
        assert!(p.sigma < 1.0 && p.delta > 0.0 && p.k1 >= 1 && p.k_b >= 1);
        assert!(p.mean_counter < 0.0);
        assert!(p.b_const.is_finite() && p.b_const > 1.0);
        let (l1, lk) = (
            log_deriv_at_landmarks(&setup(None).0, &t, 1),
            log_deriv_at_landmarks(&setup(None).0, &t, p.k0),
        );
        assert!(2.0 * p.sigma.ln() + l1.0.min(l1.1) >= 0.0);
        assert!(p.sigma.ln() + lk.0.min(lk.1) >= 0.0);
    }

    #[test]
    fn infeasible_b() {
        let (m, t, _) = setup(None);
        for b in [0.3, 0.25, 0.0, -0.1] {
            assert_eq!(derive_params(&m, &t, b, &Overrides::default()), Err(Error::InfeasibleB(b)));
        }
    }

    #[test]
    fn overrides_are_validated() {
        let (m, t, p) = setup(None);
        let bad = |ov: Overrides| derive_params(&m, &t, 0.2, &ov).unwrap_err();
        assert!(matches!(bad(Overrides { sigma: Some(1.0), ..Default::default() }), Error::InvalidParams(_)));
        assert!(matches!(bad(Overrides { sigma: Some(0.5), ..Default::default() }), Error::InvalidParams(_)));
        assert!(matches!(bad(Overrides { delta: Some(1.0), ..Default::default() }), Error::InvalidParams(_)));
        assert!(matches!(bad(Overrides { k0: Some(1), ..Default::default() }), Error::InvalidParams(_)));
        let ok = derive_params(&m, &t, 0.2, &Overrides { delta: Some(p.delta / 2.0), ..Default::default() }).unwrap();
        assert_eq!(ok.delta, p.delta / 2.0);
        let ok = derive_params(&m, &t, 0.2, &Overrides { sigma: Some(0.99), ..Default::default() }).unwrap();
        assert_eq!(ok.sigma, 0.99);
        assert!(ok.k_b > p.k_b);
        let drifted = derive_params(&m, &t, 0.2, &Overrides { drift: Some(0.5), ..Default::default() }).unwrap();
        assert!(drifted.k0 > p.k0);
        assert!(drifted.mean_counter <= -0.5 * (t.m_j(0) + t.m_jp(0)));
    }

    #[test]
    fn shallow_table_is_a_resolution_error() {
        let m = FactorMap::new(CutFunction::linear()).unwrap();
        let t = build_partition(&m, 1e-15, 50).unwrap();
        assert!(matches!(derive_params(&m, &t, 0.2, &Overrides::default()), Err(Error::Resolution(_))));
    }

    #[test]
    fn dist_delta_examples() {
        let s = [0.0, 0.5, 1.0];
        assert!((dist_delta(0.45, &s, 0.1) - 0.05).abs() < 1e-15);
        assert_eq!(dist_delta(0.3, &s, 0.1), 1.0);
        assert_eq!(dist_delta(0.5, &s, 0.1), 0.0);
    }

    #[test]
    fn counter_examples() {
        let (m, t, p) = setup(Some(0.5));
        let mid_j0 = 0.5 * (t.x(0) + t.x(1));
        assert_eq!(p.counter(Point::from_x(mid_j0)), -1);
        assert_eq!(p.counter(Point::from_x(1.0 - mid_j0)), -1);
        assert_eq!(p.counter(Point::Low(1e-200)), 1);
        assert_eq!(p.counter(Point::High(1e-200)), 1);
        let mid_i1 = t.a() + 0.5 * (t.xp_offset(1) + t.xp_offset(2));
        assert_eq!(p.counter(Point::from_x(mid_i1)), 0);
        // Agrees with the partition on a fine grid.
        for i in 1..20_000 {
            let x = i as f64 / 20_000.0;
            if x == m.a() {
                continue;
            }
            let want = match t.locate(x).unwrap() {
                IntervalId { side: Side::J | Side::Jp, k: Some(0) } => -1,
                IntervalId { side: Side::J | Side::Jp, k: Some(k) } if k >= p.k0 => 1,
                IntervalId { side: Side::DeepZero | Side::DeepOne, .. } => 1,
                _ => 0,
            };
            assert_eq!(p.counter(Point::from_x(x)), want, "x={x}");
        }
    }

    #[test]
    fn h_examples() {
        let (m, t, p) = setup(None);
        let mid_j0 = 0.5 * (t.x(0) + t.x(1));
        assert_eq!(first_passage_h(&m, &p, mid_j0, 10).unwrap(), Hit::Found(0));
        assert!(is_hyperbolic_time(&m, &p, mid_j0, 1).unwrap());
        assert_eq!(first_hyperbolic_time(&m, &p, mid_j0, 10).unwrap(), Hit::Found(1));
        let mid_j1 = 0.5 * (t.x(1) + t.x(2));
        assert!(p.k0 > 1);
        assert_eq!(first_passage_h(&m, &p, mid_j1, 10).unwrap(), Hit::Found(1));
        let deep = 0.5 * (t.x(p.k1 + 5) + t.x(p.k1 + 6));
        match first_hyperbolic_time(&m, &p, deep, 1000).unwrap() {
            Hit::Found(h) => assert!(h > 5),
            Hit::Censored { .. } => {}
        }
        assert!(first_hyperbolic_time(&m, &p, 0.5, 10).is_err());
    }

    #[test]
    fn contraction_fails_condition_one() {
        let (m, t, p) = setup(None);
        // Deep in J_k for k > k1, f' < 1/σ.
        let x = t.x(p.k1 + 10);
        assert!(!is_hyperbolic_time(&m, &p, x, 1).unwrap());
    }

    #[test]
    fn scanner_matches_oracle_on_random_orbits() {
        let (m, _, p) = setup(Some(0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: f64 = rng.random();
            let fast = first_hyperbolic_time(&m, &p, x, 300).unwrap();
            let slow = first_hyperbolic_time_naive(&m, &p, x, 300).unwrap();
            assert_eq!(fast, slow, "x={x}");
        }
    }

    #[test]
    fn orbit_times_agree_with_separate_scans() {
        let (m, _, p) = setup(None);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let x: f64 = rng.random();
            let ot = orbit_times(&m, &p, Point::from_x(x), 5000);
            let h = first_hyperbolic_time(&m, &p, x, 5000).unwrap();
            let big_h = first_passage_h(&m, &p, x, 5000).unwrap();
            assert_eq!(ot.h.found(), h.found(), "x={x}");
            assert_eq!(ot.escape.found(), big_h.found(), "x={x}");
            if let Some(e) = big_h.found() {
                let expect = is_hyperbolic_time(&m, &p, x, e.max(1) as usize).unwrap();
                assert_eq!(ot.escape_is_hyperbolic, Some(expect));
            }
        }
    }

    #[test]
    fn quarantine_is_minimal() {
        let bls = 0.2 * 0.9f64.ln();
        for ln_d in [0.0, -1e-3, -0.5, -3.0, -17.25, -700.0] {
            let l = quarantine(ln_d, bls);
            assert!(distance_ok(ln_d, bls, l));
            assert!(l == 1 || !distance_ok(ln_d, bls, l - 1));
        }
        assert_eq!(quarantine(f64::NEG_INFINITY, bls), u64::MAX);
    }

    #[test]
    fn density_is_positive() {
        let (m, _, p) = setup(None);
        let d = hyperbolic_time_density(&m, &p, 0.1234, 20_000).unwrap();
        assert!(d.theta > 0.0);
        assert_eq!(d.checkpoints.len(), 10);
    }

    #[test]
    fn probe_linear_passes() {
        let m = FactorMap::new(CutFunction::linear()).unwrap();
        let r = nondegeneracy_probe(&m, 4000, 3).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.b_fit.is_finite());
        assert!(nondegeneracy_probe(&m, 10, 3).is_err());
    }
}
