//! The dynamical partition 0 ⋯ J_n ⋯ J_0 x_0 I'_1 ⋯ a ⋯ I_1 y_0 J'_0 ⋯ J'_n ⋯ 1.
//!
//! `J_n = (x_{n+1}, x_n)` accumulate at 0, `J'_n = (y_n, y_{n+1})` at 1, and
//! `I_n = (x'_{n+1}, x'_n)`, `I'_n = (y'_n, y'_{n+1})` accumulate at a from
//! the right and left. Every sequence is stored as a distance to its
//! accumulation point so deep entries keep full relative precision.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::factor_map::{FactorMap, Point};
use crate::fit;

pub const DEFAULT_EPS_FLOOR: f64 = 1e-15;
pub const DEFAULT_K_MAX: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    /// Left of x_0, accumulating at 0.
    J,
    /// Between a and y_0.
    I,
    /// Right of y_0, accumulating at 1.
    Jp,
    /// Between x_0 and a.
    Ip,
    /// Closer to 0 than the deepest resolved x_k.
    DeepZero,
    /// Closer to 1 than the deepest resolved y_k.
    DeepOne,
    /// Closer to a than the deepest resolved x'_k or y'_k.
    DeepCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct IntervalId {
    pub side: Side,
    pub k: Option<usize>,
}

impl IntervalId {
    fn at(side: Side, k: usize) -> Self {
        IntervalId { side, k: Some(k) }
    }

    fn deep(side: Side) -> Self {
        IntervalId { side, k: None }
    }
}

/// Solve f(f(x0)) = x0 with x0 < a by iterating the contraction
/// x ↦ Φ(a + ∫_0^x (1 - φ)).
pub fn period2_orbit(map: &FactorMap) -> Result<(f64, f64)> {
    let a = map.a();
    let mut x = 0.5 * a;
    for _ in 0..10_000 {
        let y = map.inverse_right(x)?;
        let next = map.inverse_left(y)?;
        if (next - x).abs() <= 1e-17 {
            x = next;
            break;
        }
        x = next;
    }
    let y = map.inverse_right(x)?;
    let residual = (map.eval(map.eval(x)?)? - x).abs();
    if !(x < a && y > a) || residual > 1e-12 {
        return Err(Error::Solver(format!(
            "period-2 orbit did not converge (x0={x}, residual {residual:e})"
        )));
    }
    Ok((x, y))
}

#[derive(Debug, Clone)]
pub struct PartitionTable {
    a: f64,
    a_hi: f64,
    x0_hi: f64,
    /// x_n for n = 0..=K+1.
    x: Vec<f64>,
    /// 1 - y_n for n = 0..=K+1.
    s: Vec<f64>,
    /// x'_n - a for n = 1..=K+1; index 0 is an infinite sentinel.
    dp: Vec<f64>,
    /// a - y'_n for n = 1..=K+1; index 0 is an infinite sentinel.
    e: Vec<f64>,
    eps_floor: f64,
    k_max: usize,
}

/// ∫_0^x φ for x < a, in the chart best suited to x.
fn int_phi_from0(map: &FactorMap, x: f64) -> f64 {
    let c = map.cut();
    if x <= 0.5 {
        c.int_phi_near0(x)
    } else {
        map.a() - c.int_phi_near1(1.0 - x)
    }
}

/// ∫_0^x (1 - φ).
fn int_comp_from0(map: &FactorMap, x: f64) -> f64 {
    let c = map.cut();
    if x <= 0.5 {
        c.int_comp_near0(x)
    } else {
        map.a_high() - c.int_comp_near1(1.0 - x)
    }
}

/// ∫_{1-s}^1 φ.
fn int_phi_to1(map: &FactorMap, s: f64) -> f64 {
    let c = map.cut();
    if s <= 0.5 {
        c.int_phi_near1(s)
    } else {
        map.a() - c.int_phi_near0(1.0 - s)
    }
}

/// ∫_{1-s}^1 (1 - φ).
fn int_comp_to1(map: &FactorMap, s: f64) -> f64 {
    let c = map.cut();
    if s <= 0.5 {
        c.int_comp_near1(s)
    } else {
        map.a_high() - c.int_comp_near0(1.0 - s)
    }
}

/// Iterate the inverse branches from the period-2 orbit. The table stops at
/// depth `K ≤ k_max` before any gap falls below `eps_floor` times its
/// distance to the accumulation point.
pub fn build_partition(map: &FactorMap, eps_floor: f64, k_max: usize) -> Result<PartitionTable> {
    if !(1e-15..1.0).contains(&eps_floor) {
        return Err(Error::Domain {
            what: "eps_floor",
            value: eps_floor,
            domain: "[1e-15, 1)",
        });
    }
    if !(1..=10_000_000).contains(&k_max) {
        return Err(Error::Domain {
            what: "k_max",
            value: k_max as f64,
            domain: "[1, 1e7]",
        });
    }
    let (x0, y0) = period2_orbit(map)?;
    let mut x = vec![x0];
    let mut s = vec![1.0 - y0];
    let mut dp = vec![f64::INFINITY];
    let mut e = vec![f64::INFINITY];
    // Row n+1 of the I-sequences is the measure of J_n, so each pass
    // certifies J_n before committing x_{n+1}.
    for n in 0..=k_max {
        let (xn, sn) = (x[n], s[n]);
        let mj = int_comp_from0(map, xn);
        let mjp = int_phi_to1(map, sn);
        let ok = mj >= eps_floor * xn && mjp >= eps_floor * sn && mj > 0.0 && mjp > 0.0;
        if !ok && n > 0 {
            // J_{n-1} resolved, J_n not: depth K = n - 1.
            x.pop();
            s.pop();
            break;
        }
        dp.push(mj);
        e.push(mjp);
        x.push(int_phi_from0(map, xn));
        s.push(int_comp_to1(map, sn));
        if n == k_max {
            break;
        }
    }
    // Trim to K+2 entries in x and s, K+2 in dp and e (sentinel + K+1 rows).
    let depth = dp.len() - 2;
    x.truncate(depth + 2);
    s.truncate(depth + 2);
    Ok(PartitionTable {
        a: map.a(),
        a_hi: map.a_high(),
        x0_hi: 1.0 - x0,
        x,
        s,
        dp,
        e,
        eps_floor,
        k_max,
    })
}

impl PartitionTable {
    /// Deepest index K with J_K, J'_K, I_K and I'_K all resolved.
    pub fn depth(&self) -> usize {
        self.dp.len() - 2
    }

    pub fn eps_floor(&self) -> f64 {
        self.eps_floor
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn x0(&self) -> f64 {
        self.x[0]
    }

    pub fn y0(&self) -> f64 {
        1.0 - self.s[0]
    }

    /// x_n for n ≤ K+1.
    pub fn x(&self, n: usize) -> f64 {
        self.x[n]
    }

    /// 1 - y_n for n ≤ K+1.
    pub fn one_minus_y(&self, n: usize) -> f64 {
        self.s[n]
    }

    /// y_n for n ≤ K+1.
    pub fn y(&self, n: usize) -> f64 {
        1.0 - self.s[n]
    }

    /// x'_n - a for 1 ≤ n ≤ K+1.
    pub fn xp_offset(&self, n: usize) -> f64 {
        assert!(n >= 1, "x'_n starts at n = 1");
        self.dp[n]
    }

    /// a - y'_n for 1 ≤ n ≤ K+1.
    pub fn yp_offset(&self, n: usize) -> f64 {
        assert!(n >= 1, "y'_n starts at n = 1");
        self.e[n]
    }

    pub fn xp(&self, n: usize) -> f64 {
        self.a + self.xp_offset(n)
    }

    pub fn yp(&self, n: usize) -> f64 {
        self.a - self.yp_offset(n)
    }

    /// m(J_k) = x_k - x_{k+1}, which equals x'_{k+1} - a.
    pub fn m_j(&self, k: usize) -> f64 {
        self.dp[k + 1]
    }

    pub fn m_jp(&self, k: usize) -> f64 {
        self.e[k + 1]
    }

    /// m(I_k) for 1 ≤ k ≤ K.
    pub fn m_i(&self, k: usize) -> f64 {
        assert!(k >= 1);
        self.dp[k] - self.dp[k + 1]
    }

    pub fn m_ip(&self, k: usize) -> f64 {
        assert!(k >= 1);
        self.e[k] - self.e[k + 1]
    }

    /// True if `p` lies in Δ_0 = [x_0, y_0].
    #[inline]
    pub fn in_base(&self, p: Point) -> bool {
        match p {
            Point::Low(v) => v >= self.x[0] && v <= 1.0 - self.s[0],
            Point::High(w) => w >= self.s[0] && w <= self.x0_hi,
        }
    }

    /// The partition element containing x. Endpoints belong to the
    /// neighbouring interval with larger x.
    pub fn locate(&self, x: f64) -> Result<IntervalId> {
        if !(x > 0.0 && x < 1.0) || x == self.a {
            return Err(Error::Domain {
                what: "x",
                value: x,
                domain: "(0, 1) without a",
            });
        }
        self.locate_point(Point::from_x(x))
    }

    pub fn locate_point(&self, p: Point) -> Result<IntervalId> {
        enum Zone {
            J(f64),
            Ip(f64),
            I(f64),
            Jp(f64),
        }
        let zone = match p {
            Point::Low(v) if v <= 0.0 => None,
            Point::Low(v) if v < self.x[0] => Some(Zone::J(v)),
            Point::Low(v) if v < self.a => Some(Zone::Ip(self.a - v)),
            Point::Low(v) if v > self.a && v < 1.0 - self.s[0] => Some(Zone::I(v - self.a)),
            Point::Low(v) if v > self.a => Some(Zone::Jp(1.0 - v)),
            Point::High(w) if w <= 0.0 => None,
            Point::High(w) if w > self.x0_hi => Some(Zone::J(1.0 - w)),
            Point::High(w) if w > self.a_hi => Some(Zone::Ip(w - self.a_hi)),
            Point::High(w) if w < self.a_hi && w > self.s[0] => Some(Zone::I(self.a_hi - w)),
            Point::High(w) if w < self.a_hi => Some(Zone::Jp(w)),
            _ => None,
        };
        let Some(zone) = zone else {
            return Err(Error::Domain {
                what: "x",
                value: p.x(),
                domain: "(0, 1) without a",
            });
        };
        let k_last = self.depth();
        Ok(match zone {
            // J_k = [x_{k+1}, x_k): first n with x_n ≤ v, minus one.
            Zone::J(v) => {
                let idx = self.x.partition_point(|&xn| xn > v);
                if idx >= self.x.len() {
                    IntervalId::deep(Side::DeepZero)
                } else {
                    IntervalId::at(Side::J, idx - 1)
                }
            }
            // J'_k: s in (s_{k+1}, s_k]; first n with s_n < w, minus one.
            Zone::Jp(w) => {
                let idx = self.s.partition_point(|&sn| sn >= w);
                if idx >= self.s.len() {
                    IntervalId::deep(Side::DeepOne)
                } else {
                    IntervalId::at(Side::Jp, idx - 1)
                }
            }
            // I_k: offset in [dp_{k+1}, dp_k).
            Zone::I(off) => {
                let idx = self.dp.partition_point(|&d| d > off);
                if idx >= self.dp.len() {
                    IntervalId::deep(Side::DeepCenter)
                } else {
                    // Rounding can put a point a hair past y_0 = x'_1.
                    IntervalId::at(Side::I, (idx - 1).clamp(1, k_last))
                }
            }
            // I'_k: offset in (e_{k+1}, e_k].
            Zone::Ip(off) => {
                let idx = self.e.partition_point(|&d| d >= off);
                if idx >= self.e.len() {
                    IntervalId::deep(Side::DeepCenter)
                } else {
                    IntervalId::at(Side::Ip, (idx - 1).clamp(1, k_last))
                }
            }
        })
    }

    /// Exact P{R ≥ n} for the first return R to Δ_0 under normalized
    /// Lebesgue measure: mass of I_k ∪ I'_k over k ≥ n - 1, which telescopes.
    pub fn return_tail(&self, n: u64) -> f64 {
        let base = self.dp[1] + self.e[1];
        if n <= 2 {
            return 1.0;
        }
        let k = (n - 1) as usize;
        if k < self.dp.len() {
            (self.dp[k] + self.e[k]) / base
        } else {
            f64::NAN
        }
    }

    /// Σ_{k=1}^{K} (k+1) m(I_k ∪ I'_k); equals 1 up to truncation (Kac).
    pub fn kac_sum(&self) -> f64 {
        (1..=self.depth())
            .map(|k| (k as f64 + 1.0) * (self.m_i(k) + self.m_ip(k)))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub quantity: String,
    pub expected: f64,
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsReport {
    pub alpha: f64,
    pub k_lo: usize,
    pub k_hi: usize,
    pub fits: Vec<SlopeFit>,
    pub warnings: Vec<String>,
}

impl AsymptoticsReport {
    pub fn passed(&self) -> bool {
        self.fits.iter().all(|f| f.pass)
    }
}

/// Log-log slopes of the five scaling laws of the partition, against k.
pub fn asymptotic_report(
    table: &PartitionTable,
    map: &FactorMap,
    k_lo: usize,
    k_hi: usize,
) -> Result<AsymptoticsReport> {
    let mut warnings = Vec::new();
    if table.depth() < 1000 {
        warnings.push(format!("table resolved only to k = {}", table.depth()));
    }
    let k_hi = k_hi.min(table.depth());
    if k_lo < 1 || k_hi < k_lo + 10 {
        return Err(Error::Resolution(format!(
            "fit range [{k_lo}, {k_hi}] too short for depth {}",
            table.depth()
        )));
    }
    let alpha = map.cut().alpha();
    let ks = fit::geometric_grid(k_lo as u64, k_hi as u64, 200);
    let lk: Vec<f64> = ks.iter().map(|&k| (k as f64).ln()).collect();
    let mut series: Vec<(&str, f64, Vec<f64>)> = vec![
        ("x_k", -1.0 / alpha, vec![]),
        ("m(J_k)", -1.0 - 1.0 / alpha, vec![]),
        ("f'(mid I_k)", 1.0, vec![]),
        ("m(I_k)", -2.0 - 1.0 / alpha, vec![]),
        ("dist(mid I_k, a)", -1.0 - 1.0 / alpha, vec![]),
    ];
    for &k in &ks {
        let k = k as usize;
        let mid = 0.5 * (table.xp_offset(k) + table.xp_offset(k + 1));
        let fprime = map.step_above_a(mid)?.log_deriv.exp();
        let vals = [table.x(k), table.m_j(k), fprime, table.m_i(k), mid];
        for (slot, v) in series.iter_mut().zip(vals) {
            slot.2.push(v.ln());
        }
    }
    let fits = series
        .into_iter()
        .enumerate()
        .map(|(i, (name, expected, ys))| {
            let slope = fit::ols(&lk, &ys).slope;
            let (ci_low, ci_high) = fit::bootstrap_slope(&lk, &ys, 200, 0x5eed + i as u64);
            SlopeFit {
                quantity: name.to_string(),
                expected,
                slope,
                ci_low,
                ci_high,
                pass: (slope - expected).abs() <= 0.05 * expected.abs(),
            }
        })
        .collect();
    Ok(AsymptoticsReport {
        alpha,
        k_lo,
        k_hi,
        fits,
        warnings,
    })
}
