//! Cut functions φ: decreasing maps of [0,1] with φ(0)=1 and φ(1)=0.
//!
//! Besides `eval` and `antiderivative`, every cut function exposes "chart"
//! primitives that stay accurate near the endpoints. Values near 1 are
//! addressed by their distance `s` to 1, so `phi_near1(s)` is φ(1-s)
//! computed without forming `1-s`. The factor map builds on these.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::quadrature;
use crate::roots::{solve_increasing, Scale};

/// A scalar callback shared between threads.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const QUAD_TOL: f64 = 1e-14;
const QUAD_PANELS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutKind {
    Linear,
    SymmetricPower,
    Custom,
}

/// User-supplied cut function. Only `eval` is required; the optional
/// callbacks improve accuracy near the endpoints and speed.
#[derive(Clone)]
pub struct CustomCut {
    pub eval: ScalarFn,
    /// Φ(t) = ∫_0^t φ.
    pub antiderivative: Option<ScalarFn>,
    /// t ↦ 1 - φ(t), accurate for small t.
    pub complement: Option<ScalarFn>,
    /// s ↦ φ(1 - s), accurate for small s.
    pub reflected: Option<ScalarFn>,
}

impl CustomCut {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CustomCut {
            eval: Arc::new(eval),
            antiderivative: None,
            complement: None,
            reflected: None,
        }
    }

    pub fn with_antiderivative(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.antiderivative = Some(Arc::new(f));
        self
    }

    pub fn with_complement(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.complement = Some(Arc::new(f));
        self
    }

    pub fn with_reflected(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.reflected = Some(Arc::new(f));
        self
    }
}

#[derive(Clone)]
enum Shape {
    Linear,
    /// φ(t) = 1 - (2t)^α / 2 on [0, 1/2], mirrored above.
    SymPower { alpha: f64, inv_norm: f64 },
    Custom(Arc<CustomCut>),
}

#[derive(Clone)]
pub struct CutFunction {
    shape: Shape,
    alpha: f64,
    alpha_prime: f64,
    c0: f64,
    c1: f64,
    a: f64,
}

impl fmt::Debug for CutFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CutFunction")
            .field("kind", &self.kind())
            .field("alpha", &self.alpha)
            .field("alpha_prime", &self.alpha_prime)
            .field("c0", &self.c0)
            .field("c1", &self.c1)
            .field("a", &self.a)
            .finish()
    }
}

fn check_positive(what: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: v,
            domain: "(0, inf)",
        })
    }
}

impl CutFunction {
    /// φ(t) = 1 - t.
    pub fn linear() -> Self {
        CutFunction {
            shape: Shape::Linear,
            alpha: 1.0,
            alpha_prime: 1.0,
            c0: 1.0,
            c1: 1.0,
            a: 0.5,
        }
    }

    /// φ(t) = 1 - (2t)^α/2 for t ≤ 1/2 and φ(t) = 1 - φ(1-t) above.
    pub fn symmetric_power(alpha: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        let c = 2f64.powf(alpha - 1.0);
        Ok(CutFunction {
            shape: Shape::SymPower {
                alpha,
                inv_norm: 1.0 / (4.0 * (alpha + 1.0)),
            },
            alpha,
            alpha_prime: alpha,
            c0: c,
            c1: c,
            a: 0.5,
        })
    }

    /// Wrap user callbacks. The declared tangency data is trusted here and
    /// checked by [`CutFunction::validate`].
    pub fn custom(cut: CustomCut, alpha: f64, alpha_prime: f64, c0: f64, c1: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("alpha_prime", alpha_prime)?;
        check_positive("c0", c0)?;
        check_positive("c1", c1)?;
        if alpha_prime > alpha {
            return Err(Error::Domain {
                what: "alpha_prime",
                value: alpha_prime,
                domain: "(0, alpha]",
            });
        }
        let mut cf = CutFunction {
            shape: Shape::Custom(Arc::new(cut)),
            alpha,
            alpha_prime,
            c0,
            c1,
            a: f64::NAN,
        };
        cf.a = match &cf.shape {
            Shape::Custom(c) => match &c.antiderivative {
                Some(phi) => phi(1.0),
                None => {
                    cf.integrate(|t| cf.phi_near0(t), 0.0, 0.5)?
                        + cf.integrate(|s| cf.phi_near1(s), 0.0, 0.5)?
                }
            },
            _ => unreachable!(),
        };
        if !cf.a.is_finite() {
            return Err(Error::InvalidCut(format!("integral of phi is {}", cf.a)));
        }
        Ok(cf)
    }

    /// The custom family φ(t) = (1 - t^α)^α′ with accurate endpoint callbacks.
    pub fn power_family(alpha: f64, alpha_prime: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("alpha_prime", alpha_prime)?;
        let cut = CustomCut::new(move |t: f64| (1.0 - t.powf(alpha)).max(0.0).powf(alpha_prime))
            .with_complement(move |t: f64| -(alpha_prime * (-t.powf(alpha)).ln_1p()).exp_m1())
            .with_reflected(move |s: f64| (-(alpha * (-s).ln_1p()).exp_m1()).powf(alpha_prime));
        CutFunction::custom(cut, alpha, alpha_prime, alpha_prime, alpha.powf(alpha_prime))
    }

    pub fn kind(&self) -> CutKind {
        match self.shape {
            Shape::Linear => CutKind::Linear,
            Shape::SymPower { .. } => CutKind::SymmetricPower,
            Shape::Custom(_) => CutKind::Custom,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_prime(&self) -> f64 {
        self.alpha_prime
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// a = ∫_0^1 φ.
    pub fn balance_point(&self) -> f64 {
        self.a
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        check_unit("t", t)?;
        Ok(match &self.shape {
            Shape::Custom(c) => (c.eval)(t),
            _ if t <= 0.5 => self.phi_near0(t),
            _ => self.phi_near1(1.0 - t),
        })
    }

    /// Φ(t) = ∫_0^t φ.
    pub fn antiderivative(&self, t: f64) -> Result<f64> {
        check_unit("t", t)?;
        if let Shape::Custom(c) = &self.shape {
            return match &c.antiderivative {
                Some(phi) => Ok(phi(t)),
                None => self.integrate(|u| (c.eval)(u), 0.0, t),
            };
        }
        Ok(if t <= 0.5 {
            self.int_phi_near0(t)
        } else {
            self.a - self.int_phi_near1(1.0 - t)
        })
    }

    fn integrate(&self, f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
        let q = quadrature::integrate(f, lo, hi, QUAD_TOL, 1e-300, QUAD_PANELS);
        if q.converged {
            Ok(q.value)
        } else {
            Err(Error::Quadrature {
                achieved: q.abs_error / q.value.abs().max(f64::MIN_POSITIVE),
                requested: QUAD_TOL,
            })
        }
    }

    /// Best-effort quadrature for the hot chart primitives.
    fn integrate_lossy(&self, f: impl Fn(f64) -> f64, hi: f64) -> f64 {
        quadrature::integrate(f, 0.0, hi, QUAD_TOL, 1e-300, QUAD_PANELS).value
    }

    // ---- chart primitives -------------------------------------------------

    /// φ(t).
    #[inline]
    pub fn phi_near0(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Linear => 1.0 - t,
            Shape::SymPower { alpha, .. } => {
                if t <= 0.5 {
                    1.0 - 0.5 * (2.0 * t).powf(*alpha)
                } else {
                    0.5 * (2.0 * (1.0 - t)).powf(*alpha)
                }
            }
            Shape::Custom(c) => (c.eval)(t),
        }
    }

    /// 1 - φ(t).
    #[inline]
    pub fn comp_near0(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Linear => t,
            Shape::SymPower { alpha, .. } => {
                if t <= 0.5 {
                    0.5 * (2.0 * t).powf(*alpha)
                } else {
                    1.0 - 0.5 * (2.0 * (1.0 - t)).powf(*alpha)
                }
            }
            Shape::Custom(c) => match &c.complement {
                Some(g) => g(t),
                None => 1.0 - (c.eval)(t),
            },
        }
    }

    /// φ(1 - s).
    #[inline]
    pub fn phi_near1(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Linear => s,
            Shape::SymPower { .. } => self.comp_near0(s),
            Shape::Custom(c) => match &c.reflected {
                Some(g) => g(s),
                None => (c.eval)(1.0 - s),
            },
        }
    }

    /// 1 - φ(1 - s).
    #[inline]
    pub fn comp_near1(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Linear => 1.0 - s,
            Shape::SymPower { .. } => self.phi_near0(s),
            Shape::Custom(_) => 1.0 - self.phi_near1(s),
        }
    }

    /// ∫_0^t φ.
    #[inline]
    pub fn int_phi_near0(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Linear => t - 0.5 * t * t,
            Shape::SymPower { alpha, inv_norm } => {
                if t <= 0.5 {
                    t - (2.0 * t).powf(alpha + 1.0) * inv_norm
                } else {
                    0.5 - (2.0 * (1.0 - t)).powf(alpha + 1.0) * inv_norm
                }
            }
            Shape::Custom(c) => match &c.antiderivative {
                Some(phi) => phi(t),
                None => self.integrate_lossy(|u| self.phi_near0(u), t),
            },
        }
    }

    /// ∫_0^t (1 - φ).
    #[inline]
    pub fn int_comp_near0(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Linear => 0.5 * t * t,
            Shape::SymPower { alpha, inv_norm } => {
                if t <= 0.5 {
                    (2.0 * t).powf(alpha + 1.0) * inv_norm
                } else {
                    t - 0.5 + (2.0 * (1.0 - t)).powf(alpha + 1.0) * inv_norm
                }
            }
            Shape::Custom(_) => self.integrate_lossy(|u| self.comp_near0(u), t),
        }
    }

    /// ∫_{1-s}^1 φ.
    #[inline]
    pub fn int_phi_near1(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Linear => 0.5 * s * s,
            Shape::SymPower { .. } => self.int_comp_near0(s),
            Shape::Custom(_) => self.integrate_lossy(|v| self.phi_near1(v), s),
        }
    }

    /// ∫_{1-s}^1 (1 - φ).
    #[inline]
    pub fn int_comp_near1(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Linear => s - 0.5 * s * s,
            Shape::SymPower { .. } => self.int_phi_near0(s),
            Shape::Custom(_) => self.integrate_lossy(|v| self.comp_near1(v), s),
        }
    }

    // ---- inverses of the chart integrals, all on [0, 1/2] ------------------

    /// u ∈ [0, 1/2] with ∫_0^u φ = x.
    pub(crate) fn solve_int_phi_near0(&self, x: f64) -> Result<f64> {
        match &self.shape {
            // 2x / (1 + sqrt(1-2x)) is 1 - sqrt(1-2x) without cancellation.
            Shape::Linear => Ok(2.0 * x / (1.0 + (1.0 - 2.0 * x).sqrt())),
            _ => {
                let guess = x + self.c0 * x.powf(self.alpha + 1.0) / (self.alpha + 1.0);
                solve_increasing(
                    |u| (self.int_phi_near0(u), self.phi_near0(u)),
                    x,
                    0.5,
                    guess,
                    Scale::Linear,
                )
            }
        }
    }

    /// u ∈ [0, 1/2] with ∫_0^u (1-φ) = e.
    pub(crate) fn solve_int_comp_near0(&self, e: f64) -> Result<f64> {
        match &self.shape {
            Shape::Linear => Ok((2.0 * e).sqrt()),
            Shape::SymPower { alpha, .. } => Ok(0.5 * (4.0 * (alpha + 1.0) * e).powf(1.0 / (alpha + 1.0))),
            Shape::Custom(_) => {
                let p = self.alpha + 1.0;
                let guess = (p * e / self.c0).powf(1.0 / p);
                solve_increasing(
                    |u| (self.int_comp_near0(u), self.comp_near0(u)),
                    e,
                    0.5,
                    guess,
                    Scale::Log,
                )
            }
        }
    }

    /// r ∈ [0, 1/2] with ∫_{1-r}^1 φ = d.
    pub(crate) fn solve_int_phi_near1(&self, d: f64) -> Result<f64> {
        match &self.shape {
            Shape::Linear => Ok((2.0 * d).sqrt()),
            Shape::SymPower { .. } => self.solve_int_comp_near0(d),
            Shape::Custom(_) => {
                let p = self.alpha_prime + 1.0;
                let guess = (p * d / self.c1).powf(1.0 / p);
                solve_increasing(
                    |r| (self.int_phi_near1(r), self.phi_near1(r)),
                    d,
                    0.5,
                    guess,
                    Scale::Log,
                )
            }
        }
    }

    /// r ∈ [0, 1/2] with ∫_{1-r}^1 (1-φ) = g.
    pub(crate) fn solve_int_comp_near1(&self, g: f64) -> Result<f64> {
        match &self.shape {
            Shape::Linear => Ok(2.0 * g / (1.0 + (1.0 - 2.0 * g).sqrt())),
            Shape::SymPower { .. } => self.solve_int_phi_near0(g),
            Shape::Custom(_) => {
                let guess = g + self.c1 * g.powf(self.alpha_prime + 1.0) / (self.alpha_prime + 1.0);
                solve_increasing(
                    |r| (self.int_comp_near1(r), self.comp_near1(r)),
                    g,
                    0.5,
                    guess,
                    Scale::Linear,
                )
            }
        }
    }

    /// ∫_0^1 [-φ ln φ - (1-φ) ln(1-φ)], the Lyapunov exponent of the factor map.
    pub fn entropy_integral(&self) -> Result<f64> {
        fn h(p: f64, q: f64) -> f64 {
            let t = |v: f64| if v > 0.0 { -v * v.ln() } else { 0.0 };
            t(p) + t(q)
        }
        let lo = self.integrate(|t| h(self.phi_near0(t), self.comp_near0(t)), 0.0, 0.5)?;
        let hi = self.integrate(|s| h(self.phi_near1(s), self.comp_near1(s)), 0.0, 0.5)?;
        Ok(lo + hi)
    }

    /// Grid checks of the class conditions. Never fails; violations are reported.
    pub fn validate(&self, grid_size: usize) -> ValidationReport {
        let n = grid_size.max(16);
        let mut monotone_violations = 0;
        let mut bound_violations = 0;
        let mut flat_pairs = 0;
        let mut prev = f64::INFINITY;
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            let v = match &self.shape {
                Shape::Custom(c) => (c.eval)(t),
                _ => self.eval(t).unwrap_or(f64::NAN),
            };
            if !(0.0..=1.0).contains(&v) {
                bound_violations += 1;
            }
            if v > prev || v.is_nan() {
                monotone_violations += 1;
            } else if v == prev {
                flat_pairs += 1;
            }
            prev = v;
        }
        let phi_at_0 = self.phi_near0(0.0);
        let phi_at_1 = self.phi_near1(0.0);
        let alpha_hat = tangency_exponent(|t| self.comp_near0(t));
        let alpha_prime_hat = tangency_exponent(|s| self.phi_near1(s));
        let close = |hat: f64, want: f64| (hat - want).abs() <= 0.05 * want;
        let mut warnings = Vec::new();
        if flat_pairs > 0 {
            warnings.push(format!("{flat_pairs} flat grid pairs; phi is only non-increasing"));
        }
        ValidationReport {
            grid_size: n,
            monotone: monotone_violations == 0,
            monotone_violations,
            in_bounds: bound_violations == 0,
            bound_violations,
            phi_at_0,
            phi_at_1,
            endpoints_ok: (phi_at_0 - 1.0).abs() <= 1e-12 && phi_at_1.abs() <= 1e-12,
            balance_point: self.a,
            alpha_hat,
            alpha_prime_hat,
            alpha_ok: close(alpha_hat, self.alpha),
            alpha_prime_ok: close(alpha_prime_hat, self.alpha_prime),
            warnings,
        }
    }
}

/// Log-log slope of `g(t)` on t = 2^-j, j = 4..=40.
fn tangency_exponent(g: impl Fn(f64) -> f64) -> f64 {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 4..=40 {
        let t = 2f64.powi(-j);
        let v = g(t);
        if !(v > 0.0 && v.is_finite()) {
            return f64::NAN;
        }
        xs.push(t.ln());
        ys.push(v.ln());
    }
    crate::fit::ols(&xs, &ys).slope
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub grid_size: usize,
    pub monotone: bool,
    pub monotone_violations: usize,
    pub in_bounds: bool,
    pub bound_violations: usize,
    pub phi_at_0: f64,
    pub phi_at_1: f64,
    pub endpoints_ok: bool,
    pub balance_point: f64,
    pub alpha_hat: f64,
    pub alpha_prime_hat: f64,
    pub alpha_ok: bool,
    pub alpha_prime_ok: bool,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.monotone
            && self.in_bounds
            && self.endpoints_ok
            && self.alpha_ok
            && self.alpha_prime_ok
            && self.balance_point > 0.0
            && self.balance_point < 1.0
    }
}
