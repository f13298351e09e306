//! The expanding interval map f induced by a cut function, and the 2D
//! baker-type step it is a factor of.
//!
//! Orbits are carried as [`Point`]s: positions near 1 are stored as their
//! distance to 1, so both indifferent fixed points are resolved with full
//! relative precision.

use serde::Serialize;

use crate::cutfunc::CutFunction;
use crate::error::{check_unit, Error, Result};

/// A position in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Point {
    /// x itself; used for x ≤ 1/2.
    Low(f64),
    /// 1 - x; used for x > 1/2.
    High(f64),
}

impl Point {
    pub fn from_x(x: f64) -> Point {
        if x <= 0.5 {
            Point::Low(x)
        } else {
            Point::High(1.0 - x)
        }
    }

    pub fn x(self) -> f64 {
        match self {
            Point::Low(v) => v,
            Point::High(v) => 1.0 - v,
        }
    }
}

/// One application of f with the log of its derivative at the start point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub next: Point,
    pub log_deriv: f64,
}

/// Which side of the branch point a point lies on, with accurate offsets.
#[derive(Debug, Clone, Copy)]
enum Branch {
    /// x < a, with `d = a - x`.
    Left { x: f64, d: f64 },
    /// x > a, with `e = x - a` and `g = 1 - x`.
    Right { e: f64, g: f64 },
}

#[derive(Debug, Clone)]
pub struct FactorMap {
    cut: CutFunction,
    a: f64,
    a_hi: f64,
    phi_half: f64,
    comp_half: f64,
}

impl FactorMap {
    pub fn new(cut: CutFunction) -> Result<Self> {
        let a = cut.balance_point();
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidCut(format!("balance point {a} not in (0, 1)")));
        }
        let (p0, p1) = (cut.phi_near0(0.0), cut.phi_near1(0.0));
        if (p0 - 1.0).abs() > 1e-12 || p1.abs() > 1e-12 {
            return Err(Error::InvalidCut(format!("need phi(0)=1 and phi(1)=0, got {p0} and {p1}")));
        }
        Ok(FactorMap {
            phi_half: cut.int_phi_near0(0.5),
            comp_half: cut.int_comp_near0(0.5),
            cut,
            a,
            a_hi: 1.0 - a,
        })
    }

    pub fn cut(&self) -> &CutFunction {
        &self.cut
    }

    /// The branch point a.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// 1 - a, the branch point in the high chart.
    pub fn a_high(&self) -> f64 {
        self.a_hi
    }

    fn branch(&self, p: Point) -> Result<Branch> {
        match p {
            Point::Low(v) if v < self.a => Ok(Branch::Left { x: v, d: self.a - v }),
            Point::Low(v) if v > self.a => Ok(Branch::Right { e: v - self.a, g: 1.0 - v }),
            Point::High(v) if v > self.a_hi => Ok(Branch::Left {
                x: 1.0 - v,
                d: v - self.a_hi,
            }),
            Point::High(v) if v < self.a_hi => Ok(Branch::Right { e: self.a_hi - v, g: v }),
            _ => Err(Error::SingularInput(p.x())),
        }
    }

    /// f on the left branch; returns the image and the denominator φ(f(x)) as
    /// a (value, complement) pair.
    #[inline]
    fn left(&self, x: f64, d: f64) -> Result<(Point, f64, f64)> {
        let c = &self.cut;
        if x <= self.phi_half {
            let u = c.solve_int_phi_near0(x)?;
            let comp = c.comp_near0(u);
            Ok((Point::Low(u), 1.0 - comp, comp))
        } else {
            let r = c.solve_int_phi_near1(d)?;
            let phi = c.phi_near1(r);
            Ok((Point::High(r), phi, 1.0 - phi))
        }
    }

    /// f on the right branch; denominator is 1 - φ(f(x)).
    #[inline]
    fn right(&self, e: f64, g: f64) -> Result<(Point, f64, f64)> {
        let c = &self.cut;
        if e <= self.comp_half {
            let u = c.solve_int_comp_near0(e)?;
            let comp = c.comp_near0(u);
            Ok((Point::Low(u), comp, 1.0 - comp))
        } else {
            let r = c.solve_int_comp_near1(g)?;
            let phi = c.phi_near1(r);
            Ok((Point::High(r), 1.0 - phi, phi))
        }
    }

    #[inline]
    fn apply(&self, b: Branch) -> Result<(Point, f64, f64)> {
        match b {
            Branch::Left { x, d } => self.left(x, d),
            Branch::Right { e, g } => self.right(e, g),
        }
    }

    /// f(p) and ln f'(p). The log-derivative is +inf if f' overflows.
    #[inline]
    pub fn step(&self, p: Point) -> Result<Step> {
        let (next, denom, one_minus) = self.apply(self.branch(p)?)?;
        Ok(Step {
            next,
            log_deriv: log_inverse(denom, one_minus),
        })
    }

    /// f(p) without the derivative.
    #[inline]
    pub fn advance(&self, p: Point) -> Result<Point> {
        Ok(self.apply(self.branch(p)?)?.0)
    }

    /// f at x = a - d for d > 0, without forming x.
    pub fn step_below_a(&self, d: f64) -> Result<Step> {
        if !(d > 0.0 && d <= self.a) {
            return Err(Error::Domain {
                what: "d",
                value: d,
                domain: "(0, a]",
            });
        }
        let (next, denom, one_minus) = self.left(self.a - d, d)?;
        Ok(Step {
            next,
            log_deriv: log_inverse(denom, one_minus),
        })
    }

    /// f at x = a + e for e > 0, without forming x.
    pub fn step_above_a(&self, e: f64) -> Result<Step> {
        if !(e > 0.0 && e <= self.a_hi) {
            return Err(Error::Domain {
                what: "e",
                value: e,
                domain: "(0, 1-a]",
            });
        }
        let (next, denom, one_minus) = self.right(e, self.a_hi - e)?;
        Ok(Step {
            next,
            log_deriv: log_inverse(denom, one_minus),
        })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.advance(Point::from_x(x))?.x())
    }

    /// f'(x); equals 1 at both fixed points and may be +inf next to a.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        let (_, denom, _) = self.apply(self.branch(Point::from_x(x))?)?;
        Ok(1.0 / denom)
    }

    /// The left inverse branch, Φ(x).
    pub fn inverse_left(&self, x: f64) -> Result<f64> {
        self.cut.antiderivative(x)
    }

    /// The right inverse branch, a + x - Φ(x).
    pub fn inverse_right(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(if x <= 0.5 {
            self.a + self.cut.int_comp_near0(x)
        } else {
            1.0 - self.cut.int_comp_near1(1.0 - x)
        })
    }

    /// Distance from p to the nearest of 0, a, 1, computed in p's chart.
    #[inline]
    pub fn dist_exceptional(&self, p: Point) -> f64 {
        match p {
            Point::Low(v) => v.min((v - self.a).abs()),
            Point::High(v) => v.min((v - self.a_hi).abs()),
        }
    }

    /// The first `n + 1` points of the orbit of `x0` and the log-derivatives
    /// along it. Landing exactly on a ends the record early.
    pub fn orbit(&self, x0: f64, n: usize) -> Result<OrbitRecord> {
        check_unit("x0", x0)?;
        let mut p = Point::from_x(x0);
        self.branch(p)?;
        let mut points = Vec::with_capacity(n + 1);
        let mut log_derivs = Vec::with_capacity(n);
        points.push(p);
        for j in 0..n {
            match self.step(p) {
                Ok(s) => {
                    log_derivs.push(s.log_deriv);
                    p = s.next;
                    points.push(p);
                }
                Err(Error::SingularInput(_)) => {
                    return Ok(OrbitRecord {
                        points,
                        log_derivs,
                        singular_at: Some(j),
                    })
                }
                Err(e) => return Err(e),
            }
        }
        let singular_at = self.branch(p).is_err().then_some(n);
        Ok(OrbitRecord {
            points,
            log_derivs,
            singular_at,
        })
    }

    /// One step of the area-preserving square map: (f(x), g(x, y)).
    pub fn gbt_step(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        check_unit("x", x)?;
        check_unit("y", y)?;
        let b = self.branch(Point::from_x(x))?;
        let (next, denom, one_minus) = self.apply(b)?;
        // φ at the image point, read off the derivative denominator.
        let (phi, y2) = match b {
            Branch::Left { .. } => (denom, denom * y),
            Branch::Right { .. } => (one_minus, y + one_minus * (1.0 - y)),
        };
        debug_assert!((0.0..=1.0).contains(&phi));
        Ok((next.x(), y2))
    }
}

/// -ln(v) where `one_minus = 1 - v` is known accurately.
#[inline]
fn log_inverse(v: f64, one_minus: f64) -> f64 {
    if one_minus < 0.5 {
        -(-one_minus).ln_1p()
    } else {
        -v.ln()
    }
}

/// Orbit points `x_0..x_m` and `ln f'(x_j)` for `j < m`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitRecord {
    pub points: Vec<Point>,
    pub log_derivs: Vec<f64>,
    /// Index of the point that hit a exactly, if any.
    pub singular_at: Option<usize>,
}

impl OrbitRecord {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear() -> FactorMap {
        FactorMap::new(CutFunction::linear()).unwrap()
    }

    fn maps() -> Vec<FactorMap> {
        vec![
            linear(),
            FactorMap::new(CutFunction::symmetric_power(0.5).unwrap()).unwrap(),
            FactorMap::new(CutFunction::symmetric_power(0.25).unwrap()).unwrap(),
            FactorMap::new(CutFunction::power_family(0.6, 0.6).unwrap()).unwrap(),
        ]
    }

    #[test]
    fn linear_examples() {
        let m = linear();
        assert!((m.eval(0.375).unwrap() - 0.5).abs() < 1e-15);
        assert!((m.eval(0.625).unwrap() - 0.5).abs() < 1e-15);
        assert!((m.derivative(0.375).unwrap() - 2.0).abs() < 1e-14);
        assert!((m.derivative(0.625).unwrap() - 2.0).abs() < 1e-14);
        assert!((m.eval(0.6).unwrap() - 0.2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.inverse_left(0.5).unwrap(), 0.375);
        assert_eq!(m.inverse_right(0.5).unwrap(), 0.625);
    }

    #[test]
    fn fixed_points_and_singularity() {
        for m in maps() {
            assert_eq!(m.eval(0.0).unwrap(), 0.0);
            assert_eq!(m.eval(1.0).unwrap(), 1.0);
            assert_eq!(m.derivative(0.0).unwrap(), 1.0);
            assert_eq!(m.derivative(1.0).unwrap(), 1.0);
            assert_eq!(m.inverse_left(0.0).unwrap(), 0.0);
            assert!((m.inverse_left(1.0).unwrap() - m.a()).abs() < 1e-15);
            assert!((m.inverse_right(0.0).unwrap() - m.a()).abs() < 1e-15);
            assert!((m.inverse_right(1.0).unwrap() - 1.0).abs() < 1e-15);
            assert!(matches!(m.eval(m.a()), Err(Error::SingularInput(_))));
            assert!(matches!(m.gbt_step(m.a(), 0.3), Err(Error::SingularInput(_))));
        }
    }

    #[test]
    fn round_trips_and_invariance_identity() {
        for m in maps() {
            for i in 0..=1000 {
                let x = i as f64 / 1000.0;
                let l = m.inverse_left(x).unwrap();
                let r = m.inverse_right(x).unwrap();
                assert!((l + (r - m.a()) - x).abs() <= 1e-12);
                if l != m.a() {
                    assert!((m.eval(l).unwrap() - x).abs() <= 1e-10, "left x={x}");
                }
                if r != m.a() {
                    assert!((m.eval(r).unwrap() - x).abs() <= 1e-10, "right x={x}");
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for m in maps() {
            for i in 1..200 {
                let x = i as f64 / 200.0;
                if (x - m.a()).abs() < 0.02 || !(0.02..=0.98).contains(&x) {
                    continue;
                }
                let h = 1e-6;
                let fd = (m.eval(x + h).unwrap() - m.eval(x - h).unwrap()) / (2.0 * h);
                let d = m.derivative(x).unwrap();
                assert!(((fd - d) / d).abs() < 1e-6, "x={x} fd={fd} d={d}");
                assert!(d >= 1.0);
            }
        }
    }

    #[test]
    fn symmetric_kinds_commute_with_reflection() {
        for m in maps().into_iter().take(3) {
            for i in 1..1000 {
                let x = i as f64 / 1000.0;
                if x == 0.5 {
                    continue;
                }
                let l = m.eval(x).unwrap();
                let r = m.eval(1.0 - x).unwrap();
                assert!((l + r - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn step_log_derivative_is_consistent() {
        for m in maps() {
            for i in 1..100 {
                let x = i as f64 / 100.0;
                if x == m.a() {
                    continue;
                }
                let s = m.step(Point::from_x(x)).unwrap();
                let d = m.derivative(x).unwrap();
                assert!((s.log_deriv - d.ln()).abs() < 1e-12);
                assert!((s.next.x() - m.eval(x).unwrap()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn offsets_from_a_match_points() {
        let m = linear();
        let s = m.step_above_a(0.125).unwrap();
        assert!((s.next.x() - 0.5).abs() < 1e-15);
        let s = m.step_below_a(0.125).unwrap();
        assert!((s.next.x() - 0.5).abs() < 1e-15);
        // Tiny offsets keep full precision: f(a + e) = sqrt(2e) for the linear map.
        let s = m.step_above_a(1e-40).unwrap();
        assert!((s.next.x() / 2e-40f64.sqrt() - 1.0).abs() < 1e-14);
        assert!(m.step_above_a(0.0).is_err());
    }

    #[test]
    fn orbit_examples() {
        let m = linear();
        let o = m.orbit(0.375, 2).unwrap();
        assert_eq!(o.singular_at, Some(1));
        assert_eq!(o.points.len(), 2);
        assert_eq!(o.log_derivs.len(), 1);

        let o = m.orbit(0.6, 1).unwrap();
        assert_eq!(o.singular_at, None);
        assert!((o.xs()[1] - 0.447_213_595_5).abs() < 1e-10);

        for m in maps() {
            for x0 in [1e-300, 1e-12] {
                let xs = m.orbit(x0, 5).unwrap().xs();
                assert!(xs.windows(2).all(|w| w[1] >= w[0]));
            }
            let xs = m.orbit(1e-12, 5).unwrap().xs();
            assert!(xs.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn gbt_examples() {
        let m = linear();
        let (x, y) = m.gbt_step(0.375, 0.4).unwrap();
        assert!((x - 0.5).abs() < 1e-15 && (y - 0.2).abs() < 1e-15);
        let (x, y) = m.gbt_step(0.625, 0.4).unwrap();
        assert!((x - 0.5).abs() < 1e-15 && (y - 0.7).abs() < 1e-15);
        for m in maps() {
            let (x, y) = m.gbt_step(0.2, 0.0).unwrap();
            assert_eq!(x, m.eval(0.2).unwrap());
            assert_eq!(y, 0.0);
        }
    }

    #[test]
    fn high_chart_resolves_near_one() {
        let m = linear();
        // Near 1 the linear map moves 1-x = s to s + s^2/2, a shift far
        // below the spacing of f64 values of x itself.
        let s = 1e-9;
        let st = m.step(Point::High(s)).unwrap();
        match st.next {
            Point::High(v) => assert!(((v - s) / (s * s) - 0.5).abs() < 1e-6, "{v}"),
            other => panic!("{other:?}"),
        }
    }
}
