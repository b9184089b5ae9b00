//! Rigorous enclosures of real numbers: outward-rounded binary64 intervals
//! and double-double midpoint-radius balls.

use serde::{Deserialize, Serialize};

use crate::dd::Dd;

/// Relative error bound of one double-double operation (the accurate
/// algorithms stay below `2^-102`), plus an absolute floor covering
/// underflow in the error-free transforms.
const DD_REL: f64 = 7.888_609_052_210_118e-31; // 2^-100
const DD_ABS: f64 = 9.332_636_185_032_189e-302; // 2^-1000

/// `a + b` rounded toward +inf (`up`) or -inf.
#[inline]
fn add_dir(a: f64, b: f64, up: bool) -> f64 {
    let (s, e) = crate::dd::two_sum(a, b);
    if !e.is_finite() || !s.is_finite() {
        return if up { s.next_up() } else { s.next_down() };
    }
    if up && e > 0.0 {
        s.next_up()
    } else if !up && e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
fn mul_dir(a: f64, b: f64, up: bool) -> f64 {
    let p = a * b;
    let e = a.mul_add(b, -p);
    if !p.is_finite() || !e.is_finite() || (p.abs() < 1e-290 && p != 0.0) || (p == 0.0 && a != 0.0 && b != 0.0) {
        return if up { p.next_up() } else { p.next_down() };
    }
    if up && e > 0.0 {
        p.next_up()
    } else if !up && e < 0.0 {
        p.next_down()
    } else {
        p
    }
}

#[inline]
fn div_dir(a: f64, b: f64, up: bool) -> f64 {
    let q = a / b;
    if a == 0.0 && b != 0.0 && b.is_finite() {
        return q;
    }
    if a.abs() < 1e-290 || !q.is_finite() || q.abs() < 1e-290 || !a.is_finite() || !b.is_finite() {
        return if up { q.next_up() } else { q.next_down() };
    }
    // a - q b is exact; its sign relative to b gives the rounding direction
    let r = (-q).mul_add(b, a);
    let excess = if b > 0.0 { r } else { -r };
    if up && excess > 0.0 {
        q.next_up()
    } else if !up && excess < 0.0 {
        q.next_down()
    } else {
        q
    }
}

#[inline]
pub(crate) fn add_up(a: f64, b: f64) -> f64 {
    add_dir(a, b, true)
}

#[inline]
pub(crate) fn mul_up(a: f64, b: f64) -> f64 {
    mul_dir(a, b, true)
}

#[inline]
pub(crate) fn div_up(a: f64, b: f64) -> f64 {
    div_dir(a, b, true)
}

/// Upper bound on `|d|`.
#[inline]
pub(crate) fn dd_mag(d: Dd) -> f64 {
    add_up(d.hi.abs(), d.lo.abs())
}

/// Lower bound on `|d|` (zero when unknown).
#[inline]
fn dd_mig(d: Dd) -> f64 {
    add_dir(d.hi.abs(), -d.lo.abs(), false).max(0.0)
}

/// Operations shared by the enclosure types.
pub trait Enclosure: Clone + std::fmt::Debug {
    fn constant(v: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// `None` when the divisor may be zero or anything is non-finite.
    fn div(&self, o: &Self) -> Option<Self>;
    /// Upper bound on the magnitude of every enclosed value.
    fn mag(&self) -> f64;
    fn contains_zero(&self) -> bool;
    fn is_finite(&self) -> bool;
    fn to_interval(&self) -> Interval;
    fn scale(&self, k: f64) -> Self {
        self.mul(&Self::constant(k))
    }
}

/// Closed interval with binary64 endpoints. Arithmetic rounds the lower end
/// down and the upper end up. A NaN endpoint never appears: undefined
/// results become the whole line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Interval {
        assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Interval {
        Interval { lo: x, hi: x }
    }

    fn checked(lo: f64, hi: f64) -> Interval {
        if lo.is_nan() || hi.is_nan() {
            Interval::ENTIRE
        } else {
            Interval { lo, hi }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Whether the exact real `hi + lo` of a double-double lies inside.
    pub fn contains_dd(&self, d: Dd) -> bool {
        let ge = d.hi > self.lo || (d.hi == self.lo && d.lo >= 0.0);
        let le = d.hi < self.hi || (d.hi == self.hi && d.lo <= 0.0);
        ge && le
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).next_up()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * self.lo + 0.5 * self.hi
    }

    fn products(a: &Interval, b: &Interval, f: impl Fn(f64, f64, bool) -> f64) -> Interval {
        let pairs = [(a.lo, b.lo), (a.lo, b.hi), (a.hi, b.lo), (a.hi, b.hi)];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (x, y) in pairs {
            let (l, h) = (f(x, y, false), f(x, y, true));
            if l.is_nan() || h.is_nan() {
                return Interval::ENTIRE;
            }
            lo = lo.min(l);
            hi = hi.max(h);
        }
        Interval::checked(lo, hi)
    }
}

impl Enclosure for Interval {
    fn constant(v: f64) -> Interval {
        Interval::point(v)
    }

    fn add(&self, o: &Interval) -> Interval {
        Interval::checked(add_dir(self.lo, o.lo, false), add_dir(self.hi, o.hi, true))
    }

    fn sub(&self, o: &Interval) -> Interval {
        Interval::checked(add_dir(self.lo, -o.hi, false), add_dir(self.hi, -o.lo, true))
    }

    fn mul(&self, o: &Interval) -> Interval {
        Interval::products(self, o, mul_dir)
    }

    fn div(&self, o: &Interval) -> Option<Interval> {
        if o.contains_zero() || !self.is_finite() || !o.is_finite() {
            return None;
        }
        Some(Interval::products(self, o, div_dir))
    }

    fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && 0.0 <= self.hi
    }

    fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    fn to_interval(&self) -> Interval {
        *self
    }
}

/// Midpoint-radius enclosure `[c - r, c + r]` with a double-double center.
/// Every operation adds the center's rounding error to the radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub c: Dd,
    pub r: f64,
}

impl Ball {
    pub fn exact(c: Dd) -> Ball {
        Ball { c, r: 0.0 }
    }

    pub fn new(c: Dd, r: f64) -> Ball {
        Ball { c, r }
    }

    /// The ball covering `[lo, hi]`, centered at the exact midpoint.
    pub fn from_bounds(lo: f64, hi: f64) -> Ball {
        let c = Dd::new(lo, hi).mul_f64(0.5);
        let r = ((hi - lo).next_up() * 0.5).next_up();
        Ball { c, r }
    }

    /// Grows the radius by `e` (rounded up).
    pub fn inflate(&self, e: f64) -> Ball {
        Ball {
            c: self.c,
            r: add_up(self.r, e),
        }
    }

    fn rounding(c: Dd) -> f64 {
        add_up(mul_up(dd_mag(c), DD_REL), DD_ABS)
    }

    pub fn neg(&self) -> Ball {
        Ball { c: -self.c, r: self.r }
    }

    pub fn sqr(&self) -> Ball {
        self.mul(self)
    }

    /// Lower bound on every enclosed magnitude.
    pub fn mig(&self) -> f64 {
        (dd_mig(self.c) - self.r).next_down().max(0.0)
    }

    pub fn lower(&self) -> f64 {
        let i = self.to_interval();
        i.lo
    }

    pub fn upper(&self) -> f64 {
        self.to_interval().hi
    }
}

impl Enclosure for Ball {
    fn constant(v: f64) -> Ball {
        Ball::exact(Dd::from_f64(v))
    }

    fn add(&self, o: &Ball) -> Ball {
        let c = self.c + o.c;
        Ball {
            c,
            r: add_up(add_up(self.r, o.r), Ball::rounding(c)),
        }
    }

    fn sub(&self, o: &Ball) -> Ball {
        self.add(&o.neg())
    }

    fn mul(&self, o: &Ball) -> Ball {
        let c = self.c * o.c;
        let spread = add_up(
            add_up(mul_up(dd_mag(self.c), o.r), mul_up(dd_mag(o.c), self.r)),
            mul_up(self.r, o.r),
        );
        Ball {
            c,
            r: add_up(spread, Ball::rounding(c)),
        }
    }

    fn div(&self, o: &Ball) -> Option<Ball> {
        if !self.is_finite() || !o.is_finite() {
            return None;
        }
        let low = dd_mig(o.c);
        if low <= o.r {
            return None;
        }
        let q = self.c / o.c;
        // exact residual self.c - q * o.c, bounded through two more rounded ops
        let qc = q * o.c;
        let rho = self.c - qc;
        let rho_err = add_up(Ball::rounding(qc), Ball::rounding(rho));
        let qerr = div_up(add_up(dd_mag(rho), rho_err), low);
        let qmag = add_up(dd_mag(q), qerr);
        let denom = (low - o.r).next_down();
        if !(denom > 0.0) {
            return None;
        }
        let spread = div_up(add_up(self.r, mul_up(qmag, o.r)), denom);
        let r = add_up(qerr, spread);
        if !r.is_finite() || !q.is_finite() {
            return None;
        }
        Some(Ball { c: q, r })
    }

    fn mag(&self) -> f64 {
        add_up(dd_mag(self.c), self.r)
    }

    fn contains_zero(&self) -> bool {
        dd_mig(self.c) <= self.r
    }

    fn is_finite(&self) -> bool {
        self.c.is_finite() && self.r.is_finite()
    }

    fn to_interval(&self) -> Interval {
        if !self.is_finite() {
            return Interval::ENTIRE;
        }
        // c - r and c + r, each rounded outward: one rounding in the f64 sum
        // of hi and the rest, and slack for dropping lo
        let lo = ((self.c.hi - self.r).next_down() + self.c.lo).next_down();
        let hi = ((self.c.hi + self.r).next_up() + self.c.lo).next_up();
        Interval::checked(lo, hi)
    }

    fn scale(&self, k: f64) -> Ball {
        self.mul(&Ball::constant(k))
    }
}

/// Constant known to double-double accuracy, as a ball.
pub fn dd_constant(c: Dd) -> Ball {
    Ball {
        c,
        r: add_up(mul_up(dd_mag(c), DD_REL), DD_ABS),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
        let scale = 10f64.powi(rng.gen_range(-8..8));
        let a = rng.gen_range(-1.0..1.0) * scale;
        let b = a + rng.gen_range(0.0..1.0) * scale * rng.gen_range(0.0..1.0f64).powi(4);
        Interval::new(a, b)
    }

    fn pick(rng: &mut ChaCha8Rng, i: &Interval) -> f64 {
        let t: f64 = rng.gen();
        (i.lo + (i.hi - i.lo) * t).clamp(i.lo, i.hi)
    }

    #[test]
    fn interval_inclusion_all_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50_000 {
            let a = random_interval(&mut rng);
            let b = random_interval(&mut rng);
            let x = pick(&mut rng, &a);
            let y = pick(&mut rng, &b);
            let (xd, yd) = (Dd::from_f64(x), Dd::from_f64(y));
            assert!(a.add(&b).contains_dd(xd + yd));
            assert!(a.sub(&b).contains_dd(xd - yd));
            assert!(a.mul(&b).contains_dd(xd * yd));
            if let Some(q) = a.div(&b) {
                assert!(q.contains_dd(xd / yd));
            }
        }
    }

    #[test]
    fn naive_square_overestimates() {
        let i = Interval::new(-1.0, 1.0);
        let sq = i.mul(&i);
        assert!(sq.lo <= -1.0 && sq.hi >= 1.0);
        assert!(Interval::new(-1.0, 1.0).div(&i).is_none());
        let nan = Interval::point(f64::INFINITY).mul(&Interval::point(0.0));
        assert_eq!(nan, Interval::ENTIRE);
    }

    #[test]
    fn ball_tracks_exact_rationals() {
        // 1/3 * 3 - 1 is enclosed tightly around zero
        let third = Ball::constant(1.0).div(&Ball::constant(3.0)).unwrap();
        let z = third.mul(&Ball::constant(3.0)).sub(&Ball::constant(1.0));
        assert!(z.contains_zero() && z.mag() < 1e-29);
        assert!(Ball::from_bounds(-1.0, 1.0).contains_zero());
        assert!(Ball::constant(1.0).div(&Ball::from_bounds(-1.0, 1.0)).is_none());
    }

    proptest! {
        #[test]
        fn ball_ops_enclose_dd_results(
            a in -1e3f64..1e3, ra in 0.0f64..1e-3, ta in -1.0f64..1.0,
            b in -1e3f64..1e3, rb in 0.0f64..1e-3, tb in -1.0f64..1.0,
        ) {
            let x = Ball::new(Dd::from_f64(a), ra);
            let y = Ball::new(Dd::from_f64(b), rb);
            let xv = Dd::from_f64(a) + Dd::from_f64(ra * ta);
            let yv = Dd::from_f64(b) + Dd::from_f64(rb * tb);
            let inside = |z: &Ball, v: Dd| (v - z.c).abs().to_f64() <= z.r * (1.0 + 1e-12) + 1e-300;
            prop_assert!(inside(&x.add(&y), xv + yv));
            prop_assert!(inside(&x.sub(&y), xv - yv));
            prop_assert!(inside(&x.mul(&y), xv * yv));
            if let Some(q) = x.div(&y) {
                prop_assert!(inside(&q, xv / yv));
            }
            let i = x.mul(&y).to_interval();
            prop_assert!(i.contains_dd(xv * yv));
        }
    }
}
