//! Rigorous ball enclosures of the target functions and their Taylor jets.
//! Each value is a series evaluated at the ball's center with an explicit
//! tail bound, then widened by a derivative bound over the radius.

use super::enclosure::{add_up, dd_constant, dd_mag, mul_up, Ball, Enclosure};
use super::jet::Jet;
use crate::dd::Dd;
use crate::targets::{TargetFunction, AIRY_K};

fn int(k: usize) -> Ball {
    Ball::constant(k as f64)
}

fn ln2() -> Ball {
    dd_constant(Dd::LN2)
}

/// Upper bound on `e^t - 1` for `t >= 0`, allowing for libm error.
fn expm1_up(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    mul_up(t.exp_m1(), 1.0 + 1e-12).next_up()
}

fn point_exp(y: Dd) -> Option<Ball> {
    if !y.is_finite() || y.hi.abs() > 700.0 {
        return None;
    }
    let mut j = 0i32;
    while y.hi.abs() > crate::ldexp(1.0, j - 8) {
        j += 1;
    }
    let s = Ball::exact(y).scale(crate::ldexp(1.0, -j));
    const N: usize = 12;
    let mut sum = Ball::constant(1.0);
    for k in (1..N).rev() {
        sum = sum.mul(&s).div(&int(k))?.add(&Ball::constant(1.0));
    }
    // tail: sum_{k >= N} |s|^k / k! <= 1.01 |s|^N / N!
    let sm = s.mag();
    let mut tail = 1.01f64;
    for k in 1..=N {
        tail = mul_up(tail, sm) / k as f64;
        tail = tail.next_up();
    }
    let mut e = sum.inflate(tail);
    for _ in 0..j {
        e = e.sqr();
    }
    Some(e)
}

/// Encloses `e^y` for every `y` in the ball.
pub fn exp_ball(y: &Ball) -> Option<Ball> {
    let p = point_exp(y.c)?;
    let g = expm1_up(y.r);
    // |e^(c+d) - e^c| <= e^c (e^r - 1) for |d| <= r
    let r = add_up(mul_up(p.r, add_up(1.0, g)), mul_up(dd_mag(p.c), g));
    Some(Ball::new(p.c, r))
}

/// Encloses `2^x` over the ball.
pub fn exp2_ball(x: &Ball) -> Option<Ball> {
    exp_ball(&x.mul(&ln2()))
}

/// Encloses `log2 x` over a ball of positive numbers.
pub fn log2_ball(x: &Ball) -> Option<Ball> {
    let low = x.mig();
    if x.c.hi <= 0.0 || low <= 0.0 {
        return None;
    }
    let c = Ball::exact(x.c);
    let s = c.sub(&Ball::constant(1.0)).div(&c.add(&Ball::constant(1.0)))?;
    let s2 = s.sqr();
    let sm = s.mag();
    if sm >= 0.9 {
        return None;
    }
    // ln c = 2 atanh s = 2 sum s^(2k+1) / (2k+1)
    let mut pow = s;
    let mut sum = s;
    let mut k = 1usize;
    loop {
        pow = pow.mul(&s2);
        sum = sum.add(&pow.div(&int(2 * k + 1))?);
        k += 1;
        if pow.mag() <= 1e-36 * sum.mag() + 1e-290 || k > 400 {
            break;
        }
    }
    // tail from exponent 2k+1: 2 |s|^(2k+1) / ((2k+1)(1 - s^2))
    let next = mul_up(pow.mag(), mul_up(sm, sm));
    let tail = (next / ((2 * k + 1) as f64 * (1.0 - sm * sm).next_down())).next_up();
    let ln = sum.scale(2.0).inflate(mul_up(tail, 2.0));
    let mut v = ln.div(&ln2())?;
    let spread = (x.r / (low * std::f64::consts::LN_2).next_down()).next_up();
    v = v.inflate(spread);
    Some(v)
}

/// Encloses `erf x` over the ball.
pub fn erf_ball(x: &Ball) -> Option<Ball> {
    let c = Ball::exact(x.c);
    let c2 = c.sqr();
    // sum (-1)^n c^(2n+1) / (n! (2n+1))
    let mut term = c; // (-1)^n c^(2n+1) / n!
    let mut sum = c;
    let mut n = 0usize;
    loop {
        n += 1;
        term = term.mul(&c2).neg().div(&int(n))?;
        let t = term.div(&int(2 * n + 1))?;
        sum = sum.add(&t);
        let ratio = c2.mag() / (n + 1) as f64;
        if ratio <= 0.5 && t.mag() <= 1e-36 * sum.mag() + 1e-290 {
            break;
        }
        if n > 500 {
            return None;
        }
    }
    // later terms shrink by at least half each step
    let tail = mul_up(term.mag(), 2.0);
    let v = sum.inflate(tail).mul(&dd_constant(Dd::TWO_OVER_SQRT_PI));
    Some(v.inflate(mul_up(x.r, std::f64::consts::FRAC_2_SQRT_PI.next_up())))
}

/// Maclaurin sums for `Ai(z)` and `Ai'(z)` at the center of the ball,
/// without widening.
fn airy_point(z: Dd) -> Option<(Ball, Ball)> {
    let zb = Ball::exact(z);
    let zm = zb.mag();
    let z3 = zb.mul(&zb).mul(&zb);
    // coefficients a_n with a_{n+3} = a_n / ((n+3)(n+2))
    let mut a = [dd_constant(Dd::AIRY_AI0), dd_constant(-Dd::AIRY_NEG_AIP0), Ball::constant(0.0)];
    let mut zp = [Ball::constant(1.0), zb, zb.mul(&zb)];
    let mut val = a[0].add(&a[1].mul(&zb));
    let mut der = a[1];
    let mut last_v = [0.0f64; 3];
    let mut last_d = [0.0f64; 3];
    let mut n = 0usize;
    loop {
        let r = n % 3;
        a[r] = a[r].div(&int((n + 3) * (n + 2)))?;
        let zn2 = zp[r].mul(&zb).mul(&zb);
        zp[r] = zp[r].mul(&z3);
        let tv = a[r].mul(&zp[r]);
        let td = a[r].mul(&zn2).mul(&int(n + 3));
        val = val.add(&tv);
        der = der.add(&td);
        last_v[r] = tv.mag();
        last_d[r] = td.mag();
        n += 1;
        if n >= 3 {
            let m = n - 1;
            let ratio_ok = zm.powi(3) / (m as f64 * (m + 2) as f64) <= 0.5;
            let small = last_v.iter().chain(&last_d).all(|&t| t < 1e-36);
            if ratio_ok && small {
                break;
            }
        }
        if n > 600 {
            return None;
        }
    }
    let tv: f64 = last_v.iter().fold(0.0, |s, &t| add_up(s, mul_up(t, 2.0)));
    let td: f64 = last_d.iter().fold(0.0, |s, &t| add_up(s, mul_up(t, 2.0)));
    Some((val.inflate(tv), der.inflate(td)))
}

/// Bound on `|Ai|` along the real axis.
const AI_MAX: f64 = 0.536;

/// Encloses `(Ai(z), Ai'(z))` over the ball.
pub fn airy_ball(z: &Ball) -> Option<(Ball, Ball)> {
    let (v, d) = airy_point(z.c)?;
    let reach = add_up(dd_mag(z.c), z.r);
    // |Ai''(z)| = |z Ai(z)| <= reach * AI_MAX
    let d2 = mul_up(reach, AI_MAX);
    let dv = mul_up(z.r, add_up(d.mag(), mul_up(z.r, d2)));
    let dd = mul_up(z.r, d2);
    Some((v.inflate(dv), d.inflate(dd)))
}

/// Taylor jet of the target at base `x` (any base in the ball), up to `order`.
pub fn target_jet(target: TargetFunction, x: &Ball, order: usize) -> Option<Jet<Ball>> {
    let n = order + 1;
    let mut c = Vec::with_capacity(n);
    match target {
        TargetFunction::Exp2 => {
            let l = ln2();
            let mut t = exp2_ball(x)?;
            for k in 0..n {
                if k > 0 {
                    t = t.mul(&l).div(&int(k))?;
                }
                c.push(t);
            }
        }
        TargetFunction::Log2 => {
            c.push(log2_ball(x)?);
            let inv = Ball::constant(1.0).div(x)?;
            let base = inv.div(&ln2())?;
            let mut p = base;
            for k in 1..n {
                if k > 1 {
                    p = p.mul(&inv);
                }
                let t = p.div(&int(k))?;
                c.push(if k % 2 == 1 { t } else { t.neg() });
            }
        }
        TargetFunction::Erf => {
            c.push(erf_ball(x)?);
            if n > 1 {
                // h = exp(-x^2); (k+1) h_{k+1} = -2 (x h_k + h_{k-1})
                let mut h = vec![exp_ball(&x.sqr().neg())?];
                for k in 0..n - 2 {
                    let prev = if k == 0 { Ball::constant(0.0) } else { h[k - 1] };
                    let next = x.mul(&h[k]).add(&prev).scale(-2.0).div(&int(k + 1))?;
                    h.push(next);
                }
                let s = dd_constant(Dd::TWO_OVER_SQRT_PI);
                for k in 1..n {
                    c.push(h[k - 1].mul(&s).div(&int(k))?);
                }
            }
        }
        TargetFunction::AiryShifted => {
            let z = x.scale(-AIRY_K);
            let (ai, aip) = airy_ball(&z)?;
            // Taylor coefficients of Ai at z: (n+2)(n+1) a_{n+2} = z a_n + a_{n-1}
            let mut a = vec![ai, aip];
            for m in 0..n.saturating_sub(2) {
                let prev = if m == 0 { Ball::constant(0.0) } else { a[m - 1] };
                let next = z.mul(&a[m]).add(&prev).div(&int((m + 2) * (m + 1)))?;
                a.push(next);
            }
            a.truncate(n);
            let mut scale = Ball::constant(1.0);
            for (k, ak) in a.into_iter().enumerate() {
                if k > 0 {
                    scale = scale.scale(-AIRY_K);
                }
                let mut t = ak.mul(&scale);
                if k == 0 {
                    t = t.add(&Ball::constant(1.0));
                }
                c.push(t);
            }
        }
    }
    if c.iter().all(|b| b.is_finite()) {
        Some(Jet { c })
    } else {
        None
    }
}
