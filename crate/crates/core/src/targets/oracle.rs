//! Double-double reference implementations. Each keeps well over 70 correct
//! bits on the domains used here; none of them is rigorous (the certifier has
//! its own enclosures).

use crate::dd::Dd;

/// `e^t`.
pub fn exp(t: Dd) -> Dd {
    if t.hi.is_nan() {
        return t;
    }
    if t.hi > 709.8 {
        return Dd::from_f64(f64::INFINITY);
    }
    if t.hi < -745.2 {
        return Dd::ZERO;
    }
    let n = (t.hi * std::f64::consts::LOG2_E).round();
    let r = t - Dd::LN2.mul_f64(n);
    exp_reduced(r).ldexp(n as i32)
}

/// `e^r` for `|r| <= 0.5`.
fn exp_reduced(r: Dd) -> Dd {
    const SQUARINGS: i32 = 8;
    let s = r.ldexp(-SQUARINGS);
    // Taylor series of e^s - 1; |s| < 2^-9 so 11 terms leave < 2^-110
    let mut term = s;
    let mut sum = s;
    for k in 2..=11 {
        term = (term * s).div_f64(k as f64);
        sum = sum + term;
    }
    // (1 + m)^2 - 1 = m (2 + m), keeping the small part separate
    for _ in 0..SQUARINGS {
        sum = sum * sum.add_f64(2.0);
    }
    sum.add_f64(1.0)
}

/// `2^x`.
pub fn exp2(x: f64) -> Dd {
    if !x.is_finite() {
        return Dd::from_f64(x.exp2());
    }
    if x > 1024.0 {
        return Dd::from_f64(f64::INFINITY);
    }
    if x < -1080.0 {
        return Dd::ZERO;
    }
    let n = x.round();
    let f = x - n; // exact
    exp_reduced(Dd::LN2.mul_f64(f)).ldexp(n as i32)
}

/// Natural logarithm of a positive double-double.
pub fn ln(x: Dd) -> Dd {
    if !(x.hi > 0.0) || !x.is_finite() {
        return Dd::from_f64(x.hi.ln());
    }
    let (_, e) = crate::frexp(x.hi);
    // scale into [sqrt(1/2), sqrt(2))
    let mut k = e - 1;
    let mut m = x.ldexp(-k);
    if m.hi > std::f64::consts::SQRT_2 {
        m = m.ldexp(-1);
        k += 1;
    }
    let s = (m - Dd::ONE) / (m + Dd::ONE);
    Dd::LN2.mul_f64(k as f64) + atanh_series(s).ldexp(1)
}

/// `atanh(s)` for `|s| <= 0.18`.
fn atanh_series(s: Dd) -> Dd {
    let s2 = s * s;
    let mut pow = s;
    let mut sum = s;
    let mut k = 3.0;
    loop {
        pow = pow * s2;
        let term = pow.div_f64(k);
        sum = sum + term;
        if term.hi.abs() <= sum.hi.abs() * 1e-34 || term.hi == 0.0 {
            break;
        }
        k += 2.0;
    }
    sum
}

/// `log2(x)` for positive finite `x`.
pub fn log2(x: f64) -> Dd {
    if x == 1.0 {
        return Dd::ZERO;
    }
    ln(Dd::from_f64(x)) * Dd::INV_LN2
}

/// `erf(x)` for `|x| <= 3`, by the alternating Maclaurin series.
pub fn erf(x: f64) -> Dd {
    if x == 0.0 {
        return Dd::ZERO;
    }
    let xd = Dd::from_f64(x);
    let x2 = xd * xd;
    // sum (-1)^n x^(2n+1) / (n! (2n+1))
    let mut p = xd; // (-1)^n x^(2n+1) / n!
    let mut sum = xd;
    let mut n = 1.0;
    loop {
        p = -(p * x2).div_f64(n);
        let term = p.div_f64(2.0 * n + 1.0);
        sum = sum + term;
        if term.hi.abs() < 1e-36 * sum.hi.abs() {
            break;
        }
        n += 1.0;
    }
    sum * Dd::TWO_OVER_SQRT_PI
}

/// `(Ai(z), Ai'(z))` for `-10 <= z <= 2` by the Maclaurin series.
pub fn airy_ai_pair(zd: Dd) -> (Dd, Dd) {
    // coefficients obey a[n+3] = a[n] / ((n+3)(n+2)), a0 = Ai(0), a1 = Ai'(0), a2 = 0
    let mut a = [Dd::AIRY_AI0, -Dd::AIRY_NEG_AIP0, Dd::ZERO];
    let mut zn = [Dd::ONE, zd, zd * zd]; // z^n for the three residues
    let z3 = zn[2] * zd;
    let mut val = a[0] + a[1] * zd;
    let mut der = a[1];
    let mut n = 0usize;
    let mut quiet = 0;
    loop {
        let r = n % 3;
        let next = a[r].div_f64(((n + 3) * (n + 2)) as f64);
        // z^(n+2) for the derivative term (n+3) a[n+3] z^(n+2)
        let zn2 = zn[r] * zd * zd;
        zn[r] = zn[r] * z3;
        a[r] = next;
        let tv = next * zn[r];
        let td = (next * zn2).mul_f64((n + 3) as f64);
        val = val + tv;
        der = der + td;
        let small = tv.hi.abs() < 1e-36 && td.hi.abs() < 1e-36;
        quiet = if small || next.hi == 0.0 { quiet + 1 } else { 0 };
        if quiet >= 3 || n > 400 {
            break;
        }
        n += 1;
    }
    (val, der)
}

pub fn airy_ai(z: Dd) -> Dd {
    airy_ai_pair(z).0
}
