//! Classical approximations emitted as ordinary program graphs: Taylor
//! polynomials, Padé approximants, Chebyshev series, continued fractions for
//! the exponential, relative-error minimax polynomials, and imported
//! rational approximations.
//!
//! Polynomials are evaluated in Horner form in `u = x - center`. The shift
//! costs one operation and is left out when the center is zero.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, ProgramGraph, VertexId};
use crate::hexfloat::{format_hex, parse_float};
use crate::targets::TargetFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    TaylorHorner,
    Pade,
    Chebyshev,
    CfracEuler,
    CfracGauss,
    CfracMacon,
    PolyMinimax,
    RationalMinimaxImported,
}

impl Family {
    pub const GENERATED: [Family; 7] = [
        Family::TaylorHorner,
        Family::Pade,
        Family::Chebyshev,
        Family::CfracEuler,
        Family::CfracGauss,
        Family::CfracMacon,
        Family::PolyMinimax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::TaylorHorner => "taylor",
            Family::Pade => "pade",
            Family::Chebyshev => "chebyshev",
            Family::CfracEuler => "cfrac-euler",
            Family::CfracGauss => "cfrac-gauss",
            Family::CfracMacon => "cfrac-macon",
            Family::PolyMinimax => "minimax",
            Family::RationalMinimaxImported => "rational-import",
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Family> {
        Family::GENERATED
            .iter()
            .chain(&[Family::RationalMinimaxImported])
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown baseline family '{s}'")))
    }
}

/// Which baseline to build. Unset fields take per-family defaults: Taylor
/// and Padé expand about the domain midpoint, Chebyshev and minimax
/// polynomials are written in powers of `x - lo` over the closed domain
/// `[lo, hi]` (for Log2, `[1 + 2^-20, 2]`; for Erf the zero at
/// the origin is likewise excluded).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub family: Family,
    pub order: usize,
    /// Denominator order for Padé; defaults to `order`.
    pub denominator: Option<usize>,
    pub center: Option<f64>,
    pub interval: Option<(f64, f64)>,
}

impl BaselineSpec {
    pub fn new(family: Family, order: usize) -> BaselineSpec {
        BaselineSpec {
            family,
            order,
            denominator: None,
            center: None,
            interval: None,
        }
    }
}

/// Default closed interval for fitting-based families.
pub fn default_interval(target: TargetFunction) -> (f64, f64) {
    let d = target.domain();
    match target {
        TargetFunction::Log2 => (1.0 + 2f64.powi(-20), 2.0),
        TargetFunction::Erf => (2f64.powi(-20), 2.0),
        _ => (d.lo, d.hi),
    }
}

pub fn default_center(target: TargetFunction) -> f64 {
    let d = target.domain();
    0.5 * (d.lo + d.hi)
}

/// Builds the graph described by `spec`.
pub fn build(target: TargetFunction, spec: &BaselineSpec) -> Result<ProgramGraph> {
    let interval = spec.interval.unwrap_or_else(|| default_interval(target));
    match spec.family {
        Family::TaylorHorner => taylor_horner(target, spec.order, spec.center.unwrap_or_else(|| default_center(target))),
        Family::Pade => pade(
            target,
            spec.order,
            spec.denominator.unwrap_or(spec.order),
            spec.center.unwrap_or_else(|| default_center(target)),
        ),
        Family::Chebyshev => chebyshev(target, spec.order, interval, spec.center.unwrap_or(interval.0)),
        Family::CfracEuler | Family::CfracGauss | Family::CfracMacon => {
            if target != TargetFunction::Exp2 {
                return Err(Error::Usage("continued fractions are defined for exp2 only".into()));
            }
            let kind = match spec.family {
                Family::CfracEuler => CfKind::Euler,
                Family::CfracGauss => CfKind::Gauss,
                _ => CfKind::Macon,
            };
            continued_fraction(kind, spec.order)
        }
        Family::PolyMinimax => {
            remez_poly_minimax(target, spec.order, interval, spec.center.unwrap_or(interval.0)).map(|r| r.graph)
        }
        Family::RationalMinimaxImported => Err(Error::Usage("imported rationals are read from a file".into())),
    }
}

/// Rational function `num(u) / den(u)` with `u = x - center`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rational {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub center: f64,
    /// Error claimed by whatever produced the coefficients.
    pub reported_error: Option<f64>,
}

impl Rational {
    /// Horner numerator over Horner denominator with a single division; a
    /// denominator of exactly `[1]` is left out.
    pub fn to_graph(&self) -> Result<ProgramGraph> {
        if self.num.is_empty() || self.den.is_empty() {
            return Err(Error::Usage("empty numerator or denominator".into()));
        }
        let mut b = GraphBuilder::new();
        let u = shifted(&mut b, self.center);
        let n = b.horner(u, &self.num);
        let out = if self.den == [1.0] {
            n
        } else {
            let d = b.horner(u, &self.den);
            b.div(n, d)
        };
        b.build(out)
    }

    /// Line-based text: `center`, `reported_error`, `num` and `den` keys.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let hexes = |v: &[f64]| v.iter().map(|c| format_hex(*c)).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "center = {}", format_hex(self.center));
        if let Some(e) = self.reported_error {
            let _ = writeln!(s, "reported_error = {e:e}");
        }
        let _ = writeln!(s, "num = {}", hexes(&self.num));
        let _ = writeln!(s, "den = {}", hexes(&self.den));
        s
    }

    pub fn parse(text: &str) -> Result<Rational> {
        let mut num = None;
        let mut den = None;
        let mut center = 0.0;
        let mut reported_error = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected 'key = value', got '{line}'")))?;
            let values = value
                .split_whitespace()
                .map(|t| parse_float(t).map_err(|_| perr(format!("bad number '{t}'"))))
                .collect::<Result<Vec<f64>>>()?;
            let one = |v: &[f64]| -> Result<f64> {
                match v {
                    [x] => Ok(*x),
                    _ => Err(perr(format!("'{}' takes one value", key.trim()))),
                }
            };
            match key.trim() {
                "num" => num = Some(values),
                "den" => den = Some(values),
                "center" => center = one(&values)?,
                "reported_error" => reported_error = Some(one(&values)?),
                k => return Err(perr(format!("unknown key '{k}'"))),
            }
        }
        let num = num.filter(|v| !v.is_empty()).ok_or(Error::Parse {
            line: 0,
            msg: "missing numerator coefficients".into(),
        })?;
        let den = den.unwrap_or_else(|| vec![1.0]);
        if den.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: "empty denominator".into(),
            });
        }
        Ok(Rational {
            num,
            den,
            center,
            reported_error,
        })
    }
}

/// Reads a rational approximation produced by an external tool.
pub fn import_rational_minimax(text: &str) -> Result<(ProgramGraph, Rational)> {
    let r = Rational::parse(text)?;
    Ok((r.to_graph()?, r))
}

fn shifted(b: &mut GraphBuilder, center: f64) -> VertexId {
    let x = b.input();
    if center == 0.0 {
        x
    } else {
        let c = b.coeff(center);
        b.sub(x, c)
    }
}

fn to_f64s(v: &[Dd]) -> Vec<f64> {
    v.iter().map(|d| d.to_f64()).collect()
}

/// Order-`m` Taylor polynomial about `center`.
pub fn taylor_horner(target: TargetFunction, m: usize, center: f64) -> Result<ProgramGraph> {
    check_center(target, center)?;
    let coeffs = to_f64s(&target.taylor_coefficients(center, m));
    Rational {
        num: coeffs,
        den: vec![1.0],
        center,
        reported_error: None,
    }
    .to_graph()
}

fn check_center(target: TargetFunction, center: f64) -> Result<()> {
    let d = target.domain();
    if !(d.lo..=d.hi).contains(&center) {
        return Err(Error::Domain {
            target: target.name(),
            x: center,
        });
    }
    Ok(())
}

/// Gaussian elimination with partial pivoting in double-double. `None`
/// when a pivot vanishes relative to the matrix scale.
pub fn solve_dd(mut a: Vec<Vec<Dd>>, mut b: Vec<Dd>) -> Option<Vec<Dd>> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .map(|v| v.to_f64().abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].to_f64().abs() <= scale * 1e-30 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot = &upper[col];
        for (i, row) in lower.iter_mut().enumerate() {
            let r = col + 1 + i;
            let f = row[col] / pivot[col];
            if f.to_f64() == 0.0 {
                continue;
            }
            for (v, &t) in row[col..n].iter_mut().zip(&pivot[col..n]) {
                *v = *v - f * t;
            }
            let t = b[col];
            b[r] = b[r] - f * t;
        }
    }
    let mut x = vec![Dd::ZERO; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in (r + 1)..n {
            s = s - a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

/// Numerator and denominator of the `[m/n]` Padé approximant about `center`.
pub fn pade_coefficients(target: TargetFunction, m: usize, n: usize, center: f64) -> Result<Rational> {
    check_center(target, center)?;
    let a = target.taylor_coefficients(center, m + n);
    let at = |i: isize| if i < 0 { Dd::ZERO } else { a[i as usize] };
    // sum_{j=1..n} b_j a_{k-j} = -a_k for k = m+1 ..= m+n
    let mut den = vec![Dd::ONE];
    if n > 0 {
        let rows: Vec<Vec<Dd>> = (1..=n)
            .map(|r| (1..=n).map(|j| at((m + r) as isize - j as isize)).collect())
            .collect();
        let rhs: Vec<Dd> = (1..=n).map(|r| -at((m + r) as isize)).collect();
        let sol = solve_dd(rows, rhs).ok_or_else(|| Error::Numerical(format!("degenerate Padé order [{m}/{n}]")))?;
        den.extend(sol);
    }
    let num: Vec<Dd> = (0..=m)
        .map(|i| {
            let mut s = Dd::ZERO;
            for (j, bj) in den.iter().enumerate().take(i.min(n) + 1) {
                s = s + *bj * a[i - j];
            }
            s
        })
        .collect();
    Ok(Rational {
        num: to_f64s(&num),
        den: to_f64s(&den),
        center,
        reported_error: None,
    })
}

/// `[m/n]` Padé approximant about `center` as a ratio of Horner polynomials.
pub fn pade(target: TargetFunction, m: usize, n: usize, center: f64) -> Result<ProgramGraph> {
    pade_coefficients(target, m, n, center)?.to_graph()
}

fn cos_pi_frac(num: usize, den: usize) -> f64 {
    // cos(pi * num / den), reducing the argument exactly first
    let m = num % (2 * den);
    (std::f64::consts::PI * m as f64 / den as f64).cos()
}

/// Chebyshev coefficients of the target on `[a, b]` by Gauss-Chebyshev
/// quadrature, doubling the node count until two consecutive estimates
/// agree to 1e-15 relative.
pub fn chebyshev_coefficients(target: TargetFunction, m: usize, (a, b): (f64, f64)) -> Result<Vec<Dd>> {
    if !(a < b) {
        return Err(Error::Usage("empty interval".into()));
    }
    let estimate = |n: usize| -> Vec<Dd> {
        let f: Vec<Dd> = (0..n)
            .map(|k| {
                let t = cos_pi_frac(2 * k + 1, 2 * n);
                let x = (0.5 * (a + b) + 0.5 * (b - a) * t).clamp(a, b);
                target.eval_unchecked(x)
            })
            .collect();
        (0..=m)
            .map(|j| {
                let mut s = Dd::ZERO;
                for (k, fk) in f.iter().enumerate() {
                    s = s + fk.mul_f64(cos_pi_frac(j * (2 * k + 1), 2 * n));
                }
                let c = s.mul_f64(2.0).div_f64(n as f64);
                if j == 0 {
                    c.mul_f64(0.5)
                } else {
                    c
                }
            })
            .collect()
    };
    let mut n = (4 * (m + 1)).max(16);
    let mut prev = estimate(n);
    while n <= 1 << 15 {
        n *= 2;
        let next = estimate(n);
        let top = next.iter().map(|c| c.to_f64().abs()).fold(0.0, f64::max);
        let diff = next
            .iter()
            .zip(&prev)
            .map(|(x, y)| (*x - *y).to_f64().abs())
            .fold(0.0, f64::max);
        if diff <= 1e-15 * top {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical(format!(
        "Chebyshev quadrature for {} of degree {m} did not settle",
        target.name()
    )))
}

/// Multiplies polynomial `p` (ascending powers) by `(alpha * v + beta)`.
fn mul_linear(p: &[Dd], alpha: Dd, beta: Dd) -> Vec<Dd> {
    let mut out = vec![Dd::ZERO; p.len() + 1];
    for (i, c) in p.iter().enumerate() {
        out[i] = out[i] + *c * beta;
        out[i + 1] = out[i + 1] + *c * alpha;
    }
    out
}

/// Rewrites a Chebyshev series on `[a, b]` as a polynomial in `u = x - center`.
pub fn chebyshev_to_monomial(c: &[Dd], (a, b): (f64, f64), center: f64) -> Vec<Dd> {
    // t = (2x - a - b) / (b - a) = alpha * u + beta
    let width = Dd::from_f64(b) - Dd::from_f64(a);
    let alpha = Dd::from_f64(2.0) / width;
    let beta = (Dd::from_f64(center).mul_f64(2.0) - Dd::from_f64(a) - Dd::from_f64(b)) / width;
    let mut out = vec![Dd::ZERO; c.len()];
    let mut t_prev = vec![Dd::ONE];
    let mut t_cur = mul_linear(&[Dd::ONE], alpha, beta);
    for (j, cj) in c.iter().enumerate() {
        let tj = if j == 0 { &t_prev } else { &t_cur };
        for (k, v) in tj.iter().enumerate() {
            out[k] = out[k] + *cj * *v;
        }
        if j >= 1 {
            let mut next = mul_linear(&t_cur, alpha.mul_f64(2.0), beta.mul_f64(2.0));
            for (k, v) in t_prev.iter().enumerate() {
                next[k] = next[k] - *v;
            }
            t_prev = std::mem::replace(&mut t_cur, next);
        }
    }
    out
}

/// Degree-`m` Chebyshev approximation on `interval`, as a Horner polynomial
/// in `x - center`.
pub fn chebyshev(target: TargetFunction, m: usize, interval: (f64, f64), center: f64) -> Result<ProgramGraph> {
    let c = chebyshev_coefficients(target, m, interval)?;
    Rational {
        num: to_f64s(&chebyshev_to_monomial(&c, interval, center)),
        den: vec![1.0],
        center,
        reported_error: None,
    }
    .to_graph()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfKind {
    Euler,
    Gauss,
    Macon,
}

/// Partial numerators and denominators as polynomials in z.
type Poly = Vec<f64>;

/// `e^z = b0 + a1/(b1 + a2/(b2 + ...))`, truncated after `depth` levels:
///
/// * Euler: `1 + z/(1 - z/(z+2 - 2z/(z+3 - 3z/(z+4 - ...))))`
/// * Gauss: `1 + 2z/(2 - z + z^2/(6 + z^2/(10 + z^2/(14 + ...))))`
/// * Macon: `1 + z/(1 - z/(2 + z/(3 - z/(2 + z/(5 - z/(2 + ...))))))`
fn cf_terms(kind: CfKind, depth: usize) -> Vec<(Poly, Poly)> {
    (1..=depth)
        .map(|k| {
            let kf = k as f64;
            match kind {
                CfKind::Euler if k == 1 => (vec![0.0, 1.0], vec![1.0]),
                CfKind::Euler => (vec![0.0, -(kf - 1.0)], vec![kf, 1.0]),
                CfKind::Gauss if k == 1 => (vec![0.0, 2.0], vec![2.0, -1.0]),
                CfKind::Gauss => (vec![0.0, 0.0, 1.0], vec![4.0 * kf - 2.0]),
                CfKind::Macon if k == 1 => (vec![0.0, 1.0], vec![1.0]),
                CfKind::Macon => {
                    let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
                    let b = if k % 2 == 1 { kf } else { 2.0 };
                    (vec![0.0, sign], vec![b])
                }
            }
        })
        .collect()
}

/// Continued-fraction approximation of `2^x = e^{x ln 2}`. Depth 0 is the
/// constant 1. Fails if a partial denominator vanishes or changes sign on
/// the domain.
pub fn continued_fraction(kind: CfKind, depth: usize) -> Result<ProgramGraph> {
    let terms = cf_terms(kind, depth);
    check_poles(&terms)?;
    let ln2 = std::f64::consts::LN_2;
    let mut b = GraphBuilder::new();
    let x = b.input();
    let mut cache: HashMap<Vec<u64>, VertexId> = HashMap::new();
    // a polynomial in z becomes a Horner polynomial in x
    let mut poly = |b: &mut GraphBuilder, p: &Poly| -> VertexId {
        let key: Vec<u64> = p.iter().map(|c| c.to_bits()).collect();
        if let Some(&v) = cache.get(&key) {
            return v;
        }
        let in_x: Vec<f64> = p.iter().enumerate().map(|(i, c)| c * ln2.powi(i as i32)).collect();
        let v = if in_x.len() == 3 && in_x[0] == 0.0 && in_x[1] == 0.0 {
            // c z^2 as (c x) * x
            let k = b.coeff(in_x[2]);
            let cx = b.mul(k, x);
            b.mul(cx, x)
        } else {
            b.horner(x, &in_x)
        };
        cache.insert(key, v);
        v
    };
    let one = b.coeff(1.0);
    if terms.is_empty() {
        return b.build(one);
    }
    let (_, last_b) = &terms[depth - 1];
    let mut acc = poly(&mut b, last_b);
    for k in (1..depth).rev() {
        let num = poly(&mut b, &terms[k].0);
        let q = b.div(num, acc);
        let bk = poly(&mut b, &terms[k - 1].1);
        acc = b.add(bk, q);
    }
    let a1 = poly(&mut b, &terms[0].0);
    let q = b.div(a1, acc);
    let out = b.add(one, q);
    b.build(out)
}

fn check_poles(terms: &[(Poly, Poly)]) -> Result<()> {
    if terms.is_empty() {
        return Ok(());
    }
    let ln2 = std::f64::consts::LN_2;
    let eval = |p: &Poly, z: f64| p.iter().rev().fold(0.0, |acc, c| acc * z + c);
    let mut signs: Vec<Option<bool>> = vec![None; terms.len()];
    for i in 0..=1000 {
        let z = ln2 * i as f64 / 1000.0;
        let mut acc = eval(&terms[terms.len() - 1].1, z);
        for k in (0..terms.len()).rev() {
            if k + 1 < terms.len() {
                acc = eval(&terms[k].1, z) + eval(&terms[k + 1].0, z) / acc;
            }
            let s = acc > 0.0;
            if acc == 0.0 || !acc.is_finite() || signs[k].is_some_and(|p| p != s) {
                return Err(Error::Numerical(format!(
                    "continued fraction has a pole in the domain at level {}",
                    k + 1
                )));
            }
            signs[k] = Some(s);
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct MinimaxResult {
    pub graph: ProgramGraph,
    /// Coefficients in powers of `x - center`.
    pub coeffs: Vec<f64>,
    pub center: f64,
    /// Final reference points and the signed relative error at each.
    pub extrema: Vec<f64>,
    pub levels: Vec<f64>,
    pub iterations: usize,
}

impl MinimaxResult {
    /// `(max - min) / max` of the absolute extremal errors.
    pub fn levelness(&self) -> f64 {
        levelness(&self.levels)
    }
}

fn levelness(levels: &[f64]) -> f64 {
    let mx = levels.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mn = levels.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if mx == 0.0 {
        0.0
    } else {
        (mx - mn) / mx
    }
}

fn horner_dd(c: &[Dd], u: Dd) -> Dd {
    c.iter().rev().fold(Dd::ZERO, |acc, k| acc * u + *k)
}

/// Degree-`m` polynomial minimizing the maximum relative error on
/// `interval`, by the Remez exchange in double-double. The target must not
/// vanish on the interval.
pub fn remez_poly_minimax(target: TargetFunction, m: usize, (a, b): (f64, f64), center: f64) -> Result<MinimaxResult> {
    if !(a < b) {
        return Err(Error::Usage("empty interval".into()));
    }
    let n = m + 2;
    let cd = Dd::from_f64(center);
    let f = |x: f64| target.eval_unchecked(x);
    let rel = |c: &[Dd], x: f64| -> f64 {
        let fx = f(x);
        ((horner_dd(c, Dd::from_f64(x) - cd) - fx) / fx).to_f64()
    };

    // uniform, plus geometric clusters at both ends to resolve fast error
    // growth there
    let uniform = 4096 + 256 * m;
    let mut grid: Vec<f64> = (0..uniform)
        .map(|i| if i + 1 == uniform { b } else { a + (b - a) * i as f64 / (uniform - 1) as f64 })
        .collect();
    for s in 16..240 {
        let d = (b - a) * 2f64.powf(-(s as f64) / 4.0);
        grid.push(a + d);
        grid.push(b - d);
    }
    grid.retain(|x| (a..=b).contains(x));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let grid_n = grid.len();
    let fgrid: Vec<Dd> = grid.iter().map(|&x| f(x)).collect();
    if fgrid.iter().any(|v| v.hi == 0.0) {
        return Err(Error::Usage(format!("{} vanishes on the interval", target.name())));
    }

    let mut xs: Vec<f64> = (0..n)
        .map(|i| {
            let t = if n == 1 { 0.0 } else { -cos_pi_frac(i, n - 1) };
            (0.5 * (a + b) + 0.5 * (b - a) * t).clamp(a, b)
        })
        .collect();
    let mut coeffs = vec![Dd::ZERO; m + 1];
    let mut levels = vec![0.0; n];
    let mut last_max = f64::INFINITY;
    for iter in 1..=100 {
        // p(x_i) - (-1)^i E f(x_i) = f(x_i)
        let rows: Vec<Vec<Dd>> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let u = Dd::from_f64(x) - cd;
                let mut row = Vec::with_capacity(n);
                let mut p = Dd::ONE;
                for _ in 0..=m {
                    row.push(p);
                    p = p * u;
                }
                let s = if i % 2 == 0 { -1.0 } else { 1.0 };
                row.push(f(x).mul_f64(s));
                row
            })
            .collect();
        let rhs: Vec<Dd> = xs.iter().map(|&x| f(x)).collect();
        let sol = solve_dd(rows, rhs).ok_or_else(|| Error::Numerical("singular minimax system".into()))?;
        coeffs = sol[..=m].to_vec();

        let err: Vec<f64> = grid
            .iter()
            .zip(&fgrid)
            .map(|(&x, fx)| ((horner_dd(&coeffs, Dd::from_f64(x) - cd) - *fx) / *fx).to_f64())
            .collect();
        // one extremum per run of constant sign
        let mut ext: Vec<usize> = Vec::new();
        let mut start = 0;
        for i in 1..=grid_n {
            if i == grid_n || (err[i] > 0.0) != (err[start] > 0.0) {
                let best = (start..i).max_by(|&p, &q| err[p].abs().total_cmp(&err[q].abs())).unwrap();
                ext.push(best);
                start = i;
            }
        }
        while ext.len() > n {
            if err[ext[0]].abs() < err[*ext.last().unwrap()].abs() {
                ext.remove(0);
            } else {
                ext.pop();
            }
        }
        if ext.len() < n {
            return Err(Error::Numerical(format!(
                "minimax exchange lost alternation at iteration {iter}"
            )));
        }
        // refine each extremum between its grid neighbours
        let new_xs: Vec<f64> = ext
            .iter()
            .map(|&i| {
                let lo = grid[i.saturating_sub(1)];
                let hi = grid[(i + 1).min(grid_n - 1)];
                golden_max(|x| rel(&coeffs, x).abs(), lo, hi, grid[i])
            })
            .collect();
        levels = new_xs.iter().map(|&x| rel(&coeffs, x)).collect();
        xs = new_xs;
        let mx = levels.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let lv = levelness(&levels);
        let stalled = (last_max - mx).abs() <= 1e-12 * mx;
        if lv < 1e-6 || (stalled && lv < 1e-3) {
            return finish_minimax(coeffs, center, xs, levels, iter);
        }
        last_max = mx;
    }
    if levelness(&levels) < 1e-3 {
        return finish_minimax(coeffs, center, xs, levels, 100);
    }
    Err(Error::Numerical(format!(
        "minimax exchange did not converge in 100 iterations; last levels {levels:?}"
    )))
}

fn finish_minimax(coeffs: Vec<Dd>, center: f64, extrema: Vec<f64>, levels: Vec<f64>, iterations: usize) -> Result<MinimaxResult> {
    let c = to_f64s(&coeffs);
    let graph = Rational {
        num: c.clone(),
        den: vec![1.0],
        center,
        reported_error: None,
    }
    .to_graph()?;
    Ok(MinimaxResult {
        graph,
        coeffs: c,
        center,
        extrema,
        levels,
        iterations,
    })
}

/// Golden-section search for a maximum of `g` on `[lo, hi]`; never returns
/// a point worse than `start`.
fn golden_max<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, start: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..60 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
        if b - a <= f64::EPSILON * b.abs().max(a.abs()) {
            break;
        }
    }
    let best = if gc > gd { c } else { d };
    if g(best) >= g(start) {
        best
    } else {
        start
    }
}

/// Every member of a family whose graph has at most `max_ops` operations,
/// with its order label.
pub fn family_within(target: TargetFunction, family: Family, max_ops: usize) -> Vec<(String, ProgramGraph)> {
    let mut out = Vec::new();
    let mut push = |label: String, g: Result<ProgramGraph>| -> bool {
        match g {
            Ok(g) if g.count_operations() <= max_ops => {
                out.push((label, g));
                true
            }
            Ok(_) => false,
            Err(_) => true,
        }
    };
    match family {
        Family::Pade => {
            for m in 0..=max_ops {
                for n in 0..=max_ops {
                    if m + n > 2 * max_ops {
                        continue;
                    }
                    let spec = BaselineSpec {
                        denominator: Some(n),
                        ..BaselineSpec::new(family, m)
                    };
                    push(format!("[{m}/{n}]"), build(target, &spec));
                }
            }
        }
        Family::RationalMinimaxImported => {}
        _ => {
            for order in 0..=max_ops {
                if !push(format!("{order}"), build(target, &BaselineSpec::new(family, order))) {
                    break;
                }
            }
        }
    }
    out
}
