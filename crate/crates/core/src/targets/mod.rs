//! The functions being approximated, their domains and reference values.

mod dataset;
pub mod oracle;

pub use dataset::{
    exhaustive_float32_inputs, f32_round, grid_point, make_dataset, Dataset, Float32Inputs, Role, TEST_SIZE, TRAIN_SIZE,
    VALIDATION_SIZE,
};

use crate::dd::Dd;
use crate::error::{Error, Result};

/// Scale used by the shifted Airy target `1 + Ai(-k x)`.
pub const AIRY_K: f64 = 7.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetFunction {
    Exp2,
    Log2,
    Erf,
    AiryShifted,
}

/// A real interval with optionally open endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Domain {
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        let below = if self.hi_open { x < self.hi } else { x <= self.hi };
        above && below
    }

    /// Smallest and largest binary64 values inside the domain.
    pub fn closed_f64(&self) -> (f64, f64) {
        let lo = if self.lo_open { self.lo.next_up() } else { self.lo };
        let hi = if self.hi_open { self.hi.next_down() } else { self.hi };
        (lo, hi)
    }

    /// Smallest and largest binary32 values inside the domain.
    pub fn closed_f32(&self) -> (f32, f32) {
        let lo = self.lo as f32;
        let hi = self.hi as f32;
        let lo = if self.lo_open { lo.next_up() } else { lo };
        let hi = if self.hi_open { hi.next_down() } else { hi };
        (lo, hi)
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let l = if self.lo_open { '(' } else { '[' };
        let r = if self.hi_open { ')' } else { ']' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

impl TargetFunction {
    pub const ALL: [TargetFunction; 4] = [
        TargetFunction::Exp2,
        TargetFunction::Log2,
        TargetFunction::Erf,
        TargetFunction::AiryShifted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TargetFunction::Exp2 => "exp2",
            TargetFunction::Log2 => "log2",
            TargetFunction::Erf => "erf",
            TargetFunction::AiryShifted => "airy",
        }
    }

    pub fn domain(self) -> Domain {
        let d = |lo, hi, lo_open, hi_open| Domain { lo, hi, lo_open, hi_open };
        match self {
            TargetFunction::Exp2 => d(0.0, 1.0, true, false),
            TargetFunction::Log2 => d(1.0, 2.0, false, true),
            TargetFunction::Erf => d(0.0, 2.0, false, false),
            TargetFunction::AiryShifted => d(0.0, 1.0, false, false),
        }
    }

    /// Reference value at any point where the oracle is accurate, without the
    /// domain check. Exp2 accepts the whole binary64 range.
    pub fn eval_unchecked(self, x: f64) -> Dd {
        match self {
            TargetFunction::Exp2 => oracle::exp2(x),
            TargetFunction::Log2 => oracle::log2(x),
            TargetFunction::Erf => oracle::erf(x),
            TargetFunction::AiryShifted => Dd::ONE + oracle::airy_ai(Dd::from_f64(x).mul_f64(-AIRY_K)),
        }
    }

    /// Taylor coefficients `f^(k)(c) / k!` for `k = 0..=order`.
    pub fn taylor_coefficients(self, c: f64, order: usize) -> Vec<Dd> {
        let n = order + 1;
        match self {
            TargetFunction::Exp2 => {
                let mut out = Vec::with_capacity(n);
                let mut t = oracle::exp2(c);
                for k in 0..n {
                    if k > 0 {
                        t = (t * Dd::LN2).div_f64(k as f64);
                    }
                    out.push(t);
                }
                out
            }
            TargetFunction::Log2 => {
                let mut out = vec![oracle::log2(c)];
                let inv_c = Dd::ONE / Dd::from_f64(c);
                let mut p = Dd::ONE;
                for k in 1..n {
                    p = p * inv_c;
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    out.push((p * Dd::INV_LN2).div_f64(k as f64).mul_f64(sign));
                }
                out
            }
            TargetFunction::Erf => {
                // h = exp(-x^2) satisfies h' = -2 x h
                let cd = Dd::from_f64(c);
                let mut h = vec![oracle::exp(-(cd * cd))];
                for k in 0..n {
                    let prev = if k > 0 { h[k - 1] } else { Dd::ZERO };
                    let next = (cd * h[k] + prev).mul_f64(-2.0).div_f64((k + 1) as f64);
                    h.push(next);
                }
                let mut out = vec![oracle::erf(c)];
                for k in 1..n {
                    out.push((h[k - 1] * Dd::TWO_OVER_SQRT_PI).div_f64(k as f64));
                }
                out
            }
            TargetFunction::AiryShifted => {
                // Ai'' = z Ai about z0 = -k c, then substitute z = z0 - k u
                let zd = Dd::from_f64(c).mul_f64(-AIRY_K);
                let (v, d) = oracle::airy_ai_pair(zd);
                let mut a = vec![v, d];
                while a.len() < n.max(2) {
                    let m = a.len() - 2;
                    let prev = if m > 0 { a[m - 1] } else { Dd::ZERO };
                    a.push((zd * a[m] + prev).div_f64(((m + 2) * (m + 1)) as f64));
                }
                a.truncate(n);
                let mut scale = Dd::ONE;
                for (k, ak) in a.iter_mut().enumerate() {
                    if k > 0 {
                        scale = scale.mul_f64(-AIRY_K);
                    }
                    *ak = *ak * scale;
                }
                a[0] = a[0] + Dd::ONE;
                a
            }
        }
    }
}

impl std::str::FromStr for TargetFunction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp2" => Ok(TargetFunction::Exp2),
            "log2" => Ok(TargetFunction::Log2),
            "erf" => Ok(TargetFunction::Erf),
            "airy" | "airy_shifted" | "airyshifted" => Ok(TargetFunction::AiryShifted),
            _ => Err(Error::Usage(format!("unknown target {s:?}"))),
        }
    }
}

impl std::fmt::Display for TargetFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Reference value of `target` at `x`, which must lie in the target's domain.
pub fn oracle(target: TargetFunction, x: f64) -> Result<Dd> {
    if !target.domain().contains(x) {
        return Err(Error::Domain {
            target: target.name(),
            x,
        });
    }
    Ok(target.eval_unchecked(x))
}

/// `x = eta + xi` with `eta = floor(x)` and `xi` in `[0, 1)`, so that
/// `2^x = 2^eta * 2^xi`.
pub fn range_reduce_exp2(x: f64) -> Result<(i32, f64)> {
    if !x.is_finite() {
        return Err(Error::Range(format!("non-finite argument {x}")));
    }
    let eta = x.floor();
    if !(-1075.0..=1024.0).contains(&eta) {
        return Err(Error::Range(format!("2^{x} is outside the binary64 exponent range")));
    }
    Ok((eta as i32, x - eta))
}

/// `2^eta * value`.
pub fn reconstruct_exp2(eta: i32, value: f64) -> f64 {
    crate::ldexp(value, eta)
}

/// `x = 2^e * m` with `m` in `[1, 2)`, so that `log2 x = e + log2 m`.
pub fn range_reduce_log2(x: f64) -> Result<(i32, f64)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain { target: "log2", x });
    }
    let (m, e) = crate::frexp(x);
    Ok((e - 1, m * 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn oracle_trivial_values_and_domains() {
        assert_eq!(oracle(TargetFunction::Exp2, 1.0).unwrap(), Dd::from_f64(2.0));
        assert_eq!(oracle(TargetFunction::Erf, 0.0).unwrap(), Dd::ZERO);
        let a = oracle(TargetFunction::AiryShifted, 0.0).unwrap();
        assert_eq!(a, Dd::ONE + Dd::AIRY_AI0);
        assert!(matches!(oracle(TargetFunction::Exp2, 0.0), Err(Error::Domain { .. })));
        assert!(oracle(TargetFunction::Log2, 2.0).is_err());
        assert!(oracle(TargetFunction::Log2, 1.0).is_ok());
    }

    #[test]
    fn range_reduction_examples() {
        assert_eq!(range_reduce_exp2(3.5).unwrap(), (3, 0.5));
        assert_eq!(range_reduce_exp2(-0.25).unwrap(), (-1, 0.75));
        assert_eq!(range_reduce_exp2(0.0).unwrap(), (0, 0.0));
        assert!(range_reduce_exp2(5000.0).is_err());
        assert!(range_reduce_exp2(f64::NAN).is_err());
        assert_eq!(range_reduce_log2(12.0).unwrap(), (3, 1.5));
        assert_eq!(range_reduce_log2(1.0).unwrap(), (0, 1.0));
    }

    #[test]
    fn exp2_reconstruction_matches_direct_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(-100.0..100.0);
            let (eta, xi) = range_reduce_exp2(x).unwrap();
            let a = oracle::exp2(xi).ldexp(eta);
            let b = oracle::exp2(x);
            let rel = ((a - b).to_f64() / b.to_f64()).abs();
            // one double-double unit
            assert!(rel <= 2f64.powi(-104), "{x}: {rel:e}");
        }
    }

    #[test]
    fn oracles_are_monotone_on_grids() {
        for t in [TargetFunction::Exp2, TargetFunction::Log2, TargetFunction::Erf] {
            let (lo, hi) = t.domain().closed_f64();
            let mut prev = t.eval_unchecked(lo);
            for i in 1..=2000 {
                let x = lo + (hi - lo) * i as f64 / 2000.0;
                let v = t.eval_unchecked(x);
                assert!(v > prev, "{t} at {x}");
                prev = v;
            }
        }
    }

    #[test]
    fn taylor_coefficients_match_closed_forms() {
        let c = TargetFunction::Exp2.taylor_coefficients(0.0, 2);
        assert_eq!(c[0], Dd::ONE);
        assert_eq!(c[1], Dd::LN2);
        // every target: the series reproduces the oracle near the center
        for t in TargetFunction::ALL {
            let d = t.domain();
            let (lo, hi) = d.closed_f64();
            let center = 0.5 * (lo + hi);
            let cs = t.taylor_coefficients(center, 30);
            let x = center + 0.01;
            let u = x - center;
            let mut acc = Dd::ZERO;
            for k in cs.iter().rev() {
                acc = acc * Dd::from_f64(u) + *k;
            }
            let want = t.eval_unchecked(x);
            let rel = ((acc - want).to_f64() / want.to_f64()).abs();
            assert!(rel < 1e-28, "{t}: {rel:e}");
        }
    }
}
