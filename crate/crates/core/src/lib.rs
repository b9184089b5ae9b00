//! Discovery, evaluation, benchmarking and interval certification of
//! straight-line arithmetic programs approximating transcendental functions.
//!
//! The pieces fit together as follows. [`graph`] holds the program
//! representation. [`targets`] supplies the functions being approximated and
//! their high-precision oracles. [`evalcore`] scores programs, using [`cmaes`]
//! to fit coefficients. [`dnsga`] runs the multi-objective search.
//! [`baselines`] builds classical approximations as ordinary programs,
//! [`certify`] proves error bounds with interval arithmetic and [`bench`]
//! measures throughput.

// `!(a <= b)` is used on purpose so that NaN takes the failing branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod certify;
pub mod cli;
pub mod cmaes;
pub mod config;
pub mod dd;
pub mod dnsga;
pub mod error;
pub mod evalcore;
pub mod fixtures;
pub mod graph;
pub mod hexfloat;
pub mod targets;

pub use error::{Error, Result};
pub use graph::{ArithmeticMode, GraphBuilder, Op, ProgramGraph};
pub use targets::TargetFunction;

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `x * 2^e`, exact whenever the result is representable (including
/// subnormal results reached from normal inputs in a single rounding).
pub fn ldexp(x: f64, e: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let (m, ex) = frexp(x);
    let big = ex as i64 + e as i64;
    if big > 1024 {
        return f64::INFINITY.copysign(x);
    }
    if big < -1075 {
        return 0.0f64.copysign(x);
    }
    let big = big as i32;
    if big >= -1021 {
        (m * 2.0) * pow2(big - 1)
    } else {
        // single rounding into the subnormal range
        (m * pow2(big + 1074)) * f64::from_bits(1)
    }
}

/// `x = m * 2^e` with `0.5 <= |m| < 1`; `x` finite and nonzero.
pub fn frexp(x: f64) -> (f64, i32) {
    let mut x = x;
    let mut adj = 0;
    if x.abs() < f64::MIN_POSITIVE {
        x *= pow2(54);
        adj = -54;
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let m = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (m, exp - 1022 + adj)
}

fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}
