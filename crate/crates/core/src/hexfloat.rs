//! C99-style hexadecimal float literals (`0x1.fffffe0000000p-1`).

use crate::error::{Error, Result};

/// Formats `v` like C's `%a` with a fixed 13-digit fraction, e.g.
/// `0x1.0000000000000p+0`. Zero is written `0x0.0p+0`.
pub fn format_hex(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sign = if v.is_sign_negative() { "-" } else { "" };
    if v == 0.0 {
        return format!("{sign}0x0.0p+0");
    }
    let bits = v.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (lead, exp) = if exp_bits == 0 { (0, -1022) } else { (1, exp_bits - 1023) };
    let esign = if exp >= 0 { "+" } else { "-" };
    format!("{sign}0x{lead}.{frac:013x}p{esign}{}", exp.abs())
}

/// Parses a hexadecimal float literal. Values that are not exactly
/// representable in binary64 are rejected.
pub fn parse_hex(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "inf" | "+inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    hexf_parse::parse_hexf64(t, false).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("bad hex float {t:?}: {e}"),
    })
}

/// Parses either a hex float or a decimal literal.
pub fn parse_float(s: &str) -> Result<f64> {
    let t = s.trim();
    let body = t.trim_start_matches(['+', '-']);
    if body.starts_with("0x") || body.starts_with("0X") {
        parse_hex(t)
    } else {
        t.parse::<f64>().map_err(|e| Error::Parse {
            line: 0,
            msg: format!("bad number {t:?}: {e}"),
        })
    }
}
