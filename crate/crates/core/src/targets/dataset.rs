use std::io::Write;

use super::TargetFunction;
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::graph::ArithmeticMode;
use crate::hexfloat::format_hex;

pub const TRAIN_SIZE: usize = 1_000;
pub const VALIDATION_SIZE: usize = 10_000;
pub const TEST_SIZE: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Train,
    Validation,
    Test,
    Custom,
}

/// Inputs with double-double reference labels. In `Float32` mode every input
/// is a binary32 value (stored widened).
#[derive(Clone, Debug)]
pub struct Dataset {
    pub target: TargetFunction,
    pub inputs: Vec<f64>,
    pub labels: Vec<Dd>,
    pub mode: ArithmeticMode,
    pub role: Role,
}

impl Dataset {
    /// Labels the given inputs with the oracle. Inputs outside the domain are errors.
    pub fn from_inputs(target: TargetFunction, inputs: Vec<f64>, mode: ArithmeticMode) -> Result<Dataset> {
        let mut labels = Vec::with_capacity(inputs.len());
        for &x in &inputs {
            labels.push(super::oracle(target, x)?);
        }
        Ok(Dataset {
            target,
            inputs,
            labels,
            mode,
            role: Role::Custom,
        })
    }

    pub fn with_role(mut self, role: Role) -> Dataset {
        self.role = role;
        self
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Label rounded to the mode's storage type.
    pub fn rounded_label(&self, i: usize) -> f64 {
        let v = self.labels[i].to_f64();
        match self.mode {
            ArithmeticMode::Float32 => f32_round(self.labels[i]) as f64,
            _ => v,
        }
    }

    /// CSV with hex-float columns `x,label_hi,label_lo`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,label_hi,label_lo")?;
        for (x, l) in self.inputs.iter().zip(&self.labels) {
            writeln!(w, "{},{},{}", format_hex(*x), format_hex(l.hi), format_hex(l.lo))?;
        }
        Ok(())
    }
}

/// Correct rounding of a double-double to binary32.
pub fn f32_round(v: Dd) -> f32 {
    let r = v.hi as f32;
    // hi may sit exactly on a binary32 midpoint; lo then decides the direction
    let back = r as f64;
    if back == v.hi || !r.is_finite() {
        return r;
    }
    let up = r.next_up() as f64;
    let down = r.next_down() as f64;
    let (a, b) = if back < v.hi { (back, up) } else { (down, back) };
    let mid = 0.5 * (a + b);
    if v.hi == mid && v.lo != 0.0 {
        if v.lo > 0.0 {
            b as f32
        } else {
            a as f32
        }
    } else {
        r
    }
}

/// `count` evenly spaced inputs over the target's domain. An open endpoint is
/// replaced by its nearest representable interior neighbour. In `Real64` mode
/// inputs where the target is exactly zero are dropped, since the relative
/// error is undefined there.
pub fn make_dataset(target: TargetFunction, count: usize, mode: ArithmeticMode) -> Result<Dataset> {
    if count < 2 {
        return Err(Error::Usage("a dataset needs at least two points".into()));
    }
    let mut inputs = Vec::with_capacity(count);
    for i in 0..count {
        let x = grid_point(target, count, mode, i);
        if inputs.last() != Some(&x) {
            inputs.push(x);
        }
    }
    let mut ds = Dataset::from_inputs(target, inputs, mode)?;
    if mode != ArithmeticMode::Float32 {
        let keep: Vec<bool> = ds.labels.iter().map(|l| l.hi != 0.0).collect();
        if keep.iter().any(|k| !k) {
            let mut k = keep.iter();
            ds.inputs.retain(|_| *k.next().unwrap());
            let mut k = keep.iter();
            ds.labels.retain(|_| *k.next().unwrap());
        }
    }
    Ok(ds)
}

/// Point `i` of the `count`-point evenly spaced grid used by [`make_dataset`].
/// Consecutive points may coincide after rounding to binary32.
pub fn grid_point(target: TargetFunction, count: usize, mode: ArithmeticMode, i: usize) -> f64 {
    let d = target.domain();
    let (lo, hi) = match mode {
        ArithmeticMode::Float32 => {
            let (a, b) = d.closed_f32();
            (a as f64, b as f64)
        }
        _ => d.closed_f64(),
    };
    if i == 0 {
        lo
    } else if i + 1 >= count {
        hi
    } else {
        let t = d.lo + (d.hi - d.lo) * (i as f64 / (count - 1) as f64);
        let t = if mode == ArithmeticMode::Float32 { t as f32 as f64 } else { t };
        t.clamp(lo, hi)
    }
}

/// Every binary32 value in the target's domain, ascending.
pub fn exhaustive_float32_inputs(target: TargetFunction) -> Float32Inputs {
    let (lo, hi) = target.domain().closed_f32();
    Float32Inputs {
        next: Some(lo),
        hi,
    }
}

#[derive(Clone, Debug)]
pub struct Float32Inputs {
    next: Option<f32>,
    hi: f32,
}

impl Iterator for Float32Inputs {
    type Item = f32;

    fn next(&mut self) -> Option<f32> {
        let cur = self.next?;
        if cur > self.hi {
            self.next = None;
            return None;
        }
        self.next = if cur == self.hi { None } else { Some(cur.next_up()) };
        Some(cur)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = match self.next {
            // all domains are non-negative, where bit patterns order like values
            Some(c) if c <= self.hi => (self.hi.to_bits() - c.abs().to_bits()) as usize + 1,
            _ => 0,
        };
        (n, Some(n))
    }
}

impl ExactSizeIterator for Float32Inputs {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grids_hit_the_endpoints() {
        let ds = make_dataset(TargetFunction::Exp2, 3, ArithmeticMode::Real64).unwrap();
        assert_eq!(ds.inputs, vec![f64::from_bits(1), 0.5, 1.0]);
        assert!((ds.labels[0].to_f64() - 1.0).abs() < 1e-15);
        assert_eq!(ds.labels[2].to_f64(), 2.0);

        let ds = make_dataset(TargetFunction::Log2, 2, ArithmeticMode::Float32).unwrap();
        assert_eq!(ds.inputs, vec![1.0, 2.0f32.next_down() as f64]);
        assert_eq!(ds.labels[0], Dd::ZERO);
        assert!((ds.labels[1].to_f64() - 1.0).abs() < 1e-7);

        // the zero of log2 is dropped in real mode
        let ds = make_dataset(TargetFunction::Log2, 2, ArithmeticMode::Real64).unwrap();
        assert_eq!(ds.inputs, vec![2.0f64.next_down()]);
        assert!(make_dataset(TargetFunction::Erf, 1, ArithmeticMode::Real64).is_err());
    }

    #[test]
    fn float32_datasets_hold_binary32_inputs() {
        let ds = make_dataset(TargetFunction::Erf, 1001, ArithmeticMode::Float32).unwrap();
        assert!(ds.inputs.iter().all(|&x| x as f32 as f64 == x));
        assert!(ds.inputs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exhaustive_log2_stream() {
        let it = exhaustive_float32_inputs(TargetFunction::Log2);
        assert_eq!(it.len(), 1 << 23);
        let mut n = 0usize;
        let mut prev = 0.0f32;
        for x in it {
            assert!(x > prev);
            prev = x;
            n += 1;
        }
        assert_eq!(n, 1 << 23);
        assert_eq!(prev, 2.0f32.next_down());
        let mut e = exhaustive_float32_inputs(TargetFunction::Exp2);
        assert_eq!(e.next(), Some(f32::from_bits(1)));
        assert_eq!(e.len(), 1.0f32.to_bits() as usize - 1);
    }

    #[test]
    fn f32_rounding_of_double_double() {
        let mid = 1.0 + 2f64.powi(-24);
        assert_eq!(f32_round(Dd { hi: mid, lo: 1e-30 }), 1.0f32.next_up());
        assert_eq!(f32_round(Dd { hi: mid, lo: -1e-30 }), 1.0);
        assert_eq!(f32_round(Dd { hi: mid, lo: 0.0 }), 1.0);
    }

    #[test]
    fn csv_export() {
        let ds = make_dataset(TargetFunction::Exp2, 2, ArithmeticMode::Real64).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,label_hi,label_lo");
        assert_eq!(lines[2], "0x1.0000000000000p+0,0x1.0000000000000p+1,0x0.0p+0");
    }
}
