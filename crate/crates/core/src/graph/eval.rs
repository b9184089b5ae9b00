use super::{Op, ProgramGraph, VertexKind};
use crate::dd::Dd;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ArithmeticMode {
    /// binary64 round-to-nearest, standing in for real arithmetic
    Real64,
    /// binary32 round-to-nearest after every operation
    Float32,
    /// double-double; used for oracles only
    Extended,
}

impl ArithmeticMode {
    pub fn name(self) -> &'static str {
        match self {
            ArithmeticMode::Real64 => "real64",
            ArithmeticMode::Float32 => "float32",
            ArithmeticMode::Extended => "extended",
        }
    }

    /// Rounds a coefficient to the values this mode can hold.
    pub fn bind(self, c: f64) -> f64 {
        match self {
            ArithmeticMode::Float32 => c as f32 as f64,
            _ => c,
        }
    }
}

impl std::str::FromStr for ArithmeticMode {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "real64" | "real" | "f64" => Ok(ArithmeticMode::Real64),
            "float32" | "float" | "f32" => Ok(ArithmeticMode::Float32),
            "extended" => Ok(ArithmeticMode::Extended),
            _ => Err(crate::Error::Usage(format!("unknown arithmetic mode {s:?}"))),
        }
    }
}

/// A value domain programs can be evaluated over.
pub trait Arith {
    type V: Clone;
    fn constant(&self, c: f64) -> Self::V;
    fn binary(&self, op: Op, a: &Self::V, b: &Self::V) -> Self::V;
}

pub struct F64Arith;
pub struct F32Arith;
pub struct DdArith;

impl Arith for F64Arith {
    type V = f64;
    fn constant(&self, c: f64) -> f64 {
        c
    }
    #[inline]
    fn binary(&self, op: Op, a: &f64, b: &f64) -> f64 {
        match op {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div => a / b,
        }
    }
}

impl Arith for F32Arith {
    type V = f32;
    fn constant(&self, c: f64) -> f32 {
        c as f32
    }
    #[inline]
    fn binary(&self, op: Op, a: &f32, b: &f32) -> f32 {
        match op {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div => a / b,
        }
    }
}

impl Arith for DdArith {
    type V = Dd;
    fn constant(&self, c: f64) -> Dd {
        Dd::from_f64(c)
    }
    fn binary(&self, op: Op, a: &Dd, b: &Dd) -> Dd {
        match op {
            Op::Add => *a + *b,
            Op::Sub => *a - *b,
            Op::Mul => *a * *b,
            Op::Div => *a / *b,
        }
    }
}

impl ProgramGraph {
    /// Values of every vertex, in vertex order.
    pub fn trace_with<A: Arith>(&self, arith: &A, x: A::V, coeffs: &[A::V]) -> Vec<A::V> {
        let pos = self.position_map();
        let mut vals: Vec<A::V> = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            let val = match v.kind {
                VertexKind::Input => x.clone(),
                VertexKind::Coeff(i) => coeffs[i].clone(),
                VertexKind::Binary { op, lhs, rhs } => arith.binary(op, &vals[pos[&lhs]], &vals[pos[&rhs]]),
            };
            vals.push(val);
        }
        vals
    }

    pub fn eval_with<A: Arith>(&self, arith: &A, x: A::V, coeffs: &[A::V]) -> A::V {
        let out = self.position(self.output).expect("output exists");
        self.trace_with(arith, x, coeffs).swap_remove(out)
    }

    /// Evaluates with explicit coefficients under `mode`. Non-finite results
    /// propagate; nothing aborts.
    pub fn evaluate(&self, x: f64, coeffs: &[f64], mode: ArithmeticMode) -> f64 {
        assert_eq!(coeffs.len(), self.coeffs.len(), "coefficient count mismatch");
        match mode {
            ArithmeticMode::Real64 => self.eval_with(&F64Arith, x, coeffs),
            ArithmeticMode::Float32 => {
                let cs: Vec<f32> = coeffs.iter().map(|&c| c as f32).collect();
                self.eval_with(&F32Arith, x as f32, &cs) as f64
            }
            ArithmeticMode::Extended => {
                let cs: Vec<Dd> = coeffs.iter().map(|&c| Dd::from_f64(c)).collect();
                self.eval_with(&DdArith, Dd::from_f64(x), &cs).to_f64()
            }
        }
    }

    /// Evaluates with the bound coefficients.
    pub fn eval(&self, x: f64, mode: ArithmeticMode) -> f64 {
        self.evaluate(x, &self.coeffs, mode)
    }

    pub fn eval_dd(&self, x: f64, coeffs: &[f64]) -> Dd {
        let cs: Vec<Dd> = coeffs.iter().map(|&c| Dd::from_f64(c)).collect();
        self.eval_with(&DdArith, Dd::from_f64(x), &cs)
    }
}

#[derive(Clone, Copy, Debug)]
enum Operand {
    Input,
    Coeff(usize),
    Slot(usize),
}

#[derive(Clone, Copy, Debug)]
struct Instr {
    op: Op,
    a: Operand,
    b: Operand,
    /// no dependence on the input; computed once per batch
    scalar: bool,
}

/// A graph compiled to a flat instruction list for batched evaluation.
/// Input-independent instructions are hoisted and computed once per call.
#[derive(Clone, Debug)]
pub struct Tape {
    instrs: Vec<Instr>,
    output: Operand,
    num_coeffs: usize,
}

const CHUNK: usize = 256;

trait Lane: Copy + Default {
    fn apply(op: Op, a: Self, b: Self) -> Self;
}

impl Lane for f64 {
    #[inline(always)]
    fn apply(op: Op, a: f64, b: f64) -> f64 {
        F64Arith.binary(op, &a, &b)
    }
}

impl Lane for f32 {
    #[inline(always)]
    fn apply(op: Op, a: f32, b: f32) -> f32 {
        F32Arith.binary(op, &a, &b)
    }
}

#[inline(always)]
fn kernel<T: Lane, const OP: u8>(dst: &mut [T], a: &[T], b: &[T]) {
    let op = match OP {
        0 => Op::Add,
        1 => Op::Sub,
        2 => Op::Mul,
        _ => Op::Div,
    };
    for ((d, &x), &y) in dst.iter_mut().zip(a).zip(b) {
        *d = T::apply(op, x, y);
    }
}

#[inline(always)]
fn kernel_vs<T: Lane>(op: Op, dst: &mut [T], a: &[T], s: T, swap: bool) {
    macro_rules! run {
        ($f:expr) => {
            for (d, &x) in dst.iter_mut().zip(a) {
                *d = $f(x);
            }
        };
    }
    match (op, swap) {
        (Op::Add, _) => run!(|x| T::apply(Op::Add, x, s)),
        (Op::Mul, _) => run!(|x| T::apply(Op::Mul, x, s)),
        (Op::Sub, false) => run!(|x| T::apply(Op::Sub, x, s)),
        (Op::Sub, true) => run!(|x| T::apply(Op::Sub, s, x)),
        (Op::Div, false) => run!(|x| T::apply(Op::Div, x, s)),
        (Op::Div, true) => run!(|x| T::apply(Op::Div, s, x)),
    }
}

impl Tape {
    pub fn compile(graph: &ProgramGraph) -> Tape {
        let dep = graph.depends_on_input();
        let pos = graph.position_map();
        let operand = |p: usize| match graph.vertices[p].kind {
            VertexKind::Input => Operand::Input,
            VertexKind::Coeff(i) => Operand::Coeff(i),
            VertexKind::Binary { .. } => Operand::Slot(p),
        };
        let mut instrs = Vec::new();
        let mut slot_of = vec![usize::MAX; graph.vertices.len()];
        for (p, v) in graph.vertices.iter().enumerate() {
            if let VertexKind::Binary { op, lhs, rhs } = v.kind {
                let remap = |o: Operand| match o {
                    Operand::Slot(q) => Operand::Slot(slot_of[q]),
                    o => o,
                };
                let a = remap(operand(pos[&lhs]));
                let b = remap(operand(pos[&rhs]));
                slot_of[p] = instrs.len();
                instrs.push(Instr {
                    op,
                    a,
                    b,
                    scalar: !dep[p],
                });
            }
        }
        let out = match operand(pos[&graph.output]) {
            Operand::Slot(q) => Operand::Slot(slot_of[q]),
            o => o,
        };
        Tape {
            instrs,
            output: out,
            num_coeffs: graph.num_coeffs(),
        }
    }

    pub fn num_coeffs(&self) -> usize {
        self.num_coeffs
    }

    pub fn eval_f64(&self, xs: &[f64], coeffs: &[f64], out: &mut [f64]) {
        self.run(xs, coeffs, out)
    }

    pub fn eval_f32(&self, xs: &[f32], coeffs: &[f32], out: &mut [f32]) {
        self.run(xs, coeffs, out)
    }

    fn run<T: Lane>(&self, xs: &[T], coeffs: &[T], out: &mut [T]) {
        assert_eq!(xs.len(), out.len());
        assert_eq!(coeffs.len(), self.num_coeffs, "coefficient count mismatch");
        let n_ins = self.instrs.len();
        let mut scalars = vec![T::default(); n_ins];
        for (i, ins) in self.instrs.iter().enumerate() {
            if ins.scalar {
                let get = |o: Operand| match o {
                    Operand::Coeff(k) => coeffs[k],
                    Operand::Slot(s) => scalars[s],
                    Operand::Input => unreachable!("scalar instruction reads the input"),
                };
                scalars[i] = T::apply(ins.op, get(ins.a), get(ins.b));
            }
        }
        let mut bufs = vec![T::default(); n_ins * CHUNK];
        for (xc, oc) in xs.chunks(CHUNK).zip(out.chunks_mut(CHUNK)) {
            let len = xc.len();
            for (i, ins) in self.instrs.iter().enumerate() {
                if ins.scalar {
                    continue;
                }
                let (before, rest) = bufs.split_at_mut(i * CHUNK);
                let dst = &mut rest[..len];
                enum Src<'a, T> {
                    V(&'a [T]),
                    S(T),
                }
                let src = |o: Operand| -> Src<'_, T> {
                    match o {
                        Operand::Input => Src::V(xc),
                        Operand::Coeff(k) => Src::S(coeffs[k]),
                        Operand::Slot(s) if self.instrs[s].scalar => Src::S(scalars[s]),
                        Operand::Slot(s) => Src::V(&before[s * CHUNK..s * CHUNK + len]),
                    }
                };
                match (src(ins.a), src(ins.b)) {
                    (Src::V(a), Src::V(b)) => match ins.op {
                        Op::Add => kernel::<T, 0>(dst, a, b),
                        Op::Sub => kernel::<T, 1>(dst, a, b),
                        Op::Mul => kernel::<T, 2>(dst, a, b),
                        Op::Div => kernel::<T, 3>(dst, a, b),
                    },
                    (Src::V(a), Src::S(s)) => kernel_vs(ins.op, dst, a, s, false),
                    (Src::S(s), Src::V(b)) => kernel_vs(ins.op, dst, b, s, true),
                    (Src::S(_), Src::S(_)) => unreachable!("vector instruction with scalar operands"),
                }
            }
            match self.output {
                Operand::Input => oc.copy_from_slice(xc),
                Operand::Coeff(k) => oc.fill(coeffs[k]),
                Operand::Slot(s) if self.instrs[s].scalar => oc.fill(scalars[s]),
                Operand::Slot(s) => oc.copy_from_slice(&bufs[s * CHUNK..s * CHUNK + len]),
            }
        }
    }
}
