//! Truncated Taylor series over an enclosure type, and program evaluation
//! on them.

use super::enclosure::Enclosure;
use crate::graph::{Op, ProgramGraph, VertexKind};

/// Coefficients `c_0 .. c_n` of a truncated Taylor expansion. Every
/// coefficient encloses the exact one for every base point in the base
/// enclosure.
#[derive(Clone, Debug)]
pub struct Jet<E> {
    pub c: Vec<E>,
}

impl<E: Enclosure> Jet<E> {
    pub fn constant(v: E, order: usize) -> Jet<E> {
        let mut c = vec![E::constant(0.0); order + 1];
        c[0] = v;
        Jet { c }
    }

    /// The independent variable at base `x`.
    pub fn variable(x: E, order: usize) -> Jet<E> {
        let mut j = Jet::constant(x, order);
        if order >= 1 {
            j.c[1] = E::constant(1.0);
        }
        j
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn add(&self, o: &Jet<E>) -> Jet<E> {
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, o: &Jet<E>) -> Jet<E> {
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn mul(&self, o: &Jet<E>) -> Jet<E> {
        let n = self.c.len();
        let c = (0..n)
            .map(|k| {
                let mut s = self.c[0].mul(&o.c[k]);
                for j in 1..=k {
                    s = s.add(&self.c[j].mul(&o.c[k - j]));
                }
                s
            })
            .collect();
        Jet { c }
    }

    /// `None` when the constant term of the divisor may vanish.
    pub fn div(&self, o: &Jet<E>) -> Option<Jet<E>> {
        let n = self.c.len();
        let b0 = &o.c[0];
        if b0.contains_zero() {
            return None;
        }
        let mut q: Vec<E> = Vec::with_capacity(n);
        for k in 0..n {
            let mut s = self.c[k].clone();
            for j in 1..=k {
                s = s.sub(&o.c[j].mul(&q[k - j]));
            }
            q.push(s.div(b0)?);
        }
        Some(Jet { c: q })
    }

    pub fn binary(&self, op: Op, o: &Jet<E>) -> Option<Jet<E>> {
        Some(match op {
            Op::Add => self.add(o),
            Op::Sub => self.sub(o),
            Op::Mul => self.mul(o),
            Op::Div => self.div(o)?,
        })
    }
}

/// What stopped a program evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PossiblePole {
    /// Position of the division vertex whose denominator may vanish.
    pub vertex: usize,
}

#[derive(Clone, Copy, Debug)]
enum Step {
    Input,
    Const(f64),
    Binary(Op, usize, usize),
}

/// A program flattened for repeated evaluation on enclosures.
#[derive(Clone, Debug)]
pub struct JetProgram {
    steps: Vec<Step>,
    output: usize,
}

impl JetProgram {
    /// Coefficients are bound here and enter as exact constants.
    pub fn new(graph: &ProgramGraph, coeffs: &[f64]) -> JetProgram {
        let pos: std::collections::HashMap<_, _> = graph.vertices().iter().enumerate().map(|(i, v)| (v.id, i)).collect();
        let steps = graph
            .vertices()
            .iter()
            .map(|v| match v.kind {
                VertexKind::Input => Step::Input,
                VertexKind::Coeff(k) => Step::Const(coeffs[k]),
                VertexKind::Binary { op, lhs, rhs } => Step::Binary(op, pos[&lhs], pos[&rhs]),
            })
            .collect();
        JetProgram {
            steps,
            output: pos[&graph.output()],
        }
    }

    pub fn has_division(&self) -> bool {
        self.steps.iter().any(|s| matches!(s, Step::Binary(Op::Div, ..)))
    }

    pub fn eval<E: Enclosure>(&self, x: &Jet<E>) -> Result<Jet<E>, PossiblePole> {
        let order = x.order();
        let mut vals: Vec<Jet<E>> = Vec::with_capacity(self.steps.len());
        for (i, s) in self.steps.iter().enumerate() {
            let val = match *s {
                Step::Input => x.clone(),
                Step::Const(c) => Jet::constant(E::constant(c), order),
                Step::Binary(op, l, r) => match vals[l].binary(op, &vals[r]) {
                    Some(v) if v.c.iter().all(|e| e.is_finite()) => v,
                    _ => return Err(PossiblePole { vertex: i }),
                },
            };
            vals.push(val);
        }
        Ok(vals.swap_remove(self.output))
    }
}

/// Evaluates `graph` on jets with base `x`.
pub fn eval_jet<E: Enclosure>(graph: &ProgramGraph, coeffs: &[f64], x: &Jet<E>) -> Result<Jet<E>, PossiblePole> {
    JetProgram::new(graph, coeffs).eval(x)
}
