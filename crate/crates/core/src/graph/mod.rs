//! Straight-line arithmetic programs represented as compute graphs.
//!
//! A [`ProgramGraph`] has one input vertex `x`, any number of coefficient
//! vertices and binary `{+, -, *, /}` vertices, plus a designated output.
//! Vertices are stored in their total execution order: topological order with
//! each vertex's integer ordering parameter as the tiebreak. Coefficient
//! indices are dense and follow that order.

mod eval;
mod text;
mod transform;

pub use eval::{Arith, ArithmeticMode, Tape};
pub use text::{parse, serialize};

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;

use crate::error::{Error, Result};

/// Mutation-time size limit, counting the input and coefficient vertices.
pub const MAX_VERTICES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];

    pub fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }

    pub fn from_symbol(c: char) -> Option<Op> {
        match c {
            '+' => Some(Op::Add),
            '-' => Some(Op::Sub),
            '*' => Some(Op::Mul),
            '/' => Some(Op::Div),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VertexKind {
    Input,
    Coeff(usize),
    Binary { op: Op, lhs: VertexId, rhs: VertexId },
}

impl VertexKind {
    pub fn args(&self) -> Option<(VertexId, VertexId)> {
        match *self {
            VertexKind::Binary { lhs, rhs, .. } => Some((lhs, rhs)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub id: VertexId,
    pub kind: VertexKind,
    pub ordering: u32,
}

#[derive(Clone, Debug)]
pub struct ProgramGraph {
    vertices: Vec<Vertex>,
    output: VertexId,
    coeffs: Vec<f64>,
}

impl ProgramGraph {
    /// `f(x) = x`
    pub fn identity() -> ProgramGraph {
        ProgramGraph {
            vertices: vec![Vertex {
                id: VertexId(0),
                kind: VertexKind::Input,
                ordering: 0,
            }],
            output: VertexId(0),
            coeffs: Vec::new(),
        }
    }

    /// Validates and normalizes an arbitrary vertex list. `Coeff(i)` indexes
    /// into `coeffs`; unreferenced entries of `coeffs` are dropped.
    pub fn from_vertices(vertices: Vec<Vertex>, output: VertexId, coeffs: &[f64]) -> Result<ProgramGraph> {
        let mut by_id: HashMap<VertexId, usize> = HashMap::with_capacity(vertices.len());
        let mut inputs = 0;
        for (i, v) in vertices.iter().enumerate() {
            if by_id.insert(v.id, i).is_some() {
                return Err(Error::Structural(format!("duplicate vertex id {}", v.id.0)));
            }
            match v.kind {
                VertexKind::Input => inputs += 1,
                VertexKind::Coeff(k) if k >= coeffs.len() => {
                    return Err(Error::Structural(format!("coefficient index {k} out of range")));
                }
                _ => {}
            }
        }
        if inputs != 1 {
            return Err(Error::Structural(format!("expected exactly one input vertex, found {inputs}")));
        }
        if !by_id.contains_key(&output) {
            return Err(Error::Structural("output vertex missing".into()));
        }

        // Kahn's algorithm, ready set ordered by (ordering, id).
        let n = vertices.len();
        let mut pending = vec![0usize; n];
        let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, v) in vertices.iter().enumerate() {
            if let Some((a, b)) = v.kind.args() {
                for arg in [a, b] {
                    let j = *by_id
                        .get(&arg)
                        .ok_or_else(|| Error::Structural(format!("vertex {} reads missing vertex {}", v.id.0, arg.0)))?;
                    pending[i] += 1;
                    consumers[j].push(i);
                }
            }
        }
        let mut ready: BinaryHeap<Reverse<(u32, u32, usize)>> = BinaryHeap::new();
        for (i, v) in vertices.iter().enumerate() {
            if pending[i] == 0 {
                ready.push(Reverse((v.ordering, v.id.0, i)));
            }
        }
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse((_, _, i))) = ready.pop() {
            order.push(i);
            for &c in &consumers[i] {
                pending[c] -= 1;
                if pending[c] == 0 {
                    ready.push(Reverse((vertices[c].ordering, vertices[c].id.0, c)));
                }
            }
        }
        if order.len() != n {
            return Err(Error::Structural("graph contains a cycle".into()));
        }

        let mut remap: HashMap<usize, usize> = HashMap::new();
        let mut new_coeffs = Vec::new();
        let mut sorted = Vec::with_capacity(n);
        for i in order {
            let mut v = vertices[i];
            if let VertexKind::Coeff(k) = v.kind {
                let idx = *remap.entry(k).or_insert_with(|| {
                    new_coeffs.push(coeffs[k]);
                    new_coeffs.len() - 1
                });
                v.kind = VertexKind::Coeff(idx);
            }
            sorted.push(v);
        }
        Ok(ProgramGraph {
            vertices: sorted,
            output,
            coeffs: new_coeffs,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn output(&self) -> VertexId {
        self.output
    }

    pub fn input(&self) -> VertexId {
        self.vertices
            .iter()
            .find(|v| v.kind == VertexKind::Input)
            .map(|v| v.id)
            .expect("graph always has an input vertex")
    }

    /// Bound coefficient values, indexed by `VertexKind::Coeff`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn num_coeffs(&self) -> usize {
        self.coeffs.len()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Replaces the bound coefficient values.
    pub fn with_coeffs(&self, coeffs: &[f64]) -> Result<ProgramGraph> {
        if coeffs.len() != self.coeffs.len() {
            return Err(Error::Usage(format!(
                "expected {} coefficients, got {}",
                self.coeffs.len(),
                coeffs.len()
            )));
        }
        let mut g = self.clone();
        g.coeffs = coeffs.to_vec();
        Ok(g)
    }

    pub fn position(&self, id: VertexId) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    pub(crate) fn position_map(&self) -> HashMap<VertexId, usize> {
        self.vertices.iter().enumerate().map(|(i, v)| (v.id, i)).collect()
    }

    pub fn max_id(&self) -> u32 {
        self.vertices.iter().map(|v| v.id.0).max().unwrap_or(0)
    }

    /// Number of `{+, -, *, /}` vertices.
    pub fn count_operations(&self) -> usize {
        self.vertices
            .iter()
            .filter(|v| matches!(v.kind, VertexKind::Binary { .. }))
            .count()
    }

    /// Per-vertex flag: does the vertex depend on the input?
    pub fn depends_on_input(&self) -> Vec<bool> {
        let pos = self.position_map();
        let mut dep = vec![false; self.vertices.len()];
        for (i, v) in self.vertices.iter().enumerate() {
            dep[i] = match v.kind {
                VertexKind::Input => true,
                VertexKind::Coeff(_) => false,
                VertexKind::Binary { lhs, rhs, .. } => dep[pos[&lhs]] || dep[pos[&rhs]],
            };
        }
        dep
    }

    /// Vertices (by position) that `target` transitively depends on, including itself.
    pub(crate) fn ancestors(&self, target: VertexId) -> HashSet<VertexId> {
        let pos = self.position_map();
        let mut seen = HashSet::new();
        let mut stack = vec![target];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some((a, b)) = self.vertices[pos[&id]].kind.args() {
                stack.push(a);
                stack.push(b);
            }
        }
        seen
    }

    /// Content hash of the canonical text form.
    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(serialize(self).as_bytes()))
    }
}

/// Structural equality: same instruction sequence in the same total order,
/// same output and bit-identical coefficients. Vertex ids and ordering
/// parameters are not compared.
impl PartialEq for ProgramGraph {
    fn eq(&self, other: &ProgramGraph) -> bool {
        if self.vertices.len() != other.vertices.len() || self.coeffs.len() != other.coeffs.len() {
            return false;
        }
        if self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            return false;
        }
        let pa = self.position_map();
        let pb = other.position_map();
        if pa[&self.output] != pb[&other.output] {
            return false;
        }
        self.vertices.iter().zip(&other.vertices).all(|(a, b)| match (a.kind, b.kind) {
            (VertexKind::Input, VertexKind::Input) => true,
            (VertexKind::Coeff(i), VertexKind::Coeff(j)) => i == j,
            (
                VertexKind::Binary { op: o1, lhs: l1, rhs: r1 },
                VertexKind::Binary { op: o2, lhs: l2, rhs: r2 },
            ) => o1 == o2 && pa[&l1] == pb[&l2] && pa[&r1] == pb[&r2],
            _ => false,
        })
    }
}

/// Incremental construction of a graph; ordering parameters follow insertion order.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    vertices: Vec<Vertex>,
    coeffs: Vec<f64>,
}

impl Default for GraphBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl GraphBuilder {
    pub fn new() -> GraphBuilder {
        GraphBuilder {
            vertices: vec![Vertex {
                id: VertexId(0),
                kind: VertexKind::Input,
                ordering: 0,
            }],
            coeffs: Vec::new(),
        }
    }

    pub fn input(&self) -> VertexId {
        VertexId(0)
    }

    fn push(&mut self, kind: VertexKind) -> VertexId {
        let id = VertexId(self.vertices.len() as u32);
        self.vertices.push(Vertex {
            id,
            kind,
            ordering: id.0,
        });
        id
    }

    pub fn coeff(&mut self, value: f64) -> VertexId {
        self.coeffs.push(value);
        self.push(VertexKind::Coeff(self.coeffs.len() - 1))
    }

    pub fn op(&mut self, op: Op, lhs: VertexId, rhs: VertexId) -> VertexId {
        self.push(VertexKind::Binary { op, lhs, rhs })
    }

    pub fn add(&mut self, a: VertexId, b: VertexId) -> VertexId {
        self.op(Op::Add, a, b)
    }

    pub fn sub(&mut self, a: VertexId, b: VertexId) -> VertexId {
        self.op(Op::Sub, a, b)
    }

    pub fn mul(&mut self, a: VertexId, b: VertexId) -> VertexId {
        self.op(Op::Mul, a, b)
    }

    pub fn div(&mut self, a: VertexId, b: VertexId) -> VertexId {
        self.op(Op::Div, a, b)
    }

    /// Horner evaluation `c[0] + u*(c[1] + u*(c[2] + ...))`. Zero
    /// coefficients below the leading one are skipped, saving the add.
    pub fn horner(&mut self, u: VertexId, coeffs: &[f64]) -> VertexId {
        let mut deg = coeffs.len();
        while deg > 1 && coeffs[deg - 1] == 0.0 {
            deg -= 1;
        }
        if deg == 0 {
            return self.coeff(0.0);
        }
        let mut acc = self.coeff(coeffs[deg - 1]);
        for &c in coeffs[..deg - 1].iter().rev() {
            acc = self.mul(acc, u);
            if c != 0.0 {
                let k = self.coeff(c);
                acc = self.add(acc, k);
            }
        }
        acc
    }

    pub fn build(self, output: VertexId) -> Result<ProgramGraph> {
        ProgramGraph::from_vertices(self.vertices, output, &self.coeffs)
    }
}
