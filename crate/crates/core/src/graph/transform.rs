use std::collections::HashSet;

use super::eval::{DdArith, F32Arith, F64Arith};
use super::{ArithmeticMode, ProgramGraph, Vertex, VertexKind};
use crate::dd::Dd;
use crate::error::{Error, Result};

impl ProgramGraph {
    /// Drops every vertex without a path to the output. The input always stays.
    pub fn prune(&self) -> ProgramGraph {
        let live = self.ancestors(self.output);
        let kept: Vec<Vertex> = self
            .vertices
            .iter()
            .filter(|v| v.kind == VertexKind::Input || live.contains(&v.id))
            .copied()
            .collect();
        ProgramGraph::from_vertices(kept, self.output, &self.coeffs).expect("pruning keeps a valid graph")
    }

    /// Replaces every maximal input-independent subgraph by one coefficient
    /// holding its value computed in `mode`, then prunes.
    pub fn collapse_constants(&self, mode: ArithmeticMode) -> Result<ProgramGraph> {
        let dep = self.depends_on_input();
        let pos = self.position_map();
        // constant op vertices consumed by something input-dependent (or the output)
        let mut roots: HashSet<usize> = HashSet::new();
        for (p, v) in self.vertices.iter().enumerate() {
            if let VertexKind::Binary { lhs, rhs, .. } = v.kind {
                if dep[p] {
                    for a in [lhs, rhs] {
                        roots.insert(pos[&a]);
                    }
                }
            }
        }
        roots.insert(pos[&self.output]);
        roots.retain(|&p| !dep[p] && matches!(self.vertices[p].kind, VertexKind::Binary { .. }));
        if roots.is_empty() {
            return Ok(self.prune());
        }

        let values: Vec<f64> = match mode {
            ArithmeticMode::Real64 => self.trace_with(&F64Arith, 0.0, &self.coeffs),
            ArithmeticMode::Float32 => {
                let cs: Vec<f32> = self.coeffs.iter().map(|&c| c as f32).collect();
                self.trace_with(&F32Arith, 0.0, &cs).into_iter().map(f64::from).collect()
            }
            ArithmeticMode::Extended => {
                let cs: Vec<Dd> = self.coeffs.iter().map(|&c| Dd::from_f64(c)).collect();
                self.trace_with(&DdArith, Dd::ZERO, &cs)
                    .into_iter()
                    .map(|d| d.to_f64())
                    .collect()
            }
        };

        let mut coeffs = self.coeffs.clone();
        let mut vertices = self.vertices.clone();
        let mut sorted_roots: Vec<usize> = roots.into_iter().collect();
        sorted_roots.sort_unstable();
        for p in sorted_roots {
            let v = values[p];
            if !v.is_finite() {
                return Err(Error::DegenerateConstant(v));
            }
            coeffs.push(v);
            vertices[p].kind = VertexKind::Coeff(coeffs.len() - 1);
        }
        Ok(ProgramGraph::from_vertices(vertices, self.output, &coeffs)?.prune())
    }

    /// Prune then collapse; the form whose operations are counted as complexity.
    pub fn simplified(&self, mode: ArithmeticMode) -> Result<ProgramGraph> {
        self.prune().collapse_constants(mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse, GraphBuilder};

    #[test]
    fn prune_removes_dead_vertices() {
        let g = parse("d = x * x\nc = 2.0\ny = x + c\nreturn y").unwrap();
        assert_eq!(g.count_operations(), 2);
        let p = g.prune();
        assert_eq!(p.count_operations(), 1);
        assert_eq!(p.eval(3.0, ArithmeticMode::Real64), 5.0);
        assert_eq!(ProgramGraph::identity().prune(), ProgramGraph::identity());
    }

    #[test]
    fn prune_keeps_input_of_constant_program() {
        let g = parse("c = 2.0\ny = x * c\nk = 3.0\nreturn k").unwrap().prune();
        assert_eq!(g.len(), 2);
        assert_eq!(g.eval(9.0, ArithmeticMode::Real64), 3.0);
    }

    #[test]
    fn collapse_folds_constant_products() {
        let g = parse("c1 = 0.25\nc2 = 0.5\nc3 = c1 * c2\ny = c3 * x\nreturn y").unwrap();
        let c = g.collapse_constants(ArithmeticMode::Real64).unwrap();
        assert_eq!(c.count_operations(), 1);
        assert_eq!(c.coeffs(), &[0.125]);
    }

    #[test]
    fn collapse_self_difference_and_idempotence() {
        let g = parse("a = 1.5\nb = a * a\nz = b - b\ny = x + z\nreturn y").unwrap();
        let c = g.collapse_constants(ArithmeticMode::Real64).unwrap();
        assert_eq!(c.coeffs(), &[0.0]);
        assert_eq!(c.count_operations(), 1);
        assert_eq!(c.collapse_constants(ArithmeticMode::Real64).unwrap(), c);
        let mut b = GraphBuilder::new();
        let x = b.input();
        let k = b.coeff(2.0);
        let y = b.mul(x, k);
        let plain = b.build(y).unwrap();
        assert_eq!(plain.collapse_constants(ArithmeticMode::Real64).unwrap(), plain);
    }

    #[test]
    fn collapse_rejects_non_finite_constants() {
        let g = parse("a = 1.0\nz = 0.0\nq = a / z\ny = x + q\nreturn y").unwrap();
        assert!(matches!(
            g.collapse_constants(ArithmeticMode::Real64),
            Err(Error::DegenerateConstant(_))
        ));
    }

    #[test]
    fn collapse_of_constant_output() {
        let g = parse("a = 3.0\nb = a + a\nreturn b").unwrap();
        let c = g.collapse_constants(ArithmeticMode::Float32).unwrap();
        assert_eq!(c.count_operations(), 0);
        assert_eq!(c.coeffs(), &[6.0]);
    }
}
