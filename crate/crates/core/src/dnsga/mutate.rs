//! Graph mutations: edge reconnection, vertex deletion and vertex insertion
//! by breaking an edge. Every result is acyclic, pruned and within the
//! vertex cap.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Op, ProgramGraph, Vertex, VertexId, VertexKind, MAX_VERTICES};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationProbabilities {
    pub noop: f64,
    pub reconnect: f64,
    pub delete: f64,
    pub insert: f64,
}

impl Default for MutationProbabilities {
    fn default() -> Self {
        MutationProbabilities {
            noop: 0.5,
            reconnect: 0.25,
            delete: 1.0 / 6.0,
            insert: 1.0 / 12.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    NoOp,
    Reconnect,
    Delete,
    Insert,
}

#[derive(Clone, Debug)]
pub struct MutationOutcome {
    pub graph: ProgramGraph,
    /// The category drawn.
    pub kind: MutationKind,
    /// False when the drawn mutation could not apply and the parent was kept.
    pub applied: bool,
}

/// An edge is identified by its consumer and argument slot; `None` is the
/// program output.
type Edge = (Option<VertexId>, usize);

struct Work {
    vertices: Vec<Vertex>,
    output: VertexId,
    coeffs: Vec<f64>,
    next_id: u32,
}

impl Work {
    fn new(g: &ProgramGraph) -> Work {
        Work {
            vertices: g.vertices().to_vec(),
            output: g.output(),
            coeffs: g.coeffs().to_vec(),
            next_id: g.max_id() + 1,
        }
    }

    fn index(&self) -> HashMap<VertexId, usize> {
        self.vertices.iter().enumerate().map(|(i, v)| (v.id, i)).collect()
    }

    fn edges(&self) -> Vec<Edge> {
        let mut e = vec![(None, 0)];
        for v in &self.vertices {
            if v.kind.args().is_some() {
                e.push((Some(v.id), 0));
                e.push((Some(v.id), 1));
            }
        }
        e
    }

    fn source(&self, edge: Edge, idx: &HashMap<VertexId, usize>) -> VertexId {
        match edge.0 {
            None => self.output,
            Some(c) => {
                let (a, b) = self.vertices[idx[&c]].kind.args().unwrap();
                if edge.1 == 0 {
                    a
                } else {
                    b
                }
            }
        }
    }

    fn set_source(&mut self, edge: Edge, src: VertexId, idx: &HashMap<VertexId, usize>) {
        match edge.0 {
            None => self.output = src,
            Some(c) => {
                if let VertexKind::Binary { lhs, rhs, .. } = &mut self.vertices[idx[&c]].kind {
                    if edge.1 == 0 {
                        *lhs = src;
                    } else {
                        *rhs = src;
                    }
                }
            }
        }
    }

    /// `c` and every vertex that reads it, directly or not.
    fn descendants(&self, c: VertexId) -> HashSet<VertexId> {
        let mut readers: HashMap<VertexId, Vec<VertexId>> = HashMap::new();
        for v in &self.vertices {
            if let Some((a, b)) = v.kind.args() {
                readers.entry(a).or_default().push(v.id);
                readers.entry(b).or_default().push(v.id);
            }
        }
        let mut seen = HashSet::new();
        let mut stack = vec![c];
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                if let Some(r) = readers.get(&v) {
                    stack.extend(r);
                }
            }
        }
        seen
    }

    /// Vertices that may feed the consumer of `edge` without creating a cycle.
    fn allowed_sources(&self, edge: Edge) -> Vec<VertexId> {
        let banned = match edge.0 {
            None => HashSet::new(),
            Some(c) => self.descendants(c),
        };
        self.vertices.iter().map(|v| v.id).filter(|id| !banned.contains(id)).collect()
    }

    fn push(&mut self, kind: VertexKind, ordering: u32) -> VertexId {
        let id = VertexId(self.next_id);
        self.next_id += 1;
        self.vertices.push(Vertex { id, kind, ordering });
        id
    }

    fn finish(self) -> ProgramGraph {
        ProgramGraph::from_vertices(self.vertices, self.output, &self.coeffs)
            .expect("mutation preserves validity")
            .prune()
    }
}

fn reconnect<R: Rng + ?Sized>(g: &ProgramGraph, rng: &mut R) -> Option<ProgramGraph> {
    let mut w = Work::new(g);
    let idx = w.index();
    let edge = *w.edges().choose(rng)?;
    let current = w.source(edge, &idx);
    let options: Vec<VertexId> = w.allowed_sources(edge).into_iter().filter(|&s| s != current).collect();
    let src = *options.choose(rng)?;
    w.set_source(edge, src, &idx);
    Some(w.finish())
}

fn delete<R: Rng + ?Sized>(g: &ProgramGraph, rng: &mut R) -> Option<ProgramGraph> {
    let mut w = Work::new(g);
    let ops: Vec<VertexId> = w.vertices.iter().filter(|v| v.kind.args().is_some()).map(|v| v.id).collect();
    let victim = *ops.choose(rng)?;
    let idx = w.index();
    let (a, b) = w.vertices[idx[&victim]].kind.args().unwrap();
    let heir = if rng.gen_bool(0.5) { a } else { b };
    for edge in w.edges() {
        if w.source(edge, &idx) == victim {
            w.set_source(edge, heir, &idx);
        }
    }
    w.vertices.retain(|v| v.id != victim);
    Some(w.finish())
}

fn insert<R: Rng + ?Sized>(g: &ProgramGraph, rng: &mut R) -> Option<ProgramGraph> {
    let mut w = Work::new(g);
    let idx = w.index();
    let edge = *w.edges().choose(rng)?;
    let u = w.source(edge, &idx);
    let kind = rng.gen_range(0..6);
    let (op, other) = if kind < 4 {
        let other = *w.allowed_sources(edge).choose(rng)?;
        (Op::ALL[kind], other)
    } else {
        if w.vertices.len() + 2 > MAX_VERTICES {
            return None;
        }
        let sign = if kind == 4 { 1.0 } else { -1.0 };
        w.coeffs.push(sign);
        let k = w.push(VertexKind::Coeff(w.coeffs.len() - 1), rng.gen());
        (Op::ALL[rng.gen_range(0..4)], k)
    };
    if w.vertices.len() + 1 > MAX_VERTICES {
        return None;
    }
    let (lhs, rhs) = if rng.gen_bool(0.5) { (u, other) } else { (other, u) };
    let n = w.push(VertexKind::Binary { op, lhs, rhs }, rng.gen());
    w.set_source(edge, n, &idx);
    Some(w.finish())
}

/// Applies one randomly drawn mutation.
pub fn mutate<R: Rng + ?Sized>(parent: &ProgramGraph, probs: &MutationProbabilities, rng: &mut R) -> MutationOutcome {
    let total = probs.noop + probs.reconnect + probs.delete + probs.insert;
    let mut r = rng.gen::<f64>() * total;
    let kind = if r < probs.noop {
        MutationKind::NoOp
    } else {
        r -= probs.noop;
        if r < probs.reconnect {
            MutationKind::Reconnect
        } else if r - probs.reconnect < probs.delete {
            MutationKind::Delete
        } else {
            MutationKind::Insert
        }
    };
    let result = match kind {
        MutationKind::NoOp => None,
        MutationKind::Reconnect => reconnect(parent, rng),
        MutationKind::Delete => delete(parent, rng),
        MutationKind::Insert => insert(parent, rng),
    };
    match result {
        Some(graph) => MutationOutcome {
            graph,
            kind,
            applied: true,
        },
        None => MutationOutcome {
            graph: parent.prune(),
            kind,
            applied: false,
        },
    }
}
