//! Line-oriented program text:
//!
//! ```text
//! def f(x):
//!     c0 = 0x1.0000000000000p+0
//!     v1 = x * c0
//!     return v1
//! ```
//!
//! The `def` header and indentation are optional, `#` starts a comment and
//! names may be reassigned. Literals are hex or decimal floats.

use std::collections::HashMap;
use std::fmt::Write;

use super::{Op, ProgramGraph, Vertex, VertexId, VertexKind};
use crate::error::{Error, Result};
use crate::hexfloat::{format_hex, parse_float};

pub fn serialize(g: &ProgramGraph) -> String {
    let mut names: HashMap<VertexId, String> = HashMap::new();
    let mut out = String::from("def f(x):\n");
    let mut next_op = 0usize;
    for v in g.vertices() {
        let name = match v.kind {
            VertexKind::Input => "x".to_string(),
            VertexKind::Coeff(i) => {
                let n = format!("c{i}");
                writeln!(out, "    {n} = {}", format_hex(g.coeffs()[i])).unwrap();
                n
            }
            VertexKind::Binary { op, lhs, rhs } => {
                let n = format!("v{next_op}");
                next_op += 1;
                writeln!(out, "    {n} = {} {} {}", names[&lhs], op.symbol(), names[&rhs]).unwrap();
                n
            }
        };
        names.insert(v.id, name);
    }
    writeln!(out, "    return {}", names[&g.output()]).unwrap();
    out
}

#[derive(Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Op(Op),
    Eq,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn tokenize(line_no: usize, s: &str) -> Result<Vec<Tok>> {
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    let mut toks = Vec::new();
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '=' {
            toks.push(Tok::Eq);
            i += 1;
        } else if is_ident_start(c) {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            toks.push(Tok::Ident(cs[st..i].iter().collect()));
        } else if c.is_ascii_digit() || c == '.' {
            // a leading minus directly after `=` belongs to the literal
            let neg = matches!(toks.last(), Some(Tok::Op(Op::Sub))) && matches!(toks.iter().rev().nth(1), Some(Tok::Eq));
            if neg {
                toks.pop();
            }
            let st = i;
            let hex = c == '0' && i + 1 < cs.len() && (cs[i + 1] == 'x' || cs[i + 1] == 'X');
            if hex {
                i += 2;
                while i < cs.len() && (cs[i].is_ascii_hexdigit() || cs[i] == '.') {
                    i += 1;
                }
                if i < cs.len() && (cs[i] == 'p' || cs[i] == 'P') {
                    i += 1;
                    if i < cs.len() && (cs[i] == '+' || cs[i] == '-') {
                        i += 1;
                    }
                    while i < cs.len() && cs[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            } else {
                while i < cs.len() && (cs[i].is_ascii_digit() || cs[i] == '.') {
                    i += 1;
                }
                if i < cs.len() && (cs[i] == 'e' || cs[i] == 'E') {
                    i += 1;
                    if i < cs.len() && (cs[i] == '+' || cs[i] == '-') {
                        i += 1;
                    }
                    while i < cs.len() && cs[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = cs[st..i].iter().collect();
            let v = parse_float(&text).map_err(|_| perr(line_no, format!("bad literal {text:?}")))?;
            toks.push(Tok::Num(if neg { -v } else { v }));
        } else if let Some(op) = Op::from_symbol(c) {
            toks.push(Tok::Op(op));
            i += 1;
        } else {
            return Err(perr(line_no, format!("unexpected character {c:?}")));
        }
    }
    Ok(toks)
}

pub fn parse(text: &str) -> Result<ProgramGraph> {
    let mut input_name = "x".to_string();
    let mut vertices = vec![Vertex {
        id: VertexId(0),
        kind: VertexKind::Input,
        ordering: 0,
    }];
    let mut coeffs = Vec::new();
    let mut env: HashMap<String, VertexId> = HashMap::new();
    let mut output = None;
    let mut seen_statement = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if output.is_some() {
            return Err(perr(line_no, "statement after return"));
        }
        if let Some(rest) = line.strip_prefix("def ") {
            if seen_statement {
                return Err(perr(line_no, "def header must come first"));
            }
            let open = rest.find('(').ok_or_else(|| perr(line_no, "malformed def header"))?;
            let close = rest.find(')').ok_or_else(|| perr(line_no, "malformed def header"))?;
            let param = rest[open + 1..close].trim();
            if param.is_empty() || !param.chars().next().is_some_and(is_ident_start) {
                return Err(perr(line_no, "def header needs one parameter"));
            }
            if !rest[close + 1..].trim().starts_with(':') {
                return Err(perr(line_no, "missing ':' after def header"));
            }
            input_name = param.to_string();
            seen_statement = true;
            continue;
        }
        seen_statement = true;
        let lookup = |env: &HashMap<String, VertexId>, name: &str| -> Result<VertexId> {
            if let Some(&id) = env.get(name) {
                Ok(id)
            } else if name == input_name {
                Ok(VertexId(0))
            } else {
                Err(perr(line_no, format!("undefined variable {name:?}")))
            }
        };
        if let Some(rest) = line.strip_prefix("return") {
            if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
                return Err(perr(line_no, "malformed return"));
            }
            let name = rest.trim();
            output = Some(lookup(&env, name)?);
            continue;
        }
        let toks = tokenize(line_no, line)?;
        let (name, rhs) = match toks.as_slice() {
            [Tok::Ident(n), Tok::Eq, rhs @ ..] => (n.clone(), rhs),
            _ => return Err(perr(line_no, "expected `name = ...`")),
        };
        if name == input_name {
            return Err(perr(line_no, "cannot assign to the input"));
        }
        let next_id = VertexId(vertices.len() as u32);
        let operand = |env: &HashMap<String, VertexId>, t: &Tok| -> Result<Operand> {
            match t {
                Tok::Ident(n) => Ok(Operand::Var(lookup(env, n)?)),
                Tok::Num(v) => Ok(Operand::Lit(*v)),
                _ => Err(perr(line_no, "expected operand")),
            }
        };
        let id = match rhs {
            [Tok::Num(v)] => {
                coeffs.push(*v);
                vertices.push(Vertex {
                    id: next_id,
                    kind: VertexKind::Coeff(coeffs.len() - 1),
                    ordering: line_no as u32,
                });
                next_id
            }
            [Tok::Ident(n)] => lookup(&env, n)?,
            [a, Tok::Op(op), b] => {
                let mut args = [VertexId(0); 2];
                for (slot, t) in args.iter_mut().zip([a, b]) {
                    *slot = match operand(&env, t)? {
                        Operand::Var(id) => id,
                        Operand::Lit(v) => {
                            // inline literal becomes its own coefficient
                            coeffs.push(v);
                            let id = VertexId(vertices.len() as u32);
                            vertices.push(Vertex {
                                id,
                                kind: VertexKind::Coeff(coeffs.len() - 1),
                                ordering: line_no as u32,
                            });
                            id
                        }
                    };
                }
                let id = VertexId(vertices.len() as u32);
                vertices.push(Vertex {
                    id,
                    kind: VertexKind::Binary {
                        op: *op,
                        lhs: args[0],
                        rhs: args[1],
                    },
                    ordering: line_no as u32,
                });
                id
            }
            _ => return Err(perr(line_no, "expected a literal or `a op b`")),
        };
        env.insert(name, id);
    }
    let output = output.ok_or_else(|| perr(text.lines().count().max(1), "missing return"))?;
    ProgramGraph::from_vertices(vertices, output, &coeffs)
}

enum Operand {
    Var(VertexId),
    Lit(f64),
}
