//! Rigorous maximum-relative-error bounds and well-definedness proofs for
//! programs on an interval, by bisection with interval and Taylor-jet
//! enclosures.
//!
//! On a leaf `[a, b]` with midpoint `m` and half-width `h`, the relative
//! error `r = f/g - 1` satisfies
//! `|r(x)| <= sum_{k<n} |r_k(m)| h^k + |r_n([a,b])| h^n`
//! where `r_k` are Taylor coefficients. Order 1 is the classic
//! midpoint-plus-Lipschitz bound. The bound is also capped by the plain
//! enclosure `|r([a,b])|`.

pub mod enclosure;
pub mod jet;
pub mod special;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use enclosure::{Ball, Enclosure, Interval};
pub use jet::{eval_jet, Jet, JetProgram, PossiblePole};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::graph::{self, ProgramGraph};
use crate::hexfloat::{format_hex, parse_hex};
use crate::targets::TargetFunction;
use enclosure::{add_up, mul_up};

/// Lower end used instead of an open or singular left endpoint.
pub const DELTA: f64 = 8.673_617_379_884_035e-19; // 2^-60

/// Interval on which a target's relative error is certified by default.
/// Endpoints where the target vanishes are moved inward.
pub fn default_domain(target: TargetFunction) -> (f64, f64) {
    let (lo, hi) = target.domain().closed_f64();
    match target {
        TargetFunction::Exp2 => (DELTA, hi),
        TargetFunction::Erf => (DELTA, hi),
        TargetFunction::Log2 => (1.0 + f64::EPSILON, hi),
        TargetFunction::AiryShifted => (lo, hi),
    }
}

/// Enclosure of the program's range over `i`.
pub fn interval_eval(graph: &ProgramGraph, coeffs: &[f64], i: Interval) -> std::result::Result<Interval, PossiblePole> {
    let j = eval_jet(graph, coeffs, &Jet::variable(i, 0))?;
    Ok(j.c[0])
}

/// Enclosure of the program's derivative over `i`.
pub fn interval_derivative(graph: &ProgramGraph, coeffs: &[f64], i: Interval) -> std::result::Result<Interval, PossiblePole> {
    let j = eval_jet(graph, coeffs, &Jet::variable(i, 1))?;
    Ok(j.c[1])
}

/// Taylor jet of `f/g - 1` at any base point in `x`.
pub fn relative_error_jet(
    prog: &JetProgram,
    target: TargetFunction,
    x: &Ball,
    order: usize,
) -> std::result::Result<Jet<Ball>, PossiblePole> {
    let f = prog.eval(&Jet::variable(*x, order))?;
    let g = special::target_jet(target, x, order).ok_or(PossiblePole { vertex: usize::MAX })?;
    let mut q = f.div(&g).ok_or(PossiblePole { vertex: usize::MAX })?;
    q.c[0] = q.c[0].sub(&Ball::constant(1.0));
    if q.c.iter().all(|c| c.is_finite()) {
        Ok(q)
    } else {
        Err(PossiblePole { vertex: usize::MAX })
    }
}

/// Outcome of bounding one leaf.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalBound {
    /// Upper bound on `|r|` over the leaf.
    pub eta: f64,
    /// Lower bound on `|r(m)|` at the midpoint.
    pub at_midpoint: f64,
}

/// `|r|` over `[a, b]` from plain interval evaluation, which copes with
/// intermediate ranges too wide for midpoint-radius form.
fn interval_error(prog: &JetProgram, target: TargetFunction, a: f64, b: f64) -> Option<f64> {
    let f = prog.eval(&Jet::variable(Interval::new(a, b), 0)).ok()?.c[0];
    let g = special::target_jet(target, &Ball::from_bounds(a, b), 0)?.c[0].to_interval();
    let r = f.div(&g)?.sub(&Interval::point(1.0));
    r.is_finite().then(|| r.mag())
}

/// Bounds `|r|` over `[a, b]` with a Taylor expansion of the given order
/// about the exact midpoint.
pub fn local_bound(
    prog: &JetProgram,
    target: TargetFunction,
    a: f64,
    b: f64,
    order: usize,
) -> std::result::Result<LocalBound, PossiblePole> {
    let xi = Ball::from_bounds(a, b);
    let h = xi.r;
    let fallback = interval_error(prog, target, a, b);
    let taylor = (|| {
        let mid = relative_error_jet(prog, target, &Ball::exact(xi.c), order.saturating_sub(1))?;
        let at_midpoint = mid.c[0].mig();
        let wide = relative_error_jet(prog, target, &xi, order)?;
        let mut eta = wide.c[0].mag();
        if order > 0 {
            let mut sum = 0.0;
            let mut hp = 1.0;
            for k in 0..order {
                sum = add_up(sum, mul_up(mid.c[k].mag(), hp));
                hp = mul_up(hp, h);
            }
            sum = add_up(sum, mul_up(wide.c[order].mag(), hp));
            eta = eta.min(sum);
        }
        Ok(LocalBound { eta, at_midpoint })
    })();
    match (taylor, fallback) {
        (Ok(l), Some(e)) => Ok(LocalBound {
            eta: l.eta.min(e),
            ..l
        }),
        (Ok(l), None) => Ok(l),
        (Err(_), Some(e)) => Ok(LocalBound {
            eta: e,
            at_midpoint: 0.0,
        }),
        (Err(p), None) => Err(p),
    }
}

/// `|r(m)| + L (b - a) / 2` with `L` bounding `|r'|` over `[a, b]`.
pub fn local_bound_eta(
    graph: &ProgramGraph,
    coeffs: &[f64],
    target: TargetFunction,
    a: f64,
    b: f64,
) -> std::result::Result<f64, PossiblePole> {
    let prog = JetProgram::new(graph, coeffs);
    let xi = Ball::from_bounds(a, b);
    let mid = relative_error_jet(&prog, target, &Ball::exact(xi.c), 0)?;
    let wide = relative_error_jet(&prog, target, &xi, 1)?;
    Ok(add_up(mid.c[0].mag(), mul_up(wide.c[1].mag(), xi.r)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProofLimits {
    pub max_depth: u32,
    pub max_leaves: u64,
    pub taylor_order: usize,
    /// Wall-clock budget in seconds; `None` is unlimited.
    pub time_budget: Option<f64>,
    pub record_leaves: bool,
}

impl Default for ProofLimits {
    fn default() -> Self {
        ProofLimits {
            max_depth: 64,
            max_leaves: 10_000_000,
            taylor_order: 4,
            time_budget: None,
            record_leaves: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofStatus {
    Proven,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    /// The local bound stayed above epsilon at maximum depth, or the
    /// midpoint error itself exceeds epsilon.
    BoundExceeded,
    PossiblePole,
    Limits,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofFailure {
    pub lo: f64,
    pub hi: f64,
    /// Local bound on the witness, infinite for poles.
    pub eta: f64,
    pub reason: FailureReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub lo: f64,
    pub hi: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofResult {
    pub status: ProofStatus,
    pub epsilon: f64,
    pub domain: (f64, f64),
    pub subintervals_used: u64,
    pub max_depth: u32,
    /// Largest leaf bound; the tightest epsilon this partition supports.
    pub max_eta: f64,
    pub failure: Option<ProofFailure>,
    pub leaves: Option<Vec<Leaf>>,
    pub seconds: f64,
}

impl ProofResult {
    pub fn proven(&self) -> bool {
        self.status == ProofStatus::Proven
    }
}

/// Splits `[a, b]` at a representable point strictly inside, if any.
fn split(a: f64, b: f64) -> Option<f64> {
    let m = a + (b - a) * 0.5;
    let m = if m.is_finite() { m } else { 0.5 * a + 0.5 * b };
    (a < m && m < b).then_some(m)
}

struct Bisection<'a> {
    domain: (f64, f64),
    epsilon: f64,
    limits: &'a ProofLimits,
}

enum Verdict {
    Accept(f64),
    Reject { eta: f64, definite: bool, pole: bool },
}

impl Bisection<'_> {
    fn run(&self, mut check: impl FnMut(f64, f64) -> Verdict) -> ProofResult {
        let start = Instant::now();
        let budget = self.limits.time_budget.map(Duration::from_secs_f64);
        let mut stack = vec![(self.domain.0, self.domain.1, 0u32)];
        let mut leaves = self.limits.record_leaves.then(Vec::new);
        let mut count = 0u64;
        let mut deepest = 0u32;
        let mut max_eta = 0.0f64;
        let mut failure = None;
        while let Some((a, b, depth)) = stack.pop() {
            deepest = deepest.max(depth);
            let over_budget = budget.is_some_and(|t| start.elapsed() > t);
            if count >= self.limits.max_leaves || over_budget {
                failure = Some(ProofFailure {
                    lo: a,
                    hi: b,
                    eta: f64::INFINITY,
                    reason: FailureReason::Limits,
                });
                break;
            }
            match check(a, b) {
                Verdict::Accept(eta) => {
                    count += 1;
                    max_eta = max_eta.max(eta);
                    if let Some(l) = leaves.as_mut() {
                        l.push(Leaf { lo: a, hi: b, eta });
                    }
                }
                Verdict::Reject { eta, definite, pole } => {
                    let reason = if pole {
                        FailureReason::PossiblePole
                    } else {
                        FailureReason::BoundExceeded
                    };
                    let mid = split(a, b);
                    if definite || depth >= self.limits.max_depth || mid.is_none() {
                        failure = Some(ProofFailure { lo: a, hi: b, eta, reason });
                        break;
                    }
                    let m = mid.unwrap();
                    stack.push((m, b, depth + 1));
                    stack.push((a, m, depth + 1));
                }
            }
        }
        ProofResult {
            status: if failure.is_none() {
                ProofStatus::Proven
            } else {
                ProofStatus::Failed
            },
            epsilon: self.epsilon,
            domain: self.domain,
            subintervals_used: count,
            max_depth: deepest,
            max_eta,
            failure,
            leaves,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

fn check_domain(domain: (f64, f64)) -> Result<()> {
    if !(domain.0 < domain.1) || !domain.0.is_finite() || !domain.1.is_finite() {
        return Err(Error::Usage(format!("invalid proof domain [{}, {}]", domain.0, domain.1)));
    }
    Ok(())
}

/// Proves `|f/g - 1| <= epsilon` on `domain` by recursive bisection.
pub fn prove_bound(
    graph: &ProgramGraph,
    coeffs: &[f64],
    target: TargetFunction,
    domain: (f64, f64),
    epsilon: f64,
    limits: &ProofLimits,
) -> Result<ProofResult> {
    check_domain(domain)?;
    if !(epsilon > 0.0) {
        return Err(Error::Usage(format!("epsilon must be positive, got {epsilon}")));
    }
    let prog = JetProgram::new(graph, coeffs);
    let b = Bisection { domain, epsilon, limits };
    Ok(b.run(|lo, hi| match local_bound(&prog, target, lo, hi, limits.taylor_order) {
        Ok(l) if l.eta <= epsilon => Verdict::Accept(l.eta),
        Ok(l) => Verdict::Reject {
            eta: l.eta,
            definite: l.at_midpoint > epsilon,
            pole: false,
        },
        Err(_) => Verdict::Reject {
            eta: f64::INFINITY,
            definite: false,
            pole: true,
        },
    }))
}

/// Proves every division in the program has a denominator bounded away from
/// zero on `domain`. Leaf `eta` is zero.
pub fn prove_well_defined(graph: &ProgramGraph, coeffs: &[f64], domain: (f64, f64), limits: &ProofLimits) -> Result<ProofResult> {
    check_domain(domain)?;
    let prog = JetProgram::new(graph, coeffs);
    let b = Bisection {
        domain,
        epsilon: 0.0,
        limits,
    };
    Ok(b.run(|lo, hi| match prog.eval(&Jet::variable(Interval::new(lo, hi), 0)) {
        Ok(_) => Verdict::Accept(0.0),
        Err(_) => Verdict::Reject {
            eta: f64::INFINITY,
            definite: false,
            pole: true,
        },
    }))
}

pub const CERTIFICATE_FORMAT: &str = "transcend-certificate/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateLeaf {
    pub lo: String,
    pub hi: String,
    pub eta: f64,
}

/// Self-contained record of a proven bound that can be re-checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub format: String,
    pub version: String,
    pub program_hash: String,
    pub program: String,
    pub target: TargetFunction,
    pub epsilon: f64,
    pub taylor_order: usize,
    pub domain: [String; 2],
    pub leaves: Vec<CertificateLeaf>,
}

impl Certificate {
    /// Builds a certificate from a proven result that recorded its leaves.
    pub fn from_proof(graph: &ProgramGraph, target: TargetFunction, result: &ProofResult, taylor_order: usize) -> Result<Certificate> {
        if !result.proven() {
            return Err(Error::Usage("only proven results yield certificates".into()));
        }
        let leaves = result
            .leaves
            .as_ref()
            .ok_or_else(|| Error::Usage("proof was run without recording leaves".into()))?;
        Ok(Certificate {
            format: CERTIFICATE_FORMAT.into(),
            version: crate::VERSION.into(),
            program_hash: graph.hash_hex(),
            program: graph::serialize(graph),
            target,
            epsilon: result.epsilon,
            taylor_order,
            domain: [format_hex(result.domain.0), format_hex(result.domain.1)],
            leaves: leaves
                .iter()
                .map(|l| CertificateLeaf {
                    lo: format_hex(l.lo),
                    hi: format_hex(l.hi),
                    eta: l.eta,
                })
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub valid: bool,
    pub leaves_checked: usize,
    /// Largest recomputed leaf bound.
    pub max_eta: f64,
    pub problems: Vec<String>,
}

/// Re-verifies a certificate from scratch: program hash, partition of the
/// domain, and every leaf bound recomputed against epsilon.
pub fn check_certificate(cert: &Certificate) -> Result<CertificateCheck> {
    const MAX_PROBLEMS: usize = 20;
    let mut problems = Vec::new();
    if cert.format != CERTIFICATE_FORMAT {
        problems.push(format!("unknown format {:?}", cert.format));
    }
    let graph = graph::parse(&cert.program)?;
    if graph.hash_hex() != cert.program_hash {
        problems.push("program hash does not match program text".into());
    }
    let lo = parse_hex(&cert.domain[0])?;
    let hi = parse_hex(&cert.domain[1])?;
    let prog = JetProgram::new(&graph, graph.coeffs());
    let mut cursor = lo;
    let mut max_eta = 0.0f64;
    for (i, leaf) in cert.leaves.iter().enumerate() {
        let (a, b) = (parse_hex(&leaf.lo)?, parse_hex(&leaf.hi)?);
        if a != cursor || !(a < b) {
            problems.push(format!("leaf {i} [{}, {}] breaks the partition", leaf.lo, leaf.hi));
        }
        cursor = b;
        match local_bound(&prog, cert.target, a, b, cert.taylor_order) {
            Ok(l) => {
                max_eta = max_eta.max(l.eta);
                if !(l.eta <= cert.epsilon) {
                    problems.push(format!("leaf {i}: recomputed bound {:e} exceeds epsilon", l.eta));
                }
            }
            Err(_) => problems.push(format!("leaf {i}: possible pole")),
        }
        if problems.len() >= MAX_PROBLEMS {
            break;
        }
    }
    if cursor != hi {
        problems.push("leaves do not reach the end of the domain".into());
    }
    Ok(CertificateCheck {
        valid: problems.is_empty(),
        leaves_checked: cert.leaves.len(),
        max_eta,
        problems,
    })
}

/// Exact relative error `f/g - 1` at a point, in double-double.
pub fn sampled_relative_error(graph: &ProgramGraph, coeffs: &[f64], target: TargetFunction, x: f64) -> f64 {
    let f: Dd = graph.eval_dd(x, coeffs);
    let g = target.eval_unchecked(x);
    ((f - g) / g).to_f64()
}

#[cfg(test)]
mod tests;
