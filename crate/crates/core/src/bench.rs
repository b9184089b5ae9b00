//! Throughput timing of compiled programs.
//!
//! Each measurement applies `f, clamp, f, clamp, ...` over an input vector, so
//! every layer consumes the previous one and nothing can be skipped. Speed is
//! `vector_size * stack_depth / fastest repeat`.

use std::cell::Cell;
use std::hint::black_box;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ProgramGraph, Tape};
use crate::targets::TargetFunction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub vector_size: usize,
    pub stack_depth: usize,
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            vector_size: 10_000,
            stack_depth: 100,
            repeats: 1_000,
        }
    }
}

impl BenchConfig {
    /// Reduced settings used inside the search loop.
    pub fn search() -> BenchConfig {
        BenchConfig {
            vector_size: 1_000,
            stack_depth: 10,
            repeats: 50,
        }
    }
}

static ACTIVE_WORKERS: AtomicUsize = AtomicUsize::new(0);
static TIMING: Mutex<()> = Mutex::new(());

thread_local! {
    static IS_WORKER: Cell<bool> = const { Cell::new(false) };
}

/// Marks the current thread as a busy search worker while alive. Timing
/// refuses to run while any other worker holds one.
pub struct WorkerGuard(());

impl WorkerGuard {
    pub fn enter() -> WorkerGuard {
        ACTIVE_WORKERS.fetch_add(1, Ordering::SeqCst);
        IS_WORKER.with(|w| w.set(true));
        WorkerGuard(())
    }
}

impl Drop for WorkerGuard {
    fn drop(&mut self) {
        IS_WORKER.with(|w| w.set(false));
        ACTIVE_WORKERS.fetch_sub(1, Ordering::SeqCst);
    }
}

fn check_exclusive() -> Result<()> {
    let own = IS_WORKER.with(|w| w.get()) as usize;
    let others = ACTIVE_WORKERS.load(Ordering::SeqCst).saturating_sub(own);
    if others > 0 {
        return Err(Error::BenchIntegrity(format!(
            "{others} search worker(s) active; timings would be contended"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub cpu_model: String,
    pub logical_cpus: usize,
    pub unix_time: u64,
}

impl MachineInfo {
    pub fn current() -> MachineInfo {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|m| m.trim().to_string())
            })
            .unwrap_or_else(|| std::env::consts::ARCH.to_string());
        MachineInfo {
            cpu_model,
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            unix_time: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub program_hash: String,
    pub config: BenchConfig,
    pub repeat_ns: Vec<u64>,
    pub min_ns: u64,
    pub mean_ns: f64,
    /// Evaluations per second from the fastest repeat.
    pub speed: f64,
    pub machine: MachineInfo,
}

struct Stack {
    tape: Tape,
    coeffs: Vec<f32>,
    init: Vec<f32>,
    buf: Vec<f32>,
    out: Vec<f32>,
    lo: f32,
    hi: f32,
    depth: usize,
}

impl Stack {
    fn new(graph: &ProgramGraph, coeffs: &[f64], target: TargetFunction, config: &BenchConfig) -> Result<Stack> {
        if config.vector_size == 0 || config.stack_depth == 0 {
            return Err(Error::Usage("vector size and stack depth must be positive".into()));
        }
        if coeffs.len() != graph.num_coeffs() {
            return Err(Error::Usage("coefficient count mismatch".into()));
        }
        let (lo, hi) = target.domain().closed_f32();
        let n = config.vector_size;
        let init: Vec<f32> = (0..n)
            .map(|i| {
                let t = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
                ((lo as f64 + (hi as f64 - lo as f64) * t) as f32).clamp(lo, hi)
            })
            .collect();
        Ok(Stack {
            tape: Tape::compile(graph),
            coeffs: coeffs.iter().map(|&c| c as f32).collect(),
            buf: init.clone(),
            out: vec![0.0; n],
            init,
            lo,
            hi,
            depth: config.stack_depth,
        })
    }

    /// Untimed pass checking that no layer produces a non-finite value.
    fn integrity(&mut self) -> Result<()> {
        self.buf.copy_from_slice(&self.init);
        for layer in 0..self.depth {
            self.tape.eval_f32(&self.buf, &self.coeffs, &mut self.out);
            if let Some(v) = self.out.iter().find(|v| !v.is_finite()) {
                return Err(Error::BenchIntegrity(format!("layer {layer} produced {v}")));
            }
            clamp_into(&self.out, &mut self.buf, self.lo, self.hi);
        }
        Ok(())
    }

    fn run_once(&mut self) -> u64 {
        self.buf.copy_from_slice(&self.init);
        let start = Instant::now();
        for _ in 0..self.depth {
            self.tape.eval_f32(black_box(&self.buf), &self.coeffs, &mut self.out);
            clamp_into(&self.out, &mut self.buf, self.lo, self.hi);
        }
        black_box(&self.buf);
        start.elapsed().as_nanos().max(1) as u64
    }
}

#[inline]
fn clamp_into(src: &[f32], dst: &mut [f32], lo: f32, hi: f32) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = s.max(lo).min(hi);
    }
}

/// Times `repeats` runs of the stack and reports the fastest.
pub fn measure_throughput(graph: &ProgramGraph, coeffs: &[f64], target: TargetFunction, config: &BenchConfig) -> Result<BenchReport> {
    if config.repeats == 0 {
        return Err(Error::Usage("at least one repeat is required".into()));
    }
    check_exclusive()?;
    let _lock = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let mut stack = Stack::new(graph, coeffs, target, config)?;
    stack.integrity()?;
    let repeat_ns: Vec<u64> = (0..config.repeats).map(|_| stack.run_once()).collect();
    let min_ns = *repeat_ns.iter().min().unwrap();
    let mean_ns = repeat_ns.iter().map(|&v| v as f64).sum::<f64>() / repeat_ns.len() as f64;
    Ok(BenchReport {
        program_hash: graph.hash_hex(),
        config: config.clone(),
        speed: (config.vector_size * config.stack_depth) as f64 / (min_ns as f64 * 1e-9),
        repeat_ns,
        min_ns,
        mean_ns,
        machine: MachineInfo::current(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareReport {
    pub program_a: String,
    pub program_b: String,
    pub config: BenchConfig,
    /// speed(a) / speed(b) per interleaved pair.
    pub ratios: Vec<f64>,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// Interquartile range of the ratios.
    pub iqr: f64,
    pub machine: MachineInfo,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = pos.ceil() as usize;
    sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
}

/// Alternates timings of `a` and `b`. Each timing is the fastest of
/// `config.repeats` runs; one ratio is recorded per consecutive pair.
pub fn compare_interleaved(
    a: (&ProgramGraph, &[f64]),
    b: (&ProgramGraph, &[f64]),
    target: TargetFunction,
    config: &BenchConfig,
    ratios: usize,
) -> Result<CompareReport> {
    if ratios == 0 || config.repeats == 0 {
        return Err(Error::Usage("ratios and repeats must be positive".into()));
    }
    check_exclusive()?;
    let _lock = TIMING.lock().unwrap_or_else(|e| e.into_inner());
    let mut sa = Stack::new(a.0, a.1, target, config)?;
    let mut sb = Stack::new(b.0, b.1, target, config)?;
    sa.integrity()?;
    sb.integrity()?;
    let mut out = Vec::with_capacity(ratios);
    for k in 0..ratios {
        // alternate which program goes first so drift affects both equally
        let (ta, tb) = if k % 2 == 0 {
            let ta = (0..config.repeats).map(|_| sa.run_once()).min().unwrap();
            let tb = (0..config.repeats).map(|_| sb.run_once()).min().unwrap();
            (ta, tb)
        } else {
            let tb = (0..config.repeats).map(|_| sb.run_once()).min().unwrap();
            let ta = (0..config.repeats).map(|_| sa.run_once()).min().unwrap();
            (ta, tb)
        };
        out.push(tb as f64 / ta as f64);
    }
    let mut sorted = out.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(CompareReport {
        program_a: a.0.hash_hex(),
        program_b: b.0.hash_hex(),
        config: config.clone(),
        median: quantile(&sorted, 0.5),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        iqr: quantile(&sorted, 0.75) - quantile(&sorted, 0.25),
        ratios: out,
        machine: MachineInfo::current(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse;

    fn small() -> BenchConfig {
        BenchConfig {
            vector_size: 1000,
            stack_depth: 10,
            repeats: 20,
        }
    }

    #[test]
    fn min_never_exceeds_mean() {
        let g = parse("c = 0.5\ny = x * c\nz = y + c\nreturn z").unwrap();
        let r = measure_throughput(&g, g.coeffs(), TargetFunction::Exp2, &small()).unwrap();
        assert!(r.min_ns as f64 <= r.mean_ns);
        assert_eq!(r.repeat_ns.len(), 20);
        assert!(r.speed > 0.0);
        assert!(!r.machine.cpu_model.is_empty());
    }

    #[test]
    fn usage_and_integrity_errors() {
        let g = parse("c = 0.0\ny = c / c\nreturn y").unwrap();
        assert!(matches!(
            measure_throughput(&g, g.coeffs(), TargetFunction::Exp2, &small()),
            Err(Error::BenchIntegrity(_))
        ));
        let id = ProgramGraph::identity();
        let zero = BenchConfig { repeats: 0, ..small() };
        assert!(measure_throughput(&id, &[], TargetFunction::Exp2, &zero).is_err());
        assert!(compare_interleaved((&id, &[]), (&id, &[]), TargetFunction::Exp2, &small(), 0).is_err());
    }

    #[test]
    fn refuses_while_other_workers_run() {
        let g = ProgramGraph::identity();
        let handle = std::thread::spawn(|| {
            let _w = WorkerGuard::enter();
            std::thread::sleep(std::time::Duration::from_millis(300));
        });
        std::thread::sleep(std::time::Duration::from_millis(50));
        let r = measure_throughput(&g, &[], TargetFunction::Exp2, &small());
        handle.join().unwrap();
        assert!(matches!(r, Err(Error::BenchIntegrity(_))));
        // a worker may time its own programs
        let _w = WorkerGuard::enter();
        assert!(measure_throughput(&g, &[], TargetFunction::Exp2, &small()).is_ok());
    }
}
