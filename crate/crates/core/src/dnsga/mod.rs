//! Distributed multi-objective evolutionary search over program graphs.
//!
//! Workers run independent loops: draw `2S` evaluated programs from the
//! broker, select `S` parents, mutate each parent twice, evaluate the children
//! and send them back. The broker keeps the last `P` programs. A separate
//! archive keeps the best Pareto front ever seen.

mod mutate;
mod select;

pub use mutate::{mutate, MutationKind, MutationOutcome, MutationProbabilities};
pub use select::{
    dominates, dominates_programs, float_stages, least_crowded, non_dominated_sort, normalized, sanitize,
    select_in_stages, single_stage, Requirement, Stage,
};

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::WorkerGuard;
use crate::error::{Error, Result};
use crate::evalcore::{evaluate_program, EvalContext, EvaluatedProgram, SecondObjective};
use crate::graph::ProgramGraph;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub workers: usize,
    pub sample_size: usize,
    /// Broker capacity P.
    pub population: usize,
    /// Total number of child evaluations.
    pub budget: usize,
    pub second: SecondObjective,
    /// Empty means the default for the mode: one stage in real mode, the
    /// one-ULP stage split in float mode.
    pub stages: Vec<Stage>,
    pub mutation: MutationProbabilities,
    /// Divide crowding coordinates by the sample's objective ranges.
    pub normalize: bool,
    pub seed: u64,
    /// Snapshot the archive every this many evaluations (0 disables).
    pub checkpoint_every: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            sample_size: 20,
            population: 512,
            budget: 100_000,
            second: SecondObjective::Complexity,
            stages: Vec::new(),
            mutation: MutationProbabilities::default(),
            normalize: true,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl SearchConfig {
    /// Checks the configuration; returns any non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.workers == 0 || self.sample_size == 0 {
            return Err(Error::Config("workers and sample_size must be positive".into()));
        }
        if self.population < 2 * self.sample_size {
            return Err(Error::Config("population must hold at least 2 * sample_size programs".into()));
        }
        if !self.stages.is_empty() {
            let total: usize = self.stages.iter().map(|s| s.count).sum();
            if total != self.sample_size {
                return Err(Error::Config(format!(
                    "stage counts sum to {total}, sample_size is {}",
                    self.sample_size
                )));
            }
        }
        if self.second == SecondObjective::Speed && self.workers > 1 {
            return Err(Error::Config(
                "the speed objective needs exclusive timing and runs with one worker".into(),
            ));
        }
        let mut warnings = Vec::new();
        if 2 * self.sample_size > self.workers {
            warnings.push(format!(
                "sample_size {} is not small relative to {} workers",
                self.sample_size, self.workers
            ));
        }
        Ok(warnings)
    }

    fn stages_for(&self, ctx_mode: crate::graph::ArithmeticMode) -> Vec<Stage> {
        if !self.stages.is_empty() {
            self.stages.clone()
        } else if ctx_mode == crate::graph::ArithmeticMode::Float32 {
            float_stages(self.sample_size)
        } else {
            single_stage(self.sample_size)
        }
    }
}

/// Scores a mutated graph. Implementations must be callable from many threads.
pub trait Evaluator: Sync {
    fn evaluate(&self, graph: &ProgramGraph, seed: u64) -> EvaluatedProgram;
    fn second(&self) -> SecondObjective;
    fn mode(&self) -> crate::graph::ArithmeticMode;
}

impl Evaluator for EvalContext {
    fn evaluate(&self, graph: &ProgramGraph, seed: u64) -> EvaluatedProgram {
        evaluate_program(graph, self, seed)
    }

    fn second(&self) -> SecondObjective {
        self.second
    }

    fn mode(&self) -> crate::graph::ArithmeticMode {
        self.mode
    }
}

/// Holds the most recent programs and serves random samples of them.
#[derive(Debug)]
pub struct Broker {
    capacity: usize,
    programs: Mutex<VecDeque<EvaluatedProgram>>,
}

impl Broker {
    pub fn new(capacity: usize) -> Broker {
        Broker {
            capacity,
            programs: Mutex::new(VecDeque::with_capacity(capacity)),
        }
    }

    pub fn put(&self, p: EvaluatedProgram) {
        let mut q = self.programs.lock().unwrap_or_else(|e| e.into_inner());
        if q.len() == self.capacity {
            q.pop_front();
        }
        q.push_back(p);
    }

    /// Up to `n` distinct stored programs chosen uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<EvaluatedProgram> {
        let q = self.programs.lock().unwrap_or_else(|e| e.into_inner());
        let n = n.min(q.len());
        sample_indices(rng, q.len(), n).into_iter().map(|i| q[i].clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.programs.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<EvaluatedProgram> {
        self.programs.lock().unwrap_or_else(|e| e.into_inner()).iter().cloned().collect()
    }
}

/// Best-ever Pareto front. Programs with identical objective vectors are
/// kept once (the first seen).
#[derive(Clone, Debug)]
pub struct Archive {
    second: SecondObjective,
    members: Vec<EvaluatedProgram>,
}

impl Archive {
    pub fn new(second: SecondObjective) -> Archive {
        Archive {
            second,
            members: Vec::new(),
        }
    }

    /// Offers a program; returns whether it entered the front.
    pub fn offer(&mut self, p: &EvaluatedProgram) -> bool {
        let obj = sanitize(p.objectives(self.second));
        if obj[0] == f64::NEG_INFINITY {
            return false;
        }
        for m in &self.members {
            let o = sanitize(m.objectives(self.second));
            if o == obj || dominates(&o, &obj) {
                return false;
            }
        }
        let second = self.second;
        self.members
            .retain(|m| !dominates(&obj, &sanitize(m.objectives(second))));
        self.members.push(p.clone());
        true
    }

    /// Members sorted by decreasing second objective.
    pub fn members(&self) -> Vec<EvaluatedProgram> {
        let mut m = self.members.clone();
        let second = self.second;
        m.sort_by(|a, b| {
            let (oa, ob) = (a.objectives(second), b.objectives(second));
            ob[1].total_cmp(&oa[1]).then(a.id.cmp(&b.id))
        });
        m
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// True when every member of `earlier` is matched or dominated by a member here.
    pub fn covers(&self, earlier: &[EvaluatedProgram]) -> bool {
        earlier.iter().all(|e| {
            let eo = sanitize(e.objectives(self.second));
            self.members.iter().any(|m| {
                let mo = sanitize(m.objectives(self.second));
                mo == eo || dominates(&mo, &eo)
            })
        })
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub evaluations: usize,
    pub front: Vec<EvaluatedProgram>,
    /// Broker contents when the snapshot was taken.
    pub population: Vec<EvaluatedProgram>,
}

/// Called with every checkpoint as soon as it is taken, from a worker thread.
pub type CheckpointSink<'a> = &'a (dyn Fn(&Checkpoint) + Sync);

#[derive(Debug)]
pub struct PoolResult {
    /// Broker contents at the end: the latest programs.
    pub population: Vec<EvaluatedProgram>,
    pub archive: Vec<EvaluatedProgram>,
    pub evaluations: usize,
    pub crashes: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub warnings: Vec<String>,
}

/// State carried over from an earlier run.
#[derive(Clone, Debug, Default)]
pub struct Resume {
    pub population: Vec<EvaluatedProgram>,
    pub archive: Vec<EvaluatedProgram>,
}

struct Shared<'a, E: Evaluator> {
    config: &'a SearchConfig,
    evaluator: &'a E,
    stages: Vec<Stage>,
    broker: Broker,
    archive: Mutex<Archive>,
    checkpoints: Mutex<Vec<Checkpoint>>,
    sink: Option<CheckpointSink<'a>>,
    reserved: AtomicUsize,
    completed: AtomicUsize,
    next_id: AtomicU64,
    crashes: AtomicUsize,
}

impl<E: Evaluator> Shared<'_, E> {
    fn seed_programs(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<EvaluatedProgram> {
        let identity = self.evaluator.evaluate(&ProgramGraph::identity(), rng.gen());
        (0..n)
            .map(|_| EvaluatedProgram {
                id: self.next_id.fetch_add(1, Ordering::SeqCst),
                ..identity.clone()
            })
            .collect()
    }

    fn record(&self, mut child: EvaluatedProgram) -> EvaluatedProgram {
        child.id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let snapshot = {
            let mut archive = self.archive.lock().unwrap_or_else(|e| e.into_inner());
            archive.offer(&child);
            let done = self.completed.fetch_add(1, Ordering::SeqCst) + 1;
            let every = self.config.checkpoint_every;
            (every > 0 && done.is_multiple_of(every)).then(|| Checkpoint {
                evaluations: done,
                front: archive.members(),
                population: self.broker.snapshot(),
            })
        };
        if let Some(c) = snapshot {
            if let Some(sink) = self.sink {
                sink(&c);
            }
            self.checkpoints.lock().unwrap_or_else(|e| e.into_inner()).push(c);
        }
        child
    }

    /// One generation. Returns false once the budget is exhausted.
    fn generation(&self, rng: &mut ChaCha8Rng, first: bool) -> Result<bool> {
        let s = self.config.sample_size;
        let mut sample = if first { Vec::new() } else { self.broker.sample(2 * s, rng) };
        if sample.len() < 2 * s {
            let missing = 2 * s - sample.len();
            sample.extend(self.seed_programs(missing, rng));
        }
        let second = self.evaluator.second();
        let points: Vec<[f64; 2]> = sample.iter().map(|p| p.objectives(second)).collect();
        let ids: Vec<u64> = sample.iter().map(|p| p.id).collect();
        let parents = select_in_stages(&points, &ids, &self.stages, self.config.normalize)?;
        let mut children = Vec::with_capacity(2 * s);
        let mut more = true;
        for _ in 0..2 {
            for &pi in &parents {
                if self.reserved.fetch_add(1, Ordering::SeqCst) >= self.config.budget {
                    more = false;
                    break;
                }
                let child = mutate(&sample[pi].graph, &self.config.mutation, rng).graph;
                let evaluated = self.evaluator.evaluate(&child, rng.gen());
                children.push(self.record(evaluated));
            }
            if !more {
                break;
            }
        }
        for c in children {
            self.broker.put(c);
        }
        Ok(more)
    }

    fn worker(&self, index: usize) -> Result<()> {
        let _guard = WorkerGuard::enter();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(index as u64);
        let mut first = self.broker.is_empty();
        loop {
            match catch_unwind(AssertUnwindSafe(|| self.generation(&mut rng, first))) {
                Ok(Ok(true)) => first = false,
                Ok(Ok(false)) => return Ok(()),
                Ok(Err(e)) => return Err(e),
                Err(_) => {
                    // the generation's children are lost; carry on
                    self.crashes.fetch_add(1, Ordering::SeqCst);
                    if self.reserved.load(Ordering::SeqCst) >= self.config.budget {
                        return Ok(());
                    }
                }
            }
        }
    }
}

/// Runs the search until `config.budget` children have been evaluated.
pub fn run_worker_pool<E: Evaluator>(config: &SearchConfig, evaluator: &E) -> Result<PoolResult> {
    run_worker_pool_from(config, evaluator, Resume::default())
}

/// Like [`run_worker_pool`], continuing from a previous run's population and archive.
pub fn run_worker_pool_from<E: Evaluator>(config: &SearchConfig, evaluator: &E, resume: Resume) -> Result<PoolResult> {
    run_worker_pool_observed(config, evaluator, resume, None)
}

/// Like [`run_worker_pool_from`], handing each checkpoint to `sink` as it is taken.
pub fn run_worker_pool_observed<E: Evaluator>(
    config: &SearchConfig,
    evaluator: &E,
    resume: Resume,
    sink: Option<CheckpointSink<'_>>,
) -> Result<PoolResult> {
    let warnings = config.validate()?;
    if config.second != evaluator.second() {
        return Err(Error::Config("search and evaluator disagree on the second objective".into()));
    }
    let next_id = resume
        .population
        .iter()
        .chain(&resume.archive)
        .map(|p| p.id + 1)
        .max()
        .unwrap_or(0);
    let shared = Shared {
        config,
        evaluator,
        stages: config.stages_for(evaluator.mode()),
        broker: Broker::new(config.population),
        archive: Mutex::new(Archive::new(config.second)),
        checkpoints: Mutex::new(Vec::new()),
        sink,
        reserved: AtomicUsize::new(0),
        completed: AtomicUsize::new(0),
        next_id: AtomicU64::new(next_id),
        crashes: AtomicUsize::new(0),
    };
    {
        let mut a = shared.archive.lock().unwrap();
        for p in resume.archive.iter().chain(&resume.population) {
            a.offer(p);
        }
    }
    for p in resume.population {
        shared.broker.put(p);
    }

    let results: Vec<Result<()>> = if config.workers == 1 {
        vec![shared.worker(0)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..config.workers)
                .map(|i| {
                    let sh = &shared;
                    scope.spawn(move || sh.worker(i))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Numerical("worker thread panicked".into()))))
                .collect()
        })
    };
    for r in results {
        r?;
    }
    let archive = shared.archive.into_inner().unwrap_or_else(|e| e.into_inner());
    Ok(PoolResult {
        population: shared.broker.snapshot(),
        archive: archive.members(),
        evaluations: shared.completed.load(Ordering::SeqCst),
        crashes: shared.crashes.load(Ordering::SeqCst),
        checkpoints: shared.checkpoints.into_inner().unwrap_or_else(|e| e.into_inner()),
        warnings,
    })
}
