//! Command-line front end. Every command prints (or writes) a JSON report
//! carrying the code version and a hash of the settings that produced it.
//!
//! Exit codes: 0 success, 1 a proof or check failed, 2 usage or
//! configuration error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineSpec, Family};
use crate::bench::{self, BenchConfig};
use crate::certify::{self, Certificate, ProofLimits, ProofResult};
use crate::config::{hash_json, ExperimentConfig};
use crate::dnsga::{run_worker_pool_observed, Checkpoint, Resume};
use crate::error::{Error, Result};
use crate::evalcore::{self, EvalContext, EvaluatedProgram, EvaluationReport, SecondObjective};
use crate::graph::{self, ArithmeticMode, ProgramGraph};
use crate::targets::TargetFunction;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "transcend", version, about = "Search, test, benchmark and certify straight-line approximations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the evolutionary search described by a config file.
    Search(SearchArgs),
    /// Prove a relative-error bound for a program.
    Certify(CertifyArgs),
    /// Re-verify a saved proof certificate.
    CheckCertificate(CheckArgs),
    /// Build a classical baseline approximation.
    Baseline(BaselineArgs),
    /// Measure a program's error on the test grid or exhaustively.
    Test(TestArgs),
    /// Measure a program's throughput.
    Bench(BenchArgs),
    /// Compare the throughput of two programs.
    Compare(CompareArgs),
    /// Export an archive's Pareto front for plotting.
    ExportFront(ExportArgs),
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    /// TOML experiment config.
    pub config: PathBuf,
    /// Overrides the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run only this seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the evaluation budget.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Overrides the worker count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Continue from the population and archive already in the output directory.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CertifyArgs {
    pub program: PathBuf,
    #[arg(long, default_value = "exp2")]
    pub target: TargetFunction,
    #[arg(long)]
    pub epsilon: f64,
    /// Lower end of the proof interval (default: the target's certification domain).
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long, default_value_t = ProofLimits::default().taylor_order)]
    pub order: usize,
    #[arg(long, default_value_t = ProofLimits::default().max_depth)]
    pub max_depth: u32,
    #[arg(long, default_value_t = ProofLimits::default().max_leaves)]
    pub max_leaves: u64,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub time_budget: Option<f64>,
    /// Write a re-checkable certificate here.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub certificate: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BaselineArgs {
    /// taylor, pade, chebyshev, cfrac-euler, cfrac-gauss, cfrac-macon, minimax, rational-import
    #[arg(long)]
    pub family: String,
    #[arg(long, default_value = "exp2")]
    pub target: TargetFunction,
    /// Order M (numerator order for Padé, depth for continued fractions).
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Sweep orders 1..=N instead of building one.
    #[arg(long)]
    pub sweep: Option<usize>,
    #[arg(long)]
    pub denominator: Option<usize>,
    #[arg(long)]
    pub center: Option<f64>,
    /// Rational coefficients file for rational-import.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Grid size for the error report.
    #[arg(long, default_value_t = 100_000)]
    pub points: usize,
    /// Directory for the program text files.
    #[arg(long)]
    pub emit: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TestArgs {
    pub program: PathBuf,
    #[arg(long, default_value = "exp2")]
    pub target: TargetFunction,
    #[arg(long, default_value = "real64")]
    pub mode: ArithmeticMode,
    /// Every binary32 input in the domain (float32 mode only).
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long, default_value_t = crate::targets::TEST_SIZE)]
    pub points: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchOpts {
    #[arg(long, default_value_t = BenchConfig::default().vector_size)]
    pub vector_size: usize,
    #[arg(long, default_value_t = BenchConfig::default().stack_depth)]
    pub stack_depth: usize,
    #[arg(long, default_value_t = BenchConfig::default().repeats)]
    pub repeats: usize,
}

impl BenchOpts {
    fn config(&self) -> BenchConfig {
        BenchConfig {
            vector_size: self.vector_size,
            stack_depth: self.stack_depth,
            repeats: self.repeats,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    pub program: PathBuf,
    #[arg(long, default_value = "exp2")]
    pub target: TargetFunction,
    #[command(flatten)]
    pub bench: BenchOpts,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, default_value = "exp2")]
    pub target: TargetFunction,
    #[command(flatten)]
    pub bench: BenchOpts,
    /// Number of interleaved ratios.
    #[arg(long, default_value_t = 10)]
    pub ratios: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum FrontFormat {
    Csv,
    Json,
}

#[derive(Args, Debug, Serialize)]
pub struct ExportArgs {
    pub archive: PathBuf,
    #[arg(long, value_enum, default_value_t = FrontFormat::Csv)]
    pub format: FrontFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Wrapper written around every report.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub result: T,
}

fn envelope<C: Serialize, T>(command: &str, config: &C, result: T) -> Envelope<T> {
    Envelope {
        command: command.into(),
        version: crate::VERSION.into(),
        config_hash: hash_json(config),
        config: serde_json::to_value(config).expect("serializable"),
        result,
    }
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => write_file(p, &text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_program(path: &Path) -> Result<ProgramGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    graph::parse(&text)
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Search(a) => cmd_search(&a),
        Command::Certify(a) => cmd_certify(&a),
        Command::CheckCertificate(a) => cmd_check(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::Test(a) => cmd_test(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::ExportFront(a) => cmd_export_front(&a),
    }
}

/// Entry point shared by the binary: parses `args`, runs, maps errors to
/// exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) | Error::BenchIntegrity(_) => EXIT_FAILED,
                _ => EXIT_USAGE,
            }
        }
    }
}

// ---------------------------------------------------------------- search

/// Archive file written by `search`, one per seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArchiveFile {
    pub version: String,
    pub config_hash: String,
    pub target: TargetFunction,
    pub mode: ArithmeticMode,
    pub objective: SecondObjective,
    pub seed: u64,
    pub evaluations: usize,
    pub crashes: usize,
    /// Pareto front, best precision first.
    pub members: Vec<EvaluationReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PopulationFile {
    pub config_hash: String,
    pub members: Vec<EvaluationReport>,
}

#[derive(Debug, Serialize)]
pub struct SearchSummary {
    pub seed: u64,
    pub directory: PathBuf,
    pub evaluations: usize,
    pub total_evaluations: usize,
    pub crashes: usize,
    pub front_size: usize,
    pub best_max_error: f64,
    pub warnings: Vec<String>,
}

fn reports(ps: &[EvaluatedProgram], ctx: &EvalContext, seed: u64) -> Vec<EvaluationReport> {
    ps.iter().map(|p| p.to_report(ctx, seed)).collect()
}

fn programs(rs: &[EvaluationReport]) -> Result<Vec<EvaluatedProgram>> {
    rs.iter().map(EvaluatedProgram::from_report).collect()
}

/// Runs one seed of an experiment, writing its artifacts under `dir`.
pub fn run_search_seed(config: &ExperimentConfig, seed: u64, dir: &Path, resume: bool) -> Result<SearchSummary> {
    let hash = config.hash();
    let ctx = EvalContext::new(
        config.target,
        config.mode,
        config.objective,
        config.train_size,
        config.validation_size,
        config.cmaes.clone(),
        config.bench.clone(),
    )?;
    let mut prior_evals = 0;
    let state = if resume {
        let a: ArchiveFile = serde_json::from_str(&fs::read_to_string(dir.join("archive.json"))?)?;
        let p: PopulationFile = serde_json::from_str(&fs::read_to_string(dir.join("population.json"))?)?;
        if a.config_hash != hash {
            eprintln!("warning: resuming from a run with a different config hash");
        }
        prior_evals = a.evaluations;
        Resume {
            population: programs(&p.members)?,
            archive: programs(&a.members)?,
        }
    } else {
        Resume::default()
    };
    let search = config.search_config(seed);
    fs::create_dir_all(dir)?;
    write_file(&dir.join("config.toml"), &config.to_toml())?;
    let archive_file = |evaluations: usize, crashes: usize, front: &[EvaluatedProgram]| ArchiveFile {
        version: crate::VERSION.into(),
        config_hash: hash.clone(),
        target: config.target,
        mode: config.mode,
        objective: config.objective,
        seed,
        evaluations,
        crashes,
        members: reports(front, &ctx, seed),
    };
    let write_state = |archive: &ArchiveFile, population: &[EvaluatedProgram]| -> Result<()> {
        write_file(&dir.join("archive.json"), &serde_json::to_string_pretty(archive)?)?;
        let pop = PopulationFile {
            config_hash: hash.clone(),
            members: reports(population, &ctx, seed),
        };
        write_file(&dir.join("population.json"), &serde_json::to_string(&pop)?)
    };
    // written as the run goes so that an interrupted run can be resumed
    let on_checkpoint = |c: &Checkpoint| {
        let evaluations = prior_evals + c.evaluations;
        let snap = archive_file(evaluations, 0, &c.front);
        let written = serde_json::to_string(&snap).map_err(Error::from).and_then(|json| {
            write_file(&dir.join("checkpoints").join(format!("archive_{evaluations:09}.json")), &json)?;
            write_state(&snap, &c.population)
        });
        if let Err(e) = written {
            eprintln!("warning: checkpoint at {evaluations} evaluations not written: {e}");
        }
    };
    let result = run_worker_pool_observed(&search, &ctx, state, Some(&on_checkpoint))?;
    let total = prior_evals + result.evaluations;
    let archive = archive_file(total, result.crashes, &result.archive);
    write_state(&archive, &result.population)?;
    write_file(&dir.join("front.csv"), &front_csv(&archive.members))?;
    // best program per operation count
    let mut best: std::collections::BTreeMap<usize, &EvaluatedProgram> = Default::default();
    for p in &result.archive {
        let e = best.entry(p.complexity).or_insert(p);
        if p.precision > e.precision {
            *e = p;
        }
    }
    for (ops, p) in best {
        let text = format!(
            "# max error {:e}, config {hash}, version {}\n{}",
            p.max_error(),
            crate::VERSION,
            graph::serialize(&p.graph)
        );
        write_file(&dir.join("best").join(format!("ops_{ops:03}.txt")), &text)?;
    }
    Ok(SearchSummary {
        seed,
        directory: dir.to_path_buf(),
        evaluations: result.evaluations,
        total_evaluations: total,
        crashes: result.crashes,
        front_size: archive.members.len(),
        best_max_error: result.archive.iter().map(|p| p.max_error()).fold(f64::INFINITY, f64::min),
        warnings: result.warnings,
    })
}

fn cmd_search(a: &SearchArgs) -> Result<i32> {
    let mut config = ExperimentConfig::load(&a.config)?;
    if let Some(b) = a.budget {
        config.search.budget = b;
    }
    if let Some(w) = a.workers {
        config.search.workers = w;
    }
    if let Some(o) = &a.out {
        config.output_dir = o.clone();
    }
    if let Some(s) = a.seed {
        config.seeds = vec![s];
    }
    for w in config.validate()? {
        eprintln!("warning: {w}");
    }
    let mut summaries = Vec::new();
    for seed in config.run_seeds() {
        let dir = config.output_dir.join(format!("seed_{seed}"));
        summaries.push(run_search_seed(&config, seed, &dir, a.resume)?);
    }
    emit(&envelope("search", &config, summaries), None)?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- certify

#[derive(Debug, Serialize)]
pub struct CertifyReport {
    pub program_hash: String,
    pub target: TargetFunction,
    pub epsilon: f64,
    pub domain: (f64, f64),
    pub well_defined: ProofResult,
    pub bound: ProofResult,
    pub proven: bool,
}

fn cmd_certify(a: &CertifyArgs) -> Result<i32> {
    let g = read_program(&a.program)?;
    let d = certify::default_domain(a.target);
    let domain = (a.lo.unwrap_or(d.0), a.hi.unwrap_or(d.1));
    let limits = ProofLimits {
        max_depth: a.max_depth,
        max_leaves: a.max_leaves,
        taylor_order: a.order,
        time_budget: a.time_budget,
        record_leaves: a.certificate.is_some(),
    };
    let wd = certify::prove_well_defined(&g, g.coeffs(), domain, &ProofLimits { record_leaves: false, ..limits })?;
    let mut bound = certify::prove_bound(&g, g.coeffs(), a.target, domain, a.epsilon, &limits)?;
    if let Some(path) = &a.certificate {
        if bound.proven() {
            let cert = Certificate::from_proof(&g, a.target, &bound, limits.taylor_order)?;
            write_file(path, &serde_json::to_string(&cert)?)?;
        }
    }
    bound.leaves = None;
    let proven = wd.proven() && bound.proven();
    let report = CertifyReport {
        program_hash: g.hash_hex(),
        target: a.target,
        epsilon: a.epsilon,
        domain,
        well_defined: wd,
        bound,
        proven,
    };
    emit(&envelope("certify", a, report), a.out.as_deref())?;
    Ok(if proven { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_check(a: &CheckArgs) -> Result<i32> {
    let text = fs::read_to_string(&a.certificate).map_err(|e| Error::Usage(format!("{}: {e}", a.certificate.display())))?;
    let cert: Certificate = serde_json::from_str(&text).map_err(|e| Error::Usage(format!("not a certificate: {e}")))?;
    let check = certify::check_certificate(&cert)?;
    let valid = check.valid;
    #[derive(Serialize)]
    struct Cfg<'a> {
        certificate: &'a Path,
        program_hash: &'a str,
        epsilon: f64,
    }
    let cfg = Cfg {
        certificate: &a.certificate,
        program_hash: &cert.program_hash,
        epsilon: cert.epsilon,
    };
    emit(&envelope("check-certificate", &cfg, check), a.out.as_deref())?;
    Ok(if valid { EXIT_OK } else { EXIT_FAILED })
}

// ---------------------------------------------------------------- baseline

#[derive(Debug, Serialize)]
pub struct BaselineRow {
    pub family: Family,
    pub order: usize,
    pub operations: usize,
    pub max_rel_error: f64,
    pub program_hash: String,
    pub program: String,
}

fn baseline_row(target: TargetFunction, family: Family, order: usize, g: ProgramGraph, points: usize) -> Result<BaselineRow> {
    let r = evalcore::max_error_on_grid(&g, g.coeffs(), target, ArithmeticMode::Real64, points)?;
    Ok(BaselineRow {
        family,
        order,
        operations: g.count_operations(),
        max_rel_error: r.max_error,
        program_hash: g.hash_hex(),
        program: graph::serialize(&g),
    })
}

fn cmd_baseline(a: &BaselineArgs) -> Result<i32> {
    let family: Family = a.family.parse()?;
    let mut rows = Vec::new();
    if family == Family::RationalMinimaxImported {
        let path = a
            .input
            .as_ref()
            .ok_or_else(|| Error::Usage("rational-import needs --input".into()))?;
        let text = fs::read_to_string(path)?;
        let (g, r) = baselines::import_rational_minimax(&text)?;
        let order = r.num.len().saturating_sub(1);
        rows.push(baseline_row(a.target, family, order, g, a.points)?);
    } else {
        let orders: Vec<usize> = match a.sweep {
            Some(n) => (1..=n).collect(),
            None => vec![a.order],
        };
        for m in orders {
            let spec = BaselineSpec {
                family,
                order: m,
                denominator: a.denominator,
                center: a.center,
                interval: None,
            };
            let g = baselines::build(a.target, &spec)?;
            rows.push(baseline_row(a.target, family, m, g, a.points)?);
        }
    }
    if let Some(dir) = &a.emit {
        for r in &rows {
            write_file(&dir.join(format!("{}_{}_{}.txt", a.target, family.name(), r.order)), &r.program)?;
        }
    }
    emit(&envelope("baseline", a, rows), a.out.as_deref())?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- test

#[derive(Debug, Serialize)]
pub struct TestReport {
    pub program_hash: String,
    pub target: TargetFunction,
    pub mode: ArithmeticMode,
    pub exhaustive: bool,
    pub points: usize,
    /// Relative error in real mode, ULPs in float mode.
    pub max_error: f64,
    pub argmax: f64,
    pub operations: usize,
}

/// Error of a program with frozen coefficients.
pub fn test_program(g: &ProgramGraph, target: TargetFunction, mode: ArithmeticMode, exhaustive: bool, points: usize) -> Result<TestReport> {
    if mode == ArithmeticMode::Extended {
        return Err(Error::Usage("extended mode is for oracles".into()));
    }
    let coeffs: Vec<f64> = g.coeffs().iter().map(|&c| mode.bind(c)).collect();
    let (max_error, argmax, points) = if exhaustive {
        if mode != ArithmeticMode::Float32 {
            return Err(Error::Usage("exhaustive testing is defined for float32 mode".into()));
        }
        let r = evalcore::max_ulp_error_exhaustive(g, &coeffs, target)?;
        (r.max_ulp_error, r.argmax as f64, r.count)
    } else {
        let r = evalcore::max_error_on_grid(g, &coeffs, target, mode, points)?;
        (r.max_error, r.argmax, r.points)
    };
    Ok(TestReport {
        program_hash: g.hash_hex(),
        target,
        mode,
        exhaustive,
        points,
        max_error,
        argmax,
        operations: g.count_operations(),
    })
}

fn cmd_test(a: &TestArgs) -> Result<i32> {
    let g = read_program(&a.program)?;
    let report = test_program(&g, a.target, a.mode, a.exhaustive, a.points)?;
    emit(&envelope("test", a, report), a.out.as_deref())?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- bench

fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let g = read_program(&a.program)?;
    let r = bench::measure_throughput(&g, g.coeffs(), a.target, &a.bench.config())?;
    emit(&envelope("bench", a, r), a.out.as_deref())?;
    Ok(EXIT_OK)
}

fn cmd_compare(a: &CompareArgs) -> Result<i32> {
    let ga = read_program(&a.a)?;
    let gb = read_program(&a.b)?;
    let r = bench::compare_interleaved((&ga, ga.coeffs()), (&gb, gb.coeffs()), a.target, &a.bench.config(), a.ratios)?;
    emit(&envelope("compare", a, r), a.out.as_deref())?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------- export

pub const FRONT_HEADER: &str = "complexity,speed,precision,max_error,program_hash";

/// One CSV row per archive member, in archive order.
pub fn front_csv(members: &[EvaluationReport]) -> String {
    let mut s = String::from(FRONT_HEADER);
    s.push('\n');
    for m in members {
        let speed = m.speed.map(|v| format!("{v:e}")).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{:e},{:e},{}\n",
            m.complexity, speed, m.precision, -m.precision, m.program_hash
        ));
    }
    s
}

#[derive(Debug, Serialize)]
pub struct FrontPoint {
    pub complexity: usize,
    pub speed: Option<f64>,
    #[serde(with = "crate::evalcore::float_or_string")]
    pub precision: f64,
    pub program_hash: String,
}

fn cmd_export_front(a: &ExportArgs) -> Result<i32> {
    let text = fs::read_to_string(&a.archive).map_err(|e| Error::Usage(format!("{}: {e}", a.archive.display())))?;
    let archive: ArchiveFile = serde_json::from_str(&text).map_err(|e| Error::Usage(format!("not an archive: {e}")))?;
    match a.format {
        FrontFormat::Csv => {
            let csv = front_csv(&archive.members);
            match &a.out {
                Some(p) => write_file(p, &csv)?,
                None => std::io::stdout().write_all(csv.as_bytes())?,
            }
        }
        FrontFormat::Json => {
            let pts: Vec<FrontPoint> = archive
                .members
                .iter()
                .map(|m| FrontPoint {
                    complexity: m.complexity,
                    speed: m.speed,
                    precision: m.precision,
                    program_hash: m.program_hash.clone(),
                })
                .collect();
            #[derive(Serialize)]
            struct Cfg<'a> {
                archive: &'a Path,
                archive_config_hash: &'a str,
            }
            let cfg = Cfg {
                archive: &a.archive,
                archive_config_hash: &archive.config_hash,
            };
            emit(&envelope("export-front", &cfg, pts), a.out.as_deref())?;
        }
    }
    Ok(EXIT_OK)
}
