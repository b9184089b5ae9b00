//! Acceptance suite: one line per criterion, `[PASS]` or `[FAIL]` with the
//! measured numbers. Every tolerance is a constant below.
//!
//! A `[FAIL]` line is a real result and is reported, not hidden; the binary
//! itself only exits nonzero if a check cannot run at all.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use transcend::baselines::{self, BaselineSpec, Family};
use transcend::bench::{self, BenchConfig};
use transcend::certify::{self, Enclosure, Interval, ProofLimits};
use transcend::cmaes::{self, CmaesConfig};
use transcend::dd::Dd;
use transcend::dnsga::{float_stages, non_dominated_sort, run_worker_pool, select_in_stages, single_stage, SearchConfig};
use transcend::evalcore::{self, EvalContext, PreparedSet, SecondObjective};
use transcend::fixtures::EVOLVED;
use transcend::graph::{ArithmeticMode, GraphBuilder, ProgramGraph, Tape};
use transcend::targets::{TargetFunction, TEST_SIZE, TRAIN_SIZE, VALIDATION_SIZE};

// certification
const PROOF_SLACK: f64 = 1.05;
const PROOF_SECONDS: f64 = 120.0;
// soundness
const SOUNDNESS_SAMPLES: usize = 100_000;
const INCLUSION_TRIALS: usize = 1_000_000;
const FD_POINTS: usize = 1_000;
const FD_STEP: f64 = 1e-7;
const FD_SLACK: f64 = 1e-6;
// baselines
const BASELINE_OPS: [usize; 3] = [4, 7, 10];
const BASELINE_FACTOR: f64 = 10.0;
const BASELINE_GRID: usize = 1_000_000;
const BASELINE_SECONDS: f64 = 600.0;
// search
const SEARCH_WORKERS: usize = 8;
const SEARCH_BUDGET: usize = 100_000;
const SEARCH_SEEDS: [u64; 3] = [1, 2, 3];
const SEARCH_MAX_OPS: usize = 4;
const SEARCH_NEEDED: usize = 2;
/// Wall-clock limit per seed on an 8-core machine; scaled up when fewer cores are available.
const SEARCH_SECONDS_8_CORES: f64 = 7200.0;
// dNSGA-II
const SORT_SAMPLES: usize = 1_000;
const SORT_MAX_SIZE: usize = 64;
// CMA-ES
const CONSTANT_ERROR: f64 = 1.0 / 3.0;
const CONSTANT_TOL: f64 = 1e-3;
const RECOVERY_TOL: f64 = 1e-6;
const INIT_SAMPLES: usize = 100_000;
// Kolmogorov-Smirnov critical value at the 1% level, times sqrt(n)
const KS_CRITICAL: f64 = 1.628;
// float32 exhaustive
const EXHAUSTIVE_SECONDS: f64 = 60.0;
const SPOT_POINTS: usize = 1_000;
const SPOT_REL_TOL: f64 = 1e-12;
// bench
const SELF_RATIO: (f64, f64) = (0.95, 1.05);
const SELF_RATIOS: usize = 11;
const MIN_MEAN_RUNS: usize = 50;

type Outcome = Result<String, String>;

fn exp2_domain() -> (f64, f64) {
    certify::default_domain(TargetFunction::Exp2)
}

fn certification_fidelity() -> Outcome {
    let limits = ProofLimits::default();
    let mut notes = Vec::new();
    let mut ok = true;
    for e in &EVOLVED {
        let g = e.graph();
        let t = Instant::now();
        let prove = |eps: f64| certify::prove_bound(&g, g.coeffs(), TargetFunction::Exp2, exp2_domain(), eps, &limits);
        let mut r = prove(e.bound).map_err(|err| err.to_string())?;
        let exact = r.proven();
        if !exact {
            r = prove(e.bound * PROOF_SLACK).map_err(|err| err.to_string())?;
        }
        let secs = t.elapsed().as_secs_f64();
        ok &= r.proven() && secs < PROOF_SECONDS;
        let status = match (exact, r.proven()) {
            (true, _) => "proven",
            (false, true) => "proven with slack",
            (false, false) => "NOT proven",
        };
        notes.push(format!("{} {status} ({} leaves, {:.2}s)", e.name, r.subintervals_used, secs));
    }
    let msg = notes.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
    let scale = 10f64.powi(rng.gen_range(-12..12));
    let a = rng.gen_range(-1.0..1.0) * scale;
    let b = a + rng.gen_range(0.0..1.0) * scale * rng.gen_range(0.0..1.0f64).powi(4);
    Interval::new(a, b)
}

fn pick(rng: &mut ChaCha8Rng, i: &Interval) -> f64 {
    (i.lo + (i.hi - i.lo) * rng.gen::<f64>()).clamp(i.lo, i.hi)
}

fn certifier_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (lo, hi) = exp2_domain();
    // sampled errors never exceed a proven epsilon
    let limits = ProofLimits::default();
    let mut worst_ratio = 0.0f64;
    for e in &EVOLVED {
        let g = e.graph();
        let r = certify::prove_bound(&g, g.coeffs(), TargetFunction::Exp2, exp2_domain(), e.bound, &limits)
            .map_err(|err| err.to_string())?;
        if !r.proven() {
            continue;
        }
        for i in 0..SOUNDNESS_SAMPLES {
            // half uniform, half log-uniform towards the left end
            let x = if i % 2 == 0 {
                rng.gen_range(lo..=hi)
            } else {
                (lo.ln() + (hi.ln() - lo.ln()) * rng.gen::<f64>()).exp().clamp(lo, hi)
            };
            let err = certify::sampled_relative_error(&g, g.coeffs(), TargetFunction::Exp2, x).abs();
            worst_ratio = worst_ratio.max(err / e.bound);
            if err.is_nan() || err > e.bound {
                return Err(format!("{} at x={x:e}: sampled {err:e} > proven {:e}", e.name, e.bound));
            }
        }
    }
    // interval operations enclose every pointwise result
    for _ in 0..INCLUSION_TRIALS {
        let a = random_interval(&mut rng);
        let b = random_interval(&mut rng);
        let (x, y) = (pick(&mut rng, &a), pick(&mut rng, &b));
        let (xd, yd) = (Dd::from_f64(x), Dd::from_f64(y));
        let bad = !a.add(&b).contains_dd(xd + yd)
            || !a.sub(&b).contains_dd(xd - yd)
            || !a.mul(&b).contains_dd(xd * yd)
            || a.div(&b).is_some_and(|q| !q.contains_dd(xd / yd));
        if bad {
            return Err(format!("inclusion violated for {a:?} op {b:?} at ({x:e}, {y:e})"));
        }
    }
    // finite differences sit inside derivative enclosures
    for e in &EVOLVED {
        let g = e.graph();
        for _ in 0..FD_POINTS {
            let a: f64 = rng.gen_range(0.01..0.9);
            let b = a + rng.gen_range(1e-4..0.09);
            let d = certify::interval_derivative(&g, g.coeffs(), Interval::new(a, b))
                .map_err(|p| format!("{}: possible pole {:?}", e.name, p))?;
            let x: f64 = rng.gen_range(a + 1e-5..b - 1e-6);
            let fd = (g.eval_dd(x + FD_STEP, g.coeffs()) - g.eval_dd(x - FD_STEP, g.coeffs())).to_f64() / (2.0 * FD_STEP);
            let slack = FD_SLACK * (1.0 + fd.abs());
            if !(d.lo - slack <= fd && fd <= d.hi + slack) {
                return Err(format!("{} at {x}: difference quotient {fd} outside {d:?}", e.name));
            }
        }
    }
    Ok(format!(
        "{} proofs x {SOUNDNESS_SAMPLES} samples, worst sampled/proven {worst_ratio:.4}; {INCLUSION_TRIALS} inclusion trials; {FD_POINTS} derivative points per fixture",
        EVOLVED.len()
    ))
}

fn fixture_precision(grid_errors: &mut Vec<(&'static str, f64)>) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for e in &EVOLVED {
        let g = e.graph();
        let r = evalcore::max_error_on_grid(&g, g.coeffs(), TargetFunction::Exp2, ArithmeticMode::Real64, TEST_SIZE)
            .map_err(|err| err.to_string())?;
        ok &= r.max_error <= e.bound;
        grid_errors.push((e.name, r.max_error));
        notes.push(format!("{} {:.4e}/{:.4e}", e.name, r.max_error, e.bound));
    }
    let msg = format!("{TEST_SIZE} points: {}", notes.join(", "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn baseline_ordering(grid_errors: &[(&'static str, f64)]) -> Outcome {
    let t = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for ops in BASELINE_OPS {
        let name = format!("f{ops}");
        let fixture = grid_errors
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, e)| e)
            .ok_or("fixture grid errors missing")?;
        for family in Family::GENERATED {
            let best = baselines::family_within(TargetFunction::Exp2, family, ops)
                .into_iter()
                .filter_map(|(label, g)| {
                    evalcore::max_error_on_grid(&g, g.coeffs(), TargetFunction::Exp2, ArithmeticMode::Real64, BASELINE_GRID)
                        .ok()
                        .map(|r| (label, r.max_error))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            let Some((label, err)) = best else { continue };
            let factor = err / fixture;
            if factor < BASELINE_FACTOR {
                ok = false;
                notes.push(format!("{name} vs {} {label}: only {factor:.2}x ({err:.3e})", family.name()));
            }
        }
        let worst = Family::GENERATED.len();
        notes.push(format!("{name}: checked {worst} families"));
    }
    let secs = t.elapsed().as_secs_f64();
    ok &= secs < BASELINE_SECONDS;
    let msg = format!("{} ({secs:.0}s)", notes.join("; "));
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn search_capability() -> Outcome {
    let taylor = baselines::build(
        TargetFunction::Exp2,
        &BaselineSpec {
            center: Some(0.5),
            ..BaselineSpec::new(Family::TaylorHorner, 2)
        },
    )
    .map_err(|e| e.to_string())?;
    let grid = |g: &ProgramGraph| {
        evalcore::max_error_on_grid(g, g.coeffs(), TargetFunction::Exp2, ArithmeticMode::Real64, TEST_SIZE).map(|r| r.max_error)
    };
    let reference = grid(&taylor).map_err(|e| e.to_string())?;
    let ctx = EvalContext::new(
        TargetFunction::Exp2,
        ArithmeticMode::Real64,
        SecondObjective::Complexity,
        TRAIN_SIZE,
        VALIDATION_SIZE,
        CmaesConfig::default(),
        BenchConfig::search(),
    )
    .map_err(|e| e.to_string())?;
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let limit = SEARCH_SECONDS_8_CORES * SEARCH_WORKERS as f64 / cores.min(SEARCH_WORKERS) as f64;
    let mut successes = 0;
    let mut notes = Vec::new();
    for seed in SEARCH_SEEDS {
        let t = Instant::now();
        let cfg = SearchConfig {
            workers: SEARCH_WORKERS,
            budget: SEARCH_BUDGET,
            seed,
            ..SearchConfig::default()
        };
        let r = run_worker_pool(&cfg, &ctx).map_err(|e| e.to_string())?;
        let secs = t.elapsed().as_secs_f64();
        let mut best = f64::INFINITY;
        let mut best_ops = 0;
        for p in r.archive.iter().filter(|p| p.complexity <= SEARCH_MAX_OPS) {
            let e = grid(&p.graph).map_err(|e| e.to_string())?;
            if e < best {
                best = e;
                best_ops = p.complexity;
            }
        }
        if best <= reference && secs < limit {
            successes += 1;
        }
        notes.push(format!("seed {seed}: {best:.3e} at {best_ops} ops ({secs:.0}s)"));
    }
    let msg = format!(
        "{successes}/{} seeds reach the order-2 Taylor error {reference:.3e} within {limit:.0}s on {cores} core(s): {}",
        SEARCH_SEEDS.len(),
        notes.join(", ")
    );
    if successes >= SEARCH_NEEDED {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn brute_fronts(points: &[[f64; 2]]) -> Vec<Vec<usize>> {
    let dom = |a: &[f64; 2], b: &[f64; 2]| a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1]);
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dom(&points[j], &points[i])))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn dnsga_correctness() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..SORT_SAMPLES {
        let n = rng.gen_range(1..=SORT_MAX_SIZE);
        // coarse grid so ties and duplicates are common; precision straddles -1
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [-0.5 * rng.gen_range(0..8) as f64, -(rng.gen_range(0..8) as f64)]).collect();
        let mut got = non_dominated_sort(&pts);
        for f in &mut got {
            f.sort_unstable();
        }
        if got != brute_fronts(&pts) {
            return Err(format!("sort mismatch on trial {trial}"));
        }
        let ids: Vec<u64> = (0..n as u64).collect();
        let s = rng.gen_range(1..=n);
        for (kind, stages) in [("single", single_stage(s)), ("float", float_stages(s))] {
            let chosen = select_in_stages(&pts, &ids, &stages, true).map_err(|e| e.to_string())?;
            if chosen.len() != s {
                return Err(format!("{kind} stages returned {} of {s}", chosen.len()));
            }
            let mut uniq = chosen.clone();
            uniq.sort_unstable();
            uniq.dedup();
            if uniq.len() != s {
                return Err(format!("{kind} stages repeated a parent"));
            }
            // a first-front member that meets the first requirement is never
            // dropped while fewer than S such members exist
            let first = &stages[0];
            let front0 = &got[0];
            let qualifying: Vec<usize> = front0.iter().copied().filter(|&i| first.requirement.accepts(&pts[i])).collect();
            if qualifying.len() <= first.count && qualifying.iter().any(|i| !chosen.contains(i)) {
                return Err(format!("{kind} stages dropped a qualifying first-front program on trial {trial}"));
            }
        }
    }
    Ok(format!("{SORT_SAMPLES} random populations up to {SORT_MAX_SIZE} ({:.1}s)", t.elapsed().as_secs_f64()))
}

fn cmaes_sanity() -> Outcome {
    let ctx = EvalContext::new(
        TargetFunction::Exp2,
        ArithmeticMode::Real64,
        SecondObjective::Complexity,
        TRAIN_SIZE,
        VALIDATION_SIZE,
        CmaesConfig::default(),
        BenchConfig::search(),
    )
    .map_err(|e| e.to_string())?;
    let mut b = GraphBuilder::new();
    let c = b.coeff(1.0);
    let constant = b.build(c).map_err(|e| e.to_string())?;
    let p = evalcore::evaluate_program(&constant, &ctx, 3);
    let const_err = p.max_error();
    if (const_err - CONSTANT_ERROR).abs() > CONSTANT_TOL {
        return Err(format!("constant program error {const_err} (coefficient {:?})", p.coeffs()));
    }

    // recover 0.75 - 0.5 x + 1.25 x^2 from its own values
    let truth = [0.75, -0.5, 1.25];
    let mut b = GraphBuilder::new();
    let x = b.input();
    let out = b.horner(x, &[0.1, 0.1, 0.1]);
    let poly = b.build(out).map_err(|e| e.to_string())?;
    let xs: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    let labels: Vec<Dd> = xs.iter().map(|&x| Dd::from_f64(truth[0]) + Dd::from_f64(x) * (Dd::from_f64(truth[1]) + Dd::from_f64(x) * Dd::from_f64(truth[2]))).collect();
    let set = PreparedSet::from_parts(ArithmeticMode::Real64, &xs, &labels).map_err(|e| e.to_string())?;
    let (coeffs, err) = cmaes::train_coefficients(&poly, &set, &CmaesConfig { seed: 5, ..CmaesConfig::default() });
    let order = poly_coefficient_order(&poly, &coeffs);
    let worst = order.iter().zip(truth).map(|(c, t)| (c - t).abs()).fold(0.0, f64::max);
    if worst > RECOVERY_TOL {
        return Err(format!("recovered {order:?} (training error {err:e})"));
    }

    // alpha = -log10 |c| should be U[0, 8]
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cs = cmaes::init_coefficients(INIT_SAMPLES, &mut rng);
    let mut alphas: Vec<f64> = cs.iter().map(|c| -c.abs().log10()).collect();
    alphas.sort_by(f64::total_cmp);
    let n = alphas.len() as f64;
    let d = alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let f = (a / 8.0).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let critical = KS_CRITICAL / n.sqrt();
    let negatives = cs.iter().filter(|c| **c < 0.0).count() as f64 / n;
    if d > critical || (negatives - 0.5).abs() > 0.01 {
        return Err(format!("init distribution: KS {d:.5} (critical {critical:.5}), negative share {negatives:.4}"));
    }
    Ok(format!(
        "constant error {const_err:.6}; polynomial recovered to {worst:.1e}; init KS {d:.5} < {critical:.5}"
    ))
}

/// Coefficients of the Horner graph built above, lowest degree first.
fn poly_coefficient_order(g: &ProgramGraph, coeffs: &[f64]) -> Vec<f64> {
    // Horner builds the leading coefficient first
    let mut v = coeffs.to_vec();
    v.reverse();
    debug_assert_eq!(v.len(), g.num_coeffs());
    v
}

fn float32_exhaustive() -> Outcome {
    let target = TargetFunction::Log2;
    let g = baselines::build(target, &BaselineSpec::new(Family::PolyMinimax, 8)).map_err(|e| e.to_string())?;
    let coeffs: Vec<f64> = g.coeffs().iter().map(|&c| ArithmeticMode::Float32.bind(c)).collect();
    let t = Instant::now();
    let r = evalcore::max_ulp_error_exhaustive(&g, &coeffs, target).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    if r.count != 1 << 23 {
        return Err(format!("swept {} inputs, expected 2^23", r.count));
    }
    // independent check: scalar evaluation, ball-arithmetic reference
    let independent = |x: f32| -> f64 {
        let y = g.evaluate(x as f64, &coeffs, ArithmeticMode::Float32);
        let reference = certify::special::log2_ball(&certify::Ball::exact(Dd::from_f64(x as f64))).expect("log2 enclosure");
        let rounded = reference.c.to_f64() as f32;
        let ulp = rounded.next_up() - rounded;
        (Dd::from_f64(y) - reference.c).abs().to_f64() / ulp as f64
    };
    let engine = |x: f32| -> f64 {
        let set = PreparedSet::from_parts(ArithmeticMode::Float32, &[x as f64], &[target.eval_unchecked(x as f64)]).unwrap();
        set.max_error(&Tape::compile(&g), &coeffs, &mut set.scratch())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut worst_dev = 0.0f64;
    let mut interior = 0.0f64;
    let mut probes: Vec<f32> = (0..SPOT_POINTS).map(|_| f32::from_bits(rng.gen_range(0x3f80_0001u32..0x4000_0000))).collect();
    probes.push(r.argmax);
    for x in probes {
        let (a, b) = (engine(x), independent(x));
        let dev = (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
        worst_dev = worst_dev.max(dev);
        if x > 1.0 {
            interior = interior.max(a);
        }
        if dev > SPOT_REL_TOL || a > r.max_ulp_error {
            return Err(format!("x={x:e}: engine {a} vs independent {b}"));
        }
    }
    let msg = format!(
        "2^23 inputs in {secs:.1}s, max {:.4e} ULP at {:e} where log2 vanishes, {interior:.3} ULP worst spot point inside; spot check deviation {worst_dev:.1e}",
        r.max_ulp_error, r.argmax
    );
    if secs < EXHAUSTIVE_SECONDS {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn bench_self_consistency() -> Outcome {
    let g = EVOLVED[8].graph();
    let cfg = BenchConfig {
        repeats: 20,
        ..BenchConfig::default()
    };
    let c = bench::compare_interleaved((&g, g.coeffs()), (&g, g.coeffs()), TargetFunction::Exp2, &cfg, SELF_RATIOS)
        .map_err(|e| e.to_string())?;
    let small = BenchConfig::search();
    let mut violations = 0;
    for _ in 0..MIN_MEAN_RUNS {
        let r = bench::measure_throughput(&g, g.coeffs(), TargetFunction::Exp2, &small).map_err(|e| e.to_string())?;
        if r.min_ns as f64 > r.mean_ns {
            violations += 1;
        }
    }
    let msg = format!(
        "self-comparison median {:.4} (IQR {:.4}); min > mean in {violations}/{MIN_MEAN_RUNS} runs",
        c.median, c.iqr
    );
    if (SELF_RATIO.0..=SELF_RATIO.1).contains(&c.median) && violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    // optional substring filters, e.g. `cargo test --test acceptance -- bench`
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let (mut passed, mut total) = (0, 0);
    let mut report = |name: &str, run: &mut dyn FnMut() -> Outcome| {
        if !wanted(name) {
            return;
        }
        total += 1;
        match run() {
            Ok(detail) => {
                passed += 1;
                println!("[PASS] {name}: {detail}");
            }
            Err(detail) => println!("[FAIL] {name}: {detail}"),
        }
    };
    let mut grid_errors = Vec::new();
    report("certification fidelity", &mut certification_fidelity);
    report("certifier soundness", &mut certifier_soundness);
    report("fixture precision", &mut || fixture_precision(&mut grid_errors));
    report("baseline ordering", &mut || {
        if grid_errors.is_empty() {
            fixture_precision(&mut grid_errors).ok();
        }
        baseline_ordering(&grid_errors)
    });
    report("search capability", &mut search_capability);
    report("dnsga correctness", &mut dnsga_correctness);
    report("cmaes sanity", &mut cmaes_sanity);
    report("float32 exhaustive", &mut float32_exhaustive);
    report("bench self-consistency", &mut bench_self_consistency);
    println!("acceptance: {passed}/{total} criteria passed");
}
