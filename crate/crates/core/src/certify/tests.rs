use super::*;
use crate::fixtures::{evolved, EVOLVED};
use crate::graph::parse;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exp2_domain() -> (f64, f64) {
    default_domain(TargetFunction::Exp2)
}

#[test]
fn interval_eval_examples() {
    let id = ProgramGraph::identity();
    assert_eq!(interval_eval(&id, &[], Interval::new(0.0, 1.0)).unwrap(), Interval::new(0.0, 1.0));
    let sq = parse("a = x * x\nreturn a").unwrap();
    let r = interval_eval(&sq, &[], Interval::new(-1.0, 1.0)).unwrap();
    assert!(r.lo <= -1.0 && r.hi >= 1.0);

    let f2 = evolved("f2").unwrap().graph();
    let e = interval_eval(&f2, f2.coeffs(), Interval::new(0.4, 0.6)).unwrap();
    for i in 0..=1000 {
        let x = 0.4 + 0.2 * i as f64 / 1000.0;
        assert!(e.contains_dd(f2.eval_dd(x, f2.coeffs())));
    }
}

#[test]
fn interval_derivative_examples() {
    let k = parse("a = 1.5 + 2.0\nreturn a").unwrap();
    assert_eq!(interval_derivative(&k, k.coeffs(), Interval::new(0.0, 1.0)).unwrap(), Interval::point(0.0));
    let sq = parse("a = x * x\nreturn a").unwrap();
    let d = interval_derivative(&sq, &[], Interval::new(1.0, 2.0)).unwrap();
    assert!(d.lo <= 2.0 && d.hi >= 4.0);
}

#[test]
fn finite_differences_fall_inside_derivative_enclosures() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for e in &EVOLVED {
        let g = e.graph();
        for _ in 0..100 {
            let a: f64 = rng.gen_range(0.01..0.9);
            let b = a + rng.gen_range(1e-4..0.09);
            let d = interval_derivative(&g, g.coeffs(), Interval::new(a, b)).unwrap();
            let x: f64 = rng.gen_range(a + 1e-5..b - 1e-6).min(b - 1e-6);
            let h = 1e-7;
            let fd = (g.eval_dd(x + h, g.coeffs()) - g.eval_dd(x - h, g.coeffs())).to_f64() / (2.0 * h);
            // central difference error is O(h^2 f''')
            let slack = 1e-6 * (1.0 + fd.abs());
            assert!(d.lo - slack <= fd && fd <= d.hi + slack, "{} at {x}: {fd} not in {d:?}", e.name);
        }
    }
}

#[test]
fn local_bound_examples() {
    let f10 = evolved("f10").unwrap().graph();
    // the first-order form pays for dependency in r' over the interval
    let eta = local_bound_eta(&f10, f10.coeffs(), TargetFunction::Exp2, 0.5, 0.5 + 1e-6).unwrap();
    assert!(eta <= 1e-11, "{eta}");
    let prog = JetProgram::new(&f10, f10.coeffs());
    let eta = local_bound(&prog, TargetFunction::Exp2, 0.5, 0.5 + 1e-6, 4).unwrap().eta;
    assert!(eta <= 1e-12, "{eta}");

    let c = parse("a = 1.0 + 0.3333333333333333\nreturn a").unwrap();
    let c = c.simplified(crate::ArithmeticMode::Real64).unwrap();
    let eta = local_bound_eta(&c, c.coeffs(), TargetFunction::Exp2, 1.0 - 1e-9, 1.0).unwrap();
    assert!((eta - 1.0 / 3.0).abs() <= 1e-6, "{eta}");

    // shrinking the interval converges to |r(m)|
    let f2 = evolved("f2").unwrap().graph();
    let m = 0.3;
    let rm = sampled_relative_error(&f2, f2.coeffs(), TargetFunction::Exp2, m).abs();
    let mut prev = f64::INFINITY;
    for w in [1e-2, 1e-4, 1e-6, 1e-8] {
        let eta = local_bound_eta(&f2, f2.coeffs(), TargetFunction::Exp2, m - w, m + w).unwrap();
        assert!(eta >= rm && eta < prev);
        prev = eta;
    }
    assert!(prev - rm < 1e-8);
}

#[test]
fn higher_orders_agree_with_sampling() {
    let f4 = evolved("f4").unwrap().graph();
    let prog = JetProgram::new(&f4, f4.coeffs());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let a: f64 = rng.gen_range(1e-3..0.99);
        let b = (a + rng.gen_range(1e-6..1e-2)).min(1.0);
        for order in 0..=6 {
            let eta = local_bound(&prog, TargetFunction::Exp2, a, b, order).unwrap().eta;
            for i in 0..=10 {
                let x = a + (b - a) * i as f64 / 10.0;
                let r = sampled_relative_error(&f4, f4.coeffs(), TargetFunction::Exp2, x).abs();
                assert!(r <= eta * (1.0 + 1e-12), "order {order} [{a},{b}] x={x}: {r} > {eta}");
            }
        }
    }
}

#[test]
fn f2_proves_and_fails_where_expected() {
    let f2 = evolved("f2").unwrap().graph();
    let limits = ProofLimits::default();
    let ok = prove_bound(&f2, f2.coeffs(), TargetFunction::Exp2, exp2_domain(), 0.0415, &limits).unwrap();
    assert!(ok.proven(), "{ok:?}");
    assert!(ok.max_eta <= 0.0415);

    let bad = prove_bound(&f2, f2.coeffs(), TargetFunction::Exp2, exp2_domain(), 0.01, &limits).unwrap();
    assert_eq!(bad.status, ProofStatus::Failed);
    let w = bad.failure.unwrap();
    assert_eq!(w.reason, FailureReason::BoundExceeded);
    let worst = (0..=100)
        .map(|i| w.lo + (w.hi - w.lo) * i as f64 / 100.0)
        .map(|x| sampled_relative_error(&f2, f2.coeffs(), TargetFunction::Exp2, x).abs())
        .fold(0.0, f64::max);
    assert!(worst > 0.01, "witness [{}, {}] max sampled {worst}", w.lo, w.hi);
}

#[test]
fn proofs_are_monotone_in_epsilon() {
    let f3 = evolved("f3").unwrap().graph();
    let limits = ProofLimits::default();
    let mut proven_at = None;
    for eps in [1.0e-3, 1.2e-3, 1.23e-3, 1.3e-3, 2e-3, 1e-2] {
        let r = prove_bound(&f3, f3.coeffs(), TargetFunction::Exp2, exp2_domain(), eps, &limits).unwrap();
        if proven_at.is_some() {
            assert!(r.proven(), "failed at {eps} after succeeding");
        }
        if r.proven() {
            proven_at.get_or_insert(eps);
        }
    }
    assert_eq!(proven_at, Some(1.23e-3));
}

#[test]
fn leaves_partition_and_bound_samples() {
    let f5 = evolved("f5").unwrap().graph();
    let limits = ProofLimits {
        record_leaves: true,
        ..ProofLimits::default()
    };
    let r = prove_bound(&f5, f5.coeffs(), TargetFunction::Exp2, exp2_domain(), 6.372e-6, &limits).unwrap();
    assert!(r.proven());
    let leaves = r.leaves.unwrap();
    assert_eq!(leaves.len() as u64, r.subintervals_used);
    assert_eq!(leaves[0].lo, exp2_domain().0);
    assert_eq!(leaves.last().unwrap().hi, 1.0);
    for w in leaves.windows(2) {
        assert_eq!(w[0].hi, w[1].lo);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for l in &leaves {
        for _ in 0..20 {
            let x = rng.gen_range(l.lo..=l.hi);
            let e = sampled_relative_error(&f5, f5.coeffs(), TargetFunction::Exp2, x).abs();
            assert!(e <= l.eta, "[{}, {}] x={x}: {e} > {}", l.lo, l.hi, l.eta);
        }
    }
}

#[test]
fn well_definedness() {
    let limits = ProofLimits::default();
    for e in &EVOLVED {
        let g = e.graph();
        let r = prove_well_defined(&g, g.coeffs(), exp2_domain(), &limits).unwrap();
        assert!(r.proven(), "{}", e.name);
    }
    let pole = parse("a = x - 0.5\nb = 1.0 / a\nreturn b").unwrap();
    let r = prove_well_defined(&pole, pole.coeffs(), (0.0, 1.0), &limits).unwrap();
    let w = r.failure.unwrap();
    assert_eq!(w.reason, FailureReason::PossiblePole);
    assert!(w.lo <= 0.5 && 0.5 <= w.hi);

    let poly = parse("a = x * x\nb = a + 1.0\nreturn b").unwrap();
    let r = prove_well_defined(&poly, poly.coeffs(), (0.0, 1.0), &limits).unwrap();
    assert!(r.proven());
    assert_eq!(r.subintervals_used, 1);
}

#[test]
fn certificates_round_trip_and_detect_tampering() {
    let f3 = evolved("f3").unwrap().graph();
    let limits = ProofLimits {
        record_leaves: true,
        ..ProofLimits::default()
    };
    let r = prove_bound(&f3, f3.coeffs(), TargetFunction::Exp2, exp2_domain(), 1.23e-3, &limits).unwrap();
    let cert = Certificate::from_proof(&f3, TargetFunction::Exp2, &r, limits.taylor_order).unwrap();
    let json = serde_json::to_string(&cert).unwrap();
    let back: Certificate = serde_json::from_str(&json).unwrap();
    let check = check_certificate(&back).unwrap();
    assert!(check.valid, "{:?}", check.problems);
    assert_eq!(check.leaves_checked, cert.leaves.len());

    let mut tight = back.clone();
    tight.epsilon = 1.0e-3;
    assert!(!check_certificate(&tight).unwrap().valid);

    let mut gap = back.clone();
    gap.leaves.remove(1);
    assert!(!check_certificate(&gap).unwrap().valid);

    let mut swapped = back;
    swapped.program = crate::graph::serialize(&evolved("f2").unwrap().graph());
    assert!(!check_certificate(&swapped).unwrap().valid);
}

#[test]
fn invalid_arguments_are_usage_errors() {
    let id = ProgramGraph::identity();
    let l = ProofLimits::default();
    assert!(prove_bound(&id, &[], TargetFunction::Exp2, (1.0, 0.0), 0.1, &l).is_err());
    assert!(prove_bound(&id, &[], TargetFunction::Exp2, (0.5, 1.0), 0.0, &l).is_err());
}

#[test]
fn limits_stop_the_search() {
    let f6 = evolved("f6").unwrap().graph();
    let l = ProofLimits {
        max_leaves: 3,
        ..ProofLimits::default()
    };
    let r = prove_bound(&f6, f6.coeffs(), TargetFunction::Exp2, exp2_domain(), 4.016e-7, &l).unwrap();
    assert_eq!(r.failure.unwrap().reason, FailureReason::Limits);
}

#[test]
fn published_bounds_hold() {
    let limits = ProofLimits::default();
    for e in &EVOLVED {
        let g = e.graph();
        let r = prove_bound(&g, g.coeffs(), TargetFunction::Exp2, exp2_domain(), e.bound, &limits).unwrap();
        assert!(r.proven(), "{}: {:?}", e.name, r.failure);
    }
}


