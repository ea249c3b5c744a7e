//! Desk-scale runs at the full default instance shape: half a million
//! terms over six variables, degree ten.

use modeval::bench::run_verify;
use modeval::eval::{build_power_tables, eval_blocked, evaluate_monomials, EvalPlan};
use modeval::io::{generate, GenSpec};
use modeval::oracle::naive_evaluate;
use modeval::poly::EvalPoint;
use modeval::simd::{backend_select, BackendRequest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[test]
fn full_shape_generation_is_fast_and_valid() {
    let t0 = Instant::now();
    let (f, m) = generate(&GenSpec {
        s: 500_000,
        n: 6,
        d: 10,
        p: 1125899906842597,
        seed: 31,
    })
    .unwrap();
    let took = t0.elapsed();
    assert_eq!(f.num_terms(), 500_000);
    assert!(m.check_interpolation_bound(500_000));
    assert!(
        took.as_secs_f64() < 5.0,
        "generation took {took:?}, budget is 5 s"
    );
    // Canonical ordering holds for the full instance.
    for i in 1..f.num_terms() {
        let a = f.term(i - 1);
        let b = f.term(i);
        assert!((a.d, a.e, a.evec) > (b.d, b.e, b.evec), "order broken at {i}");
    }
}

#[test]
fn full_shape_blocked_run_spot_checked_against_oracle() {
    let (f, m) = generate(&GenSpec {
        s: 500_000,
        n: 6,
        d: 10,
        p: 1125899906842597,
        seed: 32,
    })
    .unwrap();
    let beta = EvalPoint::from_seed(f.n(), &m, 2);
    let tables = build_power_tables(&f, &beta, &m);
    let me = evaluate_monomials(&f, &tables, &m);
    let backend = backend_select(BackendRequest::Auto).unwrap();
    let t_count = 10_000u64;

    let plan = EvalPlan::new(8, 8, 4, backend).unwrap();
    let images = eval_blocked(&me, &m, t_count, &plan);
    assert_eq!(images.len(), t_count as usize);

    // Spot-match 8 sampled evaluation indices against direct substitution.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut sampled: Vec<u64> = (0..6).map(|_| rng.gen_range(1..=t_count)).collect();
    sampled.push(1);
    sampled.push(t_count);
    for t in sampled {
        let want = naive_evaluate(&f, &beta, t, &m);
        assert_eq!(images[(t - 1) as usize], want, "t={t}");
    }
}

#[test]
fn verify_all_plans_on_five_hundred_terms_within_budget() {
    let (f, m) = generate(&GenSpec {
        s: 500,
        n: 5,
        d: 9,
        p: 281474976710597,
        seed: 33,
    })
    .unwrap();
    let beta = EvalPoint::from_seed(f.n(), &m, 4);
    let tables = build_power_tables(&f, &beta, &m);
    let me = evaluate_monomials(&f, &tables, &m);
    let backend = backend_select(BackendRequest::Auto).unwrap();

    let t0 = Instant::now();
    let report = run_verify(&f, &m, &beta, &me, 16, true, backend);
    let took = t0.elapsed();
    assert!(report.passed(), "{:?}", report.failures);
    // scalar + simd + 64 blocked plans + 16 noalloc plans
    assert_eq!(report.kernels_checked.len(), 2 + 64 + 16);
    assert!(
        took.as_secs_f64() < 60.0,
        "all-plans verify took {took:?}, budget is 60 s"
    );
}
