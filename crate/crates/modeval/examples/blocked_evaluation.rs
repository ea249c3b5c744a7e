//! Blocked evaluation: independent chains times dependent rounds, the
//! memory they trade for pipeline filling, and the no-extra-memory variant.
//!
//! ```bash
//! cargo run --release -p modeval --example blocked_evaluation
//! ```

use modeval::eval::{
    build_power_tables, eval_blocked_noalloc_with_stats, eval_blocked_with_stats, eval_scalar,
    evaluate_monomials, precompute_gamma_lambdas, EvalPlan,
};
use modeval::io::{generate, GenSpec};
use modeval::poly::EvalPoint;
use modeval::simd::{backend_select, BackendRequest};
use std::time::Instant;

fn main() {
    let (f, m) = generate(&GenSpec {
        s: 50_000,
        n: 6,
        d: 10,
        p: 1125899906842597,
        seed: 77,
    })
    .unwrap();
    let beta = EvalPoint::from_seed(f.n(), &m, 1);
    let tables = build_power_tables(&f, &beta, &m);
    let me = evaluate_monomials(&f, &tables, &m);
    let backend = backend_select(BackendRequest::Auto).unwrap();
    let t_count = 200;

    // The precomputation behind a (T_i = 4) plan: the stride vector Gamma
    // and four advanced copies of the coefficients.
    let gl = precompute_gamma_lambdas(&me, &m, 4, backend).unwrap();
    println!(
        "T_i = 4 precompute: {} extra buffers of {} elements each",
        gl.stats.extra_arrays,
        me.num_terms()
    );
    println!("gamma[0] = m_0^4 = {}", gl.gamma[0] as u64);

    let mut scalar_me = me.clone();
    let t0 = Instant::now();
    let reference = eval_scalar(&mut scalar_me, &m, t_count);
    println!("\nscalar reference: {:?}", t0.elapsed());

    for (ti, td, mu) in [(1, 1, 1), (4, 4, 1), (8, 8, 4)] {
        let plan = EvalPlan::new(ti, td, mu, backend).unwrap();
        let t0 = Instant::now();
        let (images, stats) = eval_blocked_with_stats(&me, &m, t_count, &plan);
        let dt = t0.elapsed();
        assert_eq!(images, reference);
        println!(
            "blocked ({ti},{td},{mu}) on {}: {dt:?}, {} extra term-sized buffers",
            backend.name(),
            stats.extra_arrays
        );
    }

    let t0 = Instant::now();
    let (images, stats) = eval_blocked_noalloc_with_stats(&me, &m, t_count, 8, 4, backend).unwrap();
    let dt = t0.elapsed();
    assert_eq!(images, reference);
    println!(
        "no-extra-memory (T_d=8, M=4): {dt:?}, {} extra term-sized buffers",
        stats.extra_arrays
    );
}
