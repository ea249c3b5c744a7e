//! Computing bivariate images of a sparse polynomial: precompute power
//! tables and monomial evaluations, then compare the scalar and vector
//! kernels.
//!
//! ```bash
//! cargo run --release -p modeval --example evaluate_images
//! ```

use modeval::eval::{build_power_tables, eval_scalar, eval_simd, evaluate_monomials};
use modeval::poly::{EvalPoint, SparsePolynomial, Term};
use modeval::simd::{backend_select, BackendRequest};
use modeval::PrimeModulus;

fn main() {
    let m = PrimeModulus::new(1009).unwrap();
    // f = 7 x1^2 x3 x4 + 3 x1^2 x4^2 + 11 x2 x3^3 + 5
    let f = SparsePolynomial::from_terms(
        4,
        vec![
            Term { coeff: 7, d: 2, e: 0, evec: vec![1, 1] },
            Term { coeff: 3, d: 2, e: 0, evec: vec![0, 2] },
            Term { coeff: 11, d: 0, e: 1, evec: vec![3, 0] },
            Term { coeff: 5, d: 0, e: 0, evec: vec![0, 0] },
        ],
        &m,
    )
    .unwrap();
    let beta = EvalPoint::new(vec![12, 34], &m).unwrap();
    println!("evaluating at powers of beta = {:?}", beta.coordinates());

    let tables = build_power_tables(&f, &beta, &m);
    let me = evaluate_monomials(&f, &tables, &m);
    println!("monomial evaluations m = {:?}", me.monomial_values());
    println!(
        "coefficient groups: {:?}",
        me.groups()
            .iter()
            .map(|g| ((g.d, g.e), g.len))
            .collect::<Vec<_>>()
    );

    let t_count = 4;
    let mut scalar_me = me.clone();
    let scalar = eval_scalar(&mut scalar_me, &m, t_count);
    for img in &scalar {
        let rendered: Vec<String> = img
            .entries
            .iter()
            .map(|e| format!("{}*x1^{}*x2^{}", e.c, e.d, e.e))
            .collect();
        println!("b_{}(x1,x2) = {}", img.t, rendered.join(" + "));
    }

    let backend = backend_select(BackendRequest::Auto).unwrap();
    let simd = eval_simd(&me, &m, t_count, backend);
    assert_eq!(simd, scalar);
    println!("\nvector kernel ({}) produced identical images", backend.name());
}
