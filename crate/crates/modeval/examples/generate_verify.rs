//! Generating instances, writing and parsing the text formats, and
//! verifying kernel output against the big-integer oracle.
//!
//! ```bash
//! cargo run --release -p modeval --example generate_verify
//! ```

use modeval::bench::run_verify;
use modeval::eval::{build_power_tables, eval_scalar, evaluate_monomials};
use modeval::io::{generate, parse_poly, write_images, write_poly, GenSpec, ImageFormat};
use modeval::poly::EvalPoint;
use modeval::simd::{backend_select, BackendRequest};
use std::io::BufReader;

fn main() {
    let spec = GenSpec {
        s: 300,
        n: 5,
        d: 8,
        p: 1099511627689,
        seed: 2024,
    };
    let (f, m) = generate(&spec).unwrap();
    println!("generated s = {} terms over p = {}", f.num_terms(), m.p());

    // Round-trip through the text format.
    let mut text = Vec::new();
    write_poly(&f, &m, &mut text).unwrap();
    let parsed = parse_poly(BufReader::new(&text[..])).unwrap();
    assert_eq!(parsed.poly, f);
    println!("text format round-trips ({} bytes)", text.len());

    // Evaluate a few images and write them in both formats.
    let beta = EvalPoint::from_seed(f.n(), &m, 5);
    let tables = build_power_tables(&f, &beta, &m);
    let me = evaluate_monomials(&f, &tables, &m);
    let mut scalar_me = me.clone();
    let images = eval_scalar(&mut scalar_me, &m, 4);
    let mut csv = Vec::new();
    write_images(&images, &mut csv, ImageFormat::Csv).unwrap();
    println!("\nfirst image rows:");
    for line in String::from_utf8(csv).unwrap().lines().take(5) {
        println!("  {line}");
    }

    // Exhaustive comparison of every kernel against the oracle.
    let backend = backend_select(BackendRequest::Auto).unwrap();
    let report = run_verify(&f, &m, &beta, &me, 12, false, backend);
    println!(
        "\noracle verification: {} kernel configurations x {} images: {}",
        report.kernels_checked.len(),
        report.images_checked,
        if report.passed() { "pass" } else { "FAIL" }
    );
    assert!(report.passed());
}
