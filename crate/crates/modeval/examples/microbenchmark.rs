//! Microbenchmarking the modular operations and tuning the blocked kernel.
//!
//! ```bash
//! cargo run --release -p modeval --example microbenchmark
//! ```

use modeval::bench::{
    pin_to_one_core, run_microbench, run_tune, MicrobenchOp, MicrobenchOptions,
    MICROBENCH_CSV_HEADER, TUNE_CSV_HEADER,
};
use modeval::eval::{build_power_tables, evaluate_monomials};
use modeval::io::{generate, GenSpec};
use modeval::poly::EvalPoint;
use modeval::simd::{backend_select, BackendRequest};

fn main() {
    pin_to_one_core();
    let backend = backend_select(BackendRequest::Auto).unwrap();

    println!("{MICROBENCH_CSV_HEADER}");
    for op in [MicrobenchOp::Mul, MicrobenchOp::Add] {
        let mut opts = MicrobenchOptions::new(op, backend);
        opts.reps = 5;
        for record in run_microbench(&opts) {
            println!("{}", record.csv_row());
        }
    }

    // A small tuning sweep; the CLI's `tune` subcommand runs the full
    // {1,2,4,8,16}^3 grid.
    let (f, m) = generate(&GenSpec {
        s: 20_000,
        n: 6,
        d: 10,
        p: 1125899906842597,
        seed: 3,
    })
    .unwrap();
    let beta = EvalPoint::from_seed(f.n(), &m, 1);
    let tables = build_power_tables(&f, &beta, &m);
    let me = evaluate_monomials(&f, &tables, &m);
    let (records, best) = run_tune(&f, &m, &me, 400, &[1, 2, 4, 8], backend, 3);

    println!("\n{TUNE_CSV_HEADER}");
    for r in &records {
        println!("{}", r.csv_row());
    }
    println!(
        "\nbest plan: T_i={} T_d={} M={} at {:.2} Gflop/s",
        best.t_i, best.t_d, best.unroll, best.gflops
    );
}
