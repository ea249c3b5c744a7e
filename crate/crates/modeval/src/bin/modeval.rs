//! Command-line front end: microbenchmarks, evaluation runs, the
//! `(T_i, T_d, M)` tuning sweep, instance generation, and oracle
//! verification.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

use clap::{Parser, Subcommand};
use modeval::bench::{
    self, EvalImpl, MicrobenchImpl, MicrobenchOp, MicrobenchOptions, EVAL_CSV_HEADER,
    MICROBENCH_CSV_HEADER, TUNE_CSV_HEADER,
};
use modeval::eval::{build_power_tables, evaluate_monomials, EvalPlan, MonomialEvals};
use modeval::io::{
    generate, parse_poly, read_images, write_images, write_poly, GenSpec, ImageFormat,
};
use modeval::poly::{EvalPoint, SparsePolynomial};
use modeval::simd::{backend_select, Backend, BackendRequest};
use modeval::PrimeModulus;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Environment variable that overrides any `--backend` flag.
const BACKEND_ENV: &str = "MODEVAL_BACKEND";

#[derive(Parser)]
#[command(name = "modeval", version, about = "Modular polynomial evaluation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Microbenchmark the element-wise modular operations.
    Microbench {
        /// Operation to measure.
        #[arg(long, value_parser = parse_op, default_value = "mul")]
        op: MicrobenchOp,
        /// Implementation to measure, or `all`.
        #[arg(long = "impl", default_value = "all")]
        implementation: String,
        /// Vector length per pass.
        #[arg(long, default_value_t = 2048)]
        len: usize,
        /// Timed repetitions (median reported).
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Backend: auto, portable, v4 or v8.
        #[arg(long, default_value = "auto")]
        backend: String,
        /// Modulus for the measurement.
        #[arg(long, default_value_t = 1125899906842597)]
        p: u64,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a polynomial file at T points and write the images.
    Eval {
        #[arg(long)]
        poly: PathBuf,
        /// Number of evaluations (t = 1..=T).
        #[arg(long = "T", default_value_t = 10000)]
        t_count: u64,
        /// Blocked-kernel plan as `Ti,Td,M`.
        #[arg(long, value_parser = parse_plan, default_value = "1,1,1")]
        plan: (usize, usize, usize),
        #[arg(long, default_value = "auto")]
        backend: String,
        /// Kernel: int-scalar, fp-scalar, vector, blocked or blocked-noalloc.
        #[arg(long = "impl", default_value = "blocked")]
        implementation: EvalImpl,
        /// Image output file.
        #[arg(long)]
        out: PathBuf,
        /// Image format: csv or jsonl (inferred from extension if omitted).
        #[arg(long)]
        format: Option<ImageFormat>,
        /// Seed for the evaluation point.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Cross-check this many randomly sampled images against the oracle.
        #[arg(long, default_value_t = 0)]
        verify_sample: usize,
        /// Timed repetitions (median reported).
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
    /// Sweep all (T_i, T_d, M) configurations and report the best.
    Tune {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long = "T", default_value_t = 1000)]
        t_count: u64,
        /// Values each plan field ranges over.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        grid: Vec<usize>,
        #[arg(long, default_value = "auto")]
        backend: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare kernel output against the big-integer oracle.
    Verify {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long = "T", default_value_t = 16)]
        t_count: u64,
        /// Sweep the blocked kernels over the {1,2,4,8}^3 plan grid.
        #[arg(long)]
        all_plans: bool,
        #[arg(long, default_value = "auto")]
        backend: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Verify a previously written image file instead of running kernels.
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        format: Option<ImageFormat>,
    },
    /// Generate a random instance file.
    Gen {
        #[arg(long, default_value_t = 500000)]
        s: usize,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        d: u32,
        #[arg(long, default_value_t = 1125899906842597)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_op(s: &str) -> Result<MicrobenchOp, String> {
    match s {
        "mul" => Ok(MicrobenchOp::Mul),
        "add" => Ok(MicrobenchOp::Add),
        other => Err(format!("unknown op {other:?} (mul or add)")),
    }
}

fn parse_plan(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("plan must be Ti,Td,M".into());
    }
    let nums: Result<Vec<usize>, _> = parts.iter().map(|p| p.trim().parse()).collect();
    let nums = nums.map_err(|e| format!("bad plan value: {e}"))?;
    Ok((nums[0], nums[1], nums[2]))
}

fn resolve_backend(flag: &str) -> Result<Backend, String> {
    let choice = match std::env::var(BACKEND_ENV) {
        Ok(v) => {
            eprintln!("note: backend {v:?} taken from ${BACKEND_ENV}");
            v
        }
        Err(_) => flag.to_string(),
    };
    let request: BackendRequest = choice.parse().map_err(|e| format!("{e}"))?;
    backend_select(request).map_err(|e| format!("{e}"))
}

fn load_poly(path: &Path) -> Result<(SparsePolynomial, PrimeModulus), String> {
    let file = File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    let parsed = parse_poly(BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    if !parsed.modulus.check_interpolation_bound(parsed.poly.num_terms() as u64) {
        eprintln!(
            "advisory: p = {} does not exceed 100*s^2 for s = {}; monomial evaluations may collide",
            parsed.modulus.p(),
            parsed.poly.num_terms()
        );
    }
    Ok((parsed.poly, parsed.modulus))
}

fn prepare(f: &SparsePolynomial, m: &PrimeModulus, seed: u64) -> (EvalPoint, MonomialEvals) {
    let beta = EvalPoint::from_seed(f.n(), m, seed);
    let tables = build_power_tables(f, &beta, m);
    let me = evaluate_monomials(f, &tables, m);
    (beta, me)
}

fn infer_format(path: &Path, flag: Option<ImageFormat>) -> ImageFormat {
    flag.unwrap_or_else(|| {
        if path.extension().and_then(|e| e.to_str()) == Some("jsonl") {
            ImageFormat::Jsonl
        } else {
            ImageFormat::Csv
        }
    })
}

fn out_writer(path: Option<&PathBuf>) -> Result<Box<dyn Write>, String> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| format!("cannot create {}: {e}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn run() -> Result<bool, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Microbench {
            op,
            implementation,
            len,
            reps,
            backend,
            p,
            out,
        } => {
            bench::pin_to_one_core();
            let backend = resolve_backend(&backend)?;
            let mut opts = MicrobenchOptions::new(op, backend);
            opts.len = len;
            opts.reps = reps;
            opts.p = p;
            if implementation != "all" {
                let imp: MicrobenchImpl = implementation.parse()?;
                opts.impls = vec![imp];
            }
            let records = bench::run_microbench(&opts);
            let mut w = out_writer(out.as_ref())?;
            writeln!(w, "{MICROBENCH_CSV_HEADER}").map_err(|e| e.to_string())?;
            for r in &records {
                writeln!(w, "{}", r.csv_row()).map_err(|e| e.to_string())?;
            }
            // Speedup summary relative to the scalar FP implementation.
            if let (Some(scalar), Some(vector)) = (
                records.iter().find(|r| r.implementation == "fp-scalar"),
                records.iter().find(|r| r.implementation == "vector"),
            ) {
                eprintln!(
                    "vector/fp-scalar speedup: {:.2}x",
                    scalar.ns_per_op / vector.ns_per_op
                );
            }
            Ok(true)
        }
        Command::Eval {
            poly,
            t_count,
            plan,
            backend,
            implementation,
            out,
            format,
            seed,
            verify_sample,
            reps,
        } => {
            bench::pin_to_one_core();
            let backend = resolve_backend(&backend)?;
            let (f, m) = load_poly(&poly)?;
            let (beta, me) = prepare(&f, &m, seed);
            let (ti, td, mu) = plan;
            let plan = EvalPlan::new(ti, td, mu, backend).map_err(|e| e.to_string())?;
            let (images, record) = bench::run_eval(
                &f,
                &m,
                &me,
                t_count,
                implementation,
                &plan,
                td,
                mu,
                reps,
            );
            let fmt = infer_format(&out, format);
            let file =
                File::create(&out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
            write_images(&images, BufWriter::new(file), fmt).map_err(|e| e.to_string())?;
            println!("{EVAL_CSV_HEADER}");
            println!("{}", record.csv_row());
            if verify_sample > 0 {
                let report = bench::verify_sample(&images, &f, &m, &beta, verify_sample, seed);
                for fail in &report.failures {
                    eprintln!("FAIL {}: {}", fail.kernel, fail.detail);
                }
                let status = if report.passed() { "pass" } else { "FAIL" };
                eprintln!(
                    "verify-sample: {} of {} sampled images: {status}",
                    report.images_checked, verify_sample
                );
                return Ok(report.passed());
            }
            Ok(true)
        }
        Command::Tune {
            poly,
            t_count,
            grid,
            backend,
            seed,
            reps,
            out,
        } => {
            bench::pin_to_one_core();
            let backend = resolve_backend(&backend)?;
            if grid.iter().any(|&g| g < 1) {
                return Err("grid values must be >= 1".into());
            }
            let (f, m) = load_poly(&poly)?;
            let (_beta, me) = prepare(&f, &m, seed);
            let (records, best) = bench::run_tune(&f, &m, &me, t_count, &grid, backend, reps);
            let mut w = out_writer(out.as_ref())?;
            writeln!(w, "{TUNE_CSV_HEADER}").map_err(|e| e.to_string())?;
            for r in &records {
                writeln!(w, "{}", r.csv_row()).map_err(|e| e.to_string())?;
            }
            eprintln!(
                "best: Ti={} Td={} M={} ({:.3} Gflop/s, {:.3} ms, backend {})",
                best.t_i, best.t_d, best.unroll, best.gflops, best.ms_total, backend.name()
            );
            Ok(true)
        }
        Command::Verify {
            poly,
            t_count,
            all_plans,
            backend,
            seed,
            images,
            format,
        } => {
            let backend = resolve_backend(&backend)?;
            let (f, m) = load_poly(&poly)?;
            let (beta, me) = prepare(&f, &m, seed);
            let report = match images {
                Some(path) => {
                    let fmt = infer_format(&path, format);
                    let file = File::open(&path)
                        .map_err(|e| format!("cannot open {}: {e}", path.display()))?;
                    let parsed =
                        read_images(BufReader::new(file), fmt).map_err(|e| e.to_string())?;
                    bench::verify_images_against_oracle(&parsed, &f, &m, &beta)
                }
                None => bench::run_verify(&f, &m, &beta, &me, t_count, all_plans, backend),
            };
            for kernel in &report.kernels_checked {
                let status = if report.failures.iter().any(|fl| &fl.kernel == kernel) {
                    "FAIL"
                } else {
                    "pass"
                };
                println!("{status} {kernel}");
            }
            for fail in &report.failures {
                eprintln!("FAIL {} at t={}: {}", fail.kernel, fail.t, fail.detail);
            }
            println!(
                "verified {} image(s) across {} kernel configuration(s): {}",
                report.images_checked,
                report.kernels_checked.len(),
                if report.passed() { "pass" } else { "FAIL" }
            );
            Ok(report.passed())
        }
        Command::Gen {
            s,
            n,
            d,
            p,
            seed,
            out,
        } => {
            let spec = GenSpec { s, n, d, p, seed };
            let (f, m) = generate(&spec).map_err(|e| e.to_string())?;
            if !m.check_interpolation_bound(s as u64) {
                eprintln!(
                    "advisory: p = {p} does not exceed 100*s^2 for s = {s}; monomial evaluations may collide"
                );
            }
            let w = out_writer(out.as_ref())?;
            write_poly(&f, &m, w).map_err(|e| e.to_string())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
