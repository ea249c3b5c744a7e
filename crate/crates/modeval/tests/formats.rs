//! File-format stability: golden files, round trips, parser robustness,
//! and end-to-end CLI behavior including exit codes.

use modeval::bench::{EVAL_CSV_HEADER, MICROBENCH_CSV_HEADER, TUNE_CSV_HEADER};
use modeval::eval::{build_power_tables, eval_scalar, evaluate_monomials};
use modeval::io::{
    generate, parse_poly, read_images, write_images, write_poly, GenSpec, ImageFormat,
    IMAGE_CSV_HEADER, POLY_HEADER,
};
use modeval::poly::EvalPoint;
use proptest::prelude::*;
use std::io::BufReader;
use std::path::Path;
use std::process::Command;

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("missing golden {name}: {e}"))
}

#[test]
fn poly_file_golden() {
    let (f, m) = generate(&GenSpec {
        s: 6,
        n: 4,
        d: 3,
        p: 1009,
        seed: 42,
    })
    .unwrap();
    let mut out = Vec::new();
    write_poly(&f, &m, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), golden("seed42.poly"));
}

#[test]
fn image_csv_and_jsonl_goldens() {
    // Golden values were produced by the big-integer oracle on the seed42
    // instance at beta = powers of seed 9.
    let parsed = parse_poly(BufReader::new(golden("seed42.poly").as_bytes())).unwrap();
    let beta = EvalPoint::from_seed(parsed.poly.n(), &parsed.modulus, 9);
    let tables = build_power_tables(&parsed.poly, &beta, &parsed.modulus);
    let mut me = evaluate_monomials(&parsed.poly, &tables, &parsed.modulus);
    let images = eval_scalar(&mut me, &parsed.modulus, 3);

    let oracle: Vec<_> = (1..=3)
        .map(|t| modeval::oracle::naive_evaluate(&parsed.poly, &beta, t, &parsed.modulus))
        .collect();
    assert_eq!(images, oracle);

    let mut csv = Vec::new();
    write_images(&images, &mut csv, ImageFormat::Csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap(), golden("seed42_t3.csv"));

    let mut jsonl = Vec::new();
    write_images(&images, &mut jsonl, ImageFormat::Jsonl).unwrap();
    assert_eq!(String::from_utf8(jsonl).unwrap(), golden("seed42_t3.jsonl"));
}

#[test]
fn csv_headers_are_pinned() {
    assert_eq!(POLY_HEADER, "MODEVAL-POLY v1");
    assert_eq!(IMAGE_CSV_HEADER, "t,d,e,c");
    assert_eq!(
        MICROBENCH_CSV_HEADER,
        "op,impl,backend,lanes,len,reps,ns_per_op,cycles_per_op,gflops,freq_mhz"
    );
    assert_eq!(
        EVAL_CSV_HEADER,
        "op,impl,backend,s,n,d,t,p,ti,td,m,ms_total,ns_per_term_eval,cycles_per_term_eval,gflops,freq_mhz,host"
    );
    assert_eq!(TUNE_CSV_HEADER, "ti,td,m,ms_total,ns_per_term_eval,gflops");
}

proptest! {
    #[test]
    fn generated_polynomials_round_trip(
        s in 1usize..80,
        n in 3usize..7,
        d in 0u32..8,
        seed in any::<u64>(),
    ) {
        prop_assume!((d as u128 + 1).pow(n as u32) >= s as u128);
        let (f, m) = generate(&GenSpec { s, n, d, p: 1073741789, seed }).unwrap();
        let mut text = Vec::new();
        write_poly(&f, &m, &mut text).unwrap();
        let parsed = parse_poly(BufReader::new(&text[..])).unwrap();
        prop_assert_eq!(&parsed.poly, &f);
        prop_assert!(parsed.warnings.is_empty());
        let mut again = Vec::new();
        write_poly(&parsed.poly, &parsed.modulus, &mut again).unwrap();
        prop_assert_eq!(again, text);
    }

    #[test]
    fn parser_never_panics_on_arbitrary_input(text in ".{0,400}") {
        let _ = parse_poly(BufReader::new(text.as_bytes()));
    }

    #[test]
    fn parser_never_panics_on_near_valid_input(
        body in proptest::collection::vec("[ 0-9]{0,40}", 0..12),
        p in 1u64..2000,
        n in 0usize..9,
        s in 0usize..9,
    ) {
        let mut text = format!("MODEVAL-POLY v1\np {p} n {n} s {s}\n");
        for line in body {
            text.push_str(&line);
            text.push('\n');
        }
        let _ = parse_poly(BufReader::new(text.as_bytes()));
    }

    #[test]
    fn image_files_round_trip(records in proptest::collection::vec(
        (1u64..30, 0u32..12, 0u32..12, 1u64..1000), 0..40)
    ) {
        use modeval::eval::{BivariateImage, ImageEntry};
        let mut sorted = records.clone();
        sorted.sort();
        sorted.dedup_by_key(|r| (r.0, r.1, r.2));
        let mut images: Vec<BivariateImage> = Vec::new();
        for (t, d, e, c) in sorted {
            if images.last().map(|i| i.t) == Some(t) {
                images.last_mut().unwrap().entries.push(ImageEntry { d, e, c });
            } else {
                images.push(BivariateImage { t, entries: vec![ImageEntry { d, e, c }] });
            }
        }
        for format in [ImageFormat::Csv, ImageFormat::Jsonl] {
            let mut buf = Vec::new();
            write_images(&images, &mut buf, format).unwrap();
            let back = read_images(BufReader::new(&buf[..]), format).unwrap();
            prop_assert_eq!(&back, &images);
        }
    }
}

// ---------------------------------------------------------------------------
// End-to-end CLI checks.

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_modeval"))
}

#[test]
fn cli_gen_eval_verify_round_trip() {
    let dir = std::env::temp_dir().join(format!("modeval-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let poly = dir.join("t.poly");
    let images = dir.join("t.csv");

    let out = cli()
        .args(["gen", "--s", "25", "--n", "4", "--d", "4", "--p", "1073741789", "--seed", "5"])
        .arg("--out")
        .arg(&poly)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = cli()
        .args(["eval", "--T", "9", "--plan", "2,2,1", "--seed", "3", "--verify-sample", "4"])
        .arg("--poly")
        .arg(&poly)
        .arg("--out")
        .arg(&images)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with(EVAL_CSV_HEADER), "{stdout}");

    // Full verification of the written image file against the oracle.
    let out = cli()
        .args(["verify", "--seed", "3"])
        .arg("--poly")
        .arg(&poly)
        .arg("--images")
        .arg(&images)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // Negative control: corrupt one digit and expect exit code 1 plus a
    // located divergence.
    let text = std::fs::read_to_string(&images).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let last = lines.last_mut().unwrap();
    let mut fields: Vec<String> = last.split(',').map(String::from).collect();
    let c: u64 = fields[3].parse().unwrap();
    fields[3] = (c + 1).to_string();
    *last = fields.join(",");
    std::fs::write(&images, lines.join("\n") + "\n").unwrap();

    let out = cli()
        .args(["verify", "--seed", "3"])
        .arg("--poly")
        .arg(&poly)
        .arg("--images")
        .arg(&images)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("FAIL"), "{stderr}");
    assert!(stderr.contains("t="), "divergence location missing: {stderr}");

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn cli_usage_errors_exit_2() {
    let out = cli().args(["eval", "--poly"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = cli()
        .args(["verify", "--poly", "/nonexistent/nope.poly"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = cli()
        .args(["microbench", "--backend", "bogus"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_tune_emits_pinned_schema() {
    let dir = std::env::temp_dir().join(format!("modeval-tune-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let poly = dir.join("t.poly");
    cli()
        .args(["gen", "--s", "16", "--n", "3", "--d", "4", "--p", "1009", "--seed", "2"])
        .arg("--out")
        .arg(&poly)
        .status()
        .unwrap();
    let out = cli()
        .args(["tune", "--T", "24", "--grid", "1,2", "--reps", "1", "--backend", "portable"])
        .arg("--poly")
        .arg(&poly)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some(TUNE_CSV_HEADER));
    assert_eq!(lines.count(), 8, "2^3 grid rows");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("best:"), "{stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn cli_backend_env_override() {
    let out = cli()
        .args(["microbench", "--op", "add", "--impl", "vector", "--len", "64", "--reps", "1"])
        .env("MODEVAL_BACKEND", "portable")
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains(",portable,"), "{stdout}");
}
