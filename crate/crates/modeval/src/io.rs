//! Deterministic text formats and instance generation.
//!
//! Polynomial files (version header `MODEVAL-POLY v1`):
//!
//! ```text
//! MODEVAL-POLY v1
//! p 1009 n 4 s 2
//! 17 3 0 2 1
//! 5 0 0 1 4
//! ```
//!
//! One term per line: coefficient, the `x1` and `x2` exponents, then the
//! `n - 2` exponents of the evaluated variables, all decimal. Canonical
//! files (terms in descending order, coefficients reduced) round-trip
//! byte-identically through [`parse_poly`] and [`write_poly`].
//!
//! Image files carry one record per `(t, d, e, c)`, sorted by `t` then term
//! order, as CSV with header `t,d,e,c` or as JSON lines with the same
//! fields.

use crate::eval::{BivariateImage, ImageEntry};
use crate::field::{ModulusError, PrimeModulus};
use crate::poly::{PolyError, SparsePolynomial, Term};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{self, BufRead, Write};
use thiserror::Error;

pub const POLY_HEADER: &str = "MODEVAL-POLY v1";
pub const IMAGE_CSV_HEADER: &str = "t,d,e,c";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid modulus: {0}")]
    Modulus(#[from] ModulusError),
    #[error("line {line}: coefficient is zero after reduction modulo p")]
    ZeroCoefficient { line: usize },
    #[error("duplicate monomial: two terms share x1^{d} x2^{e} and the same tail exponents")]
    DuplicateMonomial { d: u32, e: u32 },
    #[error("invalid polynomial: {0}")]
    Poly(PolyError),
}

impl From<PolyError> for ParseError {
    fn from(e: PolyError) -> Self {
        match e {
            PolyError::DuplicateMonomial { d, e } => ParseError::DuplicateMonomial { d, e },
            other => ParseError::Poly(other),
        }
    }
}

/// Non-fatal observations made while loading a polynomial file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// Input terms were not in canonical descending order; they were sorted.
    UnsortedInput,
    /// This many coefficients were `>= p` and were reduced at load.
    ReducedCoefficients(usize),
}

impl std::fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseWarning::UnsortedInput => {
                write!(f, "terms were not sorted; sorted at load")
            }
            ParseWarning::ReducedCoefficients(n) => {
                write!(f, "{n} coefficient(s) were >= p and were reduced modulo p")
            }
        }
    }
}

#[derive(Debug)]
pub struct ParsedPoly {
    pub poly: SparsePolynomial,
    pub modulus: PrimeModulus,
    pub warnings: Vec<ParseWarning>,
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

/// Parses a polynomial file. Coefficients at or above the modulus are
/// reduced with a warning; coefficients that reduce to zero are rejected;
/// unsorted input is sorted with a warning; duplicate monomials are errors.
pub fn parse_poly<R: BufRead>(reader: R) -> Result<ParsedPoly, ParseError> {
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| syntax(1, "empty file, expected header"))?;
    let header = header?;
    if header.trim_end() != POLY_HEADER {
        return Err(syntax(1, format!("expected {POLY_HEADER:?} header")));
    }

    let (_, meta) = lines
        .next()
        .ok_or_else(|| syntax(2, "missing metadata line"))?;
    let meta = meta?;
    let fields: Vec<&str> = meta.split_whitespace().collect();
    if fields.len() != 6 || fields[0] != "p" || fields[2] != "n" || fields[4] != "s" {
        return Err(syntax(2, "expected `p <prime> n <vars> s <terms>`"));
    }
    let p: u64 = fields[1]
        .parse()
        .map_err(|_| syntax(2, "p is not a valid integer"))?;
    let n: usize = fields[3]
        .parse()
        .map_err(|_| syntax(2, "n is not a valid integer"))?;
    let s: usize = fields[5]
        .parse()
        .map_err(|_| syntax(2, "s is not a valid integer"))?;
    if n < 3 {
        return Err(syntax(2, format!("n must be at least 3, got {n}")));
    }
    if s < 1 {
        return Err(syntax(2, "s must be at least 1"));
    }
    let modulus = PrimeModulus::new(p)?;

    let mut terms = Vec::with_capacity(s);
    let mut reduced = 0usize;
    let mut count = 0usize;
    for (idx, line) in &mut lines {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if count == s {
            return Err(syntax(lineno, format!("more than s = {s} term lines")));
        }
        let nums: Result<Vec<u64>, _> = line.split_whitespace().map(str::parse::<u64>).collect();
        let nums = nums.map_err(|e| syntax(lineno, format!("bad integer: {e}")))?;
        if nums.len() != n + 1 {
            return Err(syntax(
                lineno,
                format!("expected {} fields (coeff, d, e, {} tail exponents)", n + 1, n - 2),
            ));
        }
        let mut coeff = nums[0];
        if coeff >= p {
            coeff %= p;
            reduced += 1;
        }
        if coeff == 0 {
            return Err(ParseError::ZeroCoefficient { line: lineno });
        }
        let exp = |v: u64, what: &str| -> Result<u32, ParseError> {
            u32::try_from(v).map_err(|_| syntax(lineno, format!("{what} exponent too large")))
        };
        let d = exp(nums[1], "x1")?;
        let e = exp(nums[2], "x2")?;
        let evec = nums[3..]
            .iter()
            .map(|&v| exp(v, "tail"))
            .collect::<Result<Vec<u32>, _>>()?;
        terms.push(Term { coeff, d, e, evec });
        count += 1;
    }
    if count != s {
        return Err(syntax(0, format!("expected s = {s} terms, found {count}")));
    }

    let sorted_input = terms.windows(2).all(|w| term_key(&w[0]) >= term_key(&w[1]));
    let poly = SparsePolynomial::from_terms(n, terms, &modulus)?;

    let mut warnings = Vec::new();
    if !sorted_input {
        warnings.push(ParseWarning::UnsortedInput);
    }
    if reduced > 0 {
        warnings.push(ParseWarning::ReducedCoefficients(reduced));
    }
    Ok(ParsedPoly {
        poly,
        modulus,
        warnings,
    })
}

fn term_key(t: &Term) -> (u32, u32, &[u32]) {
    (t.d, t.e, &t.evec)
}

/// Writes the canonical form: header, metadata, one term per line in the
/// polynomial's (descending) order.
pub fn write_poly<W: Write>(
    f: &SparsePolynomial,
    modulus: &PrimeModulus,
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "{POLY_HEADER}")?;
    writeln!(w, "p {} n {} s {}", modulus.p(), f.n(), f.num_terms())?;
    for t in f.iter_terms() {
        write!(w, "{} {} {}", t.coeff, t.d, t.e)?;
        for &x in t.evec {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for ImageFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ImageFormat::Csv),
            "jsonl" => Ok(ImageFormat::Jsonl),
            other => Err(format!("unknown image format {other:?} (csv or jsonl)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct ImageRecord {
    t: u64,
    d: u32,
    e: u32,
    c: u64,
}

/// Writes one record per image entry, sorted by `t` then term order, as
/// exact decimal integers.
pub fn write_images<W: Write>(
    images: &[BivariateImage],
    mut w: W,
    format: ImageFormat,
) -> io::Result<()> {
    if format == ImageFormat::Csv {
        writeln!(w, "{IMAGE_CSV_HEADER}")?;
    }
    for img in images {
        for entry in &img.entries {
            match format {
                ImageFormat::Csv => {
                    writeln!(w, "{},{},{},{}", img.t, entry.d, entry.e, entry.c)?;
                }
                ImageFormat::Jsonl => {
                    let rec = ImageRecord {
                        t: img.t,
                        d: entry.d,
                        e: entry.e,
                        c: entry.c,
                    };
                    serde_json::to_writer(&mut w, &rec)?;
                    writeln!(w)?;
                }
            }
        }
    }
    Ok(())
}

/// Reads an image file back into per-`t` images (entries in file order).
/// `t` values need not be contiguous; images are returned sorted by `t`.
pub fn read_images<R: BufRead>(
    reader: R,
    format: ImageFormat,
) -> Result<Vec<BivariateImage>, ParseError> {
    let mut images: Vec<BivariateImage> = Vec::new();
    let mut push = |rec: ImageRecord| {
        if let Some(last) = images.last_mut() {
            if last.t == rec.t {
                last.entries.push(ImageEntry {
                    d: rec.d,
                    e: rec.e,
                    c: rec.c,
                });
                return;
            }
        }
        images.push(BivariateImage {
            t: rec.t,
            entries: vec![ImageEntry {
                d: rec.d,
                e: rec.e,
                c: rec.c,
            }],
        });
    };
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match format {
            ImageFormat::Csv => {
                if lineno == 1 {
                    if trimmed != IMAGE_CSV_HEADER {
                        return Err(syntax(1, format!("expected {IMAGE_CSV_HEADER:?} header")));
                    }
                    continue;
                }
                let nums: Result<Vec<u64>, _> = trimmed.split(',').map(str::parse::<u64>).collect();
                let nums = nums.map_err(|e| syntax(lineno, format!("bad integer: {e}")))?;
                if nums.len() != 4 {
                    return Err(syntax(lineno, "expected 4 comma-separated fields"));
                }
                push(ImageRecord {
                    t: nums[0],
                    d: nums[1] as u32,
                    e: nums[2] as u32,
                    c: nums[3],
                });
            }
            ImageFormat::Jsonl => {
                let rec: ImageRecord = serde_json::from_str(trimmed)
                    .map_err(|e| syntax(lineno, format!("bad json record: {e}")))?;
                push(rec);
            }
        }
    }
    images.sort_by_key(|img| img.t);
    Ok(images)
}

/// Parameters for random instance generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSpec {
    pub s: usize,
    pub n: usize,
    /// Maximum per-variable degree; exponents are uniform in `[0, d]`.
    pub d: u32,
    pub p: u64,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid modulus: {0}")]
    Modulus(#[from] ModulusError),
    #[error("s must be at least 1")]
    NoTerms,
    #[error("n must be at least 3, got {0}")]
    TooFewVariables(usize),
    #[error("cannot place {s} distinct monomials in a {n}-variable degree-{d} grid of {capacity}")]
    TooDense {
        s: usize,
        n: usize,
        d: u32,
        capacity: u128,
    },
}

/// Generates `s` distinct random monomials with exponents uniform in
/// `[0, d]` and coefficients uniform in `[1, p-1]`, deterministically per
/// seed. Duplicate monomial draws are rejected and redrawn.
pub fn generate(spec: &GenSpec) -> Result<(SparsePolynomial, PrimeModulus), GenError> {
    if spec.s < 1 {
        return Err(GenError::NoTerms);
    }
    if spec.n < 3 {
        return Err(GenError::TooFewVariables(spec.n));
    }
    let modulus = PrimeModulus::new(spec.p)?;
    let capacity = (0..spec.n).try_fold(1u128, |acc, _| {
        acc.checked_mul(spec.d as u128 + 1)
            .filter(|&c| c <= u128::MAX / 2)
    });
    match capacity {
        Some(c) if (spec.s as u128) <= c => {}
        Some(c) => {
            return Err(GenError::TooDense {
                s: spec.s,
                n: spec.n,
                d: spec.d,
                capacity: c,
            })
        }
        // Overflowed u128: plenty of room.
        None => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen: HashSet<Vec<u32>> = HashSet::with_capacity(spec.s * 2);
    let mut terms = Vec::with_capacity(spec.s);
    while terms.len() < spec.s {
        let exps: Vec<u32> = (0..spec.n).map(|_| rng.gen_range(0..=spec.d)).collect();
        if !seen.insert(exps.clone()) {
            continue;
        }
        let coeff = rng.gen_range(1..spec.p);
        terms.push(Term {
            coeff,
            d: exps[0],
            e: exps[1],
            evec: exps[2..].to_vec(),
        });
    }
    let poly = SparsePolynomial::from_terms(spec.n, terms, &modulus)
        .expect("generated terms are distinct and reduced");
    Ok((poly, modulus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    fn roundtrip(text: &str) -> (ParsedPoly, String) {
        let parsed = parse_poly(BufReader::new(text.as_bytes())).unwrap();
        let mut out = Vec::new();
        write_poly(&parsed.poly, &parsed.modulus, &mut out).unwrap();
        (parsed, String::from_utf8(out).unwrap())
    }

    #[test]
    fn canonical_file_round_trips_byte_identically() {
        let text = "MODEVAL-POLY v1\np 1009 n 4 s 2\n17 3 0 2 1\n5 0 0 1 4\n";
        let (parsed, written) = roundtrip(text);
        assert!(parsed.warnings.is_empty());
        assert_eq!(written, text);
    }

    #[test]
    fn oversized_coefficients_reduce_with_warning() {
        let text = "MODEVAL-POLY v1\np 7 n 3 s 1\n30 1 0 2\n";
        let parsed = parse_poly(BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(parsed.warnings, vec![ParseWarning::ReducedCoefficients(1)]);
        assert_eq!(parsed.poly.term(0).coeff, 2);
    }

    #[test]
    fn zero_after_reduction_is_rejected() {
        let text = "MODEVAL-POLY v1\np 7 n 3 s 1\n14 1 0 2\n";
        assert!(matches!(
            parse_poly(BufReader::new(text.as_bytes())),
            Err(ParseError::ZeroCoefficient { line: 3 })
        ));
    }

    #[test]
    fn unsorted_input_sorts_with_warning() {
        let text = "MODEVAL-POLY v1\np 7 n 3 s 2\n1 0 0 1\n2 5 0 0\n";
        let parsed = parse_poly(BufReader::new(text.as_bytes())).unwrap();
        assert!(parsed.warnings.contains(&ParseWarning::UnsortedInput));
        assert_eq!(parsed.poly.term(0).d, 5);
    }

    #[test]
    fn duplicate_monomials_error() {
        let text = "MODEVAL-POLY v1\np 7 n 3 s 2\n1 2 3 4\n5 2 3 4\n";
        assert!(matches!(
            parse_poly(BufReader::new(text.as_bytes())),
            Err(ParseError::DuplicateMonomial { d: 2, e: 3 })
        ));
    }

    #[test]
    fn composite_modulus_rejected() {
        let text = "MODEVAL-POLY v1\np 9 n 3 s 1\n1 0 0 0\n";
        assert!(matches!(
            parse_poly(BufReader::new(text.as_bytes())),
            Err(ParseError::Modulus(ModulusError::NotPrime(9)))
        ));
    }

    #[test]
    fn image_formats_carry_identical_data() {
        let images = vec![
            BivariateImage {
                t: 1,
                entries: vec![
                    ImageEntry { d: 2, e: 0, c: 5 },
                    ImageEntry { d: 0, e: 1, c: 9 },
                ],
            },
            BivariateImage {
                t: 2,
                entries: vec![ImageEntry { d: 2, e: 0, c: 3 }],
            },
        ];
        let mut csv = Vec::new();
        write_images(&images, &mut csv, ImageFormat::Csv).unwrap();
        let mut jsonl = Vec::new();
        write_images(&images, &mut jsonl, ImageFormat::Jsonl).unwrap();

        let from_csv = read_images(BufReader::new(&csv[..]), ImageFormat::Csv).unwrap();
        let from_jsonl = read_images(BufReader::new(&jsonl[..]), ImageFormat::Jsonl).unwrap();
        assert_eq!(from_csv, images);
        assert_eq!(from_jsonl, images);
    }

    #[test]
    fn empty_image_set_is_header_only() {
        let mut csv = Vec::new();
        write_images(&[], &mut csv, ImageFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "t,d,e,c\n");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GenSpec {
            s: 50,
            n: 4,
            d: 6,
            p: 1009,
            seed: 7,
        };
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_terms(), 50);
    }

    #[test]
    fn single_term_generation() {
        let spec = GenSpec {
            s: 1,
            n: 3,
            d: 0,
            p: 7,
            seed: 0,
        };
        let (f, _) = generate(&spec).unwrap();
        assert_eq!(f.num_terms(), 1);
        assert_eq!(f.term(0).d, 0);
    }

    #[test]
    fn overfull_grid_rejected() {
        let spec = GenSpec {
            s: 2,
            n: 3,
            d: 0,
            p: 7,
            seed: 0,
        };
        assert!(matches!(generate(&spec), Err(GenError::TooDense { .. })));
    }
}
