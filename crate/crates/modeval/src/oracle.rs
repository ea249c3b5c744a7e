//! Slow, obviously correct reference implementations.
//!
//! Everything here works on arbitrary-precision integers and shares no code
//! with the kernels below the integer-arithmetic layer: no floating-point
//! arithmetic, no lane widths, no plans. The property tests and the `verify`
//! subcommand compare kernel output against these.

use crate::eval::{BivariateImage, ImageEntry};
use crate::field::PrimeModulus;
use crate::poly::{EvalPoint, SparsePolynomial};
use num_bigint::BigUint;

/// `x * y mod p` by arbitrary-precision multiply-then-remainder.
pub fn naive_modmul(x: u64, y: u64, p: u64) -> u64 {
    let prod = BigUint::from(x) * BigUint::from(y);
    let rem = prod % BigUint::from(p);
    // The remainder of a u64 modulus always fits back into a u64.
    rem.iter_u64_digits().next().unwrap_or(0)
}

/// `x + y mod p` by arbitrary-precision addition-then-remainder.
pub fn naive_modadd(x: u64, y: u64, p: u64) -> u64 {
    let sum = BigUint::from(x) + BigUint::from(y);
    let rem = sum % BigUint::from(p);
    rem.iter_u64_digits().next().unwrap_or(0)
}

/// The image `b_t(x1, x2) = f(x1, x2, beta^t)` computed by direct
/// substitution, term by term.
///
/// Each evaluated coordinate is raised to `t`, every term's monomial value
/// is formed as one unreduced big-integer product, and coefficients of like
/// `(d, e)` monomials are summed before a single reduction. Entries whose
/// coefficient reduces to zero are dropped.
pub fn naive_evaluate(
    f: &SparsePolynomial,
    beta: &EvalPoint,
    t: u64,
    m: &PrimeModulus,
) -> BivariateImage {
    assert!(t >= 1, "evaluation indices start at 1");
    assert_eq!(beta.len(), f.evaluated_vars());
    let p = BigUint::from(m.p());
    let point: Vec<BigUint> = beta
        .coordinates()
        .iter()
        .map(|&b| BigUint::from(b).modpow(&BigUint::from(t), &p))
        .collect();

    let mut entries: Vec<ImageEntry> = Vec::new();
    let mut i = 0;
    let s = f.num_terms();
    while i < s {
        let lead = f.term(i);
        let (d, e) = (lead.d, lead.e);
        let mut group_sum = BigUint::from(0u32);
        while i < s {
            let term = f.term(i);
            if term.d != d || term.e != e {
                break;
            }
            let mut value = BigUint::from(term.coeff);
            for (coord, &exp) in point.iter().zip(term.evec) {
                value *= coord.pow(exp);
            }
            group_sum += value;
            i += 1;
        }
        let c = group_sum % &p;
        if c != BigUint::from(0u32) {
            entries.push(ImageEntry {
                d,
                e,
                c: c.iter_u64_digits().next().unwrap_or(0),
            });
        }
    }
    BivariateImage { t, entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Term;

    #[test]
    fn modmul_basics() {
        assert_eq!(naive_modmul(3, 5, 7), 1);
        let p = 1125899906842589;
        assert_eq!(naive_modmul(p - 1, p - 1, p), 1);
        assert_eq!(naive_modadd(p - 1, 1, p), 0);
    }

    #[test]
    fn constant_polynomial_image() {
        let m = PrimeModulus::new(101).unwrap();
        let f = SparsePolynomial::from_terms(
            3,
            vec![Term {
                coeff: 42,
                d: 0,
                e: 0,
                evec: vec![0],
            }],
            &m,
        )
        .unwrap();
        let beta = EvalPoint::new(vec![17], &m).unwrap();
        for t in 1..=5 {
            let img = naive_evaluate(&f, &beta, t, &m);
            assert_eq!(img.entries.len(), 1);
            assert_eq!(img.entries[0], ImageEntry { d: 0, e: 0, c: 42 });
        }
    }

    #[test]
    fn single_variable_powers() {
        // f = x3, beta = 2, p = 7: image at t = 3 is the constant 2^3 mod 7 = 1.
        let m = PrimeModulus::new(7).unwrap();
        let f = SparsePolynomial::from_terms(
            3,
            vec![Term {
                coeff: 1,
                d: 0,
                e: 0,
                evec: vec![1],
            }],
            &m,
        )
        .unwrap();
        let beta = EvalPoint::new(vec![2], &m).unwrap();
        let img = naive_evaluate(&f, &beta, 3, &m);
        assert_eq!(img.entries, vec![ImageEntry { d: 0, e: 0, c: 1 }]);
    }

    #[test]
    fn zero_sum_groups_are_dropped() {
        // 3*x3 + 4*x4 at beta = (2, 2): the (0,0) group sums to 7*2^t = 0 mod 7.
        let m = PrimeModulus::new(7).unwrap();
        let f = SparsePolynomial::from_terms(
            4,
            vec![
                Term {
                    coeff: 3,
                    d: 0,
                    e: 0,
                    evec: vec![1, 0],
                },
                Term {
                    coeff: 4,
                    d: 0,
                    e: 0,
                    evec: vec![0, 1],
                },
            ],
            &m,
        )
        .unwrap();
        let beta = EvalPoint::new(vec![2, 2], &m).unwrap();
        for t in 1..=4 {
            let img = naive_evaluate(&f, &beta, t, &m);
            assert!(img.entries.is_empty(), "t={t}");
        }
    }
}
