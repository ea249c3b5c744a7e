//! Scalar compute kernels of the matrix method.

use super::{BivariateImage, ImageEntry, MonomialEvals, NoTally, OpCounts, Tally};
use crate::field::PrimeModulus;
use crate::simd::AlignedBuf;

/// The scalar reference kernel on the integer carrier.
///
/// For each `t` in `1..=t_count` and each group of terms sharing `(d, e)`,
/// advances `a[j] <- a[j] * m[j] mod p` and folds the products into the
/// group coefficient; zero coefficients are dropped from the image. After
/// the call, `me.a[i]` holds `a_i * m_i^t_count`.
pub fn eval_scalar(me: &mut MonomialEvals, m: &PrimeModulus, t_count: u64) -> Vec<BivariateImage> {
    eval_scalar_tally(me, m, t_count, &mut NoTally)
}

/// As [`eval_scalar`], also reporting the modular-operation counts. The
/// Hadamard stage performs exactly `s * t_count` multiplications.
pub fn eval_scalar_instrumented(
    me: &mut MonomialEvals,
    m: &PrimeModulus,
    t_count: u64,
) -> (Vec<BivariateImage>, OpCounts) {
    let mut counts = OpCounts::default();
    let images = eval_scalar_tally(me, m, t_count, &mut counts);
    (images, counts)
}

fn eval_scalar_tally<C: Tally>(
    me: &mut MonomialEvals,
    m: &PrimeModulus,
    t_count: u64,
    tally: &mut C,
) -> Vec<BivariateImage> {
    let mut images = Vec::with_capacity(t_count as usize);
    for t in 1..=t_count {
        let mut entries = Vec::new();
        for g in &me.groups {
            let mut c = 0u64;
            for j in g.start..g.start + g.len {
                me.a[j] = m.mulmod_int(me.a[j], me.m[j]);
                c = m.addmod_int(c, me.a[j]);
            }
            tally.mul(g.len as u64);
            tally.add(g.len as u64);
            if c != 0 {
                entries.push(ImageEntry {
                    d: g.d,
                    e: g.e,
                    c,
                });
            }
        }
        images.push(BivariateImage { t, entries });
    }
    images
}

/// The same kernel on the floating-point carrier with scalar operations.
///
/// `a` and `m` are batch-converted once up front; each group coefficient is
/// converted back after its reduction. This is the configuration whose
/// branchy scalar addmod makes it slower than the integer kernel; it exists
/// for the benchmark comparisons and leaves `me` untouched.
pub fn eval_scalar_fp(me: &MonomialEvals, m: &PrimeModulus, t_count: u64) -> Vec<BivariateImage> {
    let mut a = AlignedBuf::from_u64s(&me.a);
    let mv = AlignedBuf::from_u64s(&me.m);
    let mut images = Vec::with_capacity(t_count as usize);
    for t in 1..=t_count {
        let mut entries = Vec::new();
        for g in &me.groups {
            let mut c = 0.0f64;
            for j in g.start..g.start + g.len {
                a[j] = m.mulmod_fp(a[j], mv[j]);
                c = m.addmod_fp(c, a[j]);
            }
            if c != 0.0 {
                entries.push(ImageEntry {
                    d: g.d,
                    e: g.e,
                    c: c as u64,
                });
            }
        }
        images.push(BivariateImage { t, entries });
    }
    images
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{build_power_tables, evaluate_monomials};
    use crate::poly::{EvalPoint, SparsePolynomial, Term};

    fn setup(
        p: u64,
        n: usize,
        terms: Vec<Term>,
        betas: Vec<u64>,
    ) -> (PrimeModulus, MonomialEvals) {
        let m = PrimeModulus::new(p).unwrap();
        let f = SparsePolynomial::from_terms(n, terms, &m).unwrap();
        let beta = EvalPoint::new(betas, &m).unwrap();
        let tables = build_power_tables(&f, &beta, &m);
        (m, evaluate_monomials(&f, &tables, &m))
    }

    #[test]
    fn constant_plus_linear() {
        // f = 5 + x3 over F_7 at beta = 2: b_1 sums to 5 + 2 = 0 (empty image),
        // b_2 to 5 + 4 = 2.
        let (m, mut me) = setup(
            7,
            3,
            vec![
                Term {
                    coeff: 5,
                    d: 0,
                    e: 0,
                    evec: vec![0],
                },
                Term {
                    coeff: 1,
                    d: 0,
                    e: 0,
                    evec: vec![1],
                },
            ],
            vec![2],
        );
        let images = eval_scalar(&mut me, &m, 2);
        assert_eq!(images.len(), 2);
        assert!(images[0].entries.is_empty());
        assert_eq!(images[1].entries, vec![ImageEntry { d: 0, e: 0, c: 2 }]);
    }

    #[test]
    fn no_evaluated_variables_present() {
        // All tail exponents zero: every image equals the input support.
        let (m, mut me) = setup(
            11,
            4,
            vec![
                Term {
                    coeff: 3,
                    d: 2,
                    e: 1,
                    evec: vec![0, 0],
                },
                Term {
                    coeff: 1,
                    d: 0,
                    e: 5,
                    evec: vec![0, 0],
                },
            ],
            vec![2, 3],
        );
        let images = eval_scalar(&mut me, &m, 3);
        for img in &images {
            assert_eq!(
                img.entries,
                vec![
                    ImageEntry { d: 2, e: 1, c: 3 },
                    ImageEntry { d: 0, e: 5, c: 1 }
                ]
            );
        }
    }

    #[test]
    fn a_vector_holds_final_powers() {
        let (m, mut me) = setup(
            1009,
            3,
            vec![Term {
                coeff: 17,
                d: 0,
                e: 0,
                evec: vec![1],
            }],
            vec![5],
        );
        let t_count = 6;
        eval_scalar(&mut me, &m, t_count);
        let expect = m.mulmod_int(17, m.powmod(5, t_count));
        assert_eq!(me.coefficients(), &[expect]);
    }

    #[test]
    fn hadamard_count_is_exact() {
        let (m, mut me) = setup(
            1009,
            4,
            vec![
                Term {
                    coeff: 1,
                    d: 0,
                    e: 0,
                    evec: vec![1, 0],
                },
                Term {
                    coeff: 2,
                    d: 1,
                    e: 0,
                    evec: vec![0, 1],
                },
                Term {
                    coeff: 3,
                    d: 0,
                    e: 2,
                    evec: vec![2, 2],
                },
            ],
            vec![4, 9],
        );
        let (_, counts) = eval_scalar_instrumented(&mut me, &m, 11);
        assert_eq!(counts.mulmods, 3 * 11);
        assert!(counts.addmods <= 3 * 11);
    }

    #[test]
    fn fp_kernel_matches_integer_kernel() {
        let (m, mut me) = setup(
            101,
            4,
            vec![
                Term {
                    coeff: 9,
                    d: 1,
                    e: 0,
                    evec: vec![2, 1],
                },
                Term {
                    coeff: 54,
                    d: 1,
                    e: 0,
                    evec: vec![0, 3],
                },
                Term {
                    coeff: 100,
                    d: 0,
                    e: 0,
                    evec: vec![1, 1],
                },
            ],
            vec![11, 87],
        );
        let fp = eval_scalar_fp(&me, &m, 9);
        let int = eval_scalar(&mut me, &m, 9);
        assert_eq!(fp, int);
    }
}
