//! Sparse multivariate polynomials over a prime field and the evaluation
//! points they are imaged at.
//!
//! A polynomial in `n >= 3` variables is a sum of terms
//! `a * x1^d * x2^e * x3^d3 * ... * xn^dn` with nonzero coefficients. Terms
//! are kept sorted in descending lexicographic order with
//! `x1 > x2 > x3 > ... > xn`, so terms sharing the same `(d, e)` pair form
//! contiguous runs. Exponents are stored in flat arrays rather than per-term
//! vectors to keep the large instances cache-friendly.

use crate::field::PrimeModulus;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("a polynomial needs at least 3 variables, got {0}")]
    TooFewVariables(usize),
    #[error("a polynomial needs at least one term")]
    Empty,
    #[error("term {index} has {got} evaluated-variable exponents, expected {expected}")]
    WrongArity {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("term {index} has coefficient {coeff} outside [1, p)")]
    BadCoefficient { index: usize, coeff: u64 },
    #[error("two terms share the monomial starting with x1^{d} x2^{e}")]
    DuplicateMonomial { d: u32, e: u32 },
}

/// One input term: coefficient, the two kept exponents, and the exponents of
/// the evaluated variables `x3..xn`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub coeff: u64,
    pub d: u32,
    pub e: u32,
    pub evec: Vec<u32>,
}

/// Borrowed view of one stored term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermRef<'a> {
    pub coeff: u64,
    pub d: u32,
    pub e: u32,
    pub evec: &'a [u32],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePolynomial {
    n: usize,
    coeffs: Vec<u64>,
    x1: Vec<u32>,
    x2: Vec<u32>,
    /// Row-major `s x (n-2)` exponents of the evaluated variables.
    evec: Vec<u32>,
}

impl SparsePolynomial {
    /// Builds a polynomial from terms in any order. Terms are sorted into
    /// the canonical descending order; identical monomials are rejected.
    /// Coefficients must already be reduced into `[1, p)`.
    pub fn from_terms(
        n: usize,
        mut terms: Vec<Term>,
        modulus: &PrimeModulus,
    ) -> Result<Self, PolyError> {
        if n < 3 {
            return Err(PolyError::TooFewVariables(n));
        }
        if terms.is_empty() {
            return Err(PolyError::Empty);
        }
        let width = n - 2;
        for (index, t) in terms.iter().enumerate() {
            if t.evec.len() != width {
                return Err(PolyError::WrongArity {
                    index,
                    got: t.evec.len(),
                    expected: width,
                });
            }
            if t.coeff == 0 || t.coeff >= modulus.p() {
                return Err(PolyError::BadCoefficient {
                    index,
                    coeff: t.coeff,
                });
            }
        }
        terms.sort_by(|a, b| cmp_terms(b, a));
        for pair in terms.windows(2) {
            if exponents_equal(&pair[0], &pair[1]) {
                return Err(PolyError::DuplicateMonomial {
                    d: pair[0].d,
                    e: pair[0].e,
                });
            }
        }
        let s = terms.len();
        let mut coeffs = Vec::with_capacity(s);
        let mut x1 = Vec::with_capacity(s);
        let mut x2 = Vec::with_capacity(s);
        let mut evec = Vec::with_capacity(s * width);
        for t in terms {
            coeffs.push(t.coeff);
            x1.push(t.d);
            x2.push(t.e);
            evec.extend_from_slice(&t.evec);
        }
        Ok(SparsePolynomial {
            n,
            coeffs,
            x1,
            x2,
            evec,
        })
    }

    /// Total number of variables, including `x1` and `x2`.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of evaluated variables `x3..xn`.
    #[inline]
    pub fn evaluated_vars(&self) -> usize {
        self.n - 2
    }

    /// Term count `s`.
    #[inline]
    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    #[inline]
    pub fn coefficients(&self) -> &[u64] {
        &self.coeffs
    }

    #[inline]
    pub fn term(&self, i: usize) -> TermRef<'_> {
        let w = self.evaluated_vars();
        TermRef {
            coeff: self.coeffs[i],
            d: self.x1[i],
            e: self.x2[i],
            evec: &self.evec[i * w..(i + 1) * w],
        }
    }

    pub fn iter_terms(&self) -> impl Iterator<Item = TermRef<'_>> + '_ {
        (0..self.num_terms()).map(move |i| self.term(i))
    }

    /// Degree in the `j`-th evaluated variable (`j = 0` is `x3`).
    pub fn evaluated_degree(&self, j: usize) -> u32 {
        let w = self.evaluated_vars();
        (0..self.num_terms())
            .map(|i| self.evec[i * w + j])
            .max()
            .unwrap_or(0)
    }

    /// Largest degree over all evaluated variables.
    pub fn max_evaluated_degree(&self) -> u32 {
        (0..self.evaluated_vars())
            .map(|j| self.evaluated_degree(j))
            .max()
            .unwrap_or(0)
    }
}

fn cmp_terms(a: &Term, b: &Term) -> Ordering {
    a.d.cmp(&b.d)
        .then_with(|| a.e.cmp(&b.e))
        .then_with(|| a.evec.cmp(&b.evec))
}

fn exponents_equal(a: &Term, b: &Term) -> bool {
    a.d == b.d && a.e == b.e && a.evec == b.evec
}

/// The point `beta = (beta_3, .., beta_n)` the trailing variables are
/// evaluated at. Every coordinate is nonzero; images are taken at the powers
/// `beta^t` for `t` starting at 1, never 0, since the all-ones point
/// `beta^0` can collapse algebraic structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPoint {
    betas: Vec<u64>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalPointError {
    #[error("coordinate {index} is {value}, outside [1, p)")]
    OutOfRange { index: usize, value: u64 },
}

impl EvalPoint {
    pub fn new(betas: Vec<u64>, modulus: &PrimeModulus) -> Result<Self, EvalPointError> {
        for (index, &value) in betas.iter().enumerate() {
            if value == 0 || value >= modulus.p() {
                return Err(EvalPointError::OutOfRange { index, value });
            }
        }
        Ok(EvalPoint { betas })
    }

    /// Uniform coordinates in `[1, p-1]` for a polynomial in `n` variables.
    pub fn random<R: Rng>(n: usize, modulus: &PrimeModulus, rng: &mut R) -> Self {
        assert!(n >= 3);
        let betas = (0..n - 2).map(|_| rng.gen_range(1..modulus.p())).collect();
        EvalPoint { betas }
    }

    /// Deterministic point derived from a seed; the CLI uses this so that
    /// `eval` and `verify` runs agree on the same point.
    pub fn from_seed(n: usize, modulus: &PrimeModulus, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random(n, modulus, &mut rng)
    }

    #[inline]
    pub fn coordinates(&self) -> &[u64] {
        &self.betas
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m7() -> PrimeModulus {
        PrimeModulus::new(7).unwrap()
    }

    #[test]
    fn terms_sorted_descending() {
        let terms = vec![
            Term {
                coeff: 1,
                d: 0,
                e: 0,
                evec: vec![1],
            },
            Term {
                coeff: 2,
                d: 1,
                e: 0,
                evec: vec![0],
            },
            Term {
                coeff: 3,
                d: 0,
                e: 2,
                evec: vec![0],
            },
        ];
        let f = SparsePolynomial::from_terms(3, terms, &m7()).unwrap();
        let order: Vec<(u32, u32)> = f.iter_terms().map(|t| (t.d, t.e)).collect();
        assert_eq!(order, vec![(1, 0), (0, 2), (0, 0)]);
    }

    #[test]
    fn duplicate_monomials_rejected() {
        let terms = vec![
            Term {
                coeff: 1,
                d: 1,
                e: 2,
                evec: vec![3, 4],
            },
            Term {
                coeff: 5,
                d: 1,
                e: 2,
                evec: vec![3, 4],
            },
        ];
        let err = SparsePolynomial::from_terms(4, terms, &m7()).unwrap_err();
        assert_eq!(err, PolyError::DuplicateMonomial { d: 1, e: 2 });
    }

    #[test]
    fn same_de_different_tail_allowed() {
        let terms = vec![
            Term {
                coeff: 1,
                d: 1,
                e: 2,
                evec: vec![3, 4],
            },
            Term {
                coeff: 5,
                d: 1,
                e: 2,
                evec: vec![3, 5],
            },
        ];
        let f = SparsePolynomial::from_terms(4, terms, &m7()).unwrap();
        assert_eq!(f.num_terms(), 2);
    }

    #[test]
    fn coefficient_range_checked() {
        let terms = vec![Term {
            coeff: 7,
            d: 0,
            e: 0,
            evec: vec![0],
        }];
        assert!(matches!(
            SparsePolynomial::from_terms(3, terms, &m7()),
            Err(PolyError::BadCoefficient { .. })
        ));
    }

    #[test]
    fn eval_point_validation() {
        let m = m7();
        assert!(EvalPoint::new(vec![1, 6], &m).is_ok());
        assert!(EvalPoint::new(vec![0], &m).is_err());
        assert!(EvalPoint::new(vec![7], &m).is_err());
    }

    #[test]
    fn seeded_point_is_deterministic() {
        let m = PrimeModulus::new(1009).unwrap();
        let a = EvalPoint::from_seed(6, &m, 42);
        let b = EvalPoint::from_seed(6, &m, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.coordinates().iter().all(|&b| b >= 1 && b < 1009));
    }

    #[test]
    fn degrees() {
        let terms = vec![
            Term {
                coeff: 1,
                d: 9,
                e: 0,
                evec: vec![2, 7],
            },
            Term {
                coeff: 1,
                d: 0,
                e: 3,
                evec: vec![5, 1],
            },
        ];
        let f = SparsePolynomial::from_terms(4, terms, &m7()).unwrap();
        assert_eq!(f.evaluated_degree(0), 5);
        assert_eq!(f.evaluated_degree(1), 7);
        assert_eq!(f.max_evaluated_degree(), 7);
    }
}
