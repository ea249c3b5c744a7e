//! Scalar modular arithmetic over primes `p < 2^50`.
//!
//! Two interchangeable implementations are provided for multiplication and
//! addition modulo `p`:
//!
//! * a floating-point path (`mulmod_fp`, `addmod_fp`) built on the FMA
//!   error-free transformation of the product, operating on `f64` values
//!   that are exact images of integers in `[0, p)`;
//! * an integer path (`mulmod_int`, `addmod_int`) that reduces the 128-bit
//!   product with a precomputed reciprocal of the modulus.
//!
//! Both paths return the same canonical integers; the floating-point path
//! additionally guarantees that a zero result never carries the sign bit of
//! `-0.0`, which lets vector backends select reduction candidates on sign
//! bits alone.

use thiserror::Error;

/// Largest permitted modulus width. Products of two reduced operands must be
/// recoverable from an `f64` error-free transformation, which bounds the
/// modulus at 50 bits.
pub const MAX_MODULUS_BITS: u32 = 50;

/// Errors from [`PrimeModulus::new`].
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ModulusError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("{0} does not fit in {MAX_MODULUS_BITS} bits")]
    TooLarge(u64),
    #[error("{0} is too small, the modulus must exceed 2")]
    TooSmall(u64),
}

/// A validated prime modulus `2 < p < 2^50` with the precomputed constants
/// used by both arithmetic paths.
///
/// Immutable after construction and freely shareable across threads. All
/// arithmetic methods are pure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimeModulus {
    p: u64,
    /// Correctly rounded `1.0 / (p as f64)`.
    u: f64,
    /// `p as f64`, exact because `p < 2^50 <= 2^53`.
    p_fp: f64,
    /// Leading zeros of `p`; normalization shift for the integer path.
    shift: u32,
    /// `p << shift`, the normalized divisor.
    d_norm: u64,
    /// `floor((2^128 - 1) / d_norm) - 2^64`, the 2-by-1 division reciprocal.
    recip: u64,
}

impl PrimeModulus {
    /// Validates `p` and precomputes the reciprocals.
    ///
    /// Primality is checked with a deterministic Miller-Rabin witness set
    /// (exact for all 64-bit inputs). Also asserts that the thread runs under
    /// the default round-to-nearest-even mode, which the floating-point path
    /// assumes.
    pub fn new(p: u64) -> Result<Self, ModulusError> {
        if p <= 2 {
            return Err(ModulusError::TooSmall(p));
        }
        if p >= 1u64 << MAX_MODULUS_BITS {
            return Err(ModulusError::TooLarge(p));
        }
        if !is_prime_u64(p) {
            return Err(ModulusError::NotPrime(p));
        }
        assert!(
            rounding_is_nearest_even(),
            "FP rounding mode is not round-to-nearest-even; the FMA kernels are unsound"
        );
        let shift = p.leading_zeros();
        let d_norm = p << shift;
        // Quotient is in [2^64, 2^65), so the truncating cast subtracts 2^64.
        let recip = (u128::MAX / d_norm as u128) as u64;
        Ok(PrimeModulus {
            p,
            u: 1.0 / (p as f64),
            p_fp: p as f64,
            shift,
            d_norm,
            recip,
        })
    }

    #[inline]
    pub fn p(&self) -> u64 {
        self.p
    }

    /// The modulus as an exact `f64`.
    #[inline]
    pub fn p_fp(&self) -> f64 {
        self.p_fp
    }

    /// Correctly rounded floating-point reciprocal of the modulus.
    #[inline]
    pub fn u_fp(&self) -> f64 {
        self.u
    }

    /// `x * y mod p` on the floating-point carrier.
    ///
    /// `x` and `y` must be exact `f64` images of integers in `[0, p)`. The
    /// result is the exact image of the modular product, in `[0, p)`, and is
    /// never `-0.0`.
    #[inline]
    pub fn mulmod_fp(&self, x: f64, y: f64) -> f64 {
        debug_assert!(self.is_reduced_fp(x) && self.is_reduced_fp(y));
        let h = x * y;
        let l = f64::mul_add(x, y, -h);
        let b = h * self.u;
        let c = b.floor();
        let d = f64::mul_add(-c, self.p_fp, h);
        let g = d + l;
        if g >= self.p_fp {
            return g - self.p_fp;
        }
        if g < 0.0 {
            return g + self.p_fp;
        }
        g
    }

    /// `x + y mod p` on the floating-point carrier. Never returns `-0.0`.
    #[inline]
    pub fn addmod_fp(&self, x: f64, y: f64) -> f64 {
        debug_assert!(self.is_reduced_fp(x) && self.is_reduced_fp(y));
        let s = x + y;
        if s >= self.p_fp {
            s - self.p_fp
        } else {
            s
        }
    }

    /// `x * y mod p` on the integer carrier: 128-bit product, then a
    /// reciprocal-based 2-by-1 reduction (no hardware division).
    #[inline]
    pub fn mulmod_int(&self, x: u64, y: u64) -> u64 {
        debug_assert!(x < self.p && y < self.p);
        self.reduce_u128((x as u128) * (y as u128))
    }

    /// `x + y mod p` on the integer carrier, branch-free: the conditional
    /// subtraction is realized with an arithmetic-shift mask.
    #[inline]
    pub fn addmod_int(&self, x: u64, y: u64) -> u64 {
        debug_assert!(x < self.p && y < self.p);
        let s = x + y;
        let t = s.wrapping_sub(self.p);
        let mask = ((t as i64) >> 63) as u64;
        t.wrapping_add(self.p & mask)
    }

    /// `x^k mod p` by binary exponentiation, with `x^0 == 1`.
    pub fn powmod(&self, x: u64, k: u64) -> u64 {
        debug_assert!(x < self.p);
        let mut base = x;
        let mut e = k;
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mulmod_int(acc, base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mulmod_int(base, base);
            }
        }
        acc
    }

    /// Advisory check that the modulus is large enough for `s` monomial
    /// evaluations to be distinct with good probability: `p > 100 * s^2`.
    ///
    /// Never blocks evaluation; callers surface it as a warning.
    pub fn check_interpolation_bound(&self, s: u64) -> bool {
        debug_assert!(s >= 1);
        (self.p as u128) > 100u128 * (s as u128) * (s as u128)
    }

    /// Reduces any `z < p * 2^64` modulo `p`.
    #[inline]
    pub(crate) fn reduce_u128(&self, z: u128) -> u64 {
        let zn = z << self.shift;
        let u1 = (zn >> 64) as u64;
        let u0 = zn as u64;
        debug_assert!(u1 < self.d_norm);
        let q = (self.recip as u128) * (u1 as u128) + zn;
        let q1 = ((q >> 64) as u64).wrapping_add(1);
        let q0 = q as u64;
        let mut r = u0.wrapping_sub(q1.wrapping_mul(self.d_norm));
        if r > q0 {
            r = r.wrapping_add(self.d_norm);
        }
        if r >= self.d_norm {
            r -= self.d_norm;
        }
        r >> self.shift
    }

    #[inline]
    fn is_reduced_fp(&self, x: f64) -> bool {
        x >= 0.0 && x < self.p_fp && x == x.trunc() && !(x == 0.0 && x.is_sign_negative())
    }
}

/// Probes the active rounding mode: both checks hold only under
/// round-to-nearest-even.
fn rounding_is_nearest_even() -> bool {
    use std::hint::black_box;
    // 2^53 + 1 is a tie: nearest-even rounds down, away/upward round up.
    // 2^53 + 3 is a tie: nearest-even rounds up, downward/toward-zero round down.
    let big = black_box(9007199254740992.0f64);
    big + black_box(1.0) == big && big + black_box(3.0) == big + black_box(4.0)
}

/// Deterministic Miller-Rabin for 64-bit inputs. The fixed witness set is
/// exact for all n < 3.3 * 10^24.
pub(crate) fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let r = (n - 1).trailing_zeros();
    let d = (n - 1) >> r;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod_u128(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mulmod_u128(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[inline]
fn mulmod_u128(a: u64, b: u64, n: u64) -> u64 {
    ((a as u128 * b as u128) % n as u128) as u64
}

fn powmod_u128(mut a: u64, mut e: u64, n: u64) -> u64 {
    a %= n;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod_u128(acc, a, n);
        }
        a = mulmod_u128(a, a, n);
        e >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construct_small_prime() {
        let m = PrimeModulus::new(7).unwrap();
        assert_eq!(m.p(), 7);
        assert_eq!(m.u_fp(), 1.0 / 7.0);
        assert_eq!(m.p_fp(), 7.0);
    }

    #[test]
    fn construct_50_bit_prime() {
        let m = PrimeModulus::new(1125899906842589).unwrap();
        assert_eq!(m.p(), 1125899906842589);
    }

    #[test]
    fn reject_out_of_range() {
        assert_eq!(
            PrimeModulus::new(1 << 50),
            Err(ModulusError::TooLarge(1 << 50))
        );
        assert_eq!(PrimeModulus::new(2), Err(ModulusError::TooSmall(2)));
        assert_eq!(PrimeModulus::new(0), Err(ModulusError::TooSmall(0)));
        assert_eq!(PrimeModulus::new(9), Err(ModulusError::NotPrime(9)));
        // Carmichael number: must not fool the witness set.
        assert_eq!(
            PrimeModulus::new(561),
            Err(ModulusError::NotPrime(561))
        );
    }

    #[test]
    fn mulmod_fp_basics() {
        let m = PrimeModulus::new(7).unwrap();
        let z = m.mulmod_fp(0.0, 5.0);
        assert_eq!(z, 0.0);
        assert_eq!(z.to_bits(), 0, "zero result must be +0.0");
        assert_eq!(m.mulmod_fp(3.0, 5.0), 1.0);
    }

    #[test]
    fn mulmod_near_the_50_bit_ceiling() {
        // (2^49)^2 mod 1125899906842589, frozen from a widening-multiply oracle.
        let m = PrimeModulus::new(1125899906842589).unwrap();
        let x = (1u64 << 49) as f64;
        assert_eq!(m.mulmod_fp(x, x) as u64, 844424930132248);
        assert_eq!(m.mulmod_int(1 << 49, 1 << 49), 844424930132248);
    }

    #[test]
    fn addmod_basics() {
        let m = PrimeModulus::new(7).unwrap();
        let z = m.addmod_fp(6.0, 1.0);
        assert_eq!(z, 0.0);
        assert_eq!(z.to_bits(), 0);
        assert_eq!(m.addmod_fp(3.0, 3.0), 6.0);
        assert_eq!(m.addmod_int(6, 1), 0);
        assert_eq!(m.addmod_int(3, 3), 6);
    }

    #[test]
    fn mulmod_int_negative_one_squared() {
        for p in [7u64, 1009, 1048573, 1125899906842589] {
            let m = PrimeModulus::new(p).unwrap();
            assert_eq!(m.mulmod_int(p - 1, p - 1), 1);
        }
    }

    #[test]
    fn powmod_basics() {
        let m = PrimeModulus::new(1009).unwrap();
        assert_eq!(m.powmod(123, 0), 1);
        assert_eq!(m.powmod(0, 0), 1);
        assert_eq!(m.powmod(2, 10), 15);
    }

    #[test]
    fn powmod_matches_repeated_multiplication() {
        let m = PrimeModulus::new(1073741789).unwrap();
        let mut state = 0x2545f4914f6cdd1du64;
        for _ in 0..200 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let x = state % m.p();
            let k = (state >> 32) % 64;
            let mut expect = 1u64;
            for _ in 0..k {
                expect = m.mulmod_int(expect, x);
            }
            assert_eq!(m.powmod(x, k), expect);
        }
    }

    #[test]
    fn interpolation_bound() {
        let m = PrimeModulus::new(1009).unwrap();
        assert!(m.check_interpolation_bound(1));
        // 100 * 10^2 = 10000 >= 1009
        assert!(!m.check_interpolation_bound(10));

        // Near 2^49: p ~ 5.63e14 exceeds 100 * (10^6)^2 = 1e14.
        let m = PrimeModulus::new(562949953421231).unwrap();
        assert!(m.check_interpolation_bound(1_000_000));
        // ... but not 100 * (2^25)^2 = 100 * 2^50.
        assert!(!m.check_interpolation_bound(1 << 25));
    }

    #[test]
    fn cross_implementation_agreement() {
        for p in [3u64, 509, 1048573, 1073741789, 1099511627689, 1125899906842597] {
            let m = PrimeModulus::new(p).unwrap();
            let mut state = p ^ 0x9e3779b97f4a7c15;
            for _ in 0..2000 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                let x = state % p;
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                let y = state % p;
                let want_mul = ((x as u128 * y as u128) % p as u128) as u64;
                let want_add = ((x + y) % p) as u64;
                assert_eq!(m.mulmod_int(x, y), want_mul);
                assert_eq!(m.mulmod_fp(x as f64, y as f64) as u64, want_mul);
                assert_eq!(m.addmod_int(x, y), want_add);
                assert_eq!(m.addmod_fp(x as f64, y as f64) as u64, want_add);
            }
        }
    }

    #[test]
    fn primality_oracle_spot_checks() {
        assert!(is_prime_u64(2));
        assert!(is_prime_u64(1125899906842597));
        assert!(!is_prime_u64(1));
        assert!(!is_prime_u64(1125899906842596));
        // strong pseudoprime to base 2
        assert!(!is_prime_u64(2047));
    }
}
