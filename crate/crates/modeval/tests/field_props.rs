//! Property tests for the scalar field operations against a big-integer
//! oracle.

use modeval::oracle::{naive_modadd, naive_modmul};
use modeval::PrimeModulus;
use proptest::prelude::*;

/// Primes of 20 to 50 bits, externally verified.
pub const TEST_PRIMES: [u64; 16] = [
    1048573,
    4194301,
    16777213,
    67108859,
    268435399,
    1073741789,
    4294967291,
    17179869143,
    68719476731,
    274877906899,
    1099511627689,
    4398046511093,
    17592186044399,
    70368744177643,
    281474976710597,
    1125899906842597,
];

fn prime_and_pair() -> impl Strategy<Value = (u64, u64, u64)> {
    (0..TEST_PRIMES.len(), any::<u64>(), any::<u64>()).prop_map(|(i, a, b)| {
        let p = TEST_PRIMES[i];
        (p, a % p, b % p)
    })
}

proptest! {
    #[test]
    fn mulmod_agrees_with_oracle((p, x, y) in prime_and_pair()) {
        let m = PrimeModulus::new(p).unwrap();
        let want = naive_modmul(x, y, p);
        prop_assert_eq!(m.mulmod_int(x, y), want);
        let fp = m.mulmod_fp(x as f64, y as f64);
        prop_assert_eq!(fp as u64, want);
        prop_assert!(fp >= 0.0 && fp < p as f64);
    }

    #[test]
    fn addmod_agrees_with_oracle((p, x, y) in prime_and_pair()) {
        let m = PrimeModulus::new(p).unwrap();
        let want = naive_modadd(x, y, p);
        prop_assert_eq!(m.addmod_int(x, y), want);
        prop_assert_eq!(m.addmod_fp(x as f64, y as f64) as u64, want);
    }

    #[test]
    fn zero_results_have_clear_sign_bit((p, x, _y) in prime_and_pair()) {
        let m = PrimeModulus::new(p).unwrap();
        let z = m.mulmod_fp(0.0, x as f64);
        prop_assert_eq!(z.to_bits(), 0u64);
        let z = m.mulmod_fp(x as f64, 0.0);
        prop_assert_eq!(z.to_bits(), 0u64);
        // Wrap-around sum hitting exactly zero.
        if x != 0 {
            let z = m.addmod_fp(x as f64, (p - x) as f64);
            prop_assert_eq!(z.to_bits(), 0u64);
        }
    }

    #[test]
    fn nonzero_product_of_nonzero_operands((p, x, y) in prime_and_pair()) {
        let m = PrimeModulus::new(p).unwrap();
        if x != 0 && y != 0 {
            prop_assert_ne!(m.mulmod_fp(x as f64, y as f64), 0.0);
            prop_assert_ne!(m.mulmod_int(x, y), 0);
        }
    }

    #[test]
    fn powmod_splits_exponents((p, x, _y) in prime_and_pair(), a in 0u64..200, b in 0u64..200) {
        let m = PrimeModulus::new(p).unwrap();
        let split = m.mulmod_int(m.powmod(x, a), m.powmod(x, b));
        prop_assert_eq!(m.powmod(x, a + b), split);
    }

    #[test]
    fn closure_in_range((p, x, y) in prime_and_pair()) {
        let m = PrimeModulus::new(p).unwrap();
        prop_assert!(m.mulmod_int(x, y) < p);
        prop_assert!(m.addmod_int(x, y) < p);
        prop_assert!((m.mulmod_fp(x as f64, y as f64) as u64) < p);
        prop_assert!((m.addmod_fp(x as f64, y as f64) as u64) < p);
    }
}

#[test]
fn exhaustive_tiny_prime() {
    // Full operand square for one small prime; the acceptance suite covers
    // every prime up to 509.
    let p = 131u64;
    let m = PrimeModulus::new(p).unwrap();
    for x in 0..p {
        for y in 0..p {
            let want_mul = (x * y) % p;
            let want_add = (x + y) % p;
            assert_eq!(m.mulmod_int(x, y), want_mul);
            assert_eq!(m.mulmod_fp(x as f64, y as f64) as u64, want_mul);
            assert_eq!(m.addmod_int(x, y), want_add);
            assert_eq!(m.addmod_fp(x as f64, y as f64) as u64, want_add);
        }
    }
}
