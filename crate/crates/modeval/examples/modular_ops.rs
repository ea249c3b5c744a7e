//! Scalar modular arithmetic on both carriers.
//!
//! ```bash
//! cargo run --release -p modeval --example modular_ops
//! ```

use modeval::PrimeModulus;

fn main() {
    // A 50-bit prime: the largest width the floating-point kernels accept.
    let m = PrimeModulus::new(1125899906842597).unwrap();
    println!("p         = {}", m.p());
    println!("1/p (f64) = {:e}", m.u_fp());

    let (x, y) = (481988869427563u64, 997015461604823u64);
    let int = m.mulmod_int(x, y);
    let fp = m.mulmod_fp(x as f64, y as f64);
    println!("\n{x} * {y} mod p");
    println!("  integer carrier : {int}");
    println!("  float carrier   : {}", fp as u64);
    assert_eq!(int, fp as u64);

    let wrap = m.addmod_fp((m.p() - 1) as f64, 1.0);
    println!("\n(p-1) + 1 mod p = {wrap} (sign bit clear: {})", !wrap.is_sign_negative());

    println!("\n3^1000 mod p = {}", m.powmod(3, 1000));

    // The interpolation advisory: with too many terms for the modulus,
    // monomial evaluations may collide.
    for s in [1_000u64, 100_000_000] {
        println!(
            "p > 100*s^2 for s = {s}: {}",
            m.check_interpolation_bound(s)
        );
    }

    // Out-of-range moduli are rejected.
    println!("\n2^50 as modulus: {:?}", PrimeModulus::new(1 << 50));
    println!("561 as modulus:  {:?}", PrimeModulus::new(561));
}
