//! Exact modular arithmetic over primes below 2^50 on floating-point FMA
//! kernels, and fast computation of bivariate images of sparse multivariate
//! polynomials.
//!
//! Given `f` in `F_p[x1, .., xn]` and a random point `beta`, the library
//! produces the `T` images `b_t(x1, x2) = f(x1, x2, beta^t)` for `t = 1..=T`
//! by keeping the vector of monomial evaluations fixed and advancing a
//! coefficient vector one Hadamard product per evaluation. Kernels exist at
//! three levels:
//!
//! * [`eval::eval_scalar`] — the scalar reference kernel (integer carrier);
//! * [`eval::eval_simd`] — the vectorized kernel with masked edges around an
//!   aligned body;
//! * [`eval::eval_blocked`] / [`eval::eval_blocked_noalloc`] — blocked
//!   kernels computing several independent and dependent evaluations per
//!   memory pass.
//!
//! The `oracle` module holds slow big-integer reference implementations used
//! by the tests and the `verify` subcommand of the bundled CLI; `io` defines
//! the text formats; `bench` drives microbenchmarks and the tuning sweep.
//!
//! See the `examples/` directory for one runnable walkthrough per major
//! capability.

pub mod bench;
pub mod eval;
pub mod field;
pub mod io;
pub mod oracle;
pub mod simd;

pub use eval::{
    build_power_tables, eval_blocked, eval_blocked_noalloc, eval_scalar, eval_simd,
    evaluate_monomials, precompute_gamma_lambdas, BivariateImage, EvalPlan, ImageEntry,
    MonomialEvals, PowerTables,
};
pub use field::{ModulusError, PrimeModulus, MAX_MODULUS_BITS};
pub use io::{generate, parse_poly, write_images, GenSpec, ImageFormat};
pub use oracle::{naive_evaluate, naive_modmul};
pub use poly::{EvalPoint, SparsePolynomial, Term};
pub use simd::{
    backend_select, Backend, BackendError, BackendKind, BackendRequest, FieldVector, LaneMask,
};

pub mod poly;
