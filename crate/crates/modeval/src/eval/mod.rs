//! The matrix method: precompute monomial evaluations once, then produce
//! `T` bivariate images by repeated Hadamard products of the coefficient
//! vector with the monomial-evaluation vector.
//!
//! Kernels, in increasing sophistication:
//!
//! * [`eval_scalar`] — scalar loop on the integer carrier; the reference.
//! * [`eval_simd`] — vector loop per group, masked head and tail around an
//!   aligned body, tree-shaped lane reduction.
//! * [`eval_blocked`] — `T_i` independent evaluation chains (extra `Lambda`
//!   arrays advanced by the stride vector `Gamma = m^{T_i}`) times `T_d`
//!   dependent rounds per memory pass.
//! * [`eval_blocked_noalloc`] — `T_d` dependent rounds per pass directly on
//!   the working arrays, no extra per-evaluation buffers.
//!
//! All kernels produce identical images; the scalar kernel is the anchor
//! the others are tested against.

mod blocked;
mod scalar;
mod simd_kernel;

pub use blocked::{
    eval_blocked, eval_blocked_noalloc, eval_blocked_noalloc_with_stats, eval_blocked_with_stats,
    precompute_gamma_lambdas, GammaLambdas,
};
pub use scalar::{eval_scalar, eval_scalar_fp, eval_scalar_instrumented};
pub use simd_kernel::eval_simd;

use crate::field::PrimeModulus;
use crate::poly::{EvalPoint, SparsePolynomial};
use crate::simd::Backend;
use thiserror::Error;

/// A run of consecutive terms sharing the same `(d, e)` pair. Runs are
/// precomputed once; they are invariant across evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Group {
    pub d: u32,
    pub e: u32,
    pub start: usize,
    pub len: usize,
}

/// Per-variable tables `[beta_k^0, .., beta_k^{deg_k}]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerTables {
    tables: Vec<Vec<u64>>,
}

impl PowerTables {
    /// Table for the `j`-th evaluated variable (`j = 0` is `x3`).
    #[inline]
    pub fn table(&self, j: usize) -> &[u64] {
        &self.tables[j]
    }

    pub fn num_vars(&self) -> usize {
        self.tables.len()
    }
}

/// The monomial evaluations `m_i = M_i(beta)` paired with the working
/// coefficient vector `a` and the precomputed group index.
///
/// `a` starts as the polynomial coefficients and is advanced in place by
/// [`eval_scalar`]; clone the struct to rerun from a fresh state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialEvals {
    pub(crate) m: Vec<u64>,
    pub(crate) a: Vec<u64>,
    pub(crate) groups: Vec<Group>,
}

impl MonomialEvals {
    #[inline]
    pub fn monomial_values(&self) -> &[u64] {
        &self.m
    }

    #[inline]
    pub fn coefficients(&self) -> &[u64] {
        &self.a
    }

    #[inline]
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    #[inline]
    pub fn num_terms(&self) -> usize {
        self.m.len()
    }

    /// Restores `a` to the polynomial's coefficients.
    pub fn reset(&mut self, f: &SparsePolynomial) {
        assert_eq!(f.num_terms(), self.a.len());
        self.a.copy_from_slice(f.coefficients());
    }
}

/// One coefficient of a bivariate image: `c * x1^d * x2^e` with `c != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageEntry {
    pub d: u32,
    pub e: u32,
    pub c: u64,
}

/// The image `b_t(x1, x2)`, entries in descending `(d, e)` order. Groups
/// whose coefficient reduction sums to zero are omitted, so different `t`
/// may have different supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BivariateImage {
    pub t: u64,
    pub entries: Vec<ImageEntry>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("plan field {field} is {value}, all plan fields must be >= 1")]
    Invalid { field: &'static str, value: usize },
}

/// Tuning triple for [`eval_blocked`]: `t_i` independent chains, `t_d`
/// dependent rounds per pass, inner unroll factor, plus the vector backend.
///
/// Triples whose fields all lie in `{1, 2, 4, 8, 16}` run compile-time
/// specialized kernels; anything else falls back to runtime-generic loops
/// with identical results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalPlan {
    t_i: usize,
    t_d: usize,
    unroll: usize,
    backend: Backend,
}

/// The specialization grid compiled into the blocked kernels.
pub const PLAN_GRID: [usize; 5] = [1, 2, 4, 8, 16];

impl EvalPlan {
    pub fn new(t_i: usize, t_d: usize, unroll: usize, backend: Backend) -> Result<Self, PlanError> {
        for (field, value) in [("T_i", t_i), ("T_d", t_d), ("M", unroll)] {
            if value < 1 {
                return Err(PlanError::Invalid { field, value });
            }
        }
        Ok(EvalPlan {
            t_i,
            t_d,
            unroll,
            backend,
        })
    }

    #[inline]
    pub fn t_i(&self) -> usize {
        self.t_i
    }

    #[inline]
    pub fn t_d(&self) -> usize {
        self.t_d
    }

    #[inline]
    pub fn unroll(&self) -> usize {
        self.unroll
    }

    #[inline]
    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// True when all three fields are on the compiled specialization grid.
    pub fn is_specialized(&self) -> bool {
        PLAN_GRID.contains(&self.t_i) && PLAN_GRID.contains(&self.t_d) && PLAN_GRID.contains(&self.unroll)
    }
}

/// Modular-operation tallies from the instrumented entry points.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounts {
    pub mulmods: u64,
    pub addmods: u64,
}

/// Buffer accounting for the blocked kernels.
///
/// `working` counts the conversion buffers every vector kernel owns (the
/// floating-point images of `a` and `m`); `extra` counts term-sized buffers
/// beyond that, which for [`eval_blocked`] are the `T_i` `Lambda` arrays
/// plus `Gamma`. Output images are not evaluation working memory and are
/// not counted.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct AllocStats {
    pub working_arrays: usize,
    pub working_elements: usize,
    pub extra_arrays: usize,
    pub extra_elements: usize,
}

pub(crate) trait Tally {
    fn mul(&mut self, n: u64);
    fn add(&mut self, n: u64);
}

pub(crate) struct NoTally;

impl Tally for NoTally {
    #[inline(always)]
    fn mul(&mut self, _: u64) {}
    #[inline(always)]
    fn add(&mut self, _: u64) {}
}

impl Tally for OpCounts {
    #[inline(always)]
    fn mul(&mut self, n: u64) {
        self.mulmods += n;
    }
    #[inline(always)]
    fn add(&mut self, n: u64) {
        self.addmods += n;
    }
}

/// Power tables for every evaluated variable: at most `(n-2) * (d-1)`
/// multiplications where `d` is the largest per-variable degree.
pub fn build_power_tables(
    f: &SparsePolynomial,
    beta: &EvalPoint,
    m: &PrimeModulus,
) -> PowerTables {
    build_power_tables_tally(f, beta, m, &mut NoTally)
}

/// As [`build_power_tables`], also reporting the multiplication count.
pub fn build_power_tables_instrumented(
    f: &SparsePolynomial,
    beta: &EvalPoint,
    m: &PrimeModulus,
) -> (PowerTables, OpCounts) {
    let mut counts = OpCounts::default();
    let tables = build_power_tables_tally(f, beta, m, &mut counts);
    (tables, counts)
}

fn build_power_tables_tally<C: Tally>(
    f: &SparsePolynomial,
    beta: &EvalPoint,
    m: &PrimeModulus,
    tally: &mut C,
) -> PowerTables {
    assert_eq!(beta.len(), f.evaluated_vars());
    let mut tables = Vec::with_capacity(f.evaluated_vars());
    for (j, &b) in beta.coordinates().iter().enumerate() {
        let deg = f.evaluated_degree(j) as usize;
        let mut table = Vec::with_capacity(deg + 1);
        table.push(1u64);
        if deg >= 1 {
            table.push(b);
        }
        for _ in 2..=deg {
            let next = m.mulmod_int(*table.last().unwrap(), b);
            tally.mul(1);
            table.push(next);
        }
        tables.push(table);
    }
    PowerTables { tables }
}

/// Evaluates every monomial at `beta` using the power tables (`n-3`
/// multiplications per term) and builds the group index.
pub fn evaluate_monomials(
    f: &SparsePolynomial,
    tables: &PowerTables,
    m: &PrimeModulus,
) -> MonomialEvals {
    evaluate_monomials_tally(f, tables, m, &mut NoTally)
}

/// As [`evaluate_monomials`], also reporting the multiplication count.
pub fn evaluate_monomials_instrumented(
    f: &SparsePolynomial,
    tables: &PowerTables,
    m: &PrimeModulus,
) -> (MonomialEvals, OpCounts) {
    let mut counts = OpCounts::default();
    let me = evaluate_monomials_tally(f, tables, m, &mut counts);
    (me, counts)
}

fn evaluate_monomials_tally<C: Tally>(
    f: &SparsePolynomial,
    tables: &PowerTables,
    m: &PrimeModulus,
    tally: &mut C,
) -> MonomialEvals {
    assert_eq!(tables.num_vars(), f.evaluated_vars());
    let s = f.num_terms();
    let mut mvals = Vec::with_capacity(s);
    for i in 0..s {
        let term = f.term(i);
        let mut factors = term
            .evec
            .iter()
            .enumerate()
            .map(|(j, &exp)| tables.table(j)[exp as usize]);
        let first = factors.next().unwrap_or(1);
        let mi = factors.fold(first, |acc, x| {
            tally.mul(1);
            m.mulmod_int(acc, x)
        });
        mvals.push(mi);
    }

    let mut groups = Vec::new();
    let mut i = 0;
    while i < s {
        let lead = f.term(i);
        let mut len = 1;
        while i + len < s {
            let t = f.term(i + len);
            if t.d != lead.d || t.e != lead.e {
                break;
            }
            len += 1;
        }
        groups.push(Group {
            d: lead.d,
            e: lead.e,
            start: i,
            len,
        });
        i += len;
    }

    MonomialEvals {
        m: mvals,
        a: f.coefficients().to_vec(),
        groups,
    }
}

/// Splits a group span `[start, end)` into a masked head, an aligned body
/// whose first index is a multiple of the lane count, and a masked tail.
#[inline(always)]
pub(crate) fn span_edges(start: usize, end: usize, lanes: usize) -> (usize, usize) {
    let body_start = end.min(start.next_multiple_of(lanes));
    let body_end = body_start.max(end / lanes * lanes);
    (body_start, body_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Term;

    fn poly_and_modulus() -> (SparsePolynomial, PrimeModulus) {
        let m = PrimeModulus::new(7).unwrap();
        // x1*x2*x3^2 + 2*x3 + 5
        let f = SparsePolynomial::from_terms(
            3,
            vec![
                Term {
                    coeff: 1,
                    d: 1,
                    e: 1,
                    evec: vec![2],
                },
                Term {
                    coeff: 2,
                    d: 0,
                    e: 0,
                    evec: vec![1],
                },
                Term {
                    coeff: 5,
                    d: 0,
                    e: 0,
                    evec: vec![0],
                },
            ],
            &m,
        )
        .unwrap();
        (f, m)
    }

    #[test]
    fn power_tables_match_powmod() {
        let (f, m) = poly_and_modulus();
        let beta = EvalPoint::new(vec![2], &m).unwrap();
        let tables = build_power_tables(&f, &beta, &m);
        assert_eq!(tables.table(0), &[1, 2, 4]);
    }

    #[test]
    fn power_table_on_unit_point() {
        let (f, m) = poly_and_modulus();
        let beta = EvalPoint::new(vec![1], &m).unwrap();
        let tables = build_power_tables(&f, &beta, &m);
        assert_eq!(tables.table(0), &[1, 1, 1]);
    }

    #[test]
    fn power_table_cost_bound() {
        let (f, m) = poly_and_modulus();
        let beta = EvalPoint::new(vec![3], &m).unwrap();
        let (_, counts) = build_power_tables_instrumented(&f, &beta, &m);
        let bound = (f.evaluated_vars() as u64) * (f.max_evaluated_degree().saturating_sub(1)) as u64;
        assert!(counts.mulmods <= bound);
    }

    #[test]
    fn monomials_single_term() {
        let m = PrimeModulus::new(7).unwrap();
        let f = SparsePolynomial::from_terms(
            3,
            vec![Term {
                coeff: 1,
                d: 1,
                e: 1,
                evec: vec![2],
            }],
            &m,
        )
        .unwrap();
        let beta = EvalPoint::new(vec![3], &m).unwrap();
        let tables = build_power_tables(&f, &beta, &m);
        let me = evaluate_monomials(&f, &tables, &m);
        assert_eq!(me.monomial_values(), &[2]); // 9 mod 7
    }

    #[test]
    fn monomials_and_groups() {
        let (f, m) = poly_and_modulus();
        let beta = EvalPoint::new(vec![2], &m).unwrap();
        let tables = build_power_tables(&f, &beta, &m);
        let me = evaluate_monomials(&f, &tables, &m);
        assert_eq!(me.monomial_values(), &[4, 2, 1]);
        assert_eq!(me.coefficients(), &[1, 2, 5]);
        assert_eq!(
            me.groups(),
            &[
                Group {
                    d: 1,
                    e: 1,
                    start: 0,
                    len: 1
                },
                Group {
                    d: 0,
                    e: 0,
                    start: 1,
                    len: 2
                },
            ]
        );
        let total: usize = me.groups().iter().map(|g| g.len).sum();
        assert_eq!(total, f.num_terms());
    }

    #[test]
    fn zero_exponent_monomials_are_one() {
        let m = PrimeModulus::new(101).unwrap();
        let f = SparsePolynomial::from_terms(
            5,
            vec![
                Term {
                    coeff: 9,
                    d: 3,
                    e: 0,
                    evec: vec![0, 0, 0],
                },
                Term {
                    coeff: 4,
                    d: 0,
                    e: 1,
                    evec: vec![0, 0, 0],
                },
            ],
            &m,
        )
        .unwrap();
        let beta = EvalPoint::new(vec![55, 31, 90], &m).unwrap();
        let tables = build_power_tables(&f, &beta, &m);
        let me = evaluate_monomials(&f, &tables, &m);
        assert_eq!(me.monomial_values(), &[1, 1]);
    }

    #[test]
    fn monomial_cost_is_n_minus_3_per_term() {
        let m = PrimeModulus::new(1009).unwrap();
        let f = SparsePolynomial::from_terms(
            6,
            vec![
                Term {
                    coeff: 1,
                    d: 0,
                    e: 0,
                    evec: vec![1, 2, 3, 4],
                },
                Term {
                    coeff: 2,
                    d: 1,
                    e: 0,
                    evec: vec![4, 3, 2, 1],
                },
            ],
            &m,
        )
        .unwrap();
        let beta = EvalPoint::new(vec![2, 3, 5, 7], &m).unwrap();
        let tables = build_power_tables(&f, &beta, &m);
        let (me, counts) = evaluate_monomials_instrumented(&f, &tables, &m);
        assert_eq!(counts.mulmods, (f.n() as u64 - 3) * f.num_terms() as u64);
        // Independent check of the products themselves.
        for (i, &mi) in me.monomial_values().iter().enumerate() {
            let term = f.term(i);
            let mut want = 1u64;
            for (j, &exp) in term.evec.iter().enumerate() {
                want = m.mulmod_int(want, m.powmod(beta.coordinates()[j], exp as u64));
            }
            assert_eq!(mi, want);
        }
    }

    #[test]
    fn span_edges_cases() {
        // aligned start, ragged end
        assert_eq!(span_edges(0, 19, 8), (0, 16));
        // ragged start within one block
        assert_eq!(span_edges(3, 6, 8), (6, 6));
        // ragged start crossing a boundary
        assert_eq!(span_edges(5, 21, 8), (8, 16));
        // exactly one aligned block
        assert_eq!(span_edges(8, 16, 8), (8, 16));
        // empty-body crossing
        assert_eq!(span_edges(7, 9, 8), (8, 8));
    }

    #[test]
    fn plan_validation() {
        let b = Backend::portable();
        assert!(EvalPlan::new(1, 1, 1, b).is_ok());
        assert_eq!(
            EvalPlan::new(0, 1, 1, b).unwrap_err(),
            PlanError::Invalid {
                field: "T_i",
                value: 0
            }
        );
        assert!(EvalPlan::new(8, 16, 4, b).unwrap().is_specialized());
        assert!(!EvalPlan::new(3, 2, 1, b).unwrap().is_specialized());
    }
}
