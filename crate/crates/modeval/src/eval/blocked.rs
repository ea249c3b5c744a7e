//! Blocked compute kernels: several independent evaluation chains advanced
//! together, each carrying several dependent rounds per memory pass.
//!
//! For a plan `(T_i, T_d, M)` the kernel keeps `T_i` copies of the
//! coefficient vector (`Lambda_k = a o m^(k+1)`) and the stride vector
//! `Gamma = m^(T_i)`. One pass over the term arrays then produces
//! `T_i * T_d` images: for every vector chunk, each of the `T_d` rounds
//! folds every `Lambda_k` chunk into its accumulator and advances it by
//! `Gamma`. The dependent loop is outermost, the independent one innermost,
//! and the chunk loop of the aligned body is unrolled by `M`.
//!
//! Leftover evaluations (`T mod (T_i * T_d) = T_i * N'_d + N''_d`) run as
//! one block of `T_i * N'_d`, then the final `N''_d` images are read off
//! the already-advanced leading `Lambda` vectors with no trailing Hadamard
//! product.
//!
//! Plans on the `{1, 2, 4, 8, 16}` grid run monomorphized kernels with
//! compile-time trip counts; other plans use the runtime-generic loops.

use super::{
    span_edges, AllocStats, BivariateImage, EvalPlan, Group, ImageEntry, MonomialEvals, PlanError,
};
use crate::field::PrimeModulus;
use crate::simd::{AlignedBuf, Backend, BackendKind, Portable, VOps};

#[cfg(target_arch = "x86_64")]
use crate::simd::{V4, V8};

/// Output of [`precompute_gamma_lambdas`]: the stride vector, the `T_i`
/// advanced coefficient vectors, and the buffer accounting.
#[derive(Debug)]
pub struct GammaLambdas {
    pub gamma: AlignedBuf,
    pub lambdas: Vec<AlignedBuf>,
    pub stats: AllocStats,
}

/// Precomputes `Gamma[i] = m_i^t_i` and `Lambda_k[i] = a_i * m_i^(k+1)` for
/// `k < t_i` on the floating-point carrier.
///
/// Exactly `t_i` term-sized buffers plus `Gamma` are allocated (reported in
/// the returned stats), alongside one working conversion of `m`. `Gamma` is
/// raised by left-to-right binary exponentiation so no scratch buffer is
/// needed.
pub fn precompute_gamma_lambdas(
    me: &MonomialEvals,
    pm: &PrimeModulus,
    t_i: usize,
    backend: Backend,
) -> Result<GammaLambdas, PlanError> {
    if t_i < 1 {
        return Err(PlanError::Invalid {
            field: "T_i",
            value: t_i,
        });
    }
    let s = me.num_terms();
    let mut stats = AllocStats::default();
    let m_fp = AlignedBuf::from_u64s(&me.m);
    stats.working_arrays += 1;
    stats.working_elements += s;

    let mut gamma = AlignedBuf::from_f64s(&m_fp);
    stats.extra_arrays += 1;
    stats.extra_elements += s;
    let bits = usize::BITS - t_i.leading_zeros();
    for i in (0..bits - 1).rev() {
        array_square(backend, &mut gamma, pm);
        if (t_i >> i) & 1 == 1 {
            array_mul_assign(backend, &mut gamma, &m_fp, pm);
        }
    }

    let mut lambdas = Vec::with_capacity(t_i);
    let mut first = AlignedBuf::from_u64s(&me.a);
    stats.extra_arrays += 1;
    stats.extra_elements += s;
    array_mul_assign(backend, &mut first, &m_fp, pm);
    lambdas.push(first);
    for k in 1..t_i {
        let mut next = lambdas[k - 1].clone();
        stats.extra_arrays += 1;
        stats.extra_elements += s;
        array_mul_assign(backend, &mut next, &m_fp, pm);
        lambdas.push(next);
    }

    Ok(GammaLambdas {
        gamma,
        lambdas,
        stats,
    })
}

/// The blocked kernel. Images are identical to [`super::eval_scalar`].
pub fn eval_blocked(
    me: &MonomialEvals,
    pm: &PrimeModulus,
    t_count: u64,
    plan: &EvalPlan,
) -> Vec<BivariateImage> {
    eval_blocked_with_stats(me, pm, t_count, plan).0
}

/// As [`eval_blocked`], also reporting buffer accounting: the extra
/// term-sized buffers are exactly the `T_i` `Lambda` vectors plus `Gamma`.
pub fn eval_blocked_with_stats(
    me: &MonomialEvals,
    pm: &PrimeModulus,
    t_count: u64,
    plan: &EvalPlan,
) -> (Vec<BivariateImage>, AllocStats) {
    let backend = plan.backend();
    let gl = precompute_gamma_lambdas(me, pm, plan.t_i(), backend)
        .expect("plan fields are validated at construction");
    let stats = gl.stats;
    let mut lambdas = gl.lambdas;
    let gamma = gl.gamma;

    let ti = plan.t_i();
    let td = plan.t_d();
    let total = t_count as usize;
    let mut out: Vec<Vec<ImageEntry>> = vec![Vec::new(); total];
    let lambda_ptrs: Vec<*mut f64> = lambdas
        .iter_mut()
        .map(|b| b.as_mut_slice().as_mut_ptr())
        .collect();
    let gamma_ptr = gamma.as_slice().as_ptr();
    let groups = me.groups();

    let block = ti * td;
    let mut t0 = 1usize;
    while t0 + block - 1 <= total {
        let slice = &mut out[t0 - 1..t0 - 1 + block];
        if plan.is_specialized() {
            dispatch_full(
                backend,
                ti,
                td,
                plan.unroll(),
                groups,
                &lambda_ptrs,
                gamma_ptr,
                pm,
                slice,
            );
        } else {
            dispatch_generic(
                backend,
                groups,
                &lambda_ptrs,
                gamma_ptr,
                pm,
                td,
                ti,
                true,
                slice,
            );
        }
        t0 += block;
    }

    let rem = total + 1 - t0;
    if rem > 0 {
        let full_rounds = rem / ti;
        let tail = rem % ti;
        if full_rounds > 0 {
            let slice = &mut out[t0 - 1..t0 - 1 + ti * full_rounds];
            dispatch_generic(
                backend,
                groups,
                &lambda_ptrs,
                gamma_ptr,
                pm,
                full_rounds,
                ti,
                true,
                slice,
            );
            t0 += ti * full_rounds;
        }
        if tail > 0 {
            // The leading `tail` Lambda vectors already hold the final
            // states; read them off without advancing.
            let slice = &mut out[t0 - 1..t0 - 1 + tail];
            dispatch_generic(
                backend,
                groups,
                &lambda_ptrs[..tail],
                gamma_ptr,
                pm,
                1,
                tail,
                false,
                slice,
            );
        }
    }

    let images = out
        .into_iter()
        .zip(1u64..)
        .map(|(entries, t)| BivariateImage { t, entries })
        .collect();
    (images, stats)
}

/// The dependent-only kernel: `t_d` rounds per pass chained directly
/// through the working coefficient array, no `Lambda` or `Gamma` buffers.
pub fn eval_blocked_noalloc(
    me: &MonomialEvals,
    pm: &PrimeModulus,
    t_count: u64,
    t_d: usize,
    unroll: usize,
    backend: Backend,
) -> Result<Vec<BivariateImage>, PlanError> {
    eval_blocked_noalloc_with_stats(me, pm, t_count, t_d, unroll, backend).map(|(im, _)| im)
}

/// As [`eval_blocked_noalloc`], also reporting buffer accounting: zero
/// extra term-sized buffers beyond the two working conversions.
pub fn eval_blocked_noalloc_with_stats(
    me: &MonomialEvals,
    pm: &PrimeModulus,
    t_count: u64,
    t_d: usize,
    unroll: usize,
    backend: Backend,
) -> Result<(Vec<BivariateImage>, AllocStats), PlanError> {
    for (field, value) in [("T_d", t_d), ("M", unroll)] {
        if value < 1 {
            return Err(PlanError::Invalid { field, value });
        }
    }
    let s = me.num_terms();
    let mut stats = AllocStats::default();
    let mut a = AlignedBuf::from_u64s(&me.a);
    let mv = AlignedBuf::from_u64s(&me.m);
    stats.working_arrays += 2;
    stats.working_elements += 2 * s;

    let total = t_count as usize;
    let mut out: Vec<Vec<ImageEntry>> = vec![Vec::new(); total];
    let groups = me.groups();
    let ap = a.as_mut_slice().as_mut_ptr();
    let mp = mv.as_slice().as_ptr();
    let specialized =
        super::PLAN_GRID.contains(&t_d) && super::PLAN_GRID.contains(&unroll);

    let mut t0 = 1usize;
    while t0 + t_d - 1 <= total {
        let slice = &mut out[t0 - 1..t0 - 1 + t_d];
        if specialized {
            dispatch_noalloc(backend, t_d, unroll, groups, ap, mp, pm, slice);
        } else {
            dispatch_noalloc_generic(backend, groups, ap, mp, pm, t_d, slice);
        }
        t0 += t_d;
    }
    let rem = total + 1 - t0;
    if rem > 0 {
        let slice = &mut out[t0 - 1..t0 - 1 + rem];
        dispatch_noalloc_generic(backend, groups, ap, mp, pm, rem, slice);
    }

    let images = out
        .into_iter()
        .zip(1u64..)
        .map(|(entries, t)| BivariateImage { t, entries })
        .collect();
    Ok((images, stats))
}

// ---------------------------------------------------------------------------
// Element-wise array operations used by the precomputation.

fn array_mul_assign(backend: Backend, dst: &mut AlignedBuf, src: &AlignedBuf, pm: &PrimeModulus) {
    assert_eq!(dst.len(), src.len());
    match backend.kind() {
        BackendKind::Portable => unsafe { array_mul_impl::<Portable>(dst, src, pm) },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V4 => unsafe { array_mul_v4(dst, src, pm) },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V8 => unsafe { array_mul_v8(dst, src, pm) },
        #[cfg(not(target_arch = "x86_64"))]
        _ => unreachable!("hardware backends cannot be selected on this arch"),
    }
}

fn array_square(backend: Backend, dst: &mut AlignedBuf, pm: &PrimeModulus) {
    match backend.kind() {
        BackendKind::Portable => unsafe { array_square_impl::<Portable>(dst, pm) },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V4 => unsafe { array_square_v4(dst, pm) },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V8 => unsafe { array_square_v8(dst, pm) },
        #[cfg(not(target_arch = "x86_64"))]
        _ => unreachable!("hardware backends cannot be selected on this arch"),
    }
}

#[inline(always)]
unsafe fn array_mul_impl<B: VOps>(dst: &mut [f64], src: &[f64], pm: &PrimeModulus) {
    let v = B::LANES;
    let p = B::splat(pm.p_fp());
    let u = B::splat(pm.u_fp());
    let n = dst.len();
    let main = n / v * v;
    let dp = dst.as_mut_ptr();
    let sp = src.as_ptr();
    let mut j = 0;
    while j < main {
        let r = B::mulmod(B::loada(dp.add(j)), B::loada(sp.add(j)), p, u);
        B::storea(dp.add(j), r);
        j += v;
    }
    if n > main {
        let k = n - main;
        let r = B::mulmod(
            B::load_first(dp.add(main), k),
            B::load_first(sp.add(main), k),
            p,
            u,
        );
        B::store_first(dp.add(main), r, k);
    }
}

#[inline(always)]
unsafe fn array_square_impl<B: VOps>(dst: &mut [f64], pm: &PrimeModulus) {
    let v = B::LANES;
    let p = B::splat(pm.p_fp());
    let u = B::splat(pm.u_fp());
    let n = dst.len();
    let main = n / v * v;
    let dp = dst.as_mut_ptr();
    let mut j = 0;
    while j < main {
        let x = B::loada(dp.add(j));
        B::storea(dp.add(j), B::mulmod(x, x, p, u));
        j += v;
    }
    if n > main {
        let k = n - main;
        let x = B::load_first(dp.add(main), k);
        B::store_first(dp.add(main), B::mulmod(x, x, p, u), k);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn array_mul_v4(dst: &mut [f64], src: &[f64], pm: &PrimeModulus) {
    array_mul_impl::<V4>(dst, src, pm)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn array_mul_v8(dst: &mut [f64], src: &[f64], pm: &PrimeModulus) {
    array_mul_impl::<V8>(dst, src, pm)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn array_square_v4(dst: &mut [f64], pm: &PrimeModulus) {
    array_square_impl::<V4>(dst, pm)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn array_square_v8(dst: &mut [f64], pm: &PrimeModulus) {
    array_square_impl::<V8>(dst, pm)
}

// ---------------------------------------------------------------------------
// Runtime-generic block kernel.

#[allow(clippy::too_many_arguments)]
fn dispatch_generic(
    backend: Backend,
    groups: &[Group],
    lambda_ptrs: &[*mut f64],
    gamma: *const f64,
    pm: &PrimeModulus,
    rounds: usize,
    stride: usize,
    advance_last: bool,
    out: &mut [Vec<ImageEntry>],
) {
    match backend.kind() {
        BackendKind::Portable => unsafe {
            block_generic::<Portable>(groups, lambda_ptrs, gamma, pm, rounds, stride, advance_last, out)
        },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V4 => unsafe {
            generic_v4(groups, lambda_ptrs, gamma, pm, rounds, stride, advance_last, out)
        },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V8 => unsafe {
            generic_v8(groups, lambda_ptrs, gamma, pm, rounds, stride, advance_last, out)
        },
        #[cfg(not(target_arch = "x86_64"))]
        _ => unreachable!("hardware backends cannot be selected on this arch"),
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
#[allow(clippy::too_many_arguments)]
unsafe fn generic_v4(
    groups: &[Group],
    lambda_ptrs: &[*mut f64],
    gamma: *const f64,
    pm: &PrimeModulus,
    rounds: usize,
    stride: usize,
    advance_last: bool,
    out: &mut [Vec<ImageEntry>],
) {
    block_generic::<V4>(groups, lambda_ptrs, gamma, pm, rounds, stride, advance_last, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
#[allow(clippy::too_many_arguments)]
unsafe fn generic_v8(
    groups: &[Group],
    lambda_ptrs: &[*mut f64],
    gamma: *const f64,
    pm: &PrimeModulus,
    rounds: usize,
    stride: usize,
    advance_last: bool,
    out: &mut [Vec<ImageEntry>],
) {
    block_generic::<V8>(groups, lambda_ptrs, gamma, pm, rounds, stride, advance_last, out)
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
unsafe fn block_generic<B: VOps>(
    groups: &[Group],
    lambda_ptrs: &[*mut f64],
    gamma: *const f64,
    pm: &PrimeModulus,
    rounds: usize,
    stride: usize,
    advance_last: bool,
    out: &mut [Vec<ImageEntry>],
) {
    let v = B::LANES;
    let ti = lambda_ptrs.len();
    let p = B::splat(pm.p_fp());
    let u = B::splat(pm.u_fp());
    let mut acc: Vec<B::Reg> = vec![B::zero(); ti * rounds];
    let mut lam: Vec<B::Reg> = vec![B::zero(); ti];

    for g in groups {
        for r in acc.iter_mut() {
            *r = B::zero();
        }
        let start = g.start;
        let end = g.start + g.len;
        let (body_start, body_end) = span_edges(start, end, v);

        if body_start > start {
            let k = body_start - start;
            let gam = B::load_first(gamma.add(start), k);
            for (ki, &lp) in lambda_ptrs.iter().enumerate() {
                lam[ki] = B::load_first(lp.add(start), k);
            }
            generic_chunk::<B>(&mut acc, &mut lam, gam, p, u, ti, rounds, advance_last);
            for (ki, &lp) in lambda_ptrs.iter().enumerate() {
                B::store_first(lp.add(start), lam[ki], k);
            }
        }

        let mut j = body_start;
        while j < body_end {
            let gam = B::loada(gamma.add(j));
            for (ki, &lp) in lambda_ptrs.iter().enumerate() {
                lam[ki] = B::loada(lp.add(j));
            }
            generic_chunk::<B>(&mut acc, &mut lam, gam, p, u, ti, rounds, advance_last);
            for (ki, &lp) in lambda_ptrs.iter().enumerate() {
                B::storea(lp.add(j), lam[ki]);
            }
            j += v;
        }

        if end > body_end {
            let k = end - body_end;
            let gam = B::load_first(gamma.add(body_end), k);
            for (ki, &lp) in lambda_ptrs.iter().enumerate() {
                lam[ki] = B::load_first(lp.add(body_end), k);
            }
            generic_chunk::<B>(&mut acc, &mut lam, gam, p, u, ti, rounds, advance_last);
            for (ki, &lp) in lambda_ptrs.iter().enumerate() {
                B::store_first(lp.add(body_end), lam[ki], k);
            }
        }

        for kd in 0..rounds {
            for ki in 0..ti {
                let c = B::reduce_addmod(acc[kd * ti + ki], p);
                if c != 0.0 {
                    out[ki + kd * stride].push(ImageEntry {
                        d: g.d,
                        e: g.e,
                        c: c as u64,
                    });
                }
            }
        }
    }
}

#[inline(always)]
#[allow(clippy::too_many_arguments)]
unsafe fn generic_chunk<B: VOps>(
    acc: &mut [B::Reg],
    lam: &mut [B::Reg],
    gam: B::Reg,
    p: B::Reg,
    u: B::Reg,
    ti: usize,
    rounds: usize,
    advance_last: bool,
) {
    for kd in 0..rounds {
        let advance = advance_last || kd + 1 < rounds;
        for ki in 0..ti {
            acc[kd * ti + ki] = B::addmod(acc[kd * ti + ki], lam[ki], p);
            if advance {
                lam[ki] = B::mulmod(lam[ki], gam, p, u);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Compile-time specialized full-block kernel.

macro_rules! dispatch_full_m {
    ($shell:ident, $TI:literal, $TD:literal, ($($args:expr),*), $mu:expr) => {
        match $mu {
            1 => unsafe { $shell::<$TI, $TD, 1>($($args),*) },
            2 => unsafe { $shell::<$TI, $TD, 2>($($args),*) },
            4 => unsafe { $shell::<$TI, $TD, 4>($($args),*) },
            8 => unsafe { $shell::<$TI, $TD, 8>($($args),*) },
            16 => unsafe { $shell::<$TI, $TD, 16>($($args),*) },
            _ => unreachable!("off-grid plans take the generic path"),
        }
    };
}

macro_rules! dispatch_full_td {
    ($shell:ident, $TI:literal, ($($args:expr),*), $td:expr, $mu:expr) => {
        match $td {
            1 => dispatch_full_m!($shell, $TI, 1, ($($args),*), $mu),
            2 => dispatch_full_m!($shell, $TI, 2, ($($args),*), $mu),
            4 => dispatch_full_m!($shell, $TI, 4, ($($args),*), $mu),
            8 => dispatch_full_m!($shell, $TI, 8, ($($args),*), $mu),
            16 => dispatch_full_m!($shell, $TI, 16, ($($args),*), $mu),
            _ => unreachable!("off-grid plans take the generic path"),
        }
    };
}

macro_rules! dispatch_full_ti {
    ($shell:ident, ($($args:expr),*), $ti:expr, $td:expr, $mu:expr) => {
        match $ti {
            1 => dispatch_full_td!($shell, 1, ($($args),*), $td, $mu),
            2 => dispatch_full_td!($shell, 2, ($($args),*), $td, $mu),
            4 => dispatch_full_td!($shell, 4, ($($args),*), $td, $mu),
            8 => dispatch_full_td!($shell, 8, ($($args),*), $td, $mu),
            16 => dispatch_full_td!($shell, 16, ($($args),*), $td, $mu),
            _ => unreachable!("off-grid plans take the generic path"),
        }
    };
}

#[allow(clippy::too_many_arguments)]
fn dispatch_full(
    backend: Backend,
    ti: usize,
    td: usize,
    mu: usize,
    groups: &[Group],
    lambda_ptrs: &[*mut f64],
    gamma: *const f64,
    pm: &PrimeModulus,
    out: &mut [Vec<ImageEntry>],
) {
    match backend.kind() {
        BackendKind::Portable => {
            dispatch_full_ti!(full_portable, (groups, lambda_ptrs, gamma, pm, out), ti, td, mu)
        }
        #[cfg(target_arch = "x86_64")]
        BackendKind::V4 => {
            dispatch_full_ti!(full_v4, (groups, lambda_ptrs, gamma, pm, out), ti, td, mu)
        }
        #[cfg(target_arch = "x86_64")]
        BackendKind::V8 => {
            dispatch_full_ti!(full_v8, (groups, lambda_ptrs, gamma, pm, out), ti, td, mu)
        }
        #[cfg(not(target_arch = "x86_64"))]
        _ => unreachable!("hardware backends cannot be selected on this arch"),
    }
}

unsafe fn full_portable<const TI: usize, const TD: usize, const M: usize>(
    groups: &[Group],
    lambda_ptrs: &[*mut f64],
    gamma: *const f64,
    pm: &PrimeModulus,
    out: &mut [Vec<ImageEntry>],
) {
    block_full::<Portable, TI, TD, M>(groups, lambda_ptrs, gamma, pm, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn full_v4<const TI: usize, const TD: usize, const M: usize>(
    groups: &[Group],
    lambda_ptrs: &[*mut f64],
    gamma: *const f64,
    pm: &PrimeModulus,
    out: &mut [Vec<ImageEntry>],
) {
    block_full::<V4, TI, TD, M>(groups, lambda_ptrs, gamma, pm, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn full_v8<const TI: usize, const TD: usize, const M: usize>(
    groups: &[Group],
    lambda_ptrs: &[*mut f64],
    gamma: *const f64,
    pm: &PrimeModulus,
    out: &mut [Vec<ImageEntry>],
) {
    block_full::<V8, TI, TD, M>(groups, lambda_ptrs, gamma, pm, out)
}

#[inline(always)]
unsafe fn block_full<B: VOps, const TI: usize, const TD: usize, const M: usize>(
    groups: &[Group],
    lambda_ptrs: &[*mut f64],
    gamma: *const f64,
    pm: &PrimeModulus,
    out: &mut [Vec<ImageEntry>],
) {
    let v = B::LANES;
    let p = B::splat(pm.p_fp());
    let u = B::splat(pm.u_fp());
    debug_assert_eq!(lambda_ptrs.len(), TI);
    debug_assert_eq!(out.len(), TI * TD);

    for g in groups {
        let mut acc = [[B::zero(); TI]; TD];
        let start = g.start;
        let end = g.start + g.len;
        let (body_start, body_end) = span_edges(start, end, v);

        if body_start > start {
            let k = body_start - start;
            let gam = B::load_first(gamma.add(start), k);
            let mut lam = [B::zero(); TI];
            for ki in 0..TI {
                lam[ki] = B::load_first(lambda_ptrs[ki].add(start), k);
            }
            full_chunk::<B, TI, TD>(&mut acc, &mut lam, gam, p, u);
            for ki in 0..TI {
                B::store_first(lambda_ptrs[ki].add(start), lam[ki], k);
            }
        }

        let mut j = body_start;
        while j + M * v <= body_end {
            let mut gams = [B::zero(); M];
            let mut lams = [[B::zero(); TI]; M];
            for mm in 0..M {
                gams[mm] = B::loada(gamma.add(j + mm * v));
                for ki in 0..TI {
                    lams[mm][ki] = B::loada(lambda_ptrs[ki].add(j + mm * v));
                }
            }
            for kd in 0..TD {
                for ki in 0..TI {
                    for mm in 0..M {
                        acc[kd][ki] = B::addmod(acc[kd][ki], lams[mm][ki], p);
                        lams[mm][ki] = B::mulmod(lams[mm][ki], gams[mm], p, u);
                    }
                }
            }
            for mm in 0..M {
                for ki in 0..TI {
                    B::storea(lambda_ptrs[ki].add(j + mm * v), lams[mm][ki]);
                }
            }
            j += M * v;
        }
        while j < body_end {
            let gam = B::loada(gamma.add(j));
            let mut lam = [B::zero(); TI];
            for ki in 0..TI {
                lam[ki] = B::loada(lambda_ptrs[ki].add(j));
            }
            full_chunk::<B, TI, TD>(&mut acc, &mut lam, gam, p, u);
            for ki in 0..TI {
                B::storea(lambda_ptrs[ki].add(j), lam[ki]);
            }
            j += v;
        }

        if end > body_end {
            let k = end - body_end;
            let gam = B::load_first(gamma.add(body_end), k);
            let mut lam = [B::zero(); TI];
            for ki in 0..TI {
                lam[ki] = B::load_first(lambda_ptrs[ki].add(body_end), k);
            }
            full_chunk::<B, TI, TD>(&mut acc, &mut lam, gam, p, u);
            for ki in 0..TI {
                B::store_first(lambda_ptrs[ki].add(body_end), lam[ki], k);
            }
        }

        for (kd, row) in acc.iter().enumerate() {
            for (ki, &r) in row.iter().enumerate() {
                let c = B::reduce_addmod(r, p);
                if c != 0.0 {
                    out[ki + kd * TI].push(ImageEntry {
                        d: g.d,
                        e: g.e,
                        c: c as u64,
                    });
                }
            }
        }
    }
}

#[inline(always)]
unsafe fn full_chunk<B: VOps, const TI: usize, const TD: usize>(
    acc: &mut [[B::Reg; TI]; TD],
    lam: &mut [B::Reg; TI],
    gam: B::Reg,
    p: B::Reg,
    u: B::Reg,
) {
    for kd in 0..TD {
        for ki in 0..TI {
            acc[kd][ki] = B::addmod(acc[kd][ki], lam[ki], p);
            lam[ki] = B::mulmod(lam[ki], gam, p, u);
        }
    }
}

// ---------------------------------------------------------------------------
// Dependent-only kernel (no extra buffers).

macro_rules! dispatch_noalloc_m {
    ($shell:ident, $TD:literal, ($($args:expr),*), $mu:expr) => {
        match $mu {
            1 => unsafe { $shell::<$TD, 1>($($args),*) },
            2 => unsafe { $shell::<$TD, 2>($($args),*) },
            4 => unsafe { $shell::<$TD, 4>($($args),*) },
            8 => unsafe { $shell::<$TD, 8>($($args),*) },
            16 => unsafe { $shell::<$TD, 16>($($args),*) },
            _ => unreachable!("off-grid plans take the generic path"),
        }
    };
}

macro_rules! dispatch_noalloc_td {
    ($shell:ident, ($($args:expr),*), $td:expr, $mu:expr) => {
        match $td {
            1 => dispatch_noalloc_m!($shell, 1, ($($args),*), $mu),
            2 => dispatch_noalloc_m!($shell, 2, ($($args),*), $mu),
            4 => dispatch_noalloc_m!($shell, 4, ($($args),*), $mu),
            8 => dispatch_noalloc_m!($shell, 8, ($($args),*), $mu),
            16 => dispatch_noalloc_m!($shell, 16, ($($args),*), $mu),
            _ => unreachable!("off-grid plans take the generic path"),
        }
    };
}

#[allow(clippy::too_many_arguments)]
fn dispatch_noalloc(
    backend: Backend,
    td: usize,
    mu: usize,
    groups: &[Group],
    a: *mut f64,
    mv: *const f64,
    pm: &PrimeModulus,
    out: &mut [Vec<ImageEntry>],
) {
    match backend.kind() {
        BackendKind::Portable => {
            dispatch_noalloc_td!(noalloc_portable, (groups, a, mv, pm, out), td, mu)
        }
        #[cfg(target_arch = "x86_64")]
        BackendKind::V4 => dispatch_noalloc_td!(noalloc_v4, (groups, a, mv, pm, out), td, mu),
        #[cfg(target_arch = "x86_64")]
        BackendKind::V8 => dispatch_noalloc_td!(noalloc_v8, (groups, a, mv, pm, out), td, mu),
        #[cfg(not(target_arch = "x86_64"))]
        _ => unreachable!("hardware backends cannot be selected on this arch"),
    }
}

fn dispatch_noalloc_generic(
    backend: Backend,
    groups: &[Group],
    a: *mut f64,
    mv: *const f64,
    pm: &PrimeModulus,
    rounds: usize,
    out: &mut [Vec<ImageEntry>],
) {
    match backend.kind() {
        BackendKind::Portable => unsafe {
            noalloc_generic::<Portable>(groups, a, mv, pm, rounds, out)
        },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V4 => unsafe { noalloc_generic_v4(groups, a, mv, pm, rounds, out) },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V8 => unsafe { noalloc_generic_v8(groups, a, mv, pm, rounds, out) },
        #[cfg(not(target_arch = "x86_64"))]
        _ => unreachable!("hardware backends cannot be selected on this arch"),
    }
}

unsafe fn noalloc_portable<const TD: usize, const M: usize>(
    groups: &[Group],
    a: *mut f64,
    mv: *const f64,
    pm: &PrimeModulus,
    out: &mut [Vec<ImageEntry>],
) {
    noalloc_full::<Portable, TD, M>(groups, a, mv, pm, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn noalloc_v4<const TD: usize, const M: usize>(
    groups: &[Group],
    a: *mut f64,
    mv: *const f64,
    pm: &PrimeModulus,
    out: &mut [Vec<ImageEntry>],
) {
    noalloc_full::<V4, TD, M>(groups, a, mv, pm, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn noalloc_v8<const TD: usize, const M: usize>(
    groups: &[Group],
    a: *mut f64,
    mv: *const f64,
    pm: &PrimeModulus,
    out: &mut [Vec<ImageEntry>],
) {
    noalloc_full::<V8, TD, M>(groups, a, mv, pm, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn noalloc_generic_v4(
    groups: &[Group],
    a: *mut f64,
    mv: *const f64,
    pm: &PrimeModulus,
    rounds: usize,
    out: &mut [Vec<ImageEntry>],
) {
    noalloc_generic::<V4>(groups, a, mv, pm, rounds, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn noalloc_generic_v8(
    groups: &[Group],
    a: *mut f64,
    mv: *const f64,
    pm: &PrimeModulus,
    rounds: usize,
    out: &mut [Vec<ImageEntry>],
) {
    noalloc_generic::<V8>(groups, a, mv, pm, rounds, out)
}

#[inline(always)]
unsafe fn noalloc_full<B: VOps, const TD: usize, const M: usize>(
    groups: &[Group],
    a: *mut f64,
    mv: *const f64,
    pm: &PrimeModulus,
    out: &mut [Vec<ImageEntry>],
) {
    let v = B::LANES;
    let p = B::splat(pm.p_fp());
    let u = B::splat(pm.u_fp());
    debug_assert_eq!(out.len(), TD);

    for g in groups {
        let mut acc = [B::zero(); TD];
        let start = g.start;
        let end = g.start + g.len;
        let (body_start, body_end) = span_edges(start, end, v);

        if body_start > start {
            let k = body_start - start;
            let mut av = B::load_first(a.add(start), k);
            let mr = B::load_first(mv.add(start), k);
            for item in acc.iter_mut() {
                av = B::mulmod(av, mr, p, u);
                *item = B::addmod(*item, av, p);
            }
            B::store_first(a.add(start), av, k);
        }

        let mut j = body_start;
        while j + M * v <= body_end {
            let mut avs = [B::zero(); M];
            let mut mrs = [B::zero(); M];
            for mm in 0..M {
                avs[mm] = B::loada(a.add(j + mm * v));
                mrs[mm] = B::loada(mv.add(j + mm * v));
            }
            for item in acc.iter_mut() {
                for mm in 0..M {
                    avs[mm] = B::mulmod(avs[mm], mrs[mm], p, u);
                    *item = B::addmod(*item, avs[mm], p);
                }
            }
            for mm in 0..M {
                B::storea(a.add(j + mm * v), avs[mm]);
            }
            j += M * v;
        }
        while j < body_end {
            let mut av = B::loada(a.add(j));
            let mr = B::loada(mv.add(j));
            for item in acc.iter_mut() {
                av = B::mulmod(av, mr, p, u);
                *item = B::addmod(*item, av, p);
            }
            B::storea(a.add(j), av);
            j += v;
        }

        if end > body_end {
            let k = end - body_end;
            let mut av = B::load_first(a.add(body_end), k);
            let mr = B::load_first(mv.add(body_end), k);
            for item in acc.iter_mut() {
                av = B::mulmod(av, mr, p, u);
                *item = B::addmod(*item, av, p);
            }
            B::store_first(a.add(body_end), av, k);
        }

        for (kd, &r) in acc.iter().enumerate() {
            let c = B::reduce_addmod(r, p);
            if c != 0.0 {
                out[kd].push(ImageEntry {
                    d: g.d,
                    e: g.e,
                    c: c as u64,
                });
            }
        }
    }
}

#[inline(always)]
unsafe fn noalloc_generic<B: VOps>(
    groups: &[Group],
    a: *mut f64,
    mv: *const f64,
    pm: &PrimeModulus,
    rounds: usize,
    out: &mut [Vec<ImageEntry>],
) {
    let v = B::LANES;
    let p = B::splat(pm.p_fp());
    let u = B::splat(pm.u_fp());
    let mut acc: Vec<B::Reg> = vec![B::zero(); rounds];

    for g in groups {
        for r in acc.iter_mut() {
            *r = B::zero();
        }
        let start = g.start;
        let end = g.start + g.len;
        let (body_start, body_end) = span_edges(start, end, v);

        if body_start > start {
            let k = body_start - start;
            let mut av = B::load_first(a.add(start), k);
            let mr = B::load_first(mv.add(start), k);
            for item in acc.iter_mut() {
                av = B::mulmod(av, mr, p, u);
                *item = B::addmod(*item, av, p);
            }
            B::store_first(a.add(start), av, k);
        }

        let mut j = body_start;
        while j < body_end {
            let mut av = B::loada(a.add(j));
            let mr = B::loada(mv.add(j));
            for item in acc.iter_mut() {
                av = B::mulmod(av, mr, p, u);
                *item = B::addmod(*item, av, p);
            }
            B::storea(a.add(j), av);
            j += v;
        }

        if end > body_end {
            let k = end - body_end;
            let mut av = B::load_first(a.add(body_end), k);
            let mr = B::load_first(mv.add(body_end), k);
            for item in acc.iter_mut() {
                av = B::mulmod(av, mr, p, u);
                *item = B::addmod(*item, av, p);
            }
            B::store_first(a.add(body_end), av, k);
        }

        for (kd, &r) in acc.iter().enumerate() {
            let c = B::reduce_addmod(r, p);
            if c != 0.0 {
                out[kd].push(ImageEntry {
                    d: g.d,
                    e: g.e,
                    c: c as u64,
                });
            }
        }
    }
}
