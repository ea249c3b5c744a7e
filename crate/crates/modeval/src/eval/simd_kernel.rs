//! Vectorized compute kernel: one group at a time, a lane-masked head and
//! tail around an aligned body, and a tree-shaped final reduction.

use super::{span_edges, BivariateImage, ImageEntry, MonomialEvals};
use crate::field::PrimeModulus;
use crate::simd::{AlignedBuf, Backend, BackendKind, Portable, VOps};

/// The vector kernel. Produces images identical to [`super::eval_scalar`].
///
/// `a` and `m` are converted to the floating-point carrier once up front;
/// each group's inner loop is split into a masked head, an aligned body
/// stepping one vector at a time, and a masked tail, so the body performs
/// only aligned loads and stores. `me` itself is left untouched.
pub fn eval_simd(
    me: &MonomialEvals,
    m: &PrimeModulus,
    t_count: u64,
    backend: Backend,
) -> Vec<BivariateImage> {
    let mut a = AlignedBuf::from_u64s(&me.a);
    let mv = AlignedBuf::from_u64s(&me.m);
    match backend.kind() {
        BackendKind::Portable => unsafe {
            kernel::<Portable>(me, &mut a, &mv, m, t_count)
        },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V4 => unsafe { kernel_v4(me, &mut a, &mv, m, t_count) },
        #[cfg(target_arch = "x86_64")]
        BackendKind::V8 => unsafe { kernel_v8(me, &mut a, &mv, m, t_count) },
        #[cfg(not(target_arch = "x86_64"))]
        _ => unreachable!("hardware backends cannot be selected on this arch"),
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn kernel_v4(
    me: &MonomialEvals,
    a: &mut AlignedBuf,
    mv: &AlignedBuf,
    m: &PrimeModulus,
    t_count: u64,
) -> Vec<BivariateImage> {
    kernel::<crate::simd::V4>(me, a, mv, m, t_count)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn kernel_v8(
    me: &MonomialEvals,
    a: &mut AlignedBuf,
    mv: &AlignedBuf,
    m: &PrimeModulus,
    t_count: u64,
) -> Vec<BivariateImage> {
    kernel::<crate::simd::V8>(me, a, mv, m, t_count)
}

#[inline(always)]
unsafe fn kernel<B: VOps>(
    me: &MonomialEvals,
    a: &mut AlignedBuf,
    mv: &AlignedBuf,
    m: &PrimeModulus,
    t_count: u64,
) -> Vec<BivariateImage> {
    let v = B::LANES;
    let p = B::splat(m.p_fp());
    let u = B::splat(m.u_fp());
    let ap = a.as_mut_slice().as_mut_ptr();
    let mp = mv.as_slice().as_ptr();

    let mut images = Vec::with_capacity(t_count as usize);
    for t in 1..=t_count {
        let mut entries = Vec::new();
        for g in &me.groups {
            let start = g.start;
            let end = g.start + g.len;
            let (body_start, body_end) = span_edges(start, end, v);
            let mut acc = B::zero();

            if body_start > start {
                let k = body_start - start;
                let av = B::load_first(ap.add(start), k);
                let mr = B::load_first(mp.add(start), k);
                let prod = B::mulmod(av, mr, p, u);
                acc = B::addmod(acc, prod, p);
                B::store_first(ap.add(start), prod, k);
            }

            let mut j = body_start;
            while j < body_end {
                let av = B::loada(ap.add(j));
                let mr = B::loada(mp.add(j));
                let prod = B::mulmod(av, mr, p, u);
                acc = B::addmod(acc, prod, p);
                B::storea(ap.add(j), prod);
                j += v;
            }

            if end > body_end {
                let k = end - body_end;
                let av = B::load_first(ap.add(body_end), k);
                let mr = B::load_first(mp.add(body_end), k);
                let prod = B::mulmod(av, mr, p, u);
                acc = B::addmod(acc, prod, p);
                B::store_first(ap.add(body_end), prod, k);
            }

            let c = B::reduce_addmod(acc, p);
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
