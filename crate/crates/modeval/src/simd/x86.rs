//! Hardware backends for x86-64: 4 lanes over 256-bit AVX2+FMA registers
//! and 8 lanes over 512-bit AVX-512F registers.
//!
//! The final reduction of the modular product leaves `g` in `(-p, 2p)`; the
//! two corrections are applied without branching. On AVX2 the selects are
//! `blendv_pd` keyed on sign bits; this is only valid because `g` can never
//! be `-0.0` here (inputs are reduced and the modulus is prime, so a zero
//! product arises only from a zero operand, and that path produces `+0.0`
//! under round-to-nearest). AVX-512 uses explicit compare masks instead.

use super::{VOps, MAX_LANES};
use crate::field::PrimeModulus;
use core::arch::x86_64::*;

#[derive(Clone, Copy)]
pub(crate) struct V4;

#[derive(Clone, Copy)]
pub(crate) struct V8;

/// Sign-bit lane masks for AVX2 maskload/maskstore, indexed by prefix length.
static PREFIX4: [[i64; 4]; 5] = [
    [0, 0, 0, 0],
    [-1, 0, 0, 0],
    [-1, -1, 0, 0],
    [-1, -1, -1, 0],
    [-1, -1, -1, -1],
];

#[inline(always)]
unsafe fn mask4_from_bits(bits: u8) -> __m256i {
    _mm256_setr_epi64x(
        -((bits & 1) as i64),
        -(((bits >> 1) & 1) as i64),
        -(((bits >> 2) & 1) as i64),
        -(((bits >> 3) & 1) as i64),
    )
}

impl VOps for V4 {
    const LANES: usize = 4;
    type Reg = __m256d;

    #[inline(always)]
    unsafe fn splat(x: f64) -> __m256d {
        _mm256_set1_pd(x)
    }

    #[inline(always)]
    unsafe fn zero() -> __m256d {
        _mm256_setzero_pd()
    }

    #[inline(always)]
    unsafe fn loadu(ptr: *const f64) -> __m256d {
        _mm256_loadu_pd(ptr)
    }

    #[inline(always)]
    unsafe fn loada(ptr: *const f64) -> __m256d {
        _mm256_load_pd(ptr)
    }

    #[inline(always)]
    unsafe fn storeu(ptr: *mut f64, r: __m256d) {
        _mm256_storeu_pd(ptr, r)
    }

    #[inline(always)]
    unsafe fn storea(ptr: *mut f64, r: __m256d) {
        _mm256_store_pd(ptr, r)
    }

    #[inline(always)]
    unsafe fn load_first(ptr: *const f64, k: usize) -> __m256d {
        debug_assert!(k <= 4);
        let m = _mm256_loadu_si256(PREFIX4[k].as_ptr() as *const __m256i);
        _mm256_maskload_pd(ptr, m)
    }

    #[inline(always)]
    unsafe fn store_first(ptr: *mut f64, r: __m256d, k: usize) {
        debug_assert!(k <= 4);
        let m = _mm256_loadu_si256(PREFIX4[k].as_ptr() as *const __m256i);
        _mm256_maskstore_pd(ptr, m, r)
    }

    #[inline(always)]
    unsafe fn load_masked(ptr: *const f64, mask: u8) -> __m256d {
        _mm256_maskload_pd(ptr, mask4_from_bits(mask))
    }

    #[inline(always)]
    unsafe fn store_masked(ptr: *mut f64, r: __m256d, mask: u8) {
        _mm256_maskstore_pd(ptr, mask4_from_bits(mask), r)
    }

    #[inline(always)]
    unsafe fn mulmod(x: __m256d, y: __m256d, p: __m256d, u: __m256d) -> __m256d {
        let h = _mm256_mul_pd(x, y);
        let l = _mm256_fmsub_pd(x, y, h);
        let b = _mm256_mul_pd(h, u);
        let c = _mm256_floor_pd(b);
        let d = _mm256_fnmadd_pd(c, p, h);
        let g = _mm256_add_pd(d, l);
        // g >= p, rewritten as sign(g - p) clear: take g - p.
        let t = _mm256_sub_pd(g, p);
        let g = _mm256_blendv_pd(t, g, t);
        // g < 0: take g + p.
        let t = _mm256_add_pd(g, p);
        _mm256_blendv_pd(g, t, g)
    }

    #[inline(always)]
    unsafe fn addmod(x: __m256d, y: __m256d, p: __m256d) -> __m256d {
        let s = _mm256_add_pd(x, y);
        let t = _mm256_sub_pd(s, p);
        _mm256_blendv_pd(t, s, t)
    }

    #[inline(always)]
    unsafe fn reduce_addmod(x: __m256d, p: __m256d) -> f64 {
        // Swap 128-bit halves, then swap within each half.
        let t = _mm256_permute2f128_pd::<0x01>(x, x);
        let v = Self::addmod(x, t, p);
        let t = _mm256_permute_pd::<0b0101>(v);
        let v = Self::addmod(v, t, p);
        _mm_cvtsd_f64(_mm256_castpd256_pd128(v))
    }

    #[inline(always)]
    unsafe fn to_array(r: __m256d) -> [f64; MAX_LANES] {
        let mut out = [0.0; MAX_LANES];
        _mm256_storeu_pd(out.as_mut_ptr(), r);
        out
    }

    #[inline(always)]
    unsafe fn from_array(a: &[f64; MAX_LANES]) -> __m256d {
        _mm256_loadu_pd(a.as_ptr())
    }
}

impl VOps for V8 {
    const LANES: usize = 8;
    type Reg = __m512d;

    #[inline(always)]
    unsafe fn splat(x: f64) -> __m512d {
        _mm512_set1_pd(x)
    }

    #[inline(always)]
    unsafe fn zero() -> __m512d {
        _mm512_setzero_pd()
    }

    #[inline(always)]
    unsafe fn loadu(ptr: *const f64) -> __m512d {
        _mm512_loadu_pd(ptr)
    }

    #[inline(always)]
    unsafe fn loada(ptr: *const f64) -> __m512d {
        _mm512_load_pd(ptr)
    }

    #[inline(always)]
    unsafe fn storeu(ptr: *mut f64, r: __m512d) {
        _mm512_storeu_pd(ptr, r)
    }

    #[inline(always)]
    unsafe fn storea(ptr: *mut f64, r: __m512d) {
        _mm512_store_pd(ptr, r)
    }

    #[inline(always)]
    unsafe fn load_first(ptr: *const f64, k: usize) -> __m512d {
        debug_assert!(k <= 8);
        _mm512_maskz_loadu_pd(prefix_mask8(k), ptr)
    }

    #[inline(always)]
    unsafe fn store_first(ptr: *mut f64, r: __m512d, k: usize) {
        debug_assert!(k <= 8);
        _mm512_mask_storeu_pd(ptr, prefix_mask8(k), r)
    }

    #[inline(always)]
    unsafe fn load_masked(ptr: *const f64, mask: u8) -> __m512d {
        _mm512_maskz_loadu_pd(mask, ptr)
    }

    #[inline(always)]
    unsafe fn store_masked(ptr: *mut f64, r: __m512d, mask: u8) {
        _mm512_mask_storeu_pd(ptr, mask, r)
    }

    #[inline(always)]
    unsafe fn mulmod(x: __m512d, y: __m512d, p: __m512d, u: __m512d) -> __m512d {
        let h = _mm512_mul_pd(x, y);
        let l = _mm512_fmsub_pd(x, y, h);
        let b = _mm512_mul_pd(h, u);
        let c = _mm512_roundscale_pd::<0x09>(b); // floor, exceptions suppressed
        let d = _mm512_fnmadd_pd(c, p, h);
        let g = _mm512_add_pd(d, l);
        let m_lt = _mm512_cmplt_pd_mask(g, _mm512_setzero_pd());
        let m_ge = _mm512_cmple_pd_mask(p, g);
        let g = _mm512_mask_add_pd(g, m_lt, g, p);
        _mm512_mask_sub_pd(g, m_ge, g, p)
    }

    #[inline(always)]
    unsafe fn addmod(x: __m512d, y: __m512d, p: __m512d) -> __m512d {
        let s = _mm512_add_pd(x, y);
        let m = _mm512_cmple_pd_mask(p, s);
        _mm512_mask_sub_pd(s, m, s, p)
    }

    #[inline(always)]
    unsafe fn reduce_addmod(x: __m512d, p: __m512d) -> f64 {
        // 256-bit halves, then 128-bit quarters, then adjacent lanes.
        let t = _mm512_shuffle_f64x2::<0x4E>(x, x);
        let v = Self::addmod(x, t, p);
        let t = _mm512_shuffle_f64x2::<0xB1>(v, v);
        let v = Self::addmod(v, t, p);
        let t = _mm512_permute_pd::<0b01010101>(v);
        let v = Self::addmod(v, t, p);
        _mm_cvtsd_f64(_mm512_castpd512_pd128(v))
    }

    #[inline(always)]
    unsafe fn to_array(r: __m512d) -> [f64; MAX_LANES] {
        let mut out = [0.0; MAX_LANES];
        _mm512_storeu_pd(out.as_mut_ptr(), r);
        out
    }

    #[inline(always)]
    unsafe fn from_array(a: &[f64; MAX_LANES]) -> __m512d {
        _mm512_loadu_pd(a.as_ptr())
    }
}

#[inline(always)]
fn prefix_mask8(k: usize) -> __mmask8 {
    ((1u32 << k) - 1) as __mmask8
}

// Feature-gated shells for the public vector API. The `Backend` token
// guarantees the features are present before these are reached.

#[target_feature(enable = "avx2,fma")]
pub(crate) unsafe fn vmulmod_v4(
    x: &[f64; MAX_LANES],
    y: &[f64; MAX_LANES],
    m: &PrimeModulus,
) -> [f64; MAX_LANES] {
    super::vmulmod_impl::<V4>(x, y, m)
}

#[target_feature(enable = "avx2,fma")]
pub(crate) unsafe fn vaddmod_v4(
    x: &[f64; MAX_LANES],
    y: &[f64; MAX_LANES],
    m: &PrimeModulus,
) -> [f64; MAX_LANES] {
    super::vaddmod_impl::<V4>(x, y, m)
}

#[target_feature(enable = "avx2,fma")]
pub(crate) unsafe fn vreduce_v4(x: &[f64; MAX_LANES], m: &PrimeModulus) -> f64 {
    super::vreduce_impl::<V4>(x, m)
}

#[target_feature(enable = "avx2,fma")]
pub(crate) unsafe fn masked_step_v4(
    m: &PrimeModulus,
    a: &mut [f64],
    m_vals: &[f64],
    start: usize,
    mask: u8,
    acc: &mut [f64; MAX_LANES],
) {
    super::masked_step_impl::<V4>(m, a, m_vals, start, mask, acc)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn vmulmod_v8(
    x: &[f64; MAX_LANES],
    y: &[f64; MAX_LANES],
    m: &PrimeModulus,
) -> [f64; MAX_LANES] {
    super::vmulmod_impl::<V8>(x, y, m)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn vaddmod_v8(
    x: &[f64; MAX_LANES],
    y: &[f64; MAX_LANES],
    m: &PrimeModulus,
) -> [f64; MAX_LANES] {
    super::vaddmod_impl::<V8>(x, y, m)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn vreduce_v8(x: &[f64; MAX_LANES], m: &PrimeModulus) -> f64 {
    super::vreduce_impl::<V8>(x, m)
}

#[target_feature(enable = "avx512f")]
pub(crate) unsafe fn masked_step_v8(
    m: &PrimeModulus,
    a: &mut [f64],
    m_vals: &[f64],
    start: usize,
    mask: u8,
    acc: &mut [f64; MAX_LANES],
) {
    super::masked_step_impl::<V8>(m, a, m_vals, start, mask, acc)
}
