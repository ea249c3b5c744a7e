//! Portable fallback backend: fixed-trip-count scalar loops with the same
//! semantics as the hardware backends.
//!
//! The reduction selects are arithmetic (multiply by a 0/1 indicator), not
//! conditional jumps, mirroring the branch-free structure of the vector
//! code.

use super::{VOps, MAX_LANES};

#[derive(Clone, Copy)]
pub(crate) struct Portable;

const V: usize = MAX_LANES;

impl VOps for Portable {
    const LANES: usize = V;
    type Reg = [f64; V];

    #[inline(always)]
    unsafe fn splat(x: f64) -> Self::Reg {
        [x; V]
    }

    #[inline(always)]
    unsafe fn zero() -> Self::Reg {
        [0.0; V]
    }

    #[inline(always)]
    unsafe fn loadu(ptr: *const f64) -> Self::Reg {
        let mut r = [0.0; V];
        for (i, lane) in r.iter_mut().enumerate() {
            *lane = *ptr.add(i);
        }
        r
    }

    #[inline(always)]
    unsafe fn loada(ptr: *const f64) -> Self::Reg {
        Self::loadu(ptr)
    }

    #[inline(always)]
    unsafe fn storeu(ptr: *mut f64, r: Self::Reg) {
        for (i, lane) in r.iter().enumerate() {
            *ptr.add(i) = *lane;
        }
    }

    #[inline(always)]
    unsafe fn storea(ptr: *mut f64, r: Self::Reg) {
        Self::storeu(ptr, r)
    }

    #[inline(always)]
    unsafe fn load_first(ptr: *const f64, k: usize) -> Self::Reg {
        let mut r = [0.0; V];
        for (i, lane) in r.iter_mut().enumerate().take(k) {
            *lane = *ptr.add(i);
        }
        r
    }

    #[inline(always)]
    unsafe fn store_first(ptr: *mut f64, r: Self::Reg, k: usize) {
        for (i, lane) in r.iter().enumerate().take(k) {
            *ptr.add(i) = *lane;
        }
    }

    #[inline(always)]
    unsafe fn load_masked(ptr: *const f64, mask: u8) -> Self::Reg {
        let mut r = [0.0; V];
        for (i, lane) in r.iter_mut().enumerate() {
            if (mask >> i) & 1 == 1 {
                *lane = *ptr.add(i);
            }
        }
        r
    }

    #[inline(always)]
    unsafe fn store_masked(ptr: *mut f64, r: Self::Reg, mask: u8) {
        for (i, lane) in r.iter().enumerate() {
            if (mask >> i) & 1 == 1 {
                *ptr.add(i) = *lane;
            }
        }
    }

    #[inline(always)]
    unsafe fn mulmod(x: Self::Reg, y: Self::Reg, p: Self::Reg, u: Self::Reg) -> Self::Reg {
        let mut out = [0.0; V];
        for i in 0..V {
            let h = x[i] * y[i];
            let l = f64::mul_add(x[i], y[i], -h);
            let b = h * u[i];
            let c = b.floor();
            let d = f64::mul_add(-c, p[i], h);
            let mut g = d + l;
            g -= p[i] * ((g >= p[i]) as u32 as f64);
            g += p[i] * ((g < 0.0) as u32 as f64);
            out[i] = g;
        }
        out
    }

    #[inline(always)]
    unsafe fn addmod(x: Self::Reg, y: Self::Reg, p: Self::Reg) -> Self::Reg {
        let mut out = [0.0; V];
        for i in 0..V {
            let s = x[i] + y[i];
            out[i] = s - p[i] * ((s >= p[i]) as u32 as f64);
        }
        out
    }

    #[inline(always)]
    unsafe fn reduce_addmod(x: Self::Reg, p: Self::Reg) -> f64 {
        let pp = p[0];
        let mut v = x;
        let mut w = V;
        while w > 1 {
            w /= 2;
            for i in 0..w {
                let s = v[i] + v[i + w];
                v[i] = s - pp * ((s >= pp) as u32 as f64);
            }
        }
        v[0]
    }

    #[inline(always)]
    unsafe fn to_array(r: Self::Reg) -> [f64; MAX_LANES] {
        r
    }

    #[inline(always)]
    unsafe fn from_array(a: &[f64; MAX_LANES]) -> Self::Reg {
        *a
    }
}
