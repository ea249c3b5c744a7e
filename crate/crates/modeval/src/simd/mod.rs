//! Lane-parallel modular arithmetic over fixed-width vectors of `f64`.
//!
//! Three backends share identical semantics:
//!
//! * `portable` — a fixed-trip-count scalar loop, always available;
//! * `v4` — 4 lanes of 256-bit AVX2+FMA, branch-free via `blendv` selects;
//! * `v8` — 8 lanes of 512-bit AVX-512F, branch-free via `__mmask8` ops.
//!
//! Hardware backends are only reachable through [`backend_select`], which
//! performs the CPU feature check; a [`Backend`] value therefore certifies
//! that its kind is executable on this host.

mod aligned;
mod portable;
#[cfg(target_arch = "x86_64")]
mod x86;

pub use aligned::AlignedBuf;
pub(crate) use portable::Portable;
#[cfg(target_arch = "x86_64")]
pub(crate) use x86::{V4, V8};

use crate::field::PrimeModulus;
use thiserror::Error;

/// Widest lane count across backends.
pub const MAX_LANES: usize = 8;

/// Lane-level operations each backend provides. Callers must guarantee the
/// backend's CPU features are available and that all pointers cover
/// `LANES` elements (or the masked subset for the masked variants).
pub(crate) trait VOps: Copy + 'static {
    const LANES: usize;
    type Reg: Copy;

    unsafe fn splat(x: f64) -> Self::Reg;
    unsafe fn zero() -> Self::Reg;
    unsafe fn loadu(ptr: *const f64) -> Self::Reg;
    unsafe fn loada(ptr: *const f64) -> Self::Reg;
    unsafe fn storeu(ptr: *mut f64, r: Self::Reg);
    unsafe fn storea(ptr: *mut f64, r: Self::Reg);
    /// Loads lanes `0..k` and zeroes the rest. Lanes at and past `k` are not
    /// touched in memory.
    unsafe fn load_first(ptr: *const f64, k: usize) -> Self::Reg;
    /// Stores lanes `0..k`; memory past `k` is untouched.
    unsafe fn store_first(ptr: *mut f64, r: Self::Reg, k: usize);
    /// Loads the lanes selected by `mask` bits and zeroes the rest.
    unsafe fn load_masked(ptr: *const f64, mask: u8) -> Self::Reg;
    unsafe fn store_masked(ptr: *mut f64, r: Self::Reg, mask: u8);
    /// Lane-wise `x * y mod p`; no lane is `-0.0`; no data-dependent branch.
    unsafe fn mulmod(x: Self::Reg, y: Self::Reg, p: Self::Reg, u: Self::Reg) -> Self::Reg;
    /// Lane-wise `x + y mod p`; branch-free.
    unsafe fn addmod(x: Self::Reg, y: Self::Reg, p: Self::Reg) -> Self::Reg;
    /// Modular sum of all lanes via `log2(LANES)` shuffle + addmod rounds.
    unsafe fn reduce_addmod(x: Self::Reg, p: Self::Reg) -> f64;
    /// First `LANES` entries are the register lanes, the rest zero.
    unsafe fn to_array(r: Self::Reg) -> [f64; MAX_LANES];
    unsafe fn from_array(a: &[f64; MAX_LANES]) -> Self::Reg;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend {0} is not supported on this host")]
    Unsupported(&'static str),
    #[error("unknown backend name {0:?} (expected auto, portable, v4 or v8)")]
    UnknownName(String),
}

/// Which implementation a [`Backend`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    /// Scalar-loop fallback, 8 logical lanes, available everywhere.
    Portable,
    /// 256-bit AVX2+FMA, 4 lanes.
    V4,
    /// 512-bit AVX-512F, 8 lanes.
    V8,
}

/// A selected, executable backend descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Backend {
    kind: BackendKind,
}

/// What [`backend_select`] should look for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendRequest {
    /// Widest supported backend on this host.
    #[default]
    Auto,
    Portable,
    V4,
    V8,
}

impl std::str::FromStr for BackendRequest {
    type Err = BackendError;
    fn from_str(s: &str) -> Result<Self, BackendError> {
        match s {
            "auto" => Ok(BackendRequest::Auto),
            "portable" => Ok(BackendRequest::Portable),
            "v4" => Ok(BackendRequest::V4),
            "v8" => Ok(BackendRequest::V8),
            other => Err(BackendError::UnknownName(other.to_string())),
        }
    }
}

#[cfg(target_arch = "x86_64")]
fn v4_supported() -> bool {
    std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
}

#[cfg(target_arch = "x86_64")]
fn v8_supported() -> bool {
    std::arch::is_x86_feature_detected!("avx512f")
}

#[cfg(not(target_arch = "x86_64"))]
fn v4_supported() -> bool {
    false
}

#[cfg(not(target_arch = "x86_64"))]
fn v8_supported() -> bool {
    false
}

/// Resolves a backend request against the host CPU.
///
/// `Auto` returns the widest supported backend; `Portable` always succeeds;
/// an explicitly requested hardware backend fails with
/// [`BackendError::Unsupported`] when the CPU lacks it.
pub fn backend_select(request: BackendRequest) -> Result<Backend, BackendError> {
    match request {
        BackendRequest::Portable => Ok(Backend {
            kind: BackendKind::Portable,
        }),
        BackendRequest::V4 => {
            if v4_supported() {
                Ok(Backend {
                    kind: BackendKind::V4,
                })
            } else {
                Err(BackendError::Unsupported("v4"))
            }
        }
        BackendRequest::V8 => {
            if v8_supported() {
                Ok(Backend {
                    kind: BackendKind::V8,
                })
            } else {
                Err(BackendError::Unsupported("v8"))
            }
        }
        BackendRequest::Auto => {
            let kind = if v8_supported() {
                BackendKind::V8
            } else if v4_supported() {
                BackendKind::V4
            } else {
                BackendKind::Portable
            };
            Ok(Backend { kind })
        }
    }
}

impl Backend {
    /// The always-available scalar-loop backend.
    pub fn portable() -> Self {
        Backend {
            kind: BackendKind::Portable,
        }
    }

    /// Every backend this host can run, widest first after portable.
    pub fn all_supported() -> Vec<Backend> {
        let mut out = vec![Backend::portable()];
        if v4_supported() {
            out.push(Backend {
                kind: BackendKind::V4,
            });
        }
        if v8_supported() {
            out.push(Backend {
                kind: BackendKind::V8,
            });
        }
        out
    }

    #[inline]
    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    /// Lane count `V` of this backend.
    #[inline]
    pub fn lanes(&self) -> usize {
        match self.kind {
            BackendKind::Portable => portable::Portable::LANES,
            BackendKind::V4 => 4,
            BackendKind::V8 => 8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            BackendKind::Portable => "portable",
            BackendKind::V4 => "v4",
            BackendKind::V8 => "v8",
        }
    }

    /// Lane-wise modular product of two vectors of width `self.lanes()`.
    pub fn vmulmod(&self, x: &FieldVector, y: &FieldVector, m: &PrimeModulus) -> FieldVector {
        assert_eq!(x.width(), self.lanes(), "vector width mismatch");
        assert_eq!(y.width(), self.lanes(), "vector width mismatch");
        let lanes = match self.kind {
            BackendKind::Portable => unsafe { vmulmod_impl::<Portable>(&x.lanes, &y.lanes, m) },
            #[cfg(target_arch = "x86_64")]
            BackendKind::V4 => unsafe { x86::vmulmod_v4(&x.lanes, &y.lanes, m) },
            #[cfg(target_arch = "x86_64")]
            BackendKind::V8 => unsafe { x86::vmulmod_v8(&x.lanes, &y.lanes, m) },
            #[cfg(not(target_arch = "x86_64"))]
            _ => unreachable!("hardware backends cannot be selected on this arch"),
        };
        FieldVector {
            lanes,
            width: self.lanes(),
        }
    }

    /// Lane-wise modular sum of two vectors of width `self.lanes()`.
    pub fn vaddmod(&self, x: &FieldVector, y: &FieldVector, m: &PrimeModulus) -> FieldVector {
        assert_eq!(x.width(), self.lanes(), "vector width mismatch");
        assert_eq!(y.width(), self.lanes(), "vector width mismatch");
        let lanes = match self.kind {
            BackendKind::Portable => unsafe { vaddmod_impl::<Portable>(&x.lanes, &y.lanes, m) },
            #[cfg(target_arch = "x86_64")]
            BackendKind::V4 => unsafe { x86::vaddmod_v4(&x.lanes, &y.lanes, m) },
            #[cfg(target_arch = "x86_64")]
            BackendKind::V8 => unsafe { x86::vaddmod_v8(&x.lanes, &y.lanes, m) },
            #[cfg(not(target_arch = "x86_64"))]
            _ => unreachable!("hardware backends cannot be selected on this arch"),
        };
        FieldVector {
            lanes,
            width: self.lanes(),
        }
    }

    /// Modular sum of all lanes, computed as a shuffle tree of vector addmods.
    /// Equals the left-to-right scalar fold.
    pub fn vreduce_addmod(&self, x: &FieldVector, m: &PrimeModulus) -> f64 {
        assert_eq!(x.width(), self.lanes(), "vector width mismatch");
        match self.kind {
            BackendKind::Portable => unsafe { vreduce_impl::<Portable>(&x.lanes, m) },
            #[cfg(target_arch = "x86_64")]
            BackendKind::V4 => unsafe { x86::vreduce_v4(&x.lanes, m) },
            #[cfg(target_arch = "x86_64")]
            BackendKind::V8 => unsafe { x86::vreduce_v8(&x.lanes, m) },
            #[cfg(not(target_arch = "x86_64"))]
            _ => unreachable!("hardware backends cannot be selected on this arch"),
        }
    }

    /// One masked Hadamard + reduction step over `a[start..]` and
    /// `m_vals[start..]`.
    ///
    /// For every lane `i` selected by `mask`: `a[start+i] <- a[start+i] *
    /// m_vals[start+i] mod p` and the product is folded into `acc` lane `i`.
    /// Unselected lanes are untouched in memory and contribute zero to `acc`.
    pub fn masked_vmulmod_accumulate(
        &self,
        m: &PrimeModulus,
        a: &mut [f64],
        m_vals: &[f64],
        start: usize,
        mask: &LaneMask,
        acc: &mut FieldVector,
    ) {
        assert_eq!(mask.width(), self.lanes(), "mask width mismatch");
        assert_eq!(acc.width(), self.lanes(), "accumulator width mismatch");
        assert!(a.len() == m_vals.len());
        let needed = mask.highest_set().map_or(0, |i| i + 1);
        assert!(start + needed <= a.len(), "mask selects out-of-range lanes");
        if needed == 0 {
            return;
        }
        match self.kind {
            BackendKind::Portable => unsafe {
                masked_step_impl::<Portable>(m, a, m_vals, start, mask.bits, &mut acc.lanes)
            },
            #[cfg(target_arch = "x86_64")]
            BackendKind::V4 => unsafe {
                x86::masked_step_v4(m, a, m_vals, start, mask.bits, &mut acc.lanes)
            },
            #[cfg(target_arch = "x86_64")]
            BackendKind::V8 => unsafe {
                x86::masked_step_v8(m, a, m_vals, start, mask.bits, &mut acc.lanes)
            },
            #[cfg(not(target_arch = "x86_64"))]
            _ => unreachable!("hardware backends cannot be selected on this arch"),
        }
    }
}

#[inline(always)]
pub(crate) unsafe fn vmulmod_impl<B: VOps>(
    x: &[f64; MAX_LANES],
    y: &[f64; MAX_LANES],
    m: &PrimeModulus,
) -> [f64; MAX_LANES] {
    let r = B::mulmod(
        B::from_array(x),
        B::from_array(y),
        B::splat(m.p_fp()),
        B::splat(m.u_fp()),
    );
    B::to_array(r)
}

#[inline(always)]
pub(crate) unsafe fn vaddmod_impl<B: VOps>(
    x: &[f64; MAX_LANES],
    y: &[f64; MAX_LANES],
    m: &PrimeModulus,
) -> [f64; MAX_LANES] {
    let r = B::addmod(B::from_array(x), B::from_array(y), B::splat(m.p_fp()));
    B::to_array(r)
}

#[inline(always)]
pub(crate) unsafe fn vreduce_impl<B: VOps>(x: &[f64; MAX_LANES], m: &PrimeModulus) -> f64 {
    B::reduce_addmod(B::from_array(x), B::splat(m.p_fp()))
}

#[inline(always)]
pub(crate) unsafe fn masked_step_impl<B: VOps>(
    m: &PrimeModulus,
    a: &mut [f64],
    m_vals: &[f64],
    start: usize,
    mask: u8,
    acc: &mut [f64; MAX_LANES],
) {
    let p = B::splat(m.p_fp());
    let u = B::splat(m.u_fp());
    let av = B::load_masked(a.as_ptr().add(start), mask);
    let mv = B::load_masked(m_vals.as_ptr().add(start), mask);
    let prod = B::mulmod(av, mv, p, u);
    let folded = B::addmod(B::from_array(acc), prod, p);
    B::store_masked(a.as_mut_ptr().add(start), prod, mask);
    *acc = B::to_array(folded);
}

/// A vector of `width` exact field-element images. Lanes past `width` are
/// zero and ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVector {
    lanes: [f64; MAX_LANES],
    width: usize,
}

impl FieldVector {
    pub fn from_slice(values: &[f64]) -> Self {
        assert!(
            values.len() <= MAX_LANES,
            "at most {MAX_LANES} lanes supported"
        );
        let mut lanes = [0.0; MAX_LANES];
        lanes[..values.len()].copy_from_slice(values);
        FieldVector {
            lanes,
            width: values.len(),
        }
    }

    pub fn splat(x: f64, width: usize) -> Self {
        assert!(width <= MAX_LANES);
        let mut lanes = [0.0; MAX_LANES];
        lanes[..width].fill(x);
        FieldVector { lanes, width }
    }

    pub fn zero(width: usize) -> Self {
        assert!(width <= MAX_LANES);
        FieldVector {
            lanes: [0.0; MAX_LANES],
            width,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn lanes(&self) -> &[f64] {
        &self.lanes[..self.width]
    }
}

/// Per-lane boolean selection flags of the same width as a [`FieldVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneMask {
    bits: u8,
    width: usize,
}

impl LaneMask {
    pub fn all(width: usize) -> Self {
        assert!(width <= MAX_LANES);
        LaneMask {
            bits: prefix_bits(width),
            width,
        }
    }

    pub fn none(width: usize) -> Self {
        assert!(width <= MAX_LANES);
        LaneMask { bits: 0, width }
    }

    /// Selects lanes `0..k`.
    pub fn first(width: usize, k: usize) -> Self {
        assert!(width <= MAX_LANES && k <= width);
        LaneMask {
            bits: prefix_bits(k),
            width,
        }
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        assert!(flags.len() <= MAX_LANES);
        let mut bits = 0u8;
        for (i, &f) in flags.iter().enumerate() {
            if f {
                bits |= 1 << i;
            }
        }
        LaneMask {
            bits,
            width: flags.len(),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn is_set(&self, lane: usize) -> bool {
        lane < self.width && (self.bits >> lane) & 1 == 1
    }

    fn highest_set(&self) -> Option<usize> {
        if self.bits == 0 {
            None
        } else {
            Some(7 - self.bits.leading_zeros() as usize)
        }
    }
}

#[inline]
fn prefix_bits(k: usize) -> u8 {
    debug_assert!(k <= 8);
    ((1u32 << k) - 1) as u8
}
