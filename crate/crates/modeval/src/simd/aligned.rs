//! 64-byte-aligned `f64` buffers for the vector kernels.
//!
//! The aligned-body loop of the evaluation kernels issues aligned loads at
//! indices that are multiples of the lane count, which requires the buffer
//! base itself to sit on a 64-byte boundary.

use std::ops::{Deref, DerefMut};

#[derive(Clone, Copy)]
#[repr(C, align(64))]
struct Block([f64; 8]);

/// A heap buffer of `f64` whose base address is 64-byte aligned.
///
/// Storage is padded up to a whole number of blocks; the padding lanes are
/// zero and never exposed through the slice views.
#[derive(Clone)]
pub struct AlignedBuf {
    blocks: Vec<Block>,
    len: usize,
}

impl AlignedBuf {
    pub fn zeroed(len: usize) -> Self {
        let blocks = vec![Block([0.0; 8]); len.div_ceil(8)];
        AlignedBuf { blocks, len }
    }

    /// Converts a slice of canonical field elements into their exact `f64`
    /// images.
    pub fn from_u64s(values: &[u64]) -> Self {
        let mut buf = Self::zeroed(values.len());
        for (dst, &v) in buf.iter_mut().zip(values) {
            *dst = v as f64;
        }
        buf
    }

    pub fn from_f64s(values: &[f64]) -> Self {
        let mut buf = Self::zeroed(values.len());
        buf.copy_from_slice(values);
        buf
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        // Blocks are contiguous plain f64 octets, so the flat view is valid.
        unsafe { std::slice::from_raw_parts(self.blocks.as_ptr() as *const f64, self.len) }
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        unsafe { std::slice::from_raw_parts_mut(self.blocks.as_mut_ptr() as *mut f64, self.len) }
    }
}

impl Deref for AlignedBuf {
    type Target = [f64];
    #[inline]
    fn deref(&self) -> &[f64] {
        self.as_slice()
    }
}

impl DerefMut for AlignedBuf {
    #[inline]
    fn deref_mut(&mut self) -> &mut [f64] {
        self.as_mut_slice()
    }
}

impl std::fmt::Debug for AlignedBuf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AlignedBuf").field("len", &self.len).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_is_64_byte_aligned() {
        for len in [1usize, 7, 8, 9, 2048] {
            let buf = AlignedBuf::zeroed(len);
            assert_eq!(buf.as_slice().as_ptr() as usize % 64, 0);
            assert_eq!(buf.len(), len);
        }
    }

    #[test]
    fn u64_round_trip() {
        let vals = [0u64, 1, (1 << 50) - 27, 123456789];
        let buf = AlignedBuf::from_u64s(&vals);
        for (i, &v) in vals.iter().enumerate() {
            assert_eq!(buf[i] as u64, v);
        }
    }
}
