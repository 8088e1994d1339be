//! Plain Bloom filter with SHA-256 double hashing.
//!
//! The filter size is always a power-of-two multiple of the chunk size so
//! that every Merkle leaf of a [`BloomTree`](crate::tree::BloomTree) is a
//! real slice of the filter.

use sha2::{Digest as _, Sha256};
use std::f64::consts::LN_2;
use thiserror::Error;

/// Largest supported chunk, in bytes.
pub const MAX_CHUNK_SIZE: u32 = 65_536;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("target false positive rate must lie in (0, 1), got {0}")]
    BadFpr(f64),
    #[error("expected element count must be at least 1")]
    ZeroElements,
    #[error("chunk size must be in 1..={MAX_CHUNK_SIZE} bytes, got {0}")]
    BadChunkSize(u32),
    #[error("hash count k must be at least 1")]
    ZeroHashes,
    #[error("filter size of {m} bits is not a power-of-two multiple of {chunk_bits}-bit chunks")]
    BadGeometry { m: u64, chunk_bits: u64 },
    #[error("filter size overflows 64 bits")]
    Overflow,
    #[error("filter of {0} bits must have at least one bit")]
    ZeroBits(u64),
    #[error("filter backing store has {got} bytes, expected {expected}")]
    BadLength { expected: u64, got: usize },
}

/// Filter geometry shared by prover and verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BloomParams {
    m: u64,
    k: u32,
    chunk_size: u32,
}

impl BloomParams {
    /// Checks the geometry invariants: `k >= 1`, a valid chunk size, and
    /// `m = chunk_size * 8 * 2^L`.
    pub fn new(m: u64, k: u32, chunk_size: u32) -> Result<Self, ParamsError> {
        check_chunk_size(chunk_size)?;
        if k == 0 {
            return Err(ParamsError::ZeroHashes);
        }
        let chunk_bits = u64::from(chunk_size) * 8;
        if m == 0 || !m.is_multiple_of(chunk_bits) || !(m / chunk_bits).is_power_of_two() {
            return Err(ParamsError::BadGeometry { m, chunk_bits });
        }
        Ok(Self { m, k, chunk_size })
    }

    /// Number of bits in the filter.
    pub fn m(&self) -> u64 {
        self.m
    }

    /// Number of bit positions per element.
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Bytes per chunk.
    pub fn chunk_size(&self) -> u32 {
        self.chunk_size
    }

    pub fn chunk_bits(&self) -> u64 {
        u64::from(self.chunk_size) * 8
    }

    /// Number of chunks, which is also the Merkle leaf count.
    pub fn chunk_count(&self) -> u64 {
        self.m / self.chunk_bits()
    }

    /// `log2(chunk_count)`: the depth of the Merkle tree.
    pub fn depth(&self) -> u32 {
        self.chunk_count().trailing_zeros()
    }

    pub fn filter_bytes(&self) -> u64 {
        self.m / 8
    }
}

fn check_chunk_size(chunk_size: u32) -> Result<(), ParamsError> {
    if chunk_size == 0 || chunk_size > MAX_CHUNK_SIZE {
        return Err(ParamsError::BadChunkSize(chunk_size));
    }
    Ok(())
}

/// Unpadded optimal filter size `ceil(n * -ln p / ln(2)^2)`.
pub fn raw_bits(n: u64, p: f64) -> Result<u64, ParamsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ParamsError::BadFpr(p));
    }
    if n == 0 {
        return Err(ParamsError::ZeroElements);
    }
    let bits = (n as f64 * -p.ln() / (LN_2 * LN_2)).ceil();
    if !bits.is_finite() || bits >= u64::MAX as f64 {
        return Err(ParamsError::Overflow);
    }
    Ok(bits as u64)
}

/// Sizes a filter for `n` elements at target false positive rate `p`.
///
/// The optimal bit count is padded up to `chunk_size * 8 * 2^L` and `k` is
/// then chosen optimally for the padded size, so the realized rate never
/// exceeds the target.
pub fn derive_params(n: u64, p: f64, chunk_size: u32) -> Result<BloomParams, ParamsError> {
    check_chunk_size(chunk_size)?;
    let raw = raw_bits(n, p)?;
    let mut m = u64::from(chunk_size) * 8;
    while m < raw {
        m = m.checked_mul(2).ok_or(ParamsError::Overflow)?;
    }
    let k = (m as f64 / n as f64 * LN_2).round().max(1.0);
    if k > f64::from(u32::MAX) {
        return Err(ParamsError::Overflow);
    }
    BloomParams::new(m, k as u32, chunk_size)
}

/// Expected false positive rate `(1 - (1 - 1/m)^(k n))^k`.
pub fn fpr(m: u64, k: u32, n: u64) -> Result<f64, ParamsError> {
    if m == 0 {
        return Err(ParamsError::ZeroBits(m));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let kn = f64::from(k) * n as f64;
    // (1 - 1/m)^(kn); ln_1p keeps precision for large m, and m = 1 gives exp(-inf) = 0.
    let zero_prob = (kn * (-1.0 / m as f64).ln_1p()).exp();
    Ok((1.0 - zero_prob).powf(f64::from(k)))
}

/// Iterator over the `k` bit positions of one element.
#[derive(Debug, Clone)]
pub struct Indices {
    h1: u64,
    h2: u64,
    m: u64,
    i: u32,
    k: u32,
}

impl Iterator for Indices {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.i >= self.k {
            return None;
        }
        let h = self
            .h1
            .wrapping_add(u64::from(self.i).wrapping_mul(self.h2));
        self.i += 1;
        Some(h % self.m)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.k - self.i) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Indices {}

/// Bit positions `(h1 + i*h2) mod m` for `i` in `0..k`, where `h1` and `h2`
/// are the first two little-endian words of SHA-256(element) and `h2` is
/// forced odd. Duplicates are kept.
pub fn indices(element: &[u8], params: &BloomParams) -> Indices {
    let d = Sha256::digest(element);
    let h1 = u64::from_le_bytes(d[0..8].try_into().expect("8 bytes"));
    let h2 = u64::from_le_bytes(d[8..16].try_into().expect("8 bytes")) | 1;
    Indices {
        h1,
        h2,
        m: params.m,
        i: 0,
        k: params.k,
    }
}

/// Bit array of `m` bits, LSB-first within each byte.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BloomFilter {
    params: BloomParams,
    bits: Vec<u8>,
}

impl BloomFilter {
    /// An all-zero filter.
    pub fn new(params: BloomParams) -> Self {
        let len = usize::try_from(params.filter_bytes()).expect("filter exceeds address space");
        Self {
            params,
            bits: vec![0; len],
        }
    }

    /// Wraps an existing backing store; its length must be exactly `m / 8`.
    pub fn from_bytes(params: BloomParams, bits: Vec<u8>) -> Result<Self, ParamsError> {
        if bits.len() as u64 != params.filter_bytes() {
            return Err(ParamsError::BadLength {
                expected: params.filter_bytes(),
                got: bits.len(),
            });
        }
        Ok(Self { params, bits })
    }

    pub fn params(&self) -> &BloomParams {
        &self.params
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bits
    }

    pub fn bit(&self, index: u64) -> bool {
        bit_at(&self.bits, index)
    }

    pub fn set_bit(&mut self, index: u64) {
        self.bits[(index / 8) as usize] |= 1 << (index % 8);
    }

    pub fn insert(&mut self, element: &[u8]) {
        for i in indices(element, &self.params) {
            self.set_bit(i);
        }
    }

    pub fn contains(&self, element: &[u8]) -> bool {
        indices(element, &self.params).all(|i| self.bit(i))
    }

    /// Number of set bits.
    pub fn popcount(&self) -> u64 {
        self.bits.iter().map(|b| u64::from(b.count_ones())).sum()
    }

    /// Chunk `index` as a byte slice.
    pub fn chunk(&self, index: u64) -> &[u8] {
        let size = self.params.chunk_size as usize;
        let start = index as usize * size;
        &self.bits[start..start + size]
    }

    pub fn chunks(&self) -> std::slice::Chunks<'_, u8> {
        self.bits.chunks(self.params.chunk_size as usize)
    }
}

/// Reads bit `index` of an LSB-first byte string.
pub(crate) fn bit_at(bytes: &[u8], index: u64) -> bool {
    bytes[(index / 8) as usize] >> (index % 8) & 1 == 1
}
