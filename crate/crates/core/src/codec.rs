//! Byte layouts for filter and proof files. All integers are little-endian.
//!
//! Filter file:
//!
//! ```text
//! "BLTR" | version u8 | m u64 | k u32 | chunk_size u32 | filter (m/8 bytes) | root (32 bytes)
//! ```
//!
//! Proof file:
//!
//! ```text
//! "BLPF" | version u8 | kind u8 | m u64 | k u32 | chunk_size u32 | body
//! presence body: c u16 | c x chunk_index u64 | c x chunk | h u16 | h x digest
//! absence body:  chunk_index u64 | chunk | len u16 | len x digest
//! ```

use crate::bloom::{BloomFilter, BloomParams, ParamsError};
use crate::merkle::{Digest, MultiProof, SingleProof};
use crate::tree::{AbsenceProof, BloomTree, PresenceProof, Proof};
use thiserror::Error;

pub const FILTER_MAGIC: &[u8; 4] = b"BLTR";
pub const PROOF_MAGIC: &[u8; 4] = b"BLPF";
pub const VERSION: u8 = 0x01;
pub const KIND_PRESENCE: u8 = 0x01;
pub const KIND_ABSENCE: u8 = 0x02;

/// Bytes before the filter body in a filter file.
pub const FILTER_HEADER_LEN: usize = 4 + 1 + 8 + 4 + 4;
/// Bytes before the body in a proof file.
pub const PROOF_HEADER_LEN: usize = 4 + 1 + 1 + 8 + 4 + 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown proof kind {0:#04x}")]
    BadKind(u8),
    #[error("payload truncated")]
    Truncated,
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("stored root does not match the filter contents")]
    RootMismatch,
    #[error("invalid parameters: {0}")]
    InvalidParams(#[from] ParamsError),
    #[error("{what} count {count} does not fit the format")]
    TooLarge { what: &'static str, count: usize },
    #[error("proof has {indices} chunk indices but {chunks} chunks")]
    ChunkCountMismatch { indices: usize, chunks: usize },
    #[error("chunk of {got} bytes, expected {expected}")]
    BadChunkLength { expected: usize, got: usize },
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() < n {
            return Err(CodecError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn digest(&mut self) -> Result<Digest, CodecError> {
        Ok(Digest(self.take(32)?.try_into().unwrap()))
    }

    /// Fails before allocating if `count * width` bytes are not available.
    fn ensure(&self, count: usize, width: usize) -> Result<(), CodecError> {
        match count.checked_mul(width) {
            Some(n) if n <= self.buf.len() => Ok(()),
            _ => Err(CodecError::Truncated),
        }
    }

    fn digests(&mut self, count: usize) -> Result<Vec<Digest>, CodecError> {
        self.ensure(count, 32)?;
        (0..count).map(|_| self.digest()).collect()
    }

    fn finish(self) -> Result<(), CodecError> {
        match self.buf.len() {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

fn read_header(r: &mut Reader<'_>, magic: &[u8; 4]) -> Result<(), CodecError> {
    // Check magic before length so that short garbage reports BadMagic where possible.
    let got = &r.buf[..r.buf.len().min(4)];
    if got != &magic[..got.len()] {
        return Err(CodecError::BadMagic);
    }
    r.take(4)?;
    match r.u8()? {
        VERSION => Ok(()),
        v => Err(CodecError::UnsupportedVersion(v)),
    }
}

fn read_params(r: &mut Reader<'_>) -> Result<BloomParams, CodecError> {
    let m = r.u64()?;
    let k = r.u32()?;
    let chunk_size = r.u32()?;
    Ok(BloomParams::new(m, k, chunk_size)?)
}

fn put_params(out: &mut Vec<u8>, p: &BloomParams) {
    out.extend_from_slice(&p.m().to_le_bytes());
    out.extend_from_slice(&p.k().to_le_bytes());
    out.extend_from_slice(&p.chunk_size().to_le_bytes());
}

fn count_u16(what: &'static str, count: usize) -> Result<u16, CodecError> {
    u16::try_from(count).map_err(|_| CodecError::TooLarge { what, count })
}

pub fn encode_filter(tree: &BloomTree) -> Vec<u8> {
    let bytes = tree.filter().as_bytes();
    let mut out = Vec::with_capacity(FILTER_HEADER_LEN + bytes.len() + 32);
    out.extend_from_slice(FILTER_MAGIC);
    out.push(VERSION);
    put_params(&mut out, tree.params());
    out.extend_from_slice(bytes);
    out.extend_from_slice(tree.root().as_bytes());
    out
}

/// Decodes a filter file and rebuilds its tree; the stored root must match.
pub fn decode_filter(bytes: &[u8]) -> Result<BloomTree, CodecError> {
    let mut r = Reader { buf: bytes };
    read_header(&mut r, FILTER_MAGIC)?;
    let params = read_params(&mut r)?;
    let len = usize::try_from(params.filter_bytes()).map_err(|_| CodecError::Truncated)?;
    let body = r.take(len)?.to_vec();
    let root = r.digest()?;
    r.finish()?;
    let tree = BloomTree::build(BloomFilter::from_bytes(params, body)?);
    if tree.root() != root {
        return Err(CodecError::RootMismatch);
    }
    Ok(tree)
}

pub fn encode_proof(params: &BloomParams, proof: &Proof) -> Result<Vec<u8>, CodecError> {
    let size = params.chunk_size() as usize;
    let check_chunk = |c: &[u8]| {
        if c.len() == size {
            Ok(())
        } else {
            Err(CodecError::BadChunkLength {
                expected: size,
                got: c.len(),
            })
        }
    };

    let mut out = Vec::with_capacity(PROOF_HEADER_LEN + 64);
    out.extend_from_slice(PROOF_MAGIC);
    out.push(VERSION);
    match proof {
        Proof::Presence(p) => {
            if p.chunk_indices.len() != p.chunks.len() {
                return Err(CodecError::ChunkCountMismatch {
                    indices: p.chunk_indices.len(),
                    chunks: p.chunks.len(),
                });
            }
            let c = count_u16("chunk", p.chunks.len())?;
            let h = count_u16("digest", p.multiproof.hashes.len())?;
            out.push(KIND_PRESENCE);
            put_params(&mut out, params);
            out.extend_from_slice(&c.to_le_bytes());
            for i in &p.chunk_indices {
                out.extend_from_slice(&i.to_le_bytes());
            }
            for chunk in &p.chunks {
                check_chunk(chunk)?;
                out.extend_from_slice(chunk);
            }
            out.extend_from_slice(&h.to_le_bytes());
            for d in &p.multiproof.hashes {
                out.extend_from_slice(d.as_bytes());
            }
        }
        Proof::Absence(a) => {
            check_chunk(&a.chunk)?;
            let len = count_u16("digest", a.path.path.len())?;
            out.push(KIND_ABSENCE);
            put_params(&mut out, params);
            out.extend_from_slice(&a.chunk_index.to_le_bytes());
            out.extend_from_slice(&a.chunk);
            out.extend_from_slice(&len.to_le_bytes());
            for d in &a.path.path {
                out.extend_from_slice(d.as_bytes());
            }
        }
    }
    Ok(out)
}

/// Decodes a proof file into the echoed params and the proof.
pub fn decode_proof(bytes: &[u8]) -> Result<(BloomParams, Proof), CodecError> {
    let mut r = Reader { buf: bytes };
    read_header(&mut r, PROOF_MAGIC)?;
    let kind = r.u8()?;
    if kind != KIND_PRESENCE && kind != KIND_ABSENCE {
        return Err(CodecError::BadKind(kind));
    }
    let params = read_params(&mut r)?;
    let size = params.chunk_size() as usize;

    let proof = if kind == KIND_PRESENCE {
        let c = usize::from(r.u16()?);
        r.ensure(c, 8 + size)?;
        let chunk_indices = (0..c).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
        let chunks = (0..c)
            .map(|_| r.take(size).map(<[u8]>::to_vec))
            .collect::<Result<Vec<_>, _>>()?;
        let h = usize::from(r.u16()?);
        let hashes = r.digests(h)?;
        Proof::Presence(PresenceProof {
            chunk_indices,
            chunks,
            multiproof: MultiProof { hashes },
        })
    } else {
        let chunk_index = r.u64()?;
        let chunk = r.take(size)?.to_vec();
        let len = usize::from(r.u16()?);
        let path = r.digests(len)?;
        Proof::Absence(AbsenceProof {
            chunk_index,
            chunk,
            path: SingleProof { path },
        })
    };
    r.finish()?;
    Ok((params, proof))
}
