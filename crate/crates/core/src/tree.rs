//! The Bloom tree itself: chunk commitments plus presence and absence proofs.

use crate::bloom::{bit_at, indices, BloomFilter, BloomParams};
use crate::merkle::{self, Digest, MerkleTree, MultiProof, SingleProof};
use crate::par::Execution;
use sha2::{Digest as _, Sha256};
use std::fmt;

/// Domain separation prefix for chunk leaves.
pub const LEAF_PREFIX: u8 = 0x00;

/// `SHA-256(0x00 || chunk_index as u64 LE || chunk)`.
///
/// Salting with the index binds a chunk to its position, so a valid chunk
/// cannot be presented as some other chunk.
pub fn leaf_hash(chunk_index: u64, chunk: &[u8]) -> Digest {
    let mut h = Sha256::new();
    h.update([LEAF_PREFIX]);
    h.update(chunk_index.to_le_bytes());
    h.update(chunk);
    Digest(h.finalize().into())
}

/// Maps a global bit index to `(chunk_index, bit_within_chunk)`, both 0-based.
pub fn locate(bit_index: u64, params: &BloomParams) -> (u64, u64) {
    let bits = params.chunk_bits();
    (bit_index / bits, bit_index % bits)
}

/// Sorted, deduplicated chunk indices touched by `element`.
pub fn chunk_set(element: &[u8], params: &BloomParams) -> Vec<u64> {
    let mut chunks: Vec<u64> = indices(element, params)
        .map(|i| locate(i, params).0)
        .collect();
    chunks.sort_unstable();
    chunks.dedup();
    chunks
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresenceProof {
    pub chunk_indices: Vec<u64>,
    pub chunks: Vec<Vec<u8>>,
    pub multiproof: MultiProof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbsenceProof {
    pub chunk_index: u64,
    pub chunk: Vec<u8>,
    pub path: SingleProof,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Proof {
    Presence(PresenceProof),
    Absence(AbsenceProof),
}

impl Proof {
    pub fn is_presence(&self) -> bool {
        matches!(self, Proof::Presence(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Proof::Presence(_) => "presence",
            Proof::Absence(_) => "absence",
        }
    }

    /// Number of Merkle digests carried.
    pub fn digest_count(&self) -> usize {
        match self {
            Proof::Presence(p) => p.multiproof.hashes.len(),
            Proof::Absence(a) => a.path.path.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Every bit is set in committed chunks. Bloom filters have false
    /// positives, so this is not proof of insertion.
    MaybePresent,
    /// A committed chunk has a zero at one of the element's bits.
    DefinitelyAbsent,
    Invalid(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        !matches!(self, Verdict::Invalid(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::MaybePresent => f.write_str("MaybePresent"),
            Verdict::DefinitelyAbsent => f.write_str("DefinitelyAbsent"),
            Verdict::Invalid(reason) => write!(f, "Invalid: {reason}"),
        }
    }
}

fn invalid(reason: impl Into<String>) -> Verdict {
    Verdict::Invalid(reason.into())
}

/// A filter together with the Merkle tree over its index-salted chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomTree {
    filter: BloomFilter,
    tree: MerkleTree,
}

impl BloomTree {
    pub fn build(filter: BloomFilter) -> Self {
        Self::build_with(filter, Execution::default())
    }

    pub fn build_with(filter: BloomFilter, exec: Execution) -> Self {
        let chunks: Vec<&[u8]> = filter.chunks().collect();
        let leaves = exec.map_range(chunks.len(), |i| leaf_hash(i as u64, chunks[i]));
        let tree = MerkleTree::build_with(leaves, exec)
            .expect("chunk count is a power of two by BloomParams invariant");
        Self { filter, tree }
    }

    pub fn root(&self) -> Digest {
        self.tree.root()
    }

    pub fn params(&self) -> &BloomParams {
        self.filter.params()
    }

    pub fn filter(&self) -> &BloomFilter {
        &self.filter
    }

    pub fn merkle(&self) -> &MerkleTree {
        &self.tree
    }

    pub fn into_filter(self) -> BloomFilter {
        self.filter
    }

    /// Presence proof if every bit of `element` is set, otherwise an absence
    /// proof for the lowest-index chunk holding one of its zero bits.
    pub fn prove(&self, element: &[u8]) -> Proof {
        let params = *self.params();
        let zero_chunk = indices(element, &params)
            .filter(|&i| !self.filter.bit(i))
            .map(|i| locate(i, &params).0)
            .min();

        match zero_chunk {
            Some(c) => Proof::Absence(AbsenceProof {
                chunk_index: c,
                chunk: self.filter.chunk(c).to_vec(),
                path: self
                    .tree
                    .prove_single(c as usize)
                    .expect("chunk index within tree"),
            }),
            None => {
                let chunk_indices = chunk_set(element, &params);
                let positions: Vec<usize> = chunk_indices.iter().map(|&c| c as usize).collect();
                Proof::Presence(PresenceProof {
                    chunks: chunk_indices
                        .iter()
                        .map(|&c| self.filter.chunk(c).to_vec())
                        .collect(),
                    multiproof: self
                        .tree
                        .prove_multi(&positions)
                        .expect("sorted unique in-range chunk set"),
                    chunk_indices,
                })
            }
        }
    }
}

/// Checks `proof` for `element` against a trusted root. The verifier derives
/// the element's bit positions itself and never trusts positions in the proof.
pub fn verify(root: &Digest, params: &BloomParams, element: &[u8], proof: &Proof) -> Verdict {
    match proof {
        Proof::Presence(p) => verify_presence(root, params, element, p),
        Proof::Absence(a) => verify_absence(root, params, element, a),
    }
}

fn verify_presence(
    root: &Digest,
    params: &BloomParams,
    element: &[u8],
    proof: &PresenceProof,
) -> Verdict {
    let expected = chunk_set(element, params);
    if proof.chunk_indices != expected {
        return invalid("chunk set does not match the element's chunks");
    }
    if proof.chunks.len() != expected.len() {
        return invalid("chunk count does not match chunk index count");
    }
    let size = params.chunk_size() as usize;
    if proof.chunks.iter().any(|c| c.len() != size) {
        return invalid("chunk has wrong length");
    }
    for i in indices(element, params) {
        let (c, local) = locate(i, params);
        let slot = expected
            .binary_search(&c)
            .expect("chunk set covers all indices");
        if !bit_at(&proof.chunks[slot], local) {
            return invalid(format!("bit {i} is zero in a presence proof"));
        }
    }
    let leaves: Vec<(u64, Digest)> = expected
        .iter()
        .zip(&proof.chunks)
        .map(|(&c, chunk)| (c, leaf_hash(c, chunk)))
        .collect();
    if merkle::verify_multi(root, &leaves, params.chunk_count(), &proof.multiproof) {
        Verdict::MaybePresent
    } else {
        invalid("multiproof does not reproduce the root")
    }
}

fn verify_absence(
    root: &Digest,
    params: &BloomParams,
    element: &[u8],
    proof: &AbsenceProof,
) -> Verdict {
    if proof.chunk.len() != params.chunk_size() as usize {
        return invalid("chunk has wrong length");
    }
    let mut relevant = false;
    let mut has_zero = false;
    for i in indices(element, params) {
        let (c, local) = locate(i, params);
        if c == proof.chunk_index {
            relevant = true;
            has_zero |= !bit_at(&proof.chunk, local);
        }
    }
    if !relevant {
        return invalid("chunk is not one of the element's chunks");
    }
    if !has_zero {
        return invalid("chunk has no zero at the element's bits");
    }
    let leaf = leaf_hash(proof.chunk_index, &proof.chunk);
    if merkle::verify_single(
        root,
        &leaf,
        proof.chunk_index,
        params.chunk_count(),
        &proof.path,
    ) {
        Verdict::DefinitelyAbsent
    } else {
        invalid("Merkle path does not reproduce the root")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloom::derive_params;

    #[test]
    fn leaf_hash_golden() {
        let chunk = [0xde, 0xad, 0xbe, 0xef, 0x00, 0x11, 0x22, 0x33];
        assert_eq!(
            leaf_hash(5, &chunk).to_hex(),
            "80f119a4e48dcd18c2cb130805df124c8bf2aba16e466985ca82a71ca0081fb9"
        );
        assert_ne!(leaf_hash(5, &chunk), leaf_hash(6, &chunk));
    }

    #[test]
    fn locate_worked_example() {
        let p = BloomParams::new(256 * 16, 3, 32).unwrap();
        assert_eq!(locate(800, &p), (3, 32));
        assert_eq!(locate(1602, &p), (6, 66));
        assert_eq!(locate(3650, &p), (14, 66));
        assert_eq!(locate(0, &p), (0, 0));
    }

    #[test]
    fn single_chunk_root_is_leaf() {
        let p = derive_params(3, 0.1, 64).unwrap();
        assert_eq!(p.chunk_count(), 1);
        let mut f = BloomFilter::new(p);
        f.insert(b"x");
        let t = BloomTree::build(f.clone());
        assert_eq!(t.root(), leaf_hash(0, f.as_bytes()));
    }

    #[test]
    fn empty_filter_gives_lowest_chunk_absence() {
        let p = derive_params(1000, 0.01, 8).unwrap();
        let t = BloomTree::build(BloomFilter::new(p));
        for e in [&b"a"[..], b"bb", b"ccc"] {
            match t.prove(e) {
                Proof::Absence(a) => {
                    assert_eq!(a.chunk_index, chunk_set(e, &p)[0]);
                    assert_eq!(a.path.path.len(), p.depth() as usize);
                }
                Proof::Presence(_) => panic!("empty filter produced presence proof"),
            }
            assert_eq!(
                verify(&t.root(), &p, e, &t.prove(e)),
                Verdict::DefinitelyAbsent
            );
        }
    }

    #[test]
    fn absence_for_foreign_chunk_is_invalid() {
        let p = derive_params(1000, 0.01, 8).unwrap();
        let t = BloomTree::build(BloomFilter::new(p));
        let chunks = chunk_set(b"probe", &p);
        let foreign = (0..p.chunk_count()).find(|c| !chunks.contains(c)).unwrap();
        let forged = Proof::Absence(AbsenceProof {
            chunk_index: foreign,
            chunk: t.filter().chunk(foreign).to_vec(),
            path: t.merkle().prove_single(foreign as usize).unwrap(),
        });
        assert!(!verify(&t.root(), &p, b"probe", &forged).is_valid());
    }

    #[test]
    fn verdict_display() {
        assert_eq!(Verdict::MaybePresent.to_string(), "MaybePresent");
        assert_eq!(Verdict::DefinitelyAbsent.to_string(), "DefinitelyAbsent");
        assert_eq!(invalid("x").to_string(), "Invalid: x");
    }
}
