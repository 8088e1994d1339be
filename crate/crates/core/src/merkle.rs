//! Complete binary Merkle trees with single proofs and index-free multiproofs.
//!
//! Internal nodes are `SHA-256(0x01 || left || right)`. Leaves are opaque
//! 32-byte digests supplied by the caller.
//!
//! A multiproof lists the sibling digests the verifier cannot compute itself,
//! in a fixed order: level by level from the leaves up, and left to right
//! within a level. Both sides derive the same schedule from the requested
//! leaf positions alone, so the proof carries no position metadata.

use crate::par::Execution;
use sha2::{Digest as _, Sha256};
use std::fmt;
use thiserror::Error;

/// Domain separation prefix for internal nodes.
pub const NODE_PREFIX: u8 = 0x01;

/// Levels smaller than this are hashed sequentially even under `Execution::Parallel`.
const PAR_LEVEL_MIN: usize = 1024;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const LEN: usize = 32;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl From<[u8; 32]> for Digest {
    fn from(bytes: [u8; 32]) -> Self {
        Digest(bytes)
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    let mut h = Sha256::new();
    h.update([NODE_PREFIX]);
    h.update(left.0);
    h.update(right.0);
    Digest(h.finalize().into())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MerkleError {
    #[error("leaf count {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("leaf index {index} out of range for {leaf_count} leaves")]
    IndexOutOfRange { index: usize, leaf_count: usize },
    #[error("leaf indices must be non-empty and strictly increasing")]
    UnsortedIndices,
}

/// Sibling path from a leaf to the root, bottom-up.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SingleProof {
    pub path: Vec<Digest>,
}

/// Sibling digests in verifier consumption order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MultiProof {
    pub hashes: Vec<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleTree {
    levels: Vec<Vec<Digest>>,
}

impl MerkleTree {
    pub fn build(leaves: Vec<Digest>) -> Result<Self, MerkleError> {
        Self::build_with(leaves, Execution::default())
    }

    /// Builds all levels; the result is identical for every `exec`.
    pub fn build_with(leaves: Vec<Digest>, exec: Execution) -> Result<Self, MerkleError> {
        if !leaves.len().is_power_of_two() {
            return Err(MerkleError::NotPowerOfTwo(leaves.len()));
        }
        let mut levels = vec![leaves];
        while levels.last().expect("non-empty").len() > 1 {
            let below = levels.last().expect("non-empty");
            let exec = if below.len() >= PAR_LEVEL_MIN {
                exec
            } else {
                Execution::Sequential
            };
            let next = exec.map_range(below.len() / 2, |j| {
                node_hash(&below[2 * j], &below[2 * j + 1])
            });
            levels.push(next);
        }
        Ok(Self { levels })
    }

    pub fn root(&self) -> Digest {
        self.levels.last().expect("non-empty")[0]
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[0].len()
    }

    /// `log2(leaf_count)`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Vec<Digest>] {
        &self.levels
    }

    pub fn leaf(&self, index: usize) -> Option<&Digest> {
        self.levels[0].get(index)
    }

    pub fn prove_single(&self, leaf_index: usize) -> Result<SingleProof, MerkleError> {
        if leaf_index >= self.leaf_count() {
            return Err(MerkleError::IndexOutOfRange {
                index: leaf_index,
                leaf_count: self.leaf_count(),
            });
        }
        let path = self.levels[..self.depth()]
            .iter()
            .enumerate()
            .map(|(t, level)| level[(leaf_index >> t) ^ 1])
            .collect();
        Ok(SingleProof { path })
    }

    /// Multiproof for a strictly increasing set of leaf positions.
    pub fn prove_multi(&self, leaf_indices: &[usize]) -> Result<MultiProof, MerkleError> {
        if leaf_indices.is_empty() || leaf_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MerkleError::UnsortedIndices);
        }
        let last = *leaf_indices.last().expect("non-empty");
        if last >= self.leaf_count() {
            return Err(MerkleError::IndexOutOfRange {
                index: last,
                leaf_count: self.leaf_count(),
            });
        }

        let mut hashes = Vec::new();
        let mut known = leaf_indices.to_vec();
        for level in &self.levels[..self.depth()] {
            let mut i = 0;
            while i < known.len() {
                let p = known[i];
                if p.is_multiple_of(2) && known.get(i + 1) == Some(&(p + 1)) {
                    i += 2;
                } else {
                    hashes.push(level[p ^ 1]);
                    i += 1;
                }
            }
            known = parents(&known);
        }
        Ok(MultiProof { hashes })
    }
}

fn parents(known: &[usize]) -> Vec<usize> {
    let mut up: Vec<usize> = known.iter().map(|p| p / 2).collect();
    up.dedup();
    up
}

fn depth_of(leaf_count: u64) -> Option<u32> {
    leaf_count
        .is_power_of_two()
        .then(|| leaf_count.trailing_zeros())
}

/// Folds `leaf` up the path; bit `t` of `leaf_index` set means the running
/// digest is the right child at level `t`.
pub fn verify_single(
    root: &Digest,
    leaf: &Digest,
    leaf_index: u64,
    leaf_count: u64,
    proof: &SingleProof,
) -> bool {
    let Some(depth) = depth_of(leaf_count) else {
        return false;
    };
    if leaf_index >= leaf_count || proof.path.len() != depth as usize {
        return false;
    }
    let mut acc = *leaf;
    for (t, sibling) in proof.path.iter().enumerate() {
        acc = if leaf_index >> t & 1 == 1 {
            node_hash(sibling, &acc)
        } else {
            node_hash(&acc, sibling)
        };
    }
    acc == *root
}

/// Replays the multiproof schedule over `leaves` (sorted by position) and
/// checks that the result is `root` and that every proof hash was used.
pub fn verify_multi(
    root: &Digest,
    leaves: &[(u64, Digest)],
    leaf_count: u64,
    proof: &MultiProof,
) -> bool {
    let Some(depth) = depth_of(leaf_count) else {
        return false;
    };
    if leaves.is_empty()
        || leaves.windows(2).any(|w| w[0].0 >= w[1].0)
        || leaves.last().is_none_or(|l| l.0 >= leaf_count)
    {
        return false;
    }

    let mut supply = proof.hashes.iter();
    let mut known: Vec<(u64, Digest)> = leaves.to_vec();
    for _ in 0..depth {
        let mut next = Vec::with_capacity(known.len());
        let mut i = 0;
        while i < known.len() {
            let (p, d) = known[i];
            let parent = if p % 2 == 0 && known.get(i + 1).map(|n| n.0) == Some(p + 1) {
                i += 2;
                node_hash(&d, &known[i - 1].1)
            } else {
                let Some(sibling) = supply.next() else {
                    return false;
                };
                i += 1;
                if p % 2 == 0 {
                    node_hash(&d, sibling)
                } else {
                    node_hash(sibling, &d)
                }
            };
            next.push((p / 2, parent));
        }
        known = next;
    }
    supply.next().is_none() && known.len() == 1 && known[0] == (0, *root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_leaves(n: usize, seed: u64) -> Vec<Digest> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Digest(rng.gen())).collect()
    }

    fn d(b: u8) -> Digest {
        Digest([b; 32])
    }

    #[test]
    fn node_hash_golden() {
        let mut a = [0u8; 32];
        let mut b = [0u8; 32];
        for i in 0..32 {
            a[i] = i as u8;
            b[i] = 32 + i as u8;
        }
        assert_eq!(
            node_hash(&Digest(a), &Digest(b)).to_hex(),
            "1a378704c17da31e2d05b6d121c2bb2c7d76f6ee6fa8f983e596c2d034963c57"
        );
        assert_ne!(
            node_hash(&Digest(a), &Digest(b)),
            node_hash(&Digest(b), &Digest(a))
        );
    }

    #[test]
    fn small_trees() {
        let t = MerkleTree::build(vec![d(7)]).unwrap();
        assert_eq!(t.root(), d(7));
        assert_eq!(t.depth(), 0);
        assert!(t.prove_single(0).unwrap().path.is_empty());

        let t = MerkleTree::build(vec![d(1), d(2)]).unwrap();
        assert_eq!(t.root(), node_hash(&d(1), &d(2)));

        let l: Vec<Digest> = (0..4).map(d).collect();
        let t = MerkleTree::build(l.clone()).unwrap();
        assert_eq!(
            t.root(),
            node_hash(&node_hash(&l[0], &l[1]), &node_hash(&l[2], &l[3]))
        );
        assert_eq!(
            t.prove_single(3).unwrap().path,
            vec![l[2], t.levels()[1][0]]
        );
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert_eq!(
            MerkleTree::build(vec![]),
            Err(MerkleError::NotPowerOfTwo(0))
        );
        assert_eq!(
            MerkleTree::build(vec![d(0); 3]),
            Err(MerkleError::NotPowerOfTwo(3))
        );
    }

    #[test]
    fn parallel_build_is_identical() {
        let leaves = random_leaves(4096, 1);
        let a = MerkleTree::build_with(leaves.clone(), Execution::Sequential).unwrap();
        let b = MerkleTree::build_with(leaves, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_round_trip_and_mutation() {
        let leaves = random_leaves(8, 2);
        let t = MerkleTree::build(leaves.clone()).unwrap();
        let root = t.root();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (i, leaf) in leaves.iter().enumerate() {
            let proof = t.prove_single(i).unwrap();
            assert_eq!(proof.path.len(), 3);
            assert!(verify_single(&root, leaf, i as u64, 8, &proof));
            for j in 0..8 {
                if j != i {
                    assert!(!verify_single(&root, leaf, j as u64, 8, &proof));
                }
            }
            for _ in 0..20 {
                let mut bad = proof.clone();
                let h = rng.gen_range(0..bad.path.len());
                let byte = rng.gen_range(0..32);
                bad.path[h].0[byte] ^= 1 << rng.gen_range(0..8);
                assert!(!verify_single(&root, leaf, i as u64, 8, &bad));
            }
            let mut short = proof.clone();
            short.path.pop();
            assert!(!verify_single(&root, leaf, i as u64, 8, &short));
            assert!(!verify_single(&root, leaf, i as u64, 16, &proof));
            assert!(!verify_single(&root, leaf, i as u64, 7, &proof));
        }
        assert!(t.prove_single(8).is_err());
    }

    #[test]
    fn multiproof_paper_shape() {
        let t = MerkleTree::build(random_leaves(8, 4)).unwrap();
        let l1 = &t.levels()[1];
        let l0 = &t.levels()[0];
        let p = t.prove_multi(&[0, 3, 6]).unwrap();
        assert_eq!(p.hashes, vec![l0[1], l0[2], l0[7], l1[2]]);
        let singles: usize = [0, 3, 6]
            .iter()
            .map(|&i| t.prove_single(i).unwrap().path.len())
            .sum();
        assert_eq!(singles, 9);

        let p = t.prove_multi(&[0, 1]).unwrap();
        assert_eq!(p.hashes, vec![l1[1], t.levels()[2][1]]);

        let all: Vec<usize> = (0..8).collect();
        assert!(t.prove_multi(&all).unwrap().hashes.is_empty());
    }

    #[test]
    fn multiproof_rejects_bad_requests() {
        let t = MerkleTree::build(random_leaves(8, 5)).unwrap();
        assert_eq!(t.prove_multi(&[]), Err(MerkleError::UnsortedIndices));
        assert_eq!(t.prove_multi(&[3, 1]), Err(MerkleError::UnsortedIndices));
        assert_eq!(t.prove_multi(&[1, 1]), Err(MerkleError::UnsortedIndices));
        assert!(matches!(
            t.prove_multi(&[1, 8]),
            Err(MerkleError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn verify_multi_exact_consumption() {
        let leaves = random_leaves(8, 6);
        let t = MerkleTree::build(leaves.clone()).unwrap();
        let idx = [2usize, 5];
        let entries: Vec<(u64, Digest)> = idx.iter().map(|&i| (i as u64, leaves[i])).collect();
        let proof = t.prove_multi(&idx).unwrap();
        assert!(verify_multi(&t.root(), &entries, 8, &proof));

        let mut extra = proof.clone();
        extra.hashes.push(d(0));
        assert!(!verify_multi(&t.root(), &entries, 8, &extra));

        let mut short = proof.clone();
        short.hashes.pop();
        assert!(!verify_multi(&t.root(), &entries, 8, &short));

        let dup = vec![entries[0], entries[0]];
        assert!(!verify_multi(&t.root(), &dup, 8, &proof));
        assert!(!verify_multi(&t.root(), &[], 8, &proof));
        assert!(!verify_multi(&t.root(), &entries, 6, &proof));
        assert!(!verify_multi(&t.root(), &[(9, leaves[1])], 8, &proof));
    }

    #[test]
    fn one_leaf_tree_multi() {
        let t = MerkleTree::build(vec![d(9)]).unwrap();
        let p = t.prove_multi(&[0]).unwrap();
        assert!(p.hashes.is_empty());
        assert!(verify_multi(&t.root(), &[(0, d(9))], 1, &p));
        assert!(!verify_multi(&t.root(), &[(0, d(8))], 1, &p));
    }
}
