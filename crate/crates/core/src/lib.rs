//! Bloom trees: a Bloom filter split into fixed-size chunks, each chunk hashed
//! together with its index, and the chunk digests committed under a binary
//! Merkle root.
//!
//! A holder of the root (and the filter geometry) can check two kinds of
//! claims about an element without ever seeing the whole filter:
//!
//! * presence: the chunks covering all `k` bit positions of the element plus
//!   one compact multiproof for them. The verdict is only "maybe present",
//!   since Bloom filters admit false positives.
//! * absence: a single chunk that has a zero at one of the element's bit
//!   positions plus its Merkle path. The verdict is exact.
//!
//! Data-parallel work (leaf hashing, the experiment grid, batch probing) runs
//! on rayon when the `parallel` feature is enabled (the default) and falls
//! back to plain iterators otherwise.

pub mod bloom;
pub mod codec;
pub mod experiment;
pub mod merkle;
pub mod par;
pub mod tree;

pub use bloom::{derive_params, fpr, BloomFilter, BloomParams, ParamsError};
pub use codec::{decode_filter, decode_proof, encode_filter, encode_proof, CodecError};
pub use experiment::{run_cell, run_grid, ExperimentConfig, ExperimentError, ExperimentRow};
pub use merkle::{Digest, MerkleError, MerkleTree, MultiProof, SingleProof};
pub use par::Execution;
pub use tree::{leaf_hash, locate, AbsenceProof, BloomTree, PresenceProof, Proof, Verdict};
