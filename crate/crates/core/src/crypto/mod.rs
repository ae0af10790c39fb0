// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Hashing and the sparse Merkle tree that holds committed rollup state.

pub mod hash;
pub mod smt;

pub use hash::{hash, hash_node, hash_parts, Digest, Domain};
pub use smt::{MerkleProof, SmtError, SmtKey, SparseMerkleTree};
