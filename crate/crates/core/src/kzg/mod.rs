// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Polynomial arithmetic over the BLS12-381 scalar field and KZG commitments.

pub mod encoding;
pub mod field;
pub mod poly;
pub mod scheme;

use thiserror::Error;

pub use encoding::{decode_blob, encode_blob, split_payload, EncodingParams, HEADER_BYTES};
pub use field::{FieldElement, FIELD_BYTES};
pub use poly::{interpolate, interpolate_bounded, InterpolationError, Polynomial};
pub use scheme::{
    combine_commitments, combine_polynomials, commit, open_at, setup, verify_opening, KzgCommitment, OpeningProof,
    TrustedSetup, G1_BYTES,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KzgError {
    #[error("degree bound must be at least 1")]
    InvalidDegreeBound,
    #[error("polynomial degree {degree} exceeds setup maximum {max}")]
    DegreeTooHigh { degree: usize, max: usize },
    #[error("blob of {len} bytes exceeds capacity {max}")]
    BlobTooLarge { len: usize, max: usize },
    #[error("malformed blob encoding: {0}")]
    MalformedEncoding(String),
}
