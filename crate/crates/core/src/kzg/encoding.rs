// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! Blob ↔ polynomial encoding (coefficient form).
//!
//! The byte stream `len (8 bytes, big-endian) ‖ data ‖ zero padding` is cut
//! into `chunk_bytes`-sized pieces; piece `k` read as a big-endian integer is
//! coefficient `k`. With `chunk_bytes = FIELD_BYTES - 1` every piece is a
//! canonical field element. Coefficient 0 therefore starts with the length.

use serde::{Deserialize, Serialize};

use super::field::{FieldElement, FIELD_BYTES};
use super::poly::Polynomial;
use super::KzgError;

pub const HEADER_BYTES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingParams {
    /// Maximum polynomial degree `n`.
    pub degree_bound: usize,
    pub chunk_bytes: usize,
}

impl EncodingParams {
    pub fn new(degree_bound: usize) -> Self {
        EncodingParams { degree_bound, chunk_bytes: FIELD_BYTES - 1 }
    }

    pub fn coefficient_count(&self) -> usize {
        self.degree_bound + 1
    }

    /// Largest blob that fits in one polynomial.
    pub fn max_blob_bytes(&self) -> usize {
        self.coefficient_count() * self.chunk_bytes - HEADER_BYTES
    }
}

pub fn encode_blob(data: &[u8], params: &EncodingParams) -> Result<Polynomial, KzgError> {
    let max = params.max_blob_bytes();
    if data.len() > max {
        return Err(KzgError::BlobTooLarge { len: data.len(), max });
    }
    let mut stream = Vec::with_capacity(HEADER_BYTES + data.len());
    stream.extend_from_slice(&(data.len() as u64).to_be_bytes());
    stream.extend_from_slice(data);
    let coeffs = stream
        .chunks(params.chunk_bytes)
        .map(|chunk| {
            let mut buf = [0u8; FIELD_BYTES];
            buf[1..1 + chunk.len()].copy_from_slice(chunk);
            FieldElement::from_canonical_bytes(&buf).expect("31-byte chunk is canonical")
        })
        .collect();
    Ok(Polynomial::new(coeffs))
}

pub fn decode_blob(poly: &Polynomial, params: &EncodingParams) -> Result<Vec<u8>, KzgError> {
    let malformed = |m: &str| KzgError::MalformedEncoding(m.to_string());
    if poly.coeffs().len() > params.coefficient_count() {
        return Err(malformed("degree exceeds bound"));
    }
    let mut stream = Vec::with_capacity(params.coefficient_count() * params.chunk_bytes);
    for c in poly.coeffs() {
        let bytes = c.to_bytes();
        let lead = FIELD_BYTES - params.chunk_bytes;
        if bytes[..lead].iter().any(|b| *b != 0) {
            return Err(malformed("coefficient exceeds chunk width"));
        }
        stream.extend_from_slice(&bytes[lead..]);
    }
    stream.resize(stream.len().max(HEADER_BYTES), 0);
    let mut len_bytes = [0u8; HEADER_BYTES];
    len_bytes.copy_from_slice(&stream[..HEADER_BYTES]);
    let len = u64::from_be_bytes(len_bytes);
    if len > params.max_blob_bytes() as u64 {
        return Err(malformed("length header exceeds capacity"));
    }
    let len = len as usize;
    let end = HEADER_BYTES + len;
    if end > stream.len() {
        // Trailing zero coefficients are trimmed, so pad back out.
        stream.resize(end, 0);
    }
    if stream[end..].iter().any(|b| *b != 0) {
        return Err(malformed("non-zero padding after payload"));
    }
    Ok(stream[HEADER_BYTES..end].to_vec())
}

/// Splits an arbitrarily large payload into blob-sized pieces.
pub fn split_payload<'a>(data: &'a [u8], params: &EncodingParams) -> Vec<&'a [u8]> {
    if data.is_empty() {
        return vec![data];
    }
    data.chunks(params.max_blob_bytes()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_blob_is_zero_polynomial() {
        let p = encode_blob(&[], &EncodingParams::new(3)).unwrap();
        // Length 0 in the header and nothing else.
        assert!(p.is_zero());
        assert_eq!(decode_blob(&p, &EncodingParams::new(3)).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn one_chunk_has_degree_at_most_one() {
        let params = EncodingParams::new(15);
        // 8 header bytes + 31 data bytes span exactly two 31-byte chunks.
        let p = encode_blob(&[0xAB; 31], &params).unwrap();
        assert_eq!(p.degree(), Some(1));
        // Up to 23 data bytes share coefficient 0 with the header.
        let p = encode_blob(&[1; 23], &params).unwrap();
        assert_eq!(p.degree(), Some(0));
        let p = encode_blob(&[1; 24], &params).unwrap();
        assert_eq!(p.degree(), Some(1));
    }

    #[test]
    fn length_lives_in_coefficient_zero() {
        let p = encode_blob(&[9, 9, 9], &EncodingParams::new(1)).unwrap();
        let c0 = p.coeffs()[0].to_bytes();
        assert_eq!(c0[0], 0);
        assert_eq!(&c0[1..9], &3u64.to_be_bytes());
        assert_eq!(&c0[9..12], &[9, 9, 9]);
    }

    #[test]
    fn capacity_boundary() {
        let params = EncodingParams::new(15);
        assert_eq!(params.max_blob_bytes(), 16 * 31 - 8);
        let full = vec![0xFF; params.max_blob_bytes()];
        let p = encode_blob(&full, &params).unwrap();
        assert_eq!(p.degree(), Some(15));
        assert_eq!(decode_blob(&p, &params).unwrap(), full);
        assert!(matches!(
            encode_blob(&vec![0; params.max_blob_bytes() + 1], &params),
            Err(KzgError::BlobTooLarge { .. })
        ));
    }

    #[test]
    fn malformed_inputs() {
        let params = EncodingParams::new(3);
        let wide = Polynomial::new(vec![-FieldElement::one()]);
        assert!(matches!(decode_blob(&wide, &params), Err(KzgError::MalformedEncoding(_))));
        let too_long = Polynomial::new(vec![FieldElement::from_u64(1); 5]);
        assert!(matches!(decode_blob(&too_long, &params), Err(KzgError::MalformedEncoding(_))));
        // Header claims 1 byte but a later byte is non-zero.
        let mut c0 = [0u8; 32];
        c0[8] = 1;
        c0[20] = 7;
        let p = Polynomial::new(vec![FieldElement::from_canonical_bytes(&c0).unwrap()]);
        assert!(matches!(decode_blob(&p, &params), Err(KzgError::MalformedEncoding(_))));
    }

    #[test]
    fn split_covers_payload() {
        let params = EncodingParams::new(3);
        let data: Vec<u8> = (0..500u32).map(|i| i as u8).collect();
        let parts = split_payload(&data, &params);
        assert!(parts.iter().all(|p| p.len() <= params.max_blob_bytes()));
        assert_eq!(parts.concat(), data);
    }
}
