// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

mod common;

use std::sync::OnceLock;

use proptest::prelude::*;
use rollup_sim::codec::{Decode, Encode};
use rollup_sim::kzg::{
    combine_commitments, combine_polynomials, commit, decode_blob, encode_blob, interpolate, interpolate_bounded,
    open_at, setup, split_payload, verify_opening, EncodingParams, FieldElement, InterpolationError, KzgCommitment,
    OpeningProof, Polynomial, TrustedSetup,
};

const DEGREE: usize = 15;

fn srs() -> &'static TrustedSetup {
    static SRS: OnceLock<TrustedSetup> = OnceLock::new();
    SRS.get_or_init(|| setup(DEGREE, b"kzg-props").unwrap())
}

fn fe() -> impl Strategy<Value = FieldElement> {
    any::<[u8; 32]>().prop_map(|b| FieldElement::from_bytes_mod_order(&b))
}

fn poly(max_len: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(fe(), 1..=max_len).prop_map(Polynomial::new)
}

fn params() -> EncodingParams {
    EncodingParams::new(DEGREE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn blob_encoding_is_a_bijection(data in prop::collection::vec(any::<u8>(), 0..=params().max_blob_bytes())) {
        let p = encode_blob(&data, &params()).unwrap();
        prop_assert!(p.coeffs().len() <= DEGREE + 1);
        prop_assert_eq!(decode_blob(&p, &params()).unwrap(), data);
    }

    #[test]
    fn oversized_blobs_are_rejected(extra in 1usize..64) {
        let data = vec![7u8; params().max_blob_bytes() + extra];
        prop_assert!(encode_blob(&data, &params()).is_err());
    }

    #[test]
    fn split_payload_covers_the_input(data in prop::collection::vec(any::<u8>(), 0..2000)) {
        let pieces = split_payload(&data, &params());
        prop_assert!(pieces.iter().all(|p| p.len() <= params().max_blob_bytes()));
        prop_assert_eq!(pieces.concat(), data.clone());
        prop_assert_eq!(pieces.len(), data.len().div_ceil(params().max_blob_bytes()).max(1));
    }

    #[test]
    fn interpolation_recovers_the_polynomial(p in poly(DEGREE + 1), start in 0u64..1000) {
        let points: Vec<_> = (0..=DEGREE as u64)
            .map(|i| {
                let x = FieldElement::from_u64(start + i);
                (x, p.evaluate(&x))
            })
            .collect();
        prop_assert_eq!(interpolate(&points).unwrap(), p.clone());
        prop_assert_eq!(interpolate_bounded(&points, DEGREE).unwrap(), p);
    }

    #[test]
    fn bounded_interpolation_rejects_a_bad_extra_point(p in poly(DEGREE + 1), junk in fe()) {
        let mut points: Vec<_> = (1..=DEGREE as u64 + 2)
            .map(|i| {
                let x = FieldElement::from_u64(i);
                (x, p.evaluate(&x))
            })
            .collect();
        let last = points.len() - 1;
        prop_assume!(junk != points[last].1);
        points[last].1 = junk;
        prop_assert_eq!(
            interpolate_bounded(&points, DEGREE).unwrap_err(),
            InterpolationError::InconsistentPoints { max_degree: DEGREE }
        );
    }

    #[test]
    fn commitment_is_linear(p in poly(DEGREE + 1), q in poly(DEGREE + 1), a in fe(), b in fe()) {
        let s = srs();
        let combined = combine_polynomials(&[(a, &p), (b, &q)]);
        let oracle = common::combine_coeffs(&[(a, p.coeffs().to_vec()), (b, q.coeffs().to_vec())]);
        prop_assert_eq!(combined.clone(), Polynomial::new(oracle));
        let lhs = commit(s, &combined).unwrap();
        let rhs = combine_commitments(&[(a, commit(s, &p).unwrap()), (b, commit(s, &q).unwrap())]);
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(KzgCommitment::from_bytes(&lhs.to_bytes()), Some(lhs));
    }

    #[test]
    fn openings_verify_and_bind(p in poly(DEGREE + 1), z in fe(), delta in 1u64..u64::MAX) {
        let s = srs();
        let cm = commit(s, &p).unwrap();
        let proof = open_at(s, &p, z).unwrap();
        prop_assert_eq!(proof.value, p.evaluate(&z));
        prop_assert!(verify_opening(s, &cm, &proof));
        prop_assert_eq!(OpeningProof::from_bytes(&proof.to_bytes()).unwrap(), proof);

        let bump = FieldElement::from_u64(delta);
        let wrong_value = OpeningProof { value: proof.value + bump, ..proof };
        prop_assert!(!verify_opening(s, &cm, &wrong_value));
        let moved = OpeningProof { point: proof.point + bump, ..proof };
        if p.evaluate(&moved.point) != proof.value {
            prop_assert!(!verify_opening(s, &cm, &moved));
        }
        let other = commit(s, &Polynomial::new(vec![bump])).unwrap();
        prop_assume!(other != cm);
        prop_assert!(!verify_opening(s, &other, &proof));
    }
}

#[test]
fn degree_above_the_setup_is_rejected() {
    let p = Polynomial::new((1..=DEGREE as u64 + 2).map(FieldElement::from_u64).collect());
    assert!(commit(srs(), &p).is_err());
    assert!(open_at(srs(), &p, FieldElement::one()).is_err());
}
