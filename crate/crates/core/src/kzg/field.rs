// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use ark_bls12_381::Fr;
use ark_ff::{BigInt, BigInteger, Field, One, PrimeField, Zero};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::codec::{hex_bytes, Decode, DecodeError, Encode, Reader};

/// Bytes in the canonical big-endian encoding of a field element.
pub const FIELD_BYTES: usize = 32;

/// Element of the BLS12-381 scalar field, always held in reduced form.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
#[repr(transparent)]
pub struct FieldElement(pub(crate) Fr);

impl FieldElement {
    pub fn zero() -> Self {
        FieldElement(Fr::zero())
    }

    pub fn one() -> Self {
        FieldElement(Fr::one())
    }

    pub fn from_u64(v: u64) -> Self {
        FieldElement(Fr::from(v))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn inverse(&self) -> Option<Self> {
        self.0.inverse().map(FieldElement)
    }

    pub fn pow(&self, exp: u64) -> Self {
        FieldElement(self.0.pow([exp]))
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        FieldElement(Fr::from_be_bytes_mod_order(&wide))
    }

    /// Reduces an arbitrary byte string (e.g. a 256-bit draw) modulo the field order.
    pub fn from_bytes_mod_order(bytes: &[u8]) -> Self {
        FieldElement(Fr::from_be_bytes_mod_order(bytes))
    }

    /// Parses a canonical big-endian encoding; rejects values ≥ the modulus.
    pub fn from_canonical_bytes(bytes: &[u8; FIELD_BYTES]) -> Option<Self> {
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let start = FIELD_BYTES - 8 * (i + 1);
            let mut w = [0u8; 8];
            w.copy_from_slice(&bytes[start..start + 8]);
            *limb = u64::from_be_bytes(w);
        }
        Fr::from_bigint(BigInt::new(limbs)).map(FieldElement)
    }

    pub fn to_bytes(&self) -> [u8; FIELD_BYTES] {
        let v = self.0.into_bigint().to_bytes_be();
        let mut out = [0u8; FIELD_BYTES];
        out[FIELD_BYTES - v.len()..].copy_from_slice(&v);
        out
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }
}

/// Inverts every element in place with a single field inversion.
/// Panics if any element is zero.
pub fn batch_inverse(values: &mut [FieldElement]) {
    let mut prefix = Vec::with_capacity(values.len());
    let mut acc = FieldElement::one();
    for v in values.iter() {
        prefix.push(acc);
        acc *= *v;
    }
    let mut inv = acc.inverse().expect("batch_inverse: zero element");
    for (v, p) in values.iter_mut().zip(prefix).rev() {
        let next = inv * *v;
        *v = inv * p;
        inv = next;
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fr(0x{})", self.to_hex().trim_start_matches('0'))
    }
}

impl PartialOrd for FieldElement {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FieldElement {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.to_bytes().cmp(&other.to_bytes())
    }
}

impl Add for FieldElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        FieldElement(self.0 + rhs.0)
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sub for FieldElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        FieldElement(self.0 - rhs.0)
    }
}

impl SubAssign for FieldElement {
    fn sub_assign(&mut self, rhs: Self) {
        self.0 -= rhs.0;
    }
}

impl Mul for FieldElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        FieldElement(self.0 * rhs.0)
    }
}

impl MulAssign for FieldElement {
    fn mul_assign(&mut self, rhs: Self) {
        self.0 *= rhs.0;
    }
}

impl Neg for FieldElement {
    type Output = Self;
    fn neg(self) -> Self {
        FieldElement(-self.0)
    }
}

impl From<u64> for FieldElement {
    fn from(v: u64) -> Self {
        FieldElement::from_u64(v)
    }
}

impl Encode for FieldElement {
    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_bytes());
    }
}

impl Decode for FieldElement {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let at = r.offset();
        let bytes: [u8; FIELD_BYTES] = r.array()?;
        FieldElement::from_canonical_bytes(&bytes)
            .ok_or(DecodeError::InvalidValue { what: "field element", offset: at })
    }
}

impl Serialize for FieldElement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for FieldElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let bytes = hex_bytes::deserialize(d)?;
        let arr: [u8; FIELD_BYTES] =
            bytes.try_into().map_err(|_| serde::de::Error::custom("field element must be 32 bytes"))?;
        FieldElement::from_canonical_bytes(&arr).ok_or_else(|| serde::de::Error::custom("non-canonical field element"))
    }
}
