// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::field::{batch_inverse, FieldElement};

/// Dense polynomial, lowest-degree coefficient first, trailing zeros trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial {
    coeffs: Vec<FieldElement>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InterpolationError {
    #[error("no points supplied")]
    Empty,
    #[error("abscissa {0:?} appears more than once")]
    DuplicatePoint(FieldElement),
    #[error("points are not consistent with a polynomial of degree at most {max_degree}")]
    InconsistentPoints { max_degree: usize },
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<FieldElement>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: FieldElement) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn coeffs(&self) -> &[FieldElement] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn evaluate(&self, x: &FieldElement) -> FieldElement {
        self.coeffs.iter().rev().fold(FieldElement::zero(), |acc, c| acc * *x + *c)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| {
                let a = self.coeffs.get(i).copied().unwrap_or_default();
                let b = other.coeffs.get(i).copied().unwrap_or_default();
                a + b
            })
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn scale(&self, s: &FieldElement) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| *c * *s).collect())
    }

    /// Divides by `(x - z)`, returning quotient and remainder `p(z)`.
    pub fn divide_by_linear(&self, z: &FieldElement) -> (Polynomial, FieldElement) {
        if self.coeffs.is_empty() {
            return (Polynomial::zero(), FieldElement::zero());
        }
        let mut quotient = vec![FieldElement::zero(); self.coeffs.len() - 1];
        let mut carry = FieldElement::zero();
        for i in (0..self.coeffs.len()).rev() {
            let cur = self.coeffs[i] + carry * *z;
            if i == 0 {
                return (Polynomial::new(quotient), cur);
            }
            quotient[i - 1] = cur;
            carry = cur;
        }
        unreachable!()
    }
}

/// Lagrange interpolation through every supplied point: the unique polynomial
/// of degree below `points.len()`.
pub fn interpolate(points: &[(FieldElement, FieldElement)]) -> Result<Polynomial, InterpolationError> {
    if points.is_empty() {
        return Err(InterpolationError::Empty);
    }
    let mut seen = BTreeSet::new();
    for (x, _) in points {
        if !seen.insert(*x) {
            return Err(InterpolationError::DuplicatePoint(*x));
        }
    }
    Ok(lagrange(points))
}

/// Interpolates a polynomial of degree at most `max_degree` from the first
/// `max_degree + 1` points, then checks every remaining point against it.
pub fn interpolate_bounded(
    points: &[(FieldElement, FieldElement)],
    max_degree: usize,
) -> Result<Polynomial, InterpolationError> {
    if points.is_empty() {
        return Err(InterpolationError::Empty);
    }
    let mut seen = BTreeSet::new();
    for (x, _) in points {
        if !seen.insert(*x) {
            return Err(InterpolationError::DuplicatePoint(*x));
        }
    }
    let take = points.len().min(max_degree + 1);
    let poly = lagrange(&points[..take]);
    if points[take..].iter().any(|(x, y)| poly.evaluate(x) != *y) {
        return Err(InterpolationError::InconsistentPoints { max_degree });
    }
    Ok(poly)
}

fn lagrange(points: &[(FieldElement, FieldElement)]) -> Polynomial {
    let k = points.len();
    // vanishing(x) = Π (x - x_i), built incrementally; coefficients low-first.
    let mut vanishing = vec![FieldElement::one()];
    for (xi, _) in points {
        let mut next = vec![FieldElement::zero(); vanishing.len() + 1];
        for (j, c) in vanishing.iter().enumerate() {
            next[j + 1] += *c;
            next[j] -= *c * *xi;
        }
        vanishing = next;
    }
    let vanishing = Polynomial::new(vanishing);

    // Denominators Π_{j≠i} (x_i - x_j) equal vanishing'(x_i).
    let derivative = Polynomial::new(
        vanishing.coeffs.iter().enumerate().skip(1).map(|(i, c)| *c * FieldElement::from_u64(i as u64)).collect(),
    );
    let mut denoms: Vec<FieldElement> = points.iter().map(|(x, _)| derivative.evaluate(x)).collect();
    batch_inverse(&mut denoms);

    let mut acc = vec![FieldElement::zero(); k];
    for ((xi, yi), inv) in points.iter().zip(denoms) {
        let weight = *yi * inv;
        if weight.is_zero() {
            continue;
        }
        let (basis, _) = vanishing.divide_by_linear(xi);
        for (a, c) in acc.iter_mut().zip(basis.coeffs.iter()) {
            *a += *c * weight;
        }
    }
    Polynomial::new(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fe(v: u64) -> FieldElement {
        FieldElement::from_u64(v)
    }

    #[test]
    fn trims_trailing_zeros() {
        let p = Polynomial::new(vec![fe(1), fe(0), fe(0)]);
        assert_eq!(p.degree(), Some(0));
        assert_eq!(Polynomial::new(vec![fe(0)]).degree(), None);
    }

    #[test]
    fn evaluate_small() {
        // 3 + 2x + x^2 at x = 5 → 38
        let p = Polynomial::new(vec![fe(3), fe(2), fe(1)]);
        assert_eq!(p.evaluate(&fe(5)), fe(38));
    }

    #[test]
    fn divide_by_linear_small() {
        // x^2 - 1 = (x - 1)(x + 1)
        let p = Polynomial::new(vec![-fe(1), fe(0), fe(1)]);
        let (q, r) = p.divide_by_linear(&fe(1));
        assert_eq!(r, fe(0));
        assert_eq!(q, Polynomial::new(vec![fe(1), fe(1)]));
        let (_, r) = p.divide_by_linear(&fe(3));
        assert_eq!(r, fe(8));
    }

    #[test]
    fn single_point_gives_constant() {
        let p = interpolate(&[(fe(7), fe(11))]).unwrap();
        assert_eq!(p, Polynomial::constant(fe(11)));
    }

    #[test]
    fn duplicate_abscissa_rejected() {
        assert_eq!(interpolate(&[(fe(1), fe(2)), (fe(1), fe(3))]), Err(InterpolationError::DuplicatePoint(fe(1))));
        assert_eq!(interpolate(&[]), Err(InterpolationError::Empty));
    }

    #[test]
    fn round_trip_random_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [0usize, 1, 5, 31] {
            let f = Polynomial::new((0..=n).map(|_| FieldElement::random(&mut rng)).collect());
            let pts: Vec<_> = (0..=n)
                .map(|_| {
                    let x = FieldElement::random(&mut rng);
                    (x, f.evaluate(&x))
                })
                .collect();
            assert_eq!(interpolate(&pts).unwrap(), f);
        }
    }

    #[test]
    fn bounded_checks_surplus_points() {
        let f = Polynomial::new(vec![fe(1), fe(2)]);
        let mut pts: Vec<_> = (0..5u64).map(|x| (fe(x), f.evaluate(&fe(x)))).collect();
        assert_eq!(interpolate_bounded(&pts, 1).unwrap(), f);
        pts[4].1 += fe(1);
        assert_eq!(interpolate_bounded(&pts, 1), Err(InterpolationError::InconsistentPoints { max_degree: 1 }));
    }
}
