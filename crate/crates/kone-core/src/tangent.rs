//! Tangent vectors at a discrete measure: one (position-vector, weight-rate)
//! pair per atom, with the weighted inner product
//! `⟨u, v⟩ = Σ_x s_x (⟨u_x^pos, v_x^pos⟩ + u_x^wt v_x^wt)`.

use crate::error::{KoneError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct TangentVector<S> {
    dim: usize,
    /// Reference atom weights s_x (the metric of the tangent space).
    weights: Vec<S>,
    /// Position components per atom, flattened (n·dim).
    pos: Vec<S>,
    /// Weight components per atom (n).
    wt: Vec<S>,
}

impl<S: Scalar> TangentVector<S> {
    pub fn new(dim: usize, weights: Vec<S>, pos: Vec<S>, wt: Vec<S>) -> Result<Self> {
        if pos.len() != dim * weights.len() || wt.len() != weights.len() {
            return Err(KoneError::DimensionMismatch {
                expected: dim * weights.len(),
                got: pos.len(),
            });
        }
        Ok(Self { dim, weights, pos, wt })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn position_part(&self, i: usize) -> &[S] {
        &self.pos[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight_part(&self, i: usize) -> S {
        self.wt[i]
    }

    /// Weighted inner product; both vectors must be indexed by the same
    /// reference measure (same atom count and weights).
    pub fn dot(&self, other: &Self) -> Result<S> {
        if self.weights.len() != other.weights.len() || self.dim != other.dim {
            return Err(KoneError::DimensionMismatch {
                expected: self.weights.len(),
                got: other.weights.len(),
            });
        }
        let mut acc = S::zero();
        for i in 0..self.weights.len() {
            let mut term = self.wt[i] * other.wt[i];
            for a in 0..self.dim {
                term = term + self.pos[i * self.dim + a] * other.pos[i * self.dim + a];
            }
            acc = acc + self.weights[i] * term;
        }
        Ok(acc)
    }

    pub fn norm2(&self) -> S {
        self.dot(self).expect("same reference")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weighted_inner_product() {
        // single atom with s = 2: ⟨(v,h),(v,h)⟩ = 2(‖v‖² + h²)
        let t = TangentVector::new(2, vec![2.0], vec![3.0, 4.0], vec![1.0]).unwrap();
        assert_relative_eq!(t.norm2(), 2.0 * (25.0 + 1.0));
        let u = TangentVector::new(2, vec![2.0], vec![1.0, 0.0], vec![-1.0]).unwrap();
        assert_relative_eq!(t.dot(&u).unwrap(), 2.0 * (3.0 - 1.0));
        // symmetry
        assert_relative_eq!(t.dot(&u).unwrap(), u.dot(&t).unwrap());
    }

    #[test]
    fn mismatched_references_rejected() {
        let t = TangentVector::<f64>::new(2, vec![1.0], vec![0.0, 0.0], vec![0.0]).unwrap();
        let u = TangentVector::<f64>::new(2, vec![], vec![], vec![]).unwrap();
        assert!(t.dot(&u).is_err());
    }
}
