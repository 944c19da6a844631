//! Points and tangent vectors of the canonical phase space `R^{2n}`.
//!
//! Coordinates are stored as one contiguous vector `(q_1..q_n, p_1..p_n)`.
//! The symplectic pairing is the block structure itself: `dq = dK/dp`,
//! `dp = -dK/dq`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    coords: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: &[f64], p: &[f64]) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                actual: p.len(),
            });
        }
        let mut coords = Vec::with_capacity(2 * q.len());
        coords.extend_from_slice(q);
        coords.extend_from_slice(p);
        Self::from_coords(coords)
    }

    /// Builds a state from the flat `(q, p)` coordinate vector.
    pub fn from_coords(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "phase state needs an even, nonzero number of coordinates, got {}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "phase state coordinate is not finite: {bad}"
            )));
        }
        Ok(Self { coords })
    }

    /// Planar particle state `(x, y, p_x, p_y)`.
    pub fn planar(x: f64, y: f64, px: f64, py: f64) -> Self {
        Self::from_coords(vec![x, y, px, py]).expect("finite planar state")
    }

    /// Degrees of freedom `n`.
    pub fn dof(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn q(&self) -> &[f64] {
        &self.coords[..self.dof()]
    }

    pub fn p(&self) -> &[f64] {
        &self.coords[self.dof()..]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// The four coordinates of a planar state. Panics if `n != 2`.
    pub fn as_planar(&self) -> [f64; 4] {
        assert_eq!(self.dof(), 2, "planar state expected");
        [self.coords[0], self.coords[1], self.coords[2], self.coords[3]]
    }

    /// `self + scale * direction`, used for finite differences and RK stages.
    pub fn displaced(&self, direction: &[f64], scale: f64) -> Result<Self> {
        if direction.len() != self.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                actual: direction.len(),
            });
        }
        let coords = self
            .coords
            .iter()
            .zip(direction)
            .map(|(c, d)| c + scale * d)
            .collect();
        Self::from_coords(coords)
    }

    pub fn distance(&self, other: &PhaseState) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// A vector field value `(dq, dp)` at some state.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
}

impl Tangent {
    /// Hamiltonian vector field from a gradient laid out as `(dK/dq, dK/dp)`.
    pub fn hamiltonian(grad: &[f64]) -> Self {
        let n = grad.len() / 2;
        Self {
            dq: grad[n..].to_vec(),
            dp: grad[..n].iter().map(|g| -g).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            dq: vec![0.0; n],
            dp: vec![0.0; n],
        }
    }

    /// Flat `(dq, dp)` vector.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.dq.len());
        v.extend_from_slice(&self.dq);
        v.extend_from_slice(&self.dp);
        v
    }

    pub fn norm(&self) -> f64 {
        self.dq
            .iter()
            .chain(&self.dp)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_lengths() {
        let err = PhaseState::new(&[0.0, 1.0], &[0.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(PhaseState::new(&[f64::NAN], &[0.0]).is_err());
        assert!(PhaseState::new(&[0.0], &[f64::INFINITY]).is_err());
        assert!(PhaseState::from_coords(vec![]).is_err());
    }

    #[test]
    fn splits_coordinates() {
        let s = PhaseState::planar(1.0, 2.0, 3.0, 4.0);
        assert_eq!(s.dof(), 2);
        assert_eq!(s.q(), &[1.0, 2.0]);
        assert_eq!(s.p(), &[3.0, 4.0]);
    }

    #[test]
    fn hamiltonian_tangent_uses_canonical_blocks() {
        let t = Tangent::hamiltonian(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.dq, vec![3.0, 4.0]);
        assert_eq!(t.dp, vec![-1.0, -2.0]);
    }
}
