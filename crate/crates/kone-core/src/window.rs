//! Axis-aligned observation windows and their boundary conventions.

use crate::error::{KoneError, Result};
use crate::scalar::{real, Scalar};
use rand::Rng;

/// Boundary convention for energies and dynamics inside a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    /// Plain Euclidean distances, nothing beyond the window.
    Open,
    /// Torus: positions wrap, distances use the minimum image.
    Periodic,
}

/// Axis-aligned box `Λ = Π [lo_i, hi_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Window<S> {
    lo: Vec<S>,
    hi: Vec<S>,
}

impl<S: Scalar> Window<S> {
    pub fn new(lo: Vec<S>, hi: Vec<S>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(KoneError::InvalidParameter(
                "window bounds must be non-empty and of equal length".into(),
            ));
        }
        for i in 0..lo.len() {
            if !(lo[i] < hi[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(KoneError::InvalidParameter(format!(
                    "window axis {i} must satisfy lo < hi and be finite"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Cube `[0, side)^dim`.
    pub fn cube(dim: usize, side: S) -> Result<Self> {
        Self::new(vec![S::zero(); dim], vec![side; dim])
    }

    /// Centered box `[-half, half)^dim` used for the `B(k)` family.
    pub fn centered_cube(dim: usize, half: S) -> Result<Self> {
        Self::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[S] {
        &self.lo
    }

    pub fn hi(&self) -> &[S] {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> S {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> S {
        (0..self.dim()).map(|i| self.side(i)).fold(S::one(), |a, b| a * b)
    }

    pub fn contains(&self, x: &[S]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(xi, (lo, hi))| *xi >= *lo && *xi < *hi)
    }

    /// Shrink every face inward by `margin` (used for support-clearance checks).
    pub fn shrunk(&self, margin: S) -> Result<Self> {
        let lo = self.lo.iter().map(|v| *v + margin).collect();
        let hi = self.hi.iter().map(|v| *v - margin).collect();
        Self::new(lo, hi)
    }

    /// Does `self` contain the whole box `other`?
    pub fn contains_box(&self, other: &Window<S>) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| other.lo[i] >= self.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// Volume of the intersection with `other`.
    pub fn intersection_volume(&self, other: &Window<S>) -> S {
        let mut v = S::one();
        for i in 0..self.dim() {
            let lo = self.lo[i].max(other.lo[i]);
            let hi = self.hi[i].min(other.hi[i]);
            if hi <= lo {
                return S::zero();
            }
            v = v * (hi - lo);
        }
        v
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<S> {
        (0..self.dim())
            .map(|i| S::uniform(rng, self.lo[i], self.hi[i]))
            .collect()
    }

    /// Wrap a position onto the torus represented by this window.
    pub fn wrap(&self, x: &mut [S]) {
        for i in 0..self.dim() {
            let side = self.side(i);
            let mut t = (x[i] - self.lo[i]) % side;
            if t < S::zero() {
                t += side;
            }
            x[i] = self.lo[i] + t;
            // `% side` can land exactly on `side` after the add; fold it back.
            if x[i] >= self.hi[i] {
                x[i] = self.lo[i];
            }
        }
    }

    /// Squared distance between `x` and `y` under the given geometry.
    pub fn dist2(&self, geometry: Geometry, x: &[S], y: &[S]) -> S {
        let mut acc = S::zero();
        for i in 0..self.dim() {
            let mut d = x[i] - y[i];
            if geometry == Geometry::Periodic {
                let side = self.side(i);
                d = d - side * (d / side).round();
            }
            acc = acc + d * d;
        }
        acc
    }

    /// Displacement `x - y` (minimum image if periodic), written into `out`.
    pub fn displacement(&self, geometry: Geometry, x: &[S], y: &[S], out: &mut [S]) {
        for i in 0..self.dim() {
            let mut d = x[i] - y[i];
            if geometry == Geometry::Periodic {
                let side = self.side(i);
                d = d - side * (d / side).round();
            }
            out[i] = d;
        }
    }

    /// Euclidean distance from a point to the window boundary (0 outside).
    pub fn distance_to_boundary(&self, x: &[S]) -> S {
        let mut m = S::infinity();
        for i in 0..self.dim() {
            if x[i] < self.lo[i] || x[i] > self.hi[i] {
                return S::zero();
            }
            m = m.min(x[i] - self.lo[i]).min(self.hi[i] - x[i]);
        }
        m
    }

    /// Parse `lo..hi,lo..hi,...` (one range per axis).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for (i, part) in text.split(',').enumerate() {
            let (a, b) = part
                .split_once("..")
                .ok_or_else(|| KoneError::Parse(format!("window axis {i}: expected lo..hi")))?;
            let a: f64 = a
                .trim()
                .parse()
                .map_err(|e| KoneError::Parse(format!("window axis {i} lower bound: {e}")))?;
            let b: f64 = b
                .trim()
                .parse()
                .map_err(|e| KoneError::Parse(format!("window axis {i} upper bound: {e}")))?;
            lo.push(real(a));
            hi.push(real(b));
        }
        Self::new(lo, hi)
    }

    /// Render in the `lo..hi,lo..hi` form with full precision.
    pub fn render(&self) -> String {
        (0..self.dim())
            .map(|i| format!("{:.16e}..{:.16e}", self.lo[i], self.hi[i]))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn volume_and_contains() {
        let w = Window::<f64>::new(vec![0.0, 0.0], vec![2.0, 3.0]).unwrap();
        assert_relative_eq!(w.volume(), 6.0);
        assert!(w.contains(&[0.0, 2.9]));
        assert!(!w.contains(&[2.0, 1.0]));
    }

    #[test]
    fn wrap_and_min_image() {
        let w = Window::<f64>::cube(2, 4.0).unwrap();
        let mut x = [5.0, -1.0];
        w.wrap(&mut x);
        assert_relative_eq!(x[0], 1.0);
        assert_relative_eq!(x[1], 3.0);
        // points near opposite faces are close on the torus
        let d2 = w.dist2(Geometry::Periodic, &[0.1, 0.0], &[3.9, 0.0]);
        assert_relative_eq!(d2, 0.04, max_relative = 1e-12);
        let d2o = w.dist2(Geometry::Open, &[0.1, 0.0], &[3.9, 0.0]);
        assert_relative_eq!(d2o, 3.8 * 3.8, max_relative = 1e-12);
    }

    #[test]
    fn parse_round_trip() {
        let w = Window::<f64>::parse("0..1,-2..3.5").unwrap();
        assert_eq!(w.dim(), 2);
        let again = Window::<f64>::parse(&w.render()).unwrap();
        assert_eq!(w, again);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(Window::<f64>::new(vec![0.0], vec![0.0]).is_err());
        assert!(Window::<f64>::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }
}
