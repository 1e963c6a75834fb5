//! Polynomial smoothstep ramps and compactly supported bumps with
//! hand-coded exact derivatives. All test functions, cutoffs and built-in
//! potentials are assembled from these; nothing in the calculus is
//! differentiated numerically.

use crate::error::{KoneError, Result};
use crate::scalar::{real, Scalar};

/// Value, first and second derivative of the order-`m` smoothstep on [0,1],
/// clamped outside. Orders: 1 = cubic (C¹), 2 = quintic (C²), 3 = septic (C³).
/// Peak slopes are 1.5, 1.875 and 2.1875 respectively.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Smoothstep {
    order: u8,
}

impl Smoothstep {
    pub fn new(order: u8) -> Result<Self> {
        if (1..=3).contains(&order) {
            Ok(Self { order })
        } else {
            Err(KoneError::InvalidParameter(format!(
                "smoothstep order must be 1..=3, got {order}"
            )))
        }
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    /// Largest |d/dt| over [0,1].
    pub fn max_slope(&self) -> f64 {
        match self.order {
            1 => 1.5,
            2 => 1.875,
            _ => 2.1875,
        }
    }

    pub fn value<S: Scalar>(&self, t: S) -> S {
        if t <= S::zero() {
            return S::zero();
        }
        if t >= S::one() {
            return S::one();
        }
        match self.order {
            1 => t * t * (real::<S>(3.0) - real::<S>(2.0) * t),
            2 => t * t * t * (real::<S>(10.0) + t * (real::<S>(-15.0) + t * real::<S>(6.0))),
            _ => {
                let t2 = t * t;
                t2 * t2
                    * (real::<S>(35.0)
                        + t * (real::<S>(-84.0) + t * (real::<S>(70.0) - real::<S>(20.0) * t)))
            }
        }
    }

    pub fn d1<S: Scalar>(&self, t: S) -> S {
        if t <= S::zero() || t >= S::one() {
            return S::zero();
        }
        let u = S::one() - t;
        match self.order {
            1 => real::<S>(6.0) * t * u,
            2 => real::<S>(30.0) * t * t * u * u,
            _ => real::<S>(140.0) * t * t * t * u * u * u,
        }
    }

    pub fn d2<S: Scalar>(&self, t: S) -> S {
        if t <= S::zero() || t >= S::one() {
            return S::zero();
        }
        let u = S::one() - t;
        let two = real::<S>(2.0);
        match self.order {
            1 => real::<S>(6.0) * (S::one() - two * t),
            2 => real::<S>(60.0) * t * u * (S::one() - two * t),
            _ => real::<S>(420.0) * t * t * u * u * (S::one() - two * t),
        }
    }
}

/// One-dimensional C²-bump: 0 outside [lo, hi], 1 on [plateau_lo, plateau_hi],
/// smoothstep ramps in between.
#[derive(Clone, Debug)]
pub struct Bump1d<S> {
    lo: S,
    plateau_lo: S,
    plateau_hi: S,
    hi: S,
    step: Smoothstep,
}

impl<S: Scalar> Bump1d<S> {
    pub fn new(lo: S, plateau_lo: S, plateau_hi: S, hi: S, step: Smoothstep) -> Result<Self> {
        if !(lo <= plateau_lo && plateau_lo <= plateau_hi && plateau_hi <= hi && lo < hi) {
            return Err(KoneError::InvalidParameter(
                "bump knots must be ordered lo <= p_lo <= p_hi <= hi with lo < hi".into(),
            ));
        }
        Ok(Self { lo, plateau_lo, plateau_hi, hi, step })
    }

    /// Symmetric bump around `center` with plateau half-width `inner` and
    /// support half-width `outer`.
    pub fn symmetric(center: S, inner: S, outer: S, step: Smoothstep) -> Result<Self> {
        Self::new(center - outer, center - inner, center + inner, center + outer, step)
    }

    pub fn support(&self) -> (S, S) {
        (self.lo, self.hi)
    }

    pub fn value(&self, x: S) -> S {
        if x <= self.lo || x >= self.hi {
            return S::zero();
        }
        if x < self.plateau_lo {
            self.step.value((x - self.lo) / (self.plateau_lo - self.lo))
        } else if x <= self.plateau_hi {
            S::one()
        } else {
            S::one() - self.step.value((x - self.plateau_hi) / (self.hi - self.plateau_hi))
        }
    }

    pub fn d1(&self, x: S) -> S {
        if x <= self.lo || x >= self.hi {
            return S::zero();
        }
        if x < self.plateau_lo {
            let w = self.plateau_lo - self.lo;
            self.step.d1((x - self.lo) / w) / w
        } else if x <= self.plateau_hi {
            S::zero()
        } else {
            let w = self.hi - self.plateau_hi;
            -self.step.d1((x - self.plateau_hi) / w) / w
        }
    }

    pub fn d2(&self, x: S) -> S {
        if x <= self.lo || x >= self.hi {
            return S::zero();
        }
        if x < self.plateau_lo {
            let w = self.plateau_lo - self.lo;
            self.step.d2((x - self.lo) / w) / (w * w)
        } else if x <= self.plateau_hi {
            S::zero()
        } else {
            let w = self.hi - self.plateau_hi;
            -self.step.d2((x - self.plateau_hi) / w) / (w * w)
        }
    }

    /// Exact integral over the line (ramps of a symmetric smoothstep
    /// integrate to half their width).
    pub fn integral(&self) -> S {
        let half = real::<S>(0.5);
        (self.plateau_hi - self.plateau_lo)
            + half * (self.plateau_lo - self.lo)
            + half * (self.hi - self.plateau_hi)
    }
}

/// Tensor-product bump on `ℝ₊ × ℝ^d`: `A · b_s(s) · Π_i b_i(x_i)`, with
/// exact first and second derivatives in both the mark and the position.
/// This is the building block of every test function in the calculus.
#[derive(Clone, Debug)]
pub struct TensorBump<S> {
    pub s_bump: Bump1d<S>,
    pub x_bumps: Vec<Bump1d<S>>,
    pub amplitude: S,
}

impl<S: Scalar> TensorBump<S> {
    pub fn dim(&self) -> usize {
        self.x_bumps.len()
    }

    pub fn s_support(&self) -> (S, S) {
        self.s_bump.support()
    }

    fn x_product(&self, x: &[S]) -> S {
        let mut v = S::one();
        for (b, xi) in self.x_bumps.iter().zip(x) {
            v = v * b.value(*xi);
            if v == S::zero() {
                return S::zero();
            }
        }
        v
    }

    pub fn eval(&self, s: S, x: &[S]) -> S {
        let sv = self.s_bump.value(s);
        if sv == S::zero() {
            return S::zero();
        }
        self.amplitude * sv * self.x_product(x)
    }

    /// ∂_s.
    pub fn ds(&self, s: S, x: &[S]) -> S {
        let d = self.s_bump.d1(s);
        if d == S::zero() {
            return S::zero();
        }
        self.amplitude * d * self.x_product(x)
    }

    /// ∂²_s.
    pub fn dss(&self, s: S, x: &[S]) -> S {
        let d = self.s_bump.d2(s);
        if d == S::zero() {
            return S::zero();
        }
        self.amplitude * d * self.x_product(x)
    }

    /// ∇_x written into `out`.
    pub fn grad_x(&self, s: S, x: &[S], out: &mut [S]) {
        let sv = self.amplitude * self.s_bump.value(s);
        if sv == S::zero() {
            out.fill(S::zero());
            return;
        }
        for i in 0..self.x_bumps.len() {
            let mut term = self.x_bumps[i].d1(x[i]);
            if term != S::zero() {
                for (j, b) in self.x_bumps.iter().enumerate() {
                    if j != i {
                        term = term * b.value(x[j]);
                    }
                }
            }
            out[i] = sv * term;
        }
    }

    /// Δ_x (sum of per-axis second derivatives).
    pub fn lap_x(&self, s: S, x: &[S]) -> S {
        let sv = self.amplitude * self.s_bump.value(s);
        if sv == S::zero() {
            return S::zero();
        }
        let mut acc = S::zero();
        for i in 0..self.x_bumps.len() {
            let mut term = self.x_bumps[i].d2(x[i]);
            if term != S::zero() {
                for (j, b) in self.x_bumps.iter().enumerate() {
                    if j != i {
                        term = term * b.value(x[j]);
                    }
                }
            }
            acc = acc + term;
        }
        sv * acc
    }
}
