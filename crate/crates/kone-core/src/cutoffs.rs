//! The cutoff family behind the configuration metric: box tapers
//! `φ_k` on positions, dyadic scale bumps `ψ_n` on weights, their product
//! kernels `κ_{kn}(s,x) = φ_k(x) ψ_n(s) s`, and the summable level weights.

use crate::error::{KoneError, Result};
use crate::scalar::{real, real_of_usize, Scalar};
use crate::smooth::Smoothstep;

/// Parameters of the cutoff family.
///
/// `box_taper(k, ·)` is 1 on the sup-norm box B(k) = {max|x_i| <= k}, 0
/// outside B(k+1), with per-axis slope <= 2. `scale_bump(n, ·)` is 1 on
/// `[q^n, q^{n-1}]`, 0 outside `[q^{n+1}, q^{n-2}]`, with the ramp slope
/// bound `2/(q^n - q^{n+1})`. Ramps are polynomial smoothsteps, so both
/// bounds hold with margin for orders 1 and 2.
#[derive(Clone, Debug)]
pub struct CutoffFamily<S> {
    q: S,
    step: Smoothstep,
    level_weights: Vec<S>, // c_k, k = 1..=k_max
}

impl<S: Scalar> CutoffFamily<S> {
    pub fn new(q: S, order: u8, level_weights: Vec<S>) -> Result<Self> {
        if !(q > S::zero() && q < S::one()) {
            return Err(KoneError::InvalidParameter(format!("q must be in (0,1), got {q}")));
        }
        let step = Smoothstep::new(order)?;
        if step.max_slope() > 2.0 {
            return Err(KoneError::InvalidParameter(format!(
                "smoothstep order {order} has peak slope {} > 2, violating the taper bound",
                step.max_slope()
            )));
        }
        if level_weights.is_empty() || level_weights.iter().any(|c| !(*c > S::zero())) {
            return Err(KoneError::InvalidParameter(
                "level weights must be a non-empty positive sequence".into(),
            ));
        }
        Ok(Self { q, step, level_weights })
    }

    /// Default family: q = 1/2, quintic ramps, c_k = 2^{-k}.
    pub fn standard(levels: usize) -> Result<Self> {
        let c = (1..=levels).map(|k| real::<S>(0.5).powi(k as i32)).collect();
        Self::new(real(0.5), 2, c)
    }

    /// c_k = 2^{-k} / (1 + m_k) for supplied first-moment estimates m_k of
    /// the configured measure on B(k+1).
    pub fn with_moments(q: S, order: u8, moments: &[S]) -> Result<Self> {
        let c = moments
            .iter()
            .enumerate()
            .map(|(i, m)| real::<S>(0.5).powi(i as i32 + 1) / (S::one() + m.max(S::zero())))
            .collect();
        Self::new(q, order, c)
    }

    pub fn q(&self) -> S {
        self.q
    }

    pub fn levels(&self) -> usize {
        self.level_weights.len()
    }

    pub fn level_weight(&self, k: usize) -> S {
        self.level_weights[k - 1]
    }

    pub fn level_weight_sum(&self) -> S {
        self.level_weights.iter().copied().sum()
    }

    /// Tensorized taper between B(k) and B(k+1); k >= 1.
    pub fn box_taper(&self, k: usize, x: &[S]) -> S {
        let kk = real_of_usize::<S>(k);
        let mut v = S::one();
        for &xi in x {
            let u = xi.abs();
            if u >= kk + S::one() {
                return S::zero();
            }
            if u > kk {
                v = v * (S::one() - self.step.value(u - kk));
            }
        }
        v
    }

    /// Per-axis derivative of the taper (for constraint tests).
    pub fn box_taper_axis_deriv(&self, k: usize, x: &[S], axis: usize) -> S {
        let kk = real_of_usize::<S>(k);
        let mut prod = S::one();
        let mut deriv = S::zero();
        for (i, &xi) in x.iter().enumerate() {
            let u = xi.abs();
            let factor = if u >= kk + S::one() {
                S::zero()
            } else if u > kk {
                S::one() - self.step.value(u - kk)
            } else {
                S::one()
            };
            if i == axis {
                deriv = if u >= kk + S::one() || u <= kk {
                    S::zero()
                } else {
                    -self.step.d1(u - kk) * xi.signum()
                };
            } else {
                prod = prod * factor;
            }
        }
        prod * deriv
    }

    /// Dyadic scale bump ψ_n at weight s; n ranges over all integers.
    pub fn scale_bump(&self, n: i32, s: S) -> S {
        if s <= S::zero() {
            return S::zero();
        }
        let q = self.q;
        let lo = q.powi(n + 1); // outer left
        let a = q.powi(n); // plateau left
        let b = q.powi(n - 1); // plateau right
        let hi = q.powi(n - 2); // outer right
        if s <= lo || s >= hi {
            S::zero()
        } else if s < a {
            self.step.value((s - lo) / (a - lo))
        } else if s <= b {
            S::one()
        } else {
            S::one() - self.step.value((s - b) / (hi - b))
        }
    }

    pub fn scale_bump_deriv(&self, n: i32, s: S) -> S {
        if s <= S::zero() {
            return S::zero();
        }
        let q = self.q;
        let lo = q.powi(n + 1);
        let a = q.powi(n);
        let b = q.powi(n - 1);
        let hi = q.powi(n - 2);
        if s <= lo || s >= hi || (s >= a && s <= b) {
            S::zero()
        } else if s < a {
            let w = a - lo;
            self.step.d1((s - lo) / w) / w
        } else {
            let w = hi - b;
            -self.step.d1((s - b) / w) / w
        }
    }

    /// Product kernel κ_{kn}(s, x) = φ_k(x) ψ_n(s) s.
    pub fn mass_kernel(&self, k: usize, n: i32, s: S, x: &[S]) -> S {
        let taper = self.box_taper(k, x);
        if taper == S::zero() {
            return S::zero();
        }
        taper * self.scale_bump(n, s) * s
    }

    /// Closed range of n for which ψ_n(s) can be nonzero (a safe superset).
    pub fn scale_support_range(&self, s: S) -> (i32, i32) {
        debug_assert!(s > S::zero());
        let t = (s.ln() / self.q.ln()).to_f64().unwrap_or(0.0);
        let base = t.floor() as i32;
        (base - 2, base + 3)
    }

    /// Σ_n ψ_n(s); constrained to lie in [1, 4] (it is exactly 2 away from
    /// floating-point boundary effects with the complementary-ramp build).
    pub fn scale_bump_sum(&self, s: S) -> S {
        let (lo, hi) = self.scale_support_range(s);
        (lo..=hi).map(|n| self.scale_bump(n, s)).sum()
    }
}
