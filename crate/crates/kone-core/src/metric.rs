//! The explicit metric `d = d_base + d_smoothed` on marked configurations
//! with finite local mass.
//!
//! `d_smoothed` is built from the cutoff kernels:
//! `level_metric(k) = Σ_n |⟨κ_{kn}, γ - γ'⟩|` and
//! `d_smoothed = Σ_k c_k · level_metric(k) / (1 + level_metric(k))`.
//!
//! `d_base` substitutes the external vague-topology metric the construction
//! relies on: a fixed countable family of tent functions `g_j` on
//! `ℝ₊ × ℝ^d` (dense spans in C₀) combined as
//! `Σ_j 2^{-j} min(1, |⟨g_j, γ - γ'⟩|)`. The family is enumerated
//! deterministically by refinement level; truncation to finitely many tents
//! makes this a bounded pseudometric.

use crate::cutoffs::CutoffFamily;
use crate::measure::MarkedConfiguration;
use crate::scalar::{real, Scalar};

/// One tent: product of per-axis hats around `center` with half-width
/// `h = 2^{-level}`, and a hat in log2(weight) around integer exponent `m`.
#[derive(Clone, Debug)]
pub struct Tent<S> {
    center: Vec<S>,
    half_width: S,
    weight_exp: S,
}

impl<S: Scalar> Tent<S> {
    pub fn eval(&self, s: S, x: &[S]) -> S {
        let mut v = S::one() - (s.log2() - self.weight_exp).abs();
        if v <= S::zero() {
            return S::zero();
        }
        for (xi, ci) in x.iter().zip(&self.center) {
            let t = S::one() - (*xi - *ci).abs() / self.half_width;
            if t <= S::zero() {
                return S::zero();
            }
            v = v * t;
        }
        v
    }
}

/// Deterministic enumeration of the tent family, truncated to `count` terms.
///
/// Level ℓ = 0, 1, …: spatial grid step 2^{-ℓ} covering B(ℓ+1), weight
/// exponents m ∈ {-2(ℓ+1), …, 2(ℓ+1)}; within a level, weight exponent runs
/// slowest, then centers lexicographically axis by axis.
pub fn tent_family<S: Scalar>(dim: usize, count: usize) -> Vec<Tent<S>> {
    let mut tents = Vec::with_capacity(count);
    let mut level: i32 = 0;
    while tents.len() < count {
        let h = real::<S>(0.5).powi(level);
        let reach = level + 1;
        let per_axis = (2 * reach) * (1 << level) + 1;
        let m_reach = 2 * reach;
        'level: for m in -m_reach..=m_reach {
            let mut idx = vec![0usize; dim];
            loop {
                let center: Vec<S> = idx
                    .iter()
                    .map(|&i| real::<S>(-(reach as f64)) + h * real::<S>(i as f64))
                    .collect();
                tents.push(Tent { center, half_width: h, weight_exp: real(m as f64) });
                if tents.len() == count {
                    break 'level;
                }
                // odometer over the spatial grid
                let mut axis = dim;
                loop {
                    if axis == 0 {
                        break;
                    }
                    axis -= 1;
                    idx[axis] += 1;
                    if idx[axis] < per_axis as usize {
                        break;
                    }
                    idx[axis] = 0;
                    if axis == 0 {
                        axis = usize::MAX;
                        break;
                    }
                }
                if axis == usize::MAX {
                    break;
                }
            }
            if tents.len() == count {
                break;
            }
        }
        level += 1;
    }
    tents
}

/// Everything the metric needs: the cutoff family plus the tent family.
#[derive(Clone, Debug)]
pub struct MetricParams<S> {
    pub cutoffs: CutoffFamily<S>,
    tents: Vec<Tent<S>>,
}

impl<S: Scalar> MetricParams<S> {
    pub fn new(cutoffs: CutoffFamily<S>, dim: usize, tent_count: usize) -> Self {
        let tents = tent_family(dim, tent_count);
        Self { cutoffs, tents }
    }

    pub fn standard(dim: usize) -> Self {
        Self::new(CutoffFamily::standard(6).expect("standard family"), dim, 96)
    }

    pub fn tent_count(&self) -> usize {
        self.tents.len()
    }

    /// Upper bound for the full metric: Σ_j 2^{-j} + Σ_k c_k.
    pub fn bound(&self) -> S {
        let tent_bound = S::one() - real::<S>(0.5).powi(self.tents.len() as i32);
        tent_bound + self.cutoffs.level_weight_sum()
    }
}

/// `Σ_n |⟨κ_{kn}, a - b⟩|`; exact because the kernels have compact weight
/// support, so only finitely many n contribute.
pub fn level_metric<S: Scalar>(
    a: &MarkedConfiguration<S>,
    b: &MarkedConfiguration<S>,
    k: usize,
    cutoffs: &CutoffFamily<S>,
) -> S {
    let mut n_lo = i32::MAX;
    let mut n_hi = i32::MIN;
    for (s, _) in a.points().chain(b.points()) {
        let (lo, hi) = cutoffs.scale_support_range(s);
        n_lo = n_lo.min(lo);
        n_hi = n_hi.max(hi);
    }
    if n_lo > n_hi {
        return S::zero();
    }
    let mut total = S::zero();
    for n in n_lo..=n_hi {
        let pa: S = a.points().map(|(s, x)| cutoffs.mass_kernel(k, n, s, x)).sum();
        let pb: S = b.points().map(|(s, x)| cutoffs.mass_kernel(k, n, s, x)).sum();
        total = total + (pa - pb).abs();
    }
    total
}

/// `Σ_k c_k d_k / (1 + d_k)` over the configured levels.
pub fn smoothed_metric<S: Scalar>(
    a: &MarkedConfiguration<S>,
    b: &MarkedConfiguration<S>,
    params: &MetricParams<S>,
) -> S {
    let mut total = S::zero();
    for k in 1..=params.cutoffs.levels() {
        let dk = level_metric(a, b, k, &params.cutoffs);
        total = total + params.cutoffs.level_weight(k) * dk / (S::one() + dk);
    }
    total
}

/// Truncated tent metric `Σ_j 2^{-j} min(1, |⟨g_j, a - b⟩|)`.
pub fn base_metric<S: Scalar>(
    a: &MarkedConfiguration<S>,
    b: &MarkedConfiguration<S>,
    params: &MetricParams<S>,
) -> S {
    let half = real::<S>(0.5);
    let mut weight = S::one();
    let mut total = S::zero();
    for tent in &params.tents {
        weight = weight * half;
        let pa: S = a.points().map(|(s, x)| tent.eval(s, x)).sum();
        let pb: S = b.points().map(|(s, x)| tent.eval(s, x)).sum();
        total = total + weight * (pa - pb).abs().min(S::one());
    }
    total
}

/// The full configuration metric `d = d_base + d_smoothed`.
pub fn metric<S: Scalar>(
    a: &MarkedConfiguration<S>,
    b: &MarkedConfiguration<S>,
    params: &MetricParams<S>,
) -> S {
    base_metric(a, b, params) + smoothed_metric(a, b, params)
}
