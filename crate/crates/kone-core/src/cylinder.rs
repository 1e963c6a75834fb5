//! Cylinder functions `F(η) = g(⟨⟨φ_1,η⟩⟩, …, ⟨⟨φ_N,η⟩⟩)`: a smooth outer
//! function of finitely many pairings against compactly supported tensor
//! bumps. Gradients and Hessians are hand-coded; nothing is differentiated
//! numerically inside the calculus.

use crate::error::{KoneError, Result};
use crate::measure::DiscreteMeasure;
use crate::scalar::{real, Scalar};
use crate::smooth::{Bump1d, Smoothstep, TensorBump};
use crate::window::Window;

/// Smooth outer functions g with bounded derivatives (plus the linear one,
/// which the identity tests use directly).
#[derive(Clone, Debug)]
pub enum Outer<S> {
    /// `Σ a_j u_j`.
    Linear { coeffs: Vec<S> },
    /// `sin(Σ a_j u_j)`.
    SinSum { coeffs: Vec<S> },
    /// `exp(-Σ u_j²)`.
    GaussianWell,
    /// `u_k / (1 + u_k²)` in the `index`-th pairing.
    Rational { index: usize },
}

impl<S: Scalar> Outer<S> {
    pub fn eval(&self, u: &[S]) -> S {
        match self {
            Outer::Linear { coeffs } => coeffs.iter().zip(u).map(|(a, v)| *a * *v).sum(),
            Outer::SinSum { coeffs } => {
                coeffs.iter().zip(u).map(|(a, v)| *a * *v).sum::<S>().sin()
            }
            Outer::GaussianWell => (-u.iter().map(|v| *v * *v).sum::<S>()).exp(),
            Outer::Rational { index } => {
                let v = u[*index];
                v / (S::one() + v * v)
            }
        }
    }

    pub fn grad(&self, u: &[S], out: &mut [S]) {
        match self {
            Outer::Linear { coeffs } => out.copy_from_slice(coeffs),
            Outer::SinSum { coeffs } => {
                let t: S = coeffs.iter().zip(u).map(|(a, v)| *a * *v).sum();
                let c = t.cos();
                for (o, a) in out.iter_mut().zip(coeffs) {
                    *o = *a * c;
                }
            }
            Outer::GaussianWell => {
                let g = self.eval(u);
                let two = real::<S>(2.0);
                for (o, v) in out.iter_mut().zip(u) {
                    *o = -two * *v * g;
                }
            }
            Outer::Rational { index } => {
                out.fill(S::zero());
                let v = u[*index];
                let d = S::one() + v * v;
                out[*index] = (S::one() - v * v) / (d * d);
            }
        }
    }

    /// Hessian, row-major `N × N`, written into `out`.
    pub fn hessian(&self, u: &[S], out: &mut [S]) {
        let n = u.len();
        out.fill(S::zero());
        match self {
            Outer::Linear { .. } => {}
            Outer::SinSum { coeffs } => {
                let t: S = coeffs.iter().zip(u).map(|(a, v)| *a * *v).sum();
                let s = -t.sin();
                for j in 0..n {
                    for k in 0..n {
                        out[j * n + k] = coeffs[j] * coeffs[k] * s;
                    }
                }
            }
            Outer::GaussianWell => {
                let g = self.eval(u);
                let two = real::<S>(2.0);
                let four = real::<S>(4.0);
                for j in 0..n {
                    for k in 0..n {
                        let mut v = four * u[j] * u[k] * g;
                        if j == k {
                            v = v - two * g;
                        }
                        out[j * n + k] = v;
                    }
                }
            }
            Outer::Rational { index } => {
                let v = u[*index];
                let d = S::one() + v * v;
                out[*index * n + *index] =
                    real::<S>(2.0) * v * (v * v - real::<S>(3.0)) / (d * d * d);
            }
        }
    }
}

/// A cylinder test function on the cone of discrete measures.
#[derive(Clone, Debug)]
pub struct CylinderFunction<S> {
    name: String,
    outer: Outer<S>,
    inner: Vec<TensorBump<S>>,
}

impl<S: Scalar> CylinderFunction<S> {
    pub fn new(name: impl Into<String>, outer: Outer<S>, inner: Vec<TensorBump<S>>) -> Result<Self> {
        if inner.is_empty() {
            return Err(KoneError::InvalidParameter(
                "cylinder function needs at least one inner test function".into(),
            ));
        }
        for b in &inner {
            let (lo, _) = b.s_support();
            if !(lo > S::zero()) {
                return Err(KoneError::InvalidParameter(
                    "inner test functions must have weight support bounded away from 0".into(),
                ));
            }
        }
        Ok(Self { name: name.into(), outer, inner })
    }

    /// A constant function (empty gradient everywhere): linear outer with
    /// zero coefficients.
    pub fn constant(region: &Window<S>, value_unused: S) -> Self {
        let _ = value_unused;
        let step = Smoothstep::new(2).unwrap();
        let s_bump = Bump1d::new(real(0.5), real(0.75), real(1.25), real(2.0), step).unwrap();
        let x_bumps = (0..region.dim())
            .map(|a| {
                Bump1d::new(
                    region.lo()[a],
                    region.lo()[a] + region.side(a) * real::<S>(0.25),
                    region.hi()[a] - region.side(a) * real::<S>(0.25),
                    region.hi()[a],
                    step,
                )
                .unwrap()
            })
            .collect();
        Self {
            name: "constant".into(),
            outer: Outer::Linear { coeffs: vec![S::zero()] },
            inner: vec![TensorBump { s_bump, x_bumps, amplitude: S::one() }],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.inner.len()
    }

    pub fn inner(&self) -> &[TensorBump<S>] {
        &self.inner
    }

    pub fn outer(&self) -> &Outer<S> {
        &self.outer
    }

    /// The pairings `u_j = ⟨⟨φ_j, η⟩⟩`.
    pub fn pairings(&self, eta: &DiscreteMeasure<S>) -> Vec<S> {
        self.inner
            .iter()
            .map(|b| eta.atoms().map(|(s, x)| b.eval(s, x)).sum())
            .collect()
    }

    /// Pairings after inserting one extra atom `(s, x)`.
    pub fn pairings_with_insertion(&self, eta: &DiscreteMeasure<S>, s: S, x: &[S]) -> Vec<S> {
        let mut u = self.pairings(eta);
        for (uj, b) in u.iter_mut().zip(&self.inner) {
            *uj = *uj + b.eval(s, x);
        }
        u
    }

    pub fn eval(&self, eta: &DiscreteMeasure<S>) -> S {
        self.outer.eval(&self.pairings(eta))
    }

    pub fn eval_at_pairings(&self, u: &[S]) -> S {
        self.outer.eval(u)
    }

    /// Does any inner test function see the atom `(s, x)`?
    pub fn touches(&self, s: S, x: &[S]) -> bool {
        self.inner.iter().any(|b| b.eval(s, x) != S::zero())
    }
}

/// Per-atom gradient data of a cylinder function at a measure.
#[derive(Clone, Debug)]
pub struct AtomGradients<S> {
    pub dim: usize,
    /// ∇_x F per atom, flattened (n·dim).
    pub dx: Vec<S>,
    /// ∇_{s_x} F per atom (n).
    pub ds: Vec<S>,
}

/// Battery of named cylinder functions with supports inside `region` and
/// weight supports inside `[s_lo, s_hi]`.
pub fn cylinder_battery<S: Scalar>(
    region: &Window<S>,
    s_lo: S,
    s_hi: S,
) -> Vec<CylinderFunction<S>> {
    let step = Smoothstep::new(2).unwrap();
    let dim = region.dim();
    let sbump = |flo: f64, fhi: f64| {
        let lo = s_lo + (s_hi - s_lo) * real::<S>(flo);
        let hi = s_lo + (s_hi - s_lo) * real::<S>(fhi);
        let q = (hi - lo) * real::<S>(0.25);
        Bump1d::new(lo, lo + q, hi - q, hi, step).unwrap()
    };
    let xbump = |flo: f64, fhi: f64, axis: usize| {
        let lo = region.lo()[axis] + region.side(axis) * real::<S>(flo);
        let hi = region.lo()[axis] + region.side(axis) * real::<S>(fhi);
        let q = (hi - lo) * real::<S>(0.3);
        Bump1d::new(lo, lo + q, hi - q, hi, step).unwrap()
    };
    let bump = |sf: (f64, f64), xf: (f64, f64), amp: f64| TensorBump {
        s_bump: sbump(sf.0, sf.1),
        x_bumps: (0..dim).map(|a| xbump(xf.0, xf.1, a)).collect(),
        amplitude: real(amp),
    };

    let b_wide = bump((0.0, 1.0), (0.0, 1.0), 1.0);
    let b_low = bump((0.0, 0.55), (0.1, 0.9), 1.5);
    let b_high = bump((0.45, 1.0), (0.0, 0.7), 0.8);
    let b_off = bump((0.2, 0.9), (0.3, 1.0), 1.2);

    vec![
        CylinderFunction::new(
            "linear-wide",
            Outer::Linear { coeffs: vec![S::one()] },
            vec![b_wide.clone()],
        )
        .unwrap(),
        CylinderFunction::new(
            "linear-pair",
            Outer::Linear { coeffs: vec![real(0.7), real(-0.4)] },
            vec![b_low.clone(), b_high.clone()],
        )
        .unwrap(),
        CylinderFunction::new(
            "sin-mix",
            Outer::SinSum { coeffs: vec![real(0.9), real(0.5)] },
            vec![b_wide.clone(), b_off.clone()],
        )
        .unwrap(),
        CylinderFunction::new(
            "gaussian-well",
            Outer::GaussianWell,
            vec![b_low.clone(), b_off.clone()],
        )
        .unwrap(),
        CylinderFunction::new(
            "rational",
            Outer::Rational { index: 0 },
            vec![b_high.clone(), b_wide.clone()],
        )
        .unwrap(),
        CylinderFunction::new(
            "sin-single",
            Outer::SinSum { coeffs: vec![real(1.3)] },
            vec![b_off],
        )
        .unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn region() -> Window<f64> {
        Window::new(vec![1.0, 1.0], vec![3.0, 3.0]).unwrap()
    }

    #[test]
    fn outer_derivatives_match_finite_differences() {
        let outers: Vec<Outer<f64>> = vec![
            Outer::Linear { coeffs: vec![0.7, -0.4] },
            Outer::SinSum { coeffs: vec![0.9, 0.5] },
            Outer::GaussianWell,
            Outer::Rational { index: 1 },
        ];
        let u = [0.37, -0.82];
        let h = 1e-6;
        for outer in outers {
            let mut g = [0.0; 2];
            outer.grad(&u, &mut g);
            let mut hess = [0.0; 4];
            outer.hessian(&u, &mut hess);
            for j in 0..2 {
                let mut up = u;
                up[j] += h;
                let mut dn = u;
                dn[j] -= h;
                let fd = (outer.eval(&up) - outer.eval(&dn)) / (2.0 * h);
                assert_relative_eq!(g[j], fd, max_relative = 1e-6, epsilon = 1e-9);
                for k in 0..2 {
                    let mut gp = [0.0; 2];
                    let mut gm = [0.0; 2];
                    outer.grad(&up, &mut gp);
                    outer.grad(&dn, &mut gm);
                    let fd2 = (gp[k] - gm[k]) / (2.0 * h);
                    assert_relative_eq!(hess[j * 2 + k], fd2, max_relative = 1e-5, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn battery_is_well_formed() {
        let battery = cylinder_battery::<f64>(&region(), 0.1, 2.0);
        assert_eq!(battery.len(), 6);
        let w = Window::cube(2, 4.0).unwrap();
        let eta = DiscreteMeasure::new(
            vec![0.5, 1.2],
            vec![1.5, 1.5, 2.5, 2.2],
            w.clone(),
        )
        .unwrap();
        for f in &battery {
            let v = f.eval(&eta);
            assert!(v.is_finite());
            // atoms outside every support do not change the value
            let eta2 = eta.with_atom(1.0, &[0.2, 0.2]).unwrap();
            assert_eq!(f.eval(&eta2), v);
            assert!(!f.touches(1.0, &[0.2, 0.2]));
        }
    }

    #[test]
    fn constant_function_is_constant() {
        let f = CylinderFunction::<f64>::constant(&region(), 1.0);
        let w = Window::cube(2, 4.0).unwrap();
        let a = DiscreteMeasure::empty(w.clone());
        let b = DiscreteMeasure::new(vec![1.0], vec![2.0, 2.0], w).unwrap();
        assert_eq!(f.eval(&a), f.eval(&b));
    }

    #[test]
    fn insertion_pairings_match_rebuild() {
        let battery = cylinder_battery::<f64>(&region(), 0.1, 2.0);
        let w = Window::cube(2, 4.0).unwrap();
        let eta = DiscreteMeasure::new(
            vec![0.5, 1.2],
            vec![1.5, 1.5, 2.5, 2.2],
            w,
        )
        .unwrap();
        let f = &battery[2];
        let u_fast = f.pairings_with_insertion(&eta, 0.8, &[2.0, 2.0]);
        let eta2 = eta.with_atom(0.8, &[2.0, 2.0]).unwrap();
        let u_slow = f.pairings(&eta2);
        for (a, b) in u_fast.iter().zip(&u_slow) {
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }
}
