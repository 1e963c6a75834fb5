//! Insertion observables `F(s, x, η)`: the test integrands of the
//! Campbell/Mecke and Nguyen–Zessin identity checks. Each observable
//! declares its compact support in `(s, x)` so the verifiers can restrict
//! importance sampling to where the integrand lives.

use crate::measure::DiscreteMeasure;
use crate::scalar::{real, Scalar};
use crate::smooth::{Bump1d, Smoothstep, TensorBump};
use crate::window::Window;
use std::sync::Arc;

type ObsFn<S> = Arc<dyn Fn(S, &[S], &DiscreteMeasure<S>) -> S + Send + Sync>;

/// The support box of a tensor bump as a window.
pub fn bump_support_box<S: Scalar>(bump: &TensorBump<S>) -> Window<S> {
    let lo = bump.x_bumps.iter().map(|b| b.support().0).collect();
    let hi = bump.x_bumps.iter().map(|b| b.support().1).collect();
    Window::new(lo, hi).expect("bump support is a valid box")
}

/// `F(s, x, η) = bump(s, x) · modifier(η or (s,x,η))`, with declared support.
#[derive(Clone)]
pub struct InsertionObservable<S> {
    name: String,
    bump: TensorBump<S>,
    modifier: Option<ObsFn<S>>,
}

impl<S: Scalar> InsertionObservable<S> {
    pub fn pure(name: impl Into<String>, bump: TensorBump<S>) -> Self {
        Self { name: name.into(), bump, modifier: None }
    }

    pub fn with_modifier(
        name: impl Into<String>,
        bump: TensorBump<S>,
        modifier: ObsFn<S>,
    ) -> Self {
        Self { name: name.into(), bump, modifier: Some(modifier) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// η-independent observables admit an exact quadrature oracle.
    pub fn is_pure(&self) -> bool {
        self.modifier.is_none()
    }

    pub fn bump(&self) -> &TensorBump<S> {
        &self.bump
    }

    pub fn s_support(&self) -> (S, S) {
        self.bump.s_support()
    }

    pub fn x_support(&self) -> Window<S> {
        bump_support_box(&self.bump)
    }

    pub fn eval(&self, s: S, x: &[S], eta: &DiscreteMeasure<S>) -> S {
        let base = self.bump.eval(s, x);
        if base == S::zero() {
            return S::zero();
        }
        match &self.modifier {
            None => base,
            Some(m) => base * m(s, x, eta),
        }
    }
}

impl<S> std::fmt::Debug for InsertionObservable<S>
where
    S: std::fmt::Debug,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InsertionObservable")
            .field("name", &self.name)
            .field("pure", &self.modifier.is_none())
            .finish()
    }
}

/// Standard battery of bounded nonnegative insertion observables supported
/// on `s ∈ [s_lo, s_hi]`, positions inside `region` (which the caller picks
/// clear of the window boundary). `count <= 5`.
pub fn insertion_battery<S: Scalar>(
    region: &Window<S>,
    s_lo: S,
    s_hi: S,
    count: usize,
) -> Vec<InsertionObservable<S>> {
    let step = Smoothstep::new(2).unwrap();
    let dim = region.dim();
    let sb = |lo: S, hi: S| {
        let quarter = (hi - lo) * real::<S>(0.25);
        Bump1d::new(lo, lo + quarter, hi - quarter, hi, step).unwrap()
    };
    let xb = |frac_lo: f64, frac_hi: f64, axis: usize| {
        let lo = region.lo()[axis] + region.side(axis) * real::<S>(frac_lo);
        let hi = region.lo()[axis] + region.side(axis) * real::<S>(frac_hi);
        sb(lo, hi)
    };
    let full_box = |amp: f64| TensorBump {
        s_bump: sb(s_lo, s_hi),
        x_bumps: (0..dim).map(|a| xb(0.0, 1.0, a)).collect(),
        amplitude: real(amp),
    };
    let sub_box = |amp: f64| TensorBump {
        s_bump: sb(s_lo, (s_lo + s_hi) * real::<S>(0.5)),
        x_bumps: (0..dim).map(|a| xb(0.2, 0.8, a)).collect(),
        amplitude: real(amp),
    };

    // a probe region for η-dependent modifiers
    let probe: Window<S> = Window::new(
        (0..dim).map(|a| region.lo()[a]).collect(),
        (0..dim).map(|a| region.lo()[a] + region.side(a) * real::<S>(0.6)).collect(),
    )
    .unwrap();
    let probe_bump = full_box(1.0);

    let mut battery: Vec<InsertionObservable<S>> = Vec::new();
    battery.push(InsertionObservable::pure("campbell", full_box(1.0)));
    {
        let probe = probe.clone();
        battery.push(InsertionObservable::with_modifier(
            "mass-damped",
            full_box(1.0),
            Arc::new(move |_s, _x, eta: &DiscreteMeasure<S>| (-eta.mass_in(&probe)).exp()),
        ));
    }
    {
        let pb = probe_bump.clone();
        battery.push(InsertionObservable::with_modifier(
            "pairing-saturated",
            sub_box(2.0),
            Arc::new(move |_s, _x, eta: &DiscreteMeasure<S>| {
                let t = eta.pair_marked(|s, x| pb.eval(s, x));
                t / (S::one() + t)
            }),
        ));
    }
    {
        let pb = probe_bump.clone();
        battery.push(InsertionObservable::with_modifier(
            "pairing-wave",
            full_box(0.5),
            Arc::new(move |_s, _x, eta: &DiscreteMeasure<S>| {
                let t = eta.pair_marked(|s, x| pb.eval(s, x));
                (S::one() + t.sin()) * real(0.5)
            }),
        ));
    }
    {
        let probe = probe.clone();
        battery.push(InsertionObservable::with_modifier(
            "mark-weighted",
            sub_box(1.0),
            Arc::new(move |s, _x, eta: &DiscreteMeasure<S>| {
                s / (S::one() + s) * (-eta.mass_in(&probe) * real::<S>(0.5)).exp()
            }),
        ));
    }
    battery.truncate(count);
    battery
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_supports_are_declared_correctly() {
        let region = Window::<f64>::new(vec![1.0, 1.0], vec![3.0, 3.0]).unwrap();
        let battery = insertion_battery(&region, 0.05, 2.0, 5);
        assert_eq!(battery.len(), 5);
        let eta = DiscreteMeasure::empty(Window::cube(2, 4.0).unwrap());
        for obs in &battery {
            let (slo, shi) = obs.s_support();
            assert!(slo >= 0.05 && shi <= 2.0);
            assert!(region.contains_box(&obs.x_support()));
            // vanishes outside the declared support
            assert_eq!(obs.eval(slo - 1e-9, &[2.0, 2.0], &eta), 0.0);
            assert_eq!(obs.eval(0.5, &[0.9, 2.0], &eta), 0.0);
            // nonnegative inside
            let v = obs.eval(0.5, &[2.0, 2.0], &eta);
            assert!(v >= 0.0);
        }
    }
}
