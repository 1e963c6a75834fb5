//! Monte Carlo verifiers for the insertion identities.
//!
//! Both checks compare, over a sample set {η_i}:
//!   lhs = mean Σ_{atoms (s,x) of η} F(s, x, η)
//!   rhs = mean ∫ w(s, x, η) F(s, x, η + sδ_x) dσ(s, x)
//! with w ≡ 1 for the free measure (Campbell/Mecke) and
//! w = exp[-s ∫ φ(x,·) d(η+ξ)] for a Gibbs state (Nguyen–Zessin).
//! The σ-integral is importance-sampled from the normalized restriction of
//! σ to the observable's declared support, which is exact because the
//! integrand vanishes outside it.

use crate::density::WeightDensity;
use crate::error::{KoneError, Result};
use crate::gibbs::relative_energy;
use crate::measure::DiscreteMeasure;
use crate::observable::InsertionObservable;
use crate::potential::PairPotential;
use crate::quad;
use crate::scalar::Scalar;
use crate::seed::{stream_rng, STREAM_BLOCK_INSERTION};
use crate::stats;
use crate::window::{Geometry, Window};
use rayon::prelude::*;

/// Interaction context for the Nguyen–Zessin weight factor.
#[derive(Clone)]
pub struct InteractionCtx<'a, S> {
    pub potential: &'a PairPotential<S>,
    pub geometry: Geometry,
    pub boundary: Option<&'a DiscreteMeasure<S>>,
}

/// Two-sided identity estimate with standard errors;
/// pass ⟺ |lhs - rhs| <= 3 (se_lhs + se_rhs).
#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub se_lhs: f64,
    pub se_rhs: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn tolerance(&self) -> f64 {
        3.0 * (self.se_lhs + self.se_rhs)
    }
}

fn support_region<S: Scalar>(
    observable: &InsertionObservable<S>,
    window: &Window<S>,
    s_min: S,
    interaction: Option<&InteractionCtx<'_, S>>,
) -> Result<(S, S, Window<S>)> {
    let (s_lo, s_hi) = observable.s_support();
    if s_lo < s_min {
        return Err(KoneError::SupportViolation(format!(
            "observable `{}` reaches below the truncation: s support starts at {s_lo} < {s_min}",
            observable.name()
        )));
    }
    let x_box = observable.x_support();
    if !window.contains_box(&x_box) {
        return Err(KoneError::SupportViolation(format!(
            "observable `{}` support leaves the window",
            observable.name()
        )));
    }
    if let Some(ctx) = interaction {
        if ctx.geometry == Geometry::Open && !ctx.potential.is_zero() {
            // finite-volume surrogate: keep the support one interaction range
            // clear of the boundary
            let inner = window.shrunk(ctx.potential.range())?;
            if !inner.contains_box(&x_box) {
                return Err(KoneError::SupportViolation(format!(
                    "observable `{}` support comes within the interaction range of the boundary",
                    observable.name()
                )));
            }
        }
    }
    Ok((s_lo, s_hi, x_box))
}

/// Shared engine: None interaction = Mecke over CRM samples, Some = NZ over
/// Gibbs samples.
#[allow(clippy::too_many_arguments)]
pub fn insertion_identity_check<S: Scalar>(
    samples: &[DiscreteMeasure<S>],
    l: &WeightDensity<S>,
    interaction: Option<InteractionCtx<'_, S>>,
    observable: &InsertionObservable<S>,
    s_min: S,
    insertions_per_sample: usize,
    seed: u64,
) -> Result<IdentityReport> {
    if samples.is_empty() {
        return Err(KoneError::EmptySampleSet);
    }
    let window = samples[0].window().clone();
    let (s_lo, s_hi, x_box) =
        support_region(observable, &window, s_min, interaction.as_ref())?;
    let mass = l.sigma_mass(s_lo, Some(s_hi), x_box.volume())?;
    let m_is = insertions_per_sample.max(1);

    let per_sample: Vec<(f64, f64)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, eta)| -> Result<(f64, f64)> {
            // lhs: sum over atoms
            let lhs: S = eta
                .atoms()
                .map(|(s, x)| observable.eval(s, x, eta))
                .sum();
            // rhs: importance-sampled insertion integral
            let mut rng = stream_rng(seed, STREAM_BLOCK_INSERTION + i as u64);
            let mut acc = S::zero();
            for _ in 0..m_is {
                let (s_star, x_star) = l.sample_point(&mut rng, s_lo, Some(s_hi), &x_box)?;
                let weight = match &interaction {
                    None => S::one(),
                    Some(ctx) => {
                        let mut e = relative_energy(
                            s_star,
                            &x_star,
                            eta,
                            ctx.potential,
                            ctx.geometry,
                        );
                        if let Some(b) = ctx.boundary {
                            e = e + relative_energy(
                                s_star,
                                &x_star,
                                b,
                                ctx.potential,
                                ctx.geometry,
                            );
                        }
                        (-e).exp()
                    }
                };
                if weight > S::zero() {
                    let inserted = eta.with_atom(s_star, &x_star)?;
                    acc = acc
                        + weight * observable.eval(s_star, &x_star, &inserted);
                }
            }
            let rhs = mass * acc / S::from_usize(m_is).unwrap();
            Ok((lhs.to_f64().unwrap(), rhs.to_f64().unwrap()))
        })
        .collect::<Result<_>>()?;

    let lhs_vals: Vec<f64> = per_sample.iter().map(|p| p.0).collect();
    let rhs_vals: Vec<f64> = per_sample.iter().map(|p| p.1).collect();
    let (lhs, se_lhs) = stats::mean_se(&lhs_vals);
    let (rhs, se_rhs) = stats::mean_se(&rhs_vals);
    let pass = (lhs - rhs).abs() <= 3.0 * (se_lhs + se_rhs);
    Ok(IdentityReport { name: observable.name().to_string(), lhs, rhs, se_lhs, se_rhs, pass })
}

/// Mecke identity check over CRM samples.
pub fn mecke_check<S: Scalar>(
    samples: &[DiscreteMeasure<S>],
    l: &WeightDensity<S>,
    observable: &InsertionObservable<S>,
    s_min: S,
    insertions_per_sample: usize,
    seed: u64,
) -> Result<IdentityReport> {
    insertion_identity_check(samples, l, None, observable, s_min, insertions_per_sample, seed)
}

/// Nguyen–Zessin identity check over Gibbs-chain samples.
#[allow(clippy::too_many_arguments)]
pub fn nz_check<S: Scalar>(
    samples: &[DiscreteMeasure<S>],
    l: &WeightDensity<S>,
    ctx: InteractionCtx<'_, S>,
    observable: &InsertionObservable<S>,
    s_min: S,
    insertions_per_sample: usize,
    seed: u64,
) -> Result<IdentityReport> {
    insertion_identity_check(
        samples,
        l,
        Some(ctx),
        observable,
        s_min,
        insertions_per_sample,
        seed,
    )
}

/// Exact quadrature of `∫ F dσ` for a pure (η-independent) tensor-product
/// observable: per-axis bump integrals times the 1-d σ-slice quadrature.
pub fn campbell_quadrature<S: Scalar>(
    l: &WeightDensity<S>,
    observable: &InsertionObservable<S>,
) -> Result<S> {
    if !observable.is_pure() {
        return Err(KoneError::InvalidParameter(
            "campbell quadrature needs an η-independent observable".into(),
        ));
    }
    if !l.is_spatially_homogeneous() {
        return Err(KoneError::InvalidParameter(
            "campbell quadrature needs a spatially homogeneous density".into(),
        ));
    }
    let bump = observable.bump();
    let (s_lo, s_hi) = bump.s_support();
    let s_part = quad::integrate(
        |s: S| bump.s_bump.value(s) * l.sigma_density(s, &[]),
        s_lo,
        s_hi,
        quad::default_tol::<S>(),
    )?;
    let mut total = s_part * bump.amplitude;
    for b in &bump.x_bumps {
        total = total * b.integral();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crm::{sample_crm_batch, CrmParams};
    use crate::observable::insertion_battery;

    #[test]
    fn zero_observable_gives_exact_zeros() {
        let l = WeightDensity::<f64>::Gamma;
        let params = CrmParams::new(Window::cube(2, 1.0).unwrap(), 1e-3).unwrap();
        let samples = sample_crm_batch(&l, &params, 200, 5).unwrap();
        let region = Window::new(vec![0.2, 0.2], vec![0.8, 0.8]).unwrap();
        let mut battery = insertion_battery(&region, 0.05, 2.0, 1);
        // scale the Campbell bump to zero amplitude
        let mut bump = battery.remove(0).bump().clone();
        bump.amplitude = 0.0;
        let zero = InsertionObservable::pure("null", bump);
        let rep = mecke_check(&samples, &l, &zero, 1e-3, 1, 17).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.rhs, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn support_violations_are_rejected() {
        let l = WeightDensity::<f64>::Gamma;
        let params = CrmParams::new(Window::cube(2, 1.0).unwrap(), 1e-1).unwrap();
        let samples = sample_crm_batch(&l, &params, 10, 5).unwrap();
        let region = Window::new(vec![0.2, 0.2], vec![0.8, 0.8]).unwrap();
        // s support dips below the truncation
        let battery = insertion_battery(&region, 0.05, 2.0, 1);
        let err = mecke_check(&samples, &l, &battery[0], 1e-1, 1, 17);
        assert!(matches!(err, Err(KoneError::SupportViolation(_))));
        // x support leaves the window
        let wide = Window::new(vec![0.5, 0.5], vec![1.5, 1.5]).unwrap();
        let battery = insertion_battery(&wide, 0.2, 2.0, 1);
        let err = mecke_check(&samples, &l, &battery[0], 1e-1, 1, 17);
        assert!(matches!(err, Err(KoneError::SupportViolation(_))));
    }

    #[test]
    fn observable_beyond_sampled_weights_vanishes_two_sided() {
        let l = WeightDensity::<f64>::Gamma;
        let params = CrmParams::new(Window::cube(2, 1.0).unwrap(), 1e-3).unwrap();
        let samples = sample_crm_batch(&l, &params, 500, 23).unwrap();
        let region = Window::new(vec![0.2, 0.2], vec![0.8, 0.8]).unwrap();
        // weights above 40 essentially never occur (tail mass ~ E1(40)/E1(1e-3) ~ 1e-20)
        let battery = insertion_battery(&region, 40.0, 50.0, 1);
        let rep = mecke_check(&samples, &l, &battery[0], 1e-3, 4, 99).unwrap();
        assert_eq!(rep.lhs, 0.0);
        // rhs is the tiny tail integral estimate; bounded by the σ tail mass,
        // and both sides sit far below any practical tolerance
        let tail = l
            .sigma_mass(40.0, Some(50.0), region.volume())
            .unwrap();
        assert!(rep.rhs.abs() <= tail * 1.05 + 1e-30);
        assert!(rep.lhs.abs() < 1e-12 && rep.rhs.abs() < 1e-12);
    }

    #[test]
    fn campbell_two_sided_and_quadrature() {
        let l = WeightDensity::<f64>::Gamma;
        let params = CrmParams::new(Window::cube(2, 1.0).unwrap(), 1e-3).unwrap();
        let samples = sample_crm_batch(&l, &params, 4000, 301).unwrap();
        let region = Window::new(vec![0.15, 0.15], vec![0.85, 0.85]).unwrap();
        let battery = insertion_battery(&region, 0.05, 2.5, 2);
        for obs in &battery {
            let rep = mecke_check(&samples, &l, obs, 1e-3, 2, 44).unwrap();
            assert!(
                rep.pass,
                "{}: lhs {} rhs {} tol {}",
                rep.name,
                rep.lhs,
                rep.rhs,
                rep.tolerance()
            );
        }
        // Campbell case: both sides equal ∫ f dσ
        let q = campbell_quadrature(&l, &battery[0]).unwrap();
        let rep = mecke_check(&samples, &l, &battery[0], 1e-3, 2, 44).unwrap();
        assert!((rep.lhs - q).abs() < 3.0 * rep.se_lhs, "lhs {} vs quad {q}", rep.lhs);
        assert!((rep.rhs - q).abs() < 3.0 * rep.se_rhs + 0.01 * q, "rhs {} vs quad {q}", rep.rhs);
    }
}
