//! The differential calculus on the cone: per-atom gradients of cylinder
//! functions, the cone gradient and square field, the explicit generator,
//! and the Monte Carlo energy-form estimators with their identity checks.

use crate::cell_list::{CellList, BRUTE_FORCE_THRESHOLD};
use crate::cylinder::{AtomGradients, CylinderFunction};
use crate::density::WeightDensity;
use crate::error::{KoneError, Result};
use crate::gibbs::relative_energy;
use crate::measure::DiscreteMeasure;
use crate::observable::bump_support_box;
use crate::potential::PairPotential;
use crate::scalar::Scalar;
use crate::seed::{stream_rng, STREAM_BLOCK_INSERTION};
use crate::stats;
use crate::tangent::TangentVector;
use crate::window::{Geometry, Window};
use rayon::prelude::*;

/// Interaction context shared by the generator and the estimators.
#[derive(Clone, Copy)]
pub struct PotentialCtx<'a, S> {
    pub potential: &'a PairPotential<S>,
    pub geometry: Geometry,
}

/// Per-atom flat gradients `(∇_x F, ∇_{s_x} F)` by the chain rule.
pub fn grad_atoms<S: Scalar>(f: &CylinderFunction<S>, eta: &DiscreteMeasure<S>) -> AtomGradients<S> {
    let dim = eta.dim();
    let n = eta.len();
    let arity = f.arity();
    let u = f.pairings(eta);
    let mut outer_grad = vec![S::zero(); arity];
    f.outer().grad(&u, &mut outer_grad);

    let mut dx = vec![S::zero(); n * dim];
    let mut ds = vec![S::zero(); n];
    let mut bump_grad = vec![S::zero(); dim];
    for (i, (s, x)) in eta.atoms().enumerate() {
        for (j, bump) in f.inner().iter().enumerate() {
            if outer_grad[j] == S::zero() {
                continue;
            }
            bump.grad_x(s, x, &mut bump_grad);
            for a in 0..dim {
                dx[i * dim + a] = dx[i * dim + a] + outer_grad[j] * bump_grad[a];
            }
            ds[i] = ds[i] + outer_grad[j] * bump.ds(s, x);
        }
    }
    AtomGradients { dim, dx, ds }
}

/// The cone gradient: per atom `((1/s_x) ∇_x F, ∇_{s_x} F)` as a tangent
/// vector at η.
pub fn grad_cone<S: Scalar>(f: &CylinderFunction<S>, eta: &DiscreteMeasure<S>) -> TangentVector<S> {
    let g = grad_atoms(f, eta);
    let dim = g.dim;
    let mut pos = g.dx;
    for (i, (s, _)) in eta.atoms().enumerate() {
        for a in 0..dim {
            pos[i * dim + a] = pos[i * dim + a] / s;
        }
    }
    TangentVector::new(dim, eta.weights().to_vec(), pos, g.ds).expect("consistent sizes")
}

/// Square field `Σ_x [ (1/s_x)‖∇_x F‖² + s_x |∇_{s_x} F|² ]`.
pub fn square_field<S: Scalar>(f: &CylinderFunction<S>, eta: &DiscreteMeasure<S>) -> S {
    let g = grad_atoms(f, eta);
    let dim = g.dim;
    let mut acc = S::zero();
    for (i, (s, _)) in eta.atoms().enumerate() {
        let mut p2 = S::zero();
        for a in 0..dim {
            p2 = p2 + g.dx[i * dim + a] * g.dx[i * dim + a];
        }
        acc = acc + p2 / s + s * g.ds[i] * g.ds[i];
    }
    acc
}

/// Second-derivative data of the composite at one atom, by the chain rule:
/// `Δ_x F = Σ_{j,j'} H_{jj'} ⟨∇φ_j, ∇φ_{j'}⟩ + Σ_j G_j Δφ_j`, and the same
/// pattern in the mark.
struct AtomSecond<S> {
    grad_x: Vec<S>,
    grad_s: S,
    lap_x: S,
    lap_s: S,
}

fn atom_second<S: Scalar>(
    f: &CylinderFunction<S>,
    s: S,
    x: &[S],
    outer_grad: &[S],
    outer_hess: &[S],
    dim: usize,
) -> AtomSecond<S> {
    let arity = f.arity();
    // per-inner first derivatives at this atom
    let mut gx = vec![S::zero(); arity * dim];
    let mut gs = vec![S::zero(); arity];
    let mut lx = vec![S::zero(); arity];
    let mut ss = vec![S::zero(); arity];
    let mut scratch = vec![S::zero(); dim];
    for (j, bump) in f.inner().iter().enumerate() {
        bump.grad_x(s, x, &mut scratch);
        gx[j * dim..(j + 1) * dim].copy_from_slice(&scratch);
        gs[j] = bump.ds(s, x);
        lx[j] = bump.lap_x(s, x);
        ss[j] = bump.dss(s, x);
    }
    let mut grad_x = vec![S::zero(); dim];
    let mut grad_s = S::zero();
    let mut lap_x = S::zero();
    let mut lap_s = S::zero();
    for j in 0..arity {
        for a in 0..dim {
            grad_x[a] = grad_x[a] + outer_grad[j] * gx[j * dim + a];
        }
        grad_s = grad_s + outer_grad[j] * gs[j];
        lap_x = lap_x + outer_grad[j] * lx[j];
        lap_s = lap_s + outer_grad[j] * ss[j];
        for jp in 0..arity {
            let h = outer_hess[j * arity + jp];
            if h == S::zero() {
                continue;
            }
            let mut dot = S::zero();
            for a in 0..dim {
                dot = dot + gx[j * dim + a] * gx[jp * dim + a];
            }
            lap_x = lap_x + h * dot;
            lap_s = lap_s + h * gs[j] * gs[jp];
        }
    }
    AtomSecond { grad_x, grad_s, lap_x, lap_s }
}

/// Interaction sums at atom `x`: `U = Σ_{x'≠x} s' φ(x,x')` and
/// `w = Σ_{x'≠x} s' ∇_x φ(x,x')`, via cell list above the brute threshold.
fn interaction_sums<S: Scalar>(
    eta: &DiscreteMeasure<S>,
    i: usize,
    ctx: &PotentialCtx<'_, S>,
    cells: Option<&CellList<S>>,
    grad_out: &mut [S],
) -> S {
    let dim = eta.dim();
    let window = eta.window();
    let x = eta.position(i);
    let r2max = ctx.potential.range() * ctx.potential.range();
    let mut scratch = vec![S::zero(); dim];
    let mut pgrad = vec![S::zero(); dim];
    grad_out.fill(S::zero());
    let mut u = S::zero();
    let mut visit = |j: usize| {
        if j == i {
            return;
        }
        window.displacement(ctx.geometry, x, eta.position(j), &mut scratch);
        let r2: S = scratch.iter().map(|v| *v * *v).sum();
        if r2 >= r2max {
            return;
        }
        let sj = eta.weight(j);
        u = u + sj * ctx.potential.radial(r2.sqrt());
        ctx.potential.grad_disp(&scratch, &mut pgrad);
        for a in 0..dim {
            grad_out[a] = grad_out[a] + sj * pgrad[a];
        }
    };
    match cells {
        Some(c) => c.for_neighbors(x, &mut visit),
        None => (0..eta.len()).for_each(&mut visit),
    }
    u
}

/// The explicit generator applied to a cylinder function:
/// `L F(η) = Σ_x [ (1/s_x)Δ_x F + (1/s_x)⟨∇_x log l, ∇_x F⟩
///   - Σ_{x'≠x} s' ⟨∇_x φ(x,x'), ∇_x F⟩ + s_x Δ_{s_x} F
///   + s_x (∂_s log l)(∇_{s_x} F) - (Σ_{x'≠x} s' φ(x,x')) s_x ∇_{s_x} F ]`.
pub fn generator_apply<S: Scalar>(
    f: &CylinderFunction<S>,
    eta: &DiscreteMeasure<S>,
    l: &WeightDensity<S>,
    interaction: Option<PotentialCtx<'_, S>>,
) -> S {
    let dim = eta.dim();
    let arity = f.arity();
    let u = f.pairings(eta);
    let mut outer_grad = vec![S::zero(); arity];
    let mut outer_hess = vec![S::zero(); arity * arity];
    f.outer().grad(&u, &mut outer_grad);
    f.outer().hessian(&u, &mut outer_hess);

    let cells = match &interaction {
        Some(ctx) if eta.len() >= BRUTE_FORCE_THRESHOLD => {
            let mut c = CellList::new(eta.window().clone(), ctx.geometry, ctx.potential.range());
            c.rebuild(eta.positions_flat());
            Some(c)
        }
        _ => None,
    };

    let mut log_grad = vec![S::zero(); dim];
    let mut pot_grad = vec![S::zero(); dim];
    let mut total = S::zero();
    for (i, (s, x)) in eta.atoms().enumerate() {
        if !f.touches(s, x) {
            continue;
        }
        let second = atom_second(f, s, x, &outer_grad, &outer_hess, dim);
        let mut term = second.lap_x / s + s * second.lap_s;
        l.grad_x_log(s, x, &mut log_grad);
        for a in 0..dim {
            term = term + log_grad[a] * second.grad_x[a] / s;
        }
        term = term + s * l.dlog_ds(s, x) * second.grad_s;
        if let Some(ctx) = &interaction {
            let u_i = interaction_sums(eta, i, ctx, cells.as_ref(), &mut pot_grad);
            for a in 0..dim {
                term = term - pot_grad[a] * second.grad_x[a];
            }
            term = term - u_i * s * second.grad_s;
        }
        total = total + term;
    }
    total
}

/// Gamma fast path: `Σ_x [ (1/s_x)Δ_x F - Σ s'⟨∇φ,∇_x F⟩
///   + s_x(Δ_{s_x}F - ∇_{s_x}F) - (Σ s'φ) s_x ∇_{s_x}F ]`.
pub fn generator_apply_gamma<S: Scalar>(
    f: &CylinderFunction<S>,
    eta: &DiscreteMeasure<S>,
    interaction: Option<PotentialCtx<'_, S>>,
) -> S {
    let dim = eta.dim();
    let arity = f.arity();
    let u = f.pairings(eta);
    let mut outer_grad = vec![S::zero(); arity];
    let mut outer_hess = vec![S::zero(); arity * arity];
    f.outer().grad(&u, &mut outer_grad);
    f.outer().hessian(&u, &mut outer_hess);

    let cells = match &interaction {
        Some(ctx) if eta.len() >= BRUTE_FORCE_THRESHOLD => {
            let mut c = CellList::new(eta.window().clone(), ctx.geometry, ctx.potential.range());
            c.rebuild(eta.positions_flat());
            Some(c)
        }
        _ => None,
    };

    let mut pot_grad = vec![S::zero(); dim];
    let mut total = S::zero();
    for (i, (s, x)) in eta.atoms().enumerate() {
        if !f.touches(s, x) {
            continue;
        }
        let second = atom_second(f, s, x, &outer_grad, &outer_hess, dim);
        let mut term = second.lap_x / s + s * (second.lap_s - second.grad_s);
        if let Some(ctx) = &interaction {
            let u_i = interaction_sums(eta, i, ctx, cells.as_ref(), &mut pot_grad);
            for a in 0..dim {
                term = term - pot_grad[a] * second.grad_x[a];
            }
            term = term - u_i * s * second.grad_s;
        }
        total = total + term;
    }
    total
}

/// Monte Carlo estimate with standard error.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

/// Per-sample tangent inner products `⟨∇F, ∇G⟩_{T_η}`.
pub fn energy_form_samples<S: Scalar>(
    f: &CylinderFunction<S>,
    g: &CylinderFunction<S>,
    samples: &[DiscreteMeasure<S>],
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(KoneError::EmptySampleSet);
    }
    samples
        .par_iter()
        .map(|eta| {
            let a = grad_cone(f, eta);
            let b = grad_cone(g, eta);
            Ok(a.dot(&b)?.to_f64().unwrap())
        })
        .collect()
}

/// Direct energy-form estimator `E_μ ⟨∇F, ∇G⟩`.
pub fn energy_form_mc<S: Scalar>(
    f: &CylinderFunction<S>,
    g: &CylinderFunction<S>,
    samples: &[DiscreteMeasure<S>],
) -> Result<Estimate> {
    let vals = energy_form_samples(f, g, samples)?;
    let (mean, se) = stats::mean_se(&vals);
    Ok(Estimate { mean, se })
}

/// Combined support box and weight range of two cylinder functions
/// (the insertion estimator samples σ restricted to it).
fn joint_support<S: Scalar>(
    f: &CylinderFunction<S>,
    g: &CylinderFunction<S>,
) -> (S, S, Window<S>) {
    let mut s_lo = S::infinity();
    let mut s_hi = S::neg_infinity();
    let mut lo: Option<Vec<S>> = None;
    let mut hi: Option<Vec<S>> = None;
    for bump in f.inner().iter().chain(g.inner()) {
        let (a, b) = bump.s_support();
        s_lo = s_lo.min(a);
        s_hi = s_hi.max(b);
        let bbox = bump_support_box(bump);
        match (&mut lo, &mut hi) {
            (Some(l), Some(h)) => {
                for a in 0..bbox.dim() {
                    l[a] = l[a].min(bbox.lo()[a]);
                    h[a] = h[a].max(bbox.hi()[a]);
                }
            }
            _ => {
                lo = Some(bbox.lo().to_vec());
                hi = Some(bbox.hi().to_vec());
            }
        }
    }
    let window = Window::new(lo.unwrap(), hi.unwrap()).expect("joint support box");
    (s_lo, s_hi, window)
}

/// Insertion-form energy estimator (the identity-rewritten double integral):
/// `E_μ ∫ ds dx l(s,x) e^{-s∫φ(x,·)dη} [ (1/s²)⟨∇_x F, ∇_x G⟩
///   + (∂_s F)(∂_s G) ](η + sδ_x)`, importance-sampled from σ restricted to
/// the joint support (`ds dx l = s dσ`).
#[allow(clippy::too_many_arguments)]
pub fn energy_form_insertion_mc<S: Scalar>(
    f: &CylinderFunction<S>,
    g: &CylinderFunction<S>,
    samples: &[DiscreteMeasure<S>],
    l: &WeightDensity<S>,
    interaction: Option<PotentialCtx<'_, S>>,
    boundary: Option<&DiscreteMeasure<S>>,
    s_min: S,
    insertions_per_sample: usize,
    seed: u64,
) -> Result<Estimate> {
    if samples.is_empty() {
        return Err(KoneError::EmptySampleSet);
    }
    let (s_lo_raw, s_hi, x_box) = joint_support(f, g);
    let s_lo = s_lo_raw.max(s_min);
    if !(s_lo < s_hi) {
        return Err(KoneError::SupportViolation(
            "joint weight support empty above the truncation".into(),
        ));
    }
    let window = samples[0].window().clone();
    if !window.contains_box(&x_box) {
        return Err(KoneError::SupportViolation(
            "cylinder supports leave the sampling window".into(),
        ));
    }
    let mass = l.sigma_mass(s_lo, Some(s_hi), x_box.volume())?;
    let m_is = insertions_per_sample.max(1);
    let dim = window.dim();

    let vals: Vec<f64> = samples
        .par_iter()
        .enumerate()
        .map(|(idx, eta)| -> Result<f64> {
            let mut rng = stream_rng(seed, STREAM_BLOCK_INSERTION + (1 << 24) + idx as u64);
            let uf0 = f.pairings(eta);
            let ug0 = g.pairings(eta);
            let mut grad_f = vec![S::zero(); f.arity()];
            let mut grad_g = vec![S::zero(); g.arity()];
            let mut bump_grad = vec![S::zero(); dim];
            let mut acc = S::zero();
            for _ in 0..m_is {
                let (s, x) = l.sample_point(&mut rng, s_lo, Some(s_hi), &x_box)?;
                // pairings after insertion, without rebuilding the measure
                let mut uf = uf0.clone();
                for (v, b) in uf.iter_mut().zip(f.inner()) {
                    *v = *v + b.eval(s, &x);
                }
                let mut ug = ug0.clone();
                for (v, b) in ug.iter_mut().zip(g.inner()) {
                    *v = *v + b.eval(s, &x);
                }
                f.outer().grad(&uf, &mut grad_f);
                g.outer().grad(&ug, &mut grad_g);
                // gradients at the inserted atom
                let mut fx = vec![S::zero(); dim];
                let mut fs = S::zero();
                for (j, b) in f.inner().iter().enumerate() {
                    b.grad_x(s, &x, &mut bump_grad);
                    for a in 0..dim {
                        fx[a] = fx[a] + grad_f[j] * bump_grad[a];
                    }
                    fs = fs + grad_f[j] * b.ds(s, &x);
                }
                let mut gx = vec![S::zero(); dim];
                let mut gs = S::zero();
                for (j, b) in g.inner().iter().enumerate() {
                    b.grad_x(s, &x, &mut bump_grad);
                    for a in 0..dim {
                        gx[a] = gx[a] + grad_g[j] * bump_grad[a];
                    }
                    gs = gs + grad_g[j] * b.ds(s, &x);
                }
                let mut bracket = fs * gs;
                let mut dot = S::zero();
                for a in 0..dim {
                    dot = dot + fx[a] * gx[a];
                }
                bracket = bracket + dot / (s * s);
                if bracket == S::zero() {
                    continue;
                }
                let weight = match &interaction {
                    None => S::one(),
                    Some(ctx) => {
                        let mut e =
                            relative_energy(s, &x, eta, ctx.potential, ctx.geometry);
                        if let Some(b) = boundary {
                            e = e + relative_energy(s, &x, b, ctx.potential, ctx.geometry);
                        }
                        (-e).exp()
                    }
                };
                // ds dx l = s dσ: one extra factor of the sampled weight
                acc = acc + weight * s * bracket;
            }
            Ok((mass * acc / S::from_usize(m_is).unwrap()).to_f64().unwrap())
        })
        .collect::<Result<_>>()?;
    let (mean, se) = stats::mean_se(&vals);
    Ok(Estimate { mean, se })
}

/// Integration-by-parts report: `residual = E⟨∇F,∇G⟩ + E[(L F)·G]`, paired
/// per sample; pass ⟺ |residual| <= 3 se.
#[derive(Clone, Debug)]
pub struct IbpReport {
    pub energy_form: f64,
    pub pairing: f64,
    pub residual: f64,
    pub se: f64,
    pub pass: bool,
}

pub fn ibp_check<S: Scalar>(
    f: &CylinderFunction<S>,
    g: &CylinderFunction<S>,
    samples: &[DiscreteMeasure<S>],
    l: &WeightDensity<S>,
    interaction: Option<PotentialCtx<'_, S>>,
) -> Result<IbpReport> {
    if samples.is_empty() {
        return Err(KoneError::EmptySampleSet);
    }
    let per_sample: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|eta| -> Result<(f64, f64)> {
            let dot = grad_cone(f, eta).dot(&grad_cone(g, eta))?.to_f64().unwrap();
            let lf = generator_apply(f, eta, l, interaction).to_f64().unwrap();
            let gv = g.eval(eta).to_f64().unwrap();
            Ok((dot, lf * gv))
        })
        .collect::<Result<_>>()?;
    let dots: Vec<f64> = per_sample.iter().map(|p| p.0).collect();
    let pairs: Vec<f64> = per_sample.iter().map(|p| p.1).collect();
    let residuals: Vec<f64> = per_sample.iter().map(|p| p.0 + p.1).collect();
    let (energy_form, _) = stats::mean_se(&dots);
    let (pairing, _) = stats::mean_se(&pairs);
    let (residual, se) = stats::mean_se(&residuals);
    Ok(IbpReport { energy_form, pairing, residual, se, pass: residual.abs() <= 3.0 * se })
}

/// Dual-estimator report for the energy form.
#[derive(Clone, Debug)]
pub struct DualEnergyReport {
    pub direct: Estimate,
    pub insertion: Estimate,
    pub pass: bool,
}

/// Direct tangent-form estimator against the insertion-rewritten estimator.
#[allow(clippy::too_many_arguments)]
pub fn dual_energy_check<S: Scalar>(
    f: &CylinderFunction<S>,
    g: &CylinderFunction<S>,
    samples: &[DiscreteMeasure<S>],
    l: &WeightDensity<S>,
    interaction: Option<PotentialCtx<'_, S>>,
    boundary: Option<&DiscreteMeasure<S>>,
    s_min: S,
    insertions_per_sample: usize,
    seed: u64,
) -> Result<DualEnergyReport> {
    let direct = energy_form_mc(f, g, samples)?;
    let insertion = energy_form_insertion_mc(
        f,
        g,
        samples,
        l,
        interaction,
        boundary,
        s_min,
        insertions_per_sample,
        seed,
    )?;
    let pass =
        (direct.mean - insertion.mean).abs() <= 3.0 * (direct.se + insertion.se);
    Ok(DualEnergyReport { direct, insertion, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::cylinder_battery;
    use approx::assert_relative_eq;

    fn window() -> Window<f64> {
        Window::cube(2, 4.0).unwrap()
    }

    fn region() -> Window<f64> {
        Window::new(vec![1.2, 1.2], vec![2.8, 2.8]).unwrap()
    }

    fn test_measure() -> DiscreteMeasure<f64> {
        DiscreteMeasure::new(
            vec![0.6, 1.4, 0.35, 2.2],
            vec![1.5, 1.6, 2.1, 2.3, 1.9, 1.4, 2.6, 2.0],
            window(),
        )
        .unwrap()
    }

    #[test]
    fn linear_cylinder_gradient_is_inner_gradient() {
        let battery = cylinder_battery::<f64>(&region(), 0.1, 3.0);
        let f = &battery[0]; // identity outer, single inner
        let eta = test_measure();
        let g = grad_atoms(f, &eta);
        let mut expect = vec![0.0; 2];
        for (i, (s, x)) in eta.atoms().enumerate() {
            f.inner()[0].grad_x(s, x, &mut expect);
            assert_relative_eq!(g.dx[2 * i], expect[0], max_relative = 1e-14);
            assert_relative_eq!(g.dx[2 * i + 1], expect[1], max_relative = 1e-14);
            assert_relative_eq!(g.ds[i], f.inner()[0].ds(s, x), max_relative = 1e-14);
        }
    }

    #[test]
    fn atom_outside_supports_has_zero_gradient() {
        let battery = cylinder_battery::<f64>(&region(), 0.1, 3.0);
        let eta = DiscreteMeasure::new(vec![1.0], vec![0.3, 0.3], window()).unwrap();
        for f in &battery {
            let g = grad_atoms(f, &eta);
            assert_eq!(g.dx, vec![0.0, 0.0]);
            assert_eq!(g.ds, vec![0.0]);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        // move single atoms by ±h, perturb weights: central differences
        let battery = cylinder_battery::<f64>(&region(), 0.1, 3.0);
        let eta = test_measure();
        let h = 1e-6;
        for f in &battery {
            let g = grad_atoms(f, &eta);
            for i in 0..eta.len() {
                for axis in 0..2 {
                    let mut plus = eta.positions_flat().to_vec();
                    plus[2 * i + axis] += h;
                    let mut minus = eta.positions_flat().to_vec();
                    minus[2 * i + axis] -= h;
                    let ep = DiscreteMeasure::new(eta.weights().to_vec(), plus, window()).unwrap();
                    let em = DiscreteMeasure::new(eta.weights().to_vec(), minus, window()).unwrap();
                    let fd = (f.eval(&ep) - f.eval(&em)) / (2.0 * h);
                    assert_relative_eq!(
                        g.dx[2 * i + axis],
                        fd,
                        max_relative = 1e-6,
                        epsilon = 1e-9
                    );
                }
                let mut wp = eta.weights().to_vec();
                wp[i] += h;
                let mut wm = eta.weights().to_vec();
                wm[i] -= h;
                let ep =
                    DiscreteMeasure::new(wp, eta.positions_flat().to_vec(), window()).unwrap();
                let em =
                    DiscreteMeasure::new(wm, eta.positions_flat().to_vec(), window()).unwrap();
                let fd = (f.eval(&ep) - f.eval(&em)) / (2.0 * h);
                assert_relative_eq!(g.ds[i], fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn cone_gradient_divides_position_part_by_weight() {
        let battery = cylinder_battery::<f64>(&region(), 0.1, 3.0);
        let f = &battery[2];
        let eta = test_measure();
        let flat = grad_atoms(f, &eta);
        let cone = grad_cone(f, &eta);
        for i in 0..eta.len() {
            let s = eta.weight(i);
            for a in 0..2 {
                assert_relative_eq!(
                    cone.position_part(i)[a],
                    flat.dx[2 * i + a] / s,
                    max_relative = 1e-14
                );
            }
            assert_relative_eq!(cone.weight_part(i), flat.ds[i], max_relative = 1e-14);
        }
    }

    #[test]
    fn square_field_equals_tangent_norm() {
        let battery = cylinder_battery::<f64>(&region(), 0.1, 3.0);
        let eta = test_measure();
        for f in &battery {
            let sf = square_field(f, &eta);
            let norm = grad_cone(f, &eta).norm2();
            assert_relative_eq!(sf, norm, max_relative = 1e-12);
            assert!(sf >= 0.0);
        }
    }

    #[test]
    fn directional_derivative_along_group_flow() {
        // flow x ↦ x + t v(x), s ↦ e^{t h(x)} s matches ⟨∇F, (v,h)⟩ at t = 0,
        // with a Richardson step-halving confirmation
        use crate::smooth::{Bump1d, Smoothstep};
        let step = Smoothstep::new(2).unwrap();
        let vfield = Bump1d::new(1.0, 1.4, 2.6, 3.0, step).unwrap();
        let battery = cylinder_battery::<f64>(&region(), 0.1, 3.0);
        let eta = test_measure();
        let v = |x: &[f64]| [0.3 * vfield.value(x[0]), -0.2 * vfield.value(x[1])];
        let h_fn = |x: &[f64]| 0.4 * vfield.value(x[0]) * vfield.value(x[1]);

        for f in &battery {
            let g = grad_atoms(f, &eta);
            // pairing of the gradient with the flow direction:
            // Σ_x ⟨∇_x F, v⟩ + s h ∇_s F (the tangent product absorbs 1/s)
            let mut expect = 0.0;
            for (i, (s, x)) in eta.atoms().enumerate() {
                let vv = v(x);
                expect += g.dx[2 * i] * vv[0] + g.dx[2 * i + 1] * vv[1];
                expect += s * h_fn(x) * g.ds[i];
            }
            let flow_eval = |t: f64| {
                let mut w = Vec::new();
                let mut p = Vec::new();
                for (s, x) in eta.atoms() {
                    let vv = v(x);
                    p.push(x[0] + t * vv[0]);
                    p.push(x[1] + t * vv[1]);
                    w.push(s * (t * h_fn(x)).exp());
                }
                f.eval(&DiscreteMeasure::new(w, p, window()).unwrap())
            };
            let mut prev_err = f64::INFINITY;
            for &t in &[1e-3, 1e-4, 1e-5] {
                let fd = (flow_eval(t) - flow_eval(-t)) / (2.0 * t);
                let err = (fd - expect).abs();
                // second-order central differences: error shrinks ~100x per level
                assert!(err <= prev_err.max(1e-10) * 0.5 + 1e-9, "t={t} err={err}");
                prev_err = err;
                if t == 1e-5 {
                    assert_relative_eq!(fd, expect, max_relative = 1e-5, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn constant_function_annihilated() {
        let f = CylinderFunction::<f64>::constant(&region(), 1.0);
        let eta = test_measure();
        assert_eq!(square_field(&f, &eta), 0.0);
        assert_eq!(generator_apply(&f, &eta, &WeightDensity::Gamma, None), 0.0);
        let p = PairPotential::bump(2.0, 1.0, 0.25).unwrap();
        let ctx = PotentialCtx { potential: &p, geometry: Geometry::Open };
        assert_eq!(generator_apply(&f, &eta, &WeightDensity::Gamma, Some(ctx)), 0.0);
    }

    use crate::cylinder::CylinderFunction;

    #[test]
    fn gamma_fast_path_matches_general() {
        let battery = cylinder_battery::<f64>(&region(), 0.1, 3.0);
        let eta = test_measure();
        let p = PairPotential::bump(2.0, 1.0, 0.25).unwrap();
        for f in &battery {
            for ctx in [
                None,
                Some(PotentialCtx { potential: &p, geometry: Geometry::Open }),
            ] {
                let general = generator_apply(f, &eta, &WeightDensity::Gamma, ctx);
                let fast = generator_apply_gamma(f, &eta, ctx);
                assert_relative_eq!(general, fast, max_relative = 1e-14, epsilon = 1e-16);
            }
        }
    }

    #[test]
    fn generator_matches_finite_difference_oracle() {
        // assemble L F from central second differences of the full composite
        // plus explicit interaction sums (independent of the chain rule path)
        let battery = cylinder_battery::<f64>(&region(), 0.1, 3.0);
        let eta = DiscreteMeasure::new(
            vec![0.6, 1.4, 0.8],
            vec![1.5, 1.6, 2.1, 2.3, 1.9, 1.4],
            window(),
        )
        .unwrap();
        let p = PairPotential::bump(2.0, 1.0, 0.25).unwrap();
        let l = WeightDensity::<f64>::exponential(0.8, 1.3).unwrap();
        let ctx = PotentialCtx { potential: &p, geometry: Geometry::Open };
        let h = 2e-5;
        for f in &battery[..4] {
            let mut oracle = 0.0;
            for i in 0..eta.len() {
                let s = eta.weight(i);
                let x = eta.position(i).to_vec();
                // second differences in each position coordinate
                let mut lap_x = 0.0;
                let mut grad_x = [0.0; 2];
                for a in 0..2 {
                    let eval_shift = |d: f64| {
                        let mut pp = eta.positions_flat().to_vec();
                        pp[2 * i + a] += d;
                        f.eval(&DiscreteMeasure::new(eta.weights().to_vec(), pp, window()).unwrap())
                    };
                    let (fp, f0, fm) = (eval_shift(h), eval_shift(0.0), eval_shift(-h));
                    lap_x += (fp - 2.0 * f0 + fm) / (h * h);
                    grad_x[a] = (fp - fm) / (2.0 * h);
                }
                // second difference in the weight
                let eval_wshift = |d: f64| {
                    let mut ww = eta.weights().to_vec();
                    ww[i] += d;
                    f.eval(
                        &DiscreteMeasure::new(ww, eta.positions_flat().to_vec(), window())
                            .unwrap(),
                    )
                };
                let (gp, g0, gm) = (eval_wshift(h), eval_wshift(0.0), eval_wshift(-h));
                let lap_s = (gp - 2.0 * g0 + gm) / (h * h);
                let grad_s = (gp - gm) / (2.0 * h);
                // explicit interaction sums
                let mut u_i = 0.0;
                let mut w_i = [0.0; 2];
                for j in 0..eta.len() {
                    if j == i {
                        continue;
                    }
                    let xj = eta.position(j);
                    let d = [x[0] - xj[0], x[1] - xj[1]];
                    u_i += eta.weight(j) * p.eval_disp(&d);
                    let mut pg = [0.0; 2];
                    p.grad_disp(&d, &mut pg);
                    w_i[0] += eta.weight(j) * pg[0];
                    w_i[1] += eta.weight(j) * pg[1];
                }
                let mut lg = [0.0; 2];
                l.grad_x_log(s, &x, &mut lg);
                oracle += lap_x / s
                    + (lg[0] * grad_x[0] + lg[1] * grad_x[1]) / s
                    - (w_i[0] * grad_x[0] + w_i[1] * grad_x[1])
                    + s * lap_s
                    + s * l.dlog_ds(s, &x) * grad_s
                    - u_i * s * grad_s;
            }
            let lk = generator_apply(f, &eta, &l, Some(ctx));
            assert_relative_eq!(lk, oracle, max_relative = 1e-5, epsilon = 1e-7);
        }
    }

    #[test]
    fn energy_form_symmetry_is_exact() {
        let battery = cylinder_battery::<f64>(&region(), 0.1, 3.0);
        let samples = vec![test_measure(); 3];
        let fg = energy_form_mc(&battery[2], &battery[3], &samples).unwrap();
        let gf = energy_form_mc(&battery[3], &battery[2], &samples).unwrap();
        assert_eq!(fg.mean, gf.mean);
    }
}
