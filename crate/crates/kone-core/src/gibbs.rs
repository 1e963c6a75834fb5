//! Finite-volume Gibbs machinery: Hamiltonians with boundary conditions,
//! the Metropolis–Hastings birth/death/weight/move chain targeting
//! `Z^{-1} e^{-H(η|ξ)} dν_Λ` over the truncated Poisson reference, and the
//! chain diagnostics.

use crate::cell_list::{CellList, BRUTE_FORCE_THRESHOLD};
use crate::density::WeightDensity;
use crate::error::{KoneError, Result};
use crate::measure::DiscreteMeasure;
use crate::potential::{check_c2, PairPotential};
use crate::scalar::{real, Scalar};
use crate::seed::{stream_rng, STREAM_BLOCK_GIBBS};
use crate::stats;
use crate::window::{Geometry, Window};
use rand::Rng;

/// Interaction field `U(x) = Σ_j s_j φ(x, x_j)` of a weighted point set at
/// `x`, skipping index `skip` (brute force; callers with large states use
/// the chain's cell-list variant).
fn field_brute<S: Scalar>(
    x: &[S],
    weights: &[S],
    positions: &[S],
    skip: Option<usize>,
    potential: &PairPotential<S>,
    window: &Window<S>,
    geometry: Geometry,
    scratch: &mut [S],
) -> S {
    let dim = window.dim();
    let r2max = potential.range() * potential.range();
    let mut acc = S::zero();
    for j in 0..weights.len() {
        if skip == Some(j) {
            continue;
        }
        window.displacement(geometry, x, &positions[j * dim..(j + 1) * dim], scratch);
        let r2: S = scratch.iter().map(|v| *v * *v).sum();
        if r2 < r2max {
            acc = acc + weights[j] * potential.radial(r2.sqrt());
        }
    }
    acc
}

/// Relative energy of inserting a unit at `(s, x)` against a measure:
/// `s · Σ_j s_j φ(x, x_j)` (finite-range, minimum image if periodic).
pub fn relative_energy<S: Scalar>(
    s: S,
    x: &[S],
    eta: &DiscreteMeasure<S>,
    potential: &PairPotential<S>,
    geometry: Geometry,
) -> S {
    let mut scratch = vec![S::zero(); eta.dim()];
    s * field_brute(
        x,
        eta.weights(),
        eta.positions_flat(),
        None,
        potential,
        eta.window(),
        geometry,
        &mut scratch,
    )
}

/// `H_Λ(η | ξ) = ½ Σ_{i≠j} s_i s_j φ(x_i,x_j) + Σ_{i,b} s_i s_b φ(x_i,x_b)`
/// with `b` running over boundary atoms. Cell lists above the brute-force
/// threshold.
pub fn hamiltonian<S: Scalar>(
    eta: &DiscreteMeasure<S>,
    boundary: Option<&DiscreteMeasure<S>>,
    potential: &PairPotential<S>,
    geometry: Geometry,
) -> Result<S> {
    let n = eta.len();
    let dim = eta.dim();
    let window = eta.window();
    let r2max = potential.range() * potential.range();
    let mut scratch = vec![S::zero(); dim];
    let half = real::<S>(0.5);

    let mut energy = S::zero();
    if n < BRUTE_FORCE_THRESHOLD {
        for i in 0..n {
            let u = field_brute(
                eta.position(i),
                eta.weights(),
                eta.positions_flat(),
                Some(i),
                potential,
                window,
                geometry,
                &mut scratch,
            );
            energy = energy + half * eta.weight(i) * u;
        }
    } else {
        let mut cells = CellList::new(window.clone(), geometry, potential.range());
        cells.rebuild(eta.positions_flat());
        for i in 0..n {
            let xi = eta.position(i);
            let mut u = S::zero();
            cells.for_neighbors(xi, |j| {
                if j == i {
                    return;
                }
                window.displacement(geometry, xi, eta.position(j), &mut scratch);
                let r2: S = scratch.iter().map(|v| *v * *v).sum();
                if r2 < r2max {
                    u = u + eta.weight(j) * potential.radial(r2.sqrt());
                }
            });
            energy = energy + half * eta.weight(i) * u;
        }
    }

    if let Some(xi) = boundary {
        for i in 0..n {
            let u = field_brute(
                eta.position(i),
                xi.weights(),
                xi.positions_flat(),
                None,
                potential,
                window,
                geometry,
                &mut scratch,
            );
            energy = energy + eta.weight(i) * u;
        }
    }
    if !energy.is_finite() {
        return Err(KoneError::NonFiniteEnergy("hamiltonian".into()));
    }
    Ok(energy)
}

/// Move mix and chain-length parameters of the Gibbs sampler.
#[derive(Clone, Debug)]
pub struct McmcParams<S> {
    pub s_min: S,
    pub burnin: usize,
    pub thin: usize,
    pub samples: usize,
    /// Probabilities of (birth, death, weight-resample, position-move).
    pub move_probs: [f64; 4],
    /// Standard deviation of the position-move jiggle.
    pub step_scale: S,
    pub geometry: Geometry,
    /// Steps between full-energy recomputation checks of the cache.
    pub cache_check_interval: usize,
}

impl<S: Scalar> McmcParams<S> {
    pub fn new(s_min: S, burnin: usize, thin: usize, samples: usize) -> Result<Self> {
        if !(s_min > S::zero()) {
            return Err(KoneError::InvalidParameter("s_min must be positive".into()));
        }
        if thin == 0 {
            return Err(KoneError::InvalidParameter("thin must be at least 1".into()));
        }
        Ok(Self {
            s_min,
            burnin,
            thin,
            samples,
            move_probs: [0.25; 4],
            step_scale: real(0.15),
            geometry: Geometry::Open,
            cache_check_interval: 1000,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveKind {
    Birth = 0,
    Death = 1,
    Weight = 2,
    Move = 3,
}

/// One Metropolis–Hastings chain with its cached state.
pub struct GibbsChain<S> {
    window: Window<S>,
    params: McmcParams<S>,
    potential: PairPotential<S>,
    density: WeightDensity<S>,
    boundary_weights: Vec<S>,
    boundary_positions: Vec<S>,
    weights: Vec<S>,
    positions: Vec<S>,
    cells: CellList<S>,
    energy: S,
    sigma_mass: S,
    steps: u64,
    pub proposed: [u64; 4],
    pub accepted: [u64; 4],
    scratch: Vec<S>,
}

impl<S: Scalar> GibbsChain<S> {
    /// Build a chain. Potentials other than the explicit zero test path must
    /// pass the (C2) check; boundary atoms must lie outside the window and
    /// are pruned to the within-range shell (locality: farther atoms cannot
    /// change any acceptance ratio).
    pub fn new(
        window: Window<S>,
        potential: PairPotential<S>,
        density: WeightDensity<S>,
        boundary: Option<&DiscreteMeasure<S>>,
        params: McmcParams<S>,
    ) -> Result<Self> {
        if !potential.is_zero() {
            let rep = check_c2(&potential, window.dim());
            if !rep.pass {
                return Err(KoneError::C2Violation {
                    margin: rep.margin.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        if params.geometry == Geometry::Periodic && boundary.is_some() {
            return Err(KoneError::InvalidParameter(
                "periodic windows take no boundary condition".into(),
            ));
        }
        let mut boundary_weights = Vec::new();
        let mut boundary_positions = Vec::new();
        if let Some(b) = boundary {
            if b.dim() != window.dim() {
                return Err(KoneError::DimensionMismatch { expected: window.dim(), got: b.dim() });
            }
            for (i, (s, x)) in b.atoms().enumerate() {
                if window.contains(x) {
                    return Err(KoneError::BoundaryInsideWindow(i));
                }
                // distance from the box: beyond the interaction range the
                // atom can never touch an acceptance ratio
                let mut d2 = S::zero();
                for a in 0..window.dim() {
                    let lo = window.lo()[a];
                    let hi = window.hi()[a];
                    let c = x[a].max(lo).min(hi);
                    d2 = d2 + (x[a] - c) * (x[a] - c);
                }
                if d2 < potential.range() * potential.range() {
                    boundary_weights.push(s);
                    boundary_positions.extend_from_slice(x);
                }
            }
        }
        let sigma_mass = density.sigma_mass(params.s_min, None, window.volume())?;
        let cells = CellList::new(window.clone(), params.geometry, potential.range());
        let dim = window.dim();
        let mut chain = Self {
            window,
            params,
            potential,
            density,
            boundary_weights,
            boundary_positions,
            weights: Vec::new(),
            positions: Vec::new(),
            cells: CellList::clone(&cells),
            energy: S::zero(),
            sigma_mass,
            steps: 0,
            proposed: [0; 4],
            accepted: [0; 4],
            scratch: vec![S::zero(); dim],
        };
        chain.cells.rebuild(&chain.positions);
        Ok(chain)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn energy(&self) -> S {
        self.energy
    }

    pub fn sigma_mass(&self) -> S {
        self.sigma_mass
    }

    pub fn window(&self) -> &Window<S> {
        &self.window
    }

    pub fn current_measure(&self) -> DiscreteMeasure<S> {
        DiscreteMeasure::new(self.weights.clone(), self.positions.clone(), self.window.clone())
            .expect("chain state is a valid measure")
    }

    /// Replace the state (e.g. dispersed initializations for convergence
    /// diagnostics).
    pub fn set_state(&mut self, measure: &DiscreteMeasure<S>) -> Result<()> {
        if measure.dim() != self.window.dim() {
            return Err(KoneError::DimensionMismatch {
                expected: self.window.dim(),
                got: measure.dim(),
            });
        }
        self.weights = measure.weights().to_vec();
        self.positions = measure.positions_flat().to_vec();
        self.cells.rebuild(&self.positions);
        self.energy = self.recompute_energy()?;
        Ok(())
    }

    pub fn recompute_energy(&self) -> Result<S> {
        hamiltonian(
            &self.current_measure(),
            self.boundary_measure().as_ref(),
            &self.potential,
            self.params.geometry,
        )
    }

    fn boundary_measure(&self) -> Option<DiscreteMeasure<S>> {
        if self.boundary_weights.is_empty() {
            return None;
        }
        // boundary atoms live outside the window; wrap them in an enclosing box
        let dim = self.window.dim();
        let mut lo = self.window.lo().to_vec();
        let mut hi = self.window.hi().to_vec();
        for i in 0..self.boundary_weights.len() {
            for a in 0..dim {
                lo[a] = lo[a].min(self.boundary_positions[i * dim + a] - S::one());
                hi[a] = hi[a].max(self.boundary_positions[i * dim + a] + S::one());
            }
        }
        let bw = Window::new(lo, hi).expect("enclosing box");
        Some(
            DiscreteMeasure::new(self.boundary_weights.clone(), self.boundary_positions.clone(), bw)
                .expect("boundary atoms form a measure"),
        )
    }

    /// Interaction field `U(x) = Σ_{j≠skip} s_j φ(x,x_j) + Σ_b s_b φ(x,x_b)`.
    pub fn field(&mut self, x: &[S], skip: Option<usize>) -> S {
        let dim = self.window.dim();
        let r2max = self.potential.range() * self.potential.range();
        let mut acc;
        if self.weights.len() < BRUTE_FORCE_THRESHOLD {
            acc = field_brute(
                x,
                &self.weights,
                &self.positions,
                skip,
                &self.potential,
                &self.window,
                self.params.geometry,
                &mut self.scratch,
            );
        } else {
            acc = S::zero();
            let window = &self.window;
            let geometry = self.params.geometry;
            let potential = &self.potential;
            let weights = &self.weights;
            let positions = &self.positions;
            let scratch = &mut self.scratch;
            self.cells.for_neighbors(x, |j| {
                if skip == Some(j) {
                    return;
                }
                window.displacement(geometry, x, &positions[j * dim..(j + 1) * dim], scratch);
                let r2: S = scratch.iter().map(|v| *v * *v).sum();
                if r2 < r2max {
                    acc = acc + weights[j] * potential.radial(r2.sqrt());
                }
            });
        }
        // boundary shell (kept small by construction)
        acc = acc
            + field_brute(
                x,
                &self.boundary_weights,
                &self.boundary_positions,
                None,
                &self.potential,
                &self.window,
                self.params.geometry,
                &mut self.scratch,
            );
        acc
    }

    /// Log acceptance ratio of a birth at `(s, x)`.
    pub fn birth_log_ratio(&mut self, s: S, x: &[S]) -> S {
        let dh = s * self.field(x, None);
        (self.sigma_mass / real_of_len::<S>(self.weights.len() + 1)).ln() - dh
    }

    /// Log acceptance ratio of the death of atom `i`.
    pub fn death_log_ratio(&mut self, i: usize) -> S {
        let x = self.positions[i * self.window.dim()..(i + 1) * self.window.dim()].to_vec();
        let dh = self.weights[i] * self.field(&x, Some(i));
        (real_of_len::<S>(self.weights.len()) / self.sigma_mass).ln() + dh
    }

    /// Log acceptance ratio of resampling atom `i`'s weight to `s_new`.
    pub fn weight_log_ratio(&mut self, i: usize, s_new: S) -> S {
        let x = self.positions[i * self.window.dim()..(i + 1) * self.window.dim()].to_vec();
        let u = self.field(&x, Some(i));
        -(s_new - self.weights[i]) * u
    }

    /// Log acceptance ratio of moving atom `i` to `x_new` (already wrapped).
    pub fn move_log_ratio(&mut self, i: usize, x_new: &[S]) -> S {
        let dim = self.window.dim();
        let x_old = self.positions[i * dim..(i + 1) * dim].to_vec();
        let s = self.weights[i];
        let dh = s * (self.field(x_new, Some(i)) - self.field(&x_old, Some(i)));
        let lr = self.density.eval(s, x_new).ln() - self.density.eval(s, &x_old).ln();
        lr - dh
    }

    /// One Metropolis–Hastings step; returns the move kind and whether it
    /// was accepted.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(MoveKind, bool)> {
        self.steps += 1;
        if self.params.cache_check_interval > 0
            && self.steps % self.params.cache_check_interval as u64 == 0
        {
            let fresh = self.recompute_energy()?;
            let scale = fresh.abs().max(S::one());
            if (fresh - self.energy).abs() > real::<S>(1e-8) * scale {
                return Err(KoneError::EnergyCacheDrift {
                    cached: self.energy.to_f64().unwrap_or(f64::NAN),
                    fresh: fresh.to_f64().unwrap_or(f64::NAN),
                });
            }
            self.energy = fresh;
        }
        let u: f64 = rng.random();
        let mut kind = MoveKind::Move;
        let mut acc_p = 0.0;
        for (idx, p) in self.params.move_probs.iter().enumerate() {
            acc_p += p;
            if u < acc_p {
                kind = match idx {
                    0 => MoveKind::Birth,
                    1 => MoveKind::Death,
                    2 => MoveKind::Weight,
                    _ => MoveKind::Move,
                };
                break;
            }
        }
        self.proposed[kind as usize] += 1;
        let dim = self.window.dim();
        let accepted = match kind {
            MoveKind::Birth => {
                let (s, x) = self.density.sample_point(rng, self.params.s_min, None, &self.window)?;
                let u_field = self.field(&x, None);
                let dh = s * u_field;
                let log_ratio =
                    (self.sigma_mass / real_of_len::<S>(self.weights.len() + 1)).ln() - dh;
                if accept(rng, log_ratio) {
                    self.weights.push(s);
                    self.positions.extend_from_slice(&x);
                    self.cells.insert(self.weights.len() - 1, &x);
                    self.energy = self.energy + dh;
                    true
                } else {
                    false
                }
            }
            MoveKind::Death => {
                if self.weights.is_empty() {
                    false
                } else {
                    let i = rng.random_range(0..self.weights.len());
                    let x = self.positions[i * dim..(i + 1) * dim].to_vec();
                    let dh = self.weights[i] * self.field(&x, Some(i));
                    let log_ratio =
                        (real_of_len::<S>(self.weights.len()) / self.sigma_mass).ln() + dh;
                    if accept(rng, log_ratio) {
                        self.weights.swap_remove(i);
                        let n = self.weights.len();
                        for a in 0..dim {
                            self.positions[i * dim + a] = self.positions[n * dim + a];
                        }
                        self.positions.truncate(n * dim);
                        self.cells.swap_remove(i);
                        self.energy = self.energy - dh;
                        true
                    } else {
                        false
                    }
                }
            }
            MoveKind::Weight => {
                if self.weights.is_empty() {
                    false
                } else {
                    let i = rng.random_range(0..self.weights.len());
                    let (s_new, _) = self.density.sample_weight(rng, self.params.s_min, None)?;
                    let x = self.positions[i * dim..(i + 1) * dim].to_vec();
                    let u_field = self.field(&x, Some(i));
                    let dh = (s_new - self.weights[i]) * u_field;
                    if accept(rng, -dh) {
                        self.weights[i] = s_new;
                        self.energy = self.energy + dh;
                        true
                    } else {
                        false
                    }
                }
            }
            MoveKind::Move => {
                if self.weights.is_empty() {
                    false
                } else {
                    let i = rng.random_range(0..self.weights.len());
                    let mut x_new = vec![S::zero(); dim];
                    for a in 0..dim {
                        x_new[a] = self.positions[i * dim + a]
                            + self.params.step_scale * S::standard_normal(rng);
                    }
                    match self.params.geometry {
                        Geometry::Periodic => self.window.wrap(&mut x_new),
                        Geometry::Open => {
                            if !self.window.contains(&x_new) {
                                // target density vanishes outside the window
                                return Ok((kind, false));
                            }
                        }
                    }
                    let log_ratio = self.move_log_ratio(i, &x_new);
                    let s = self.weights[i];
                    let x_old = self.positions[i * dim..(i + 1) * dim].to_vec();
                    if accept(rng, log_ratio) {
                        let dh = s * (self.field(&x_new, Some(i)) - self.field(&x_old, Some(i)));
                        for a in 0..dim {
                            self.positions[i * dim + a] = x_new[a];
                        }
                        self.cells.move_atom(i, &x_new);
                        self.energy = self.energy + dh;
                        true
                    } else {
                        false
                    }
                }
            }
        };
        if accepted {
            self.accepted[kind as usize] += 1;
        }
        Ok((kind, accepted))
    }
}

fn real_of_len<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("atom count representable")
}

fn accept<S: Scalar, R: Rng + ?Sized>(rng: &mut R, log_ratio: S) -> bool {
    if log_ratio >= S::zero() {
        return true;
    }
    // probability may underflow to exactly 0 for hugely unfavorable moves
    let p = log_ratio.exp();
    if p == S::zero() {
        return false;
    }
    S::unit_open(rng) < p
}

/// Chain diagnostics attached to each sampling run.
#[derive(Clone, Debug)]
pub struct ChainDiagnostics {
    /// (proposed, accepted) per move kind in birth/death/weight/move order.
    pub moves: [(u64, u64); 4],
    pub energy_trace: Vec<f64>,
    pub energy_ess: f64,
}

#[derive(Clone, Debug)]
pub struct GibbsRun<S> {
    pub samples: Vec<DiscreteMeasure<S>>,
    pub diagnostics: ChainDiagnostics,
}

/// Run one chain: burn-in, then `samples` thinned draws from the local
/// specification with boundary condition `boundary` (empty = free).
#[allow(clippy::too_many_arguments)]
pub fn sample_gibbs<S: Scalar>(
    window: &Window<S>,
    potential: &PairPotential<S>,
    density: &WeightDensity<S>,
    boundary: Option<&DiscreteMeasure<S>>,
    params: &McmcParams<S>,
    init: Option<&DiscreteMeasure<S>>,
    seed: u64,
) -> Result<GibbsRun<S>> {
    let mut chain = GibbsChain::new(
        window.clone(),
        potential.clone(),
        density.clone(),
        boundary,
        params.clone(),
    )?;
    if let Some(m) = init {
        chain.set_state(m)?;
    }
    let mut rng = stream_rng(seed, STREAM_BLOCK_GIBBS);
    for _ in 0..params.burnin {
        chain.step(&mut rng)?;
    }
    let mut samples = Vec::with_capacity(params.samples);
    let mut energy_trace = Vec::with_capacity(params.samples);
    for _ in 0..params.samples {
        for _ in 0..params.thin {
            chain.step(&mut rng)?;
        }
        samples.push(chain.current_measure());
        energy_trace.push(chain.energy().to_f64().unwrap_or(f64::NAN));
    }
    let energy_ess = if energy_trace.len() > 4 {
        stats::effective_sample_size(&energy_trace)
    } else {
        energy_trace.len() as f64
    };
    Ok(GibbsRun {
        samples,
        diagnostics: ChainDiagnostics {
            moves: [
                (chain.proposed[0], chain.accepted[0]),
                (chain.proposed[1], chain.accepted[1]),
                (chain.proposed[2], chain.accepted[2]),
                (chain.proposed[3], chain.accepted[3]),
            ],
            energy_trace,
            energy_ess,
        },
    })
}

/// Unnormalized log target density of a state w.r.t. the ordered-tuple
/// reference (used only by the detailed-balance unit checks):
/// `-H(η|ξ) + Σ_i log σ(s_i, x_i) - log n!`.
pub fn log_target_density<S: Scalar>(
    eta: &DiscreteMeasure<S>,
    boundary: Option<&DiscreteMeasure<S>>,
    potential: &PairPotential<S>,
    density: &WeightDensity<S>,
    geometry: Geometry,
) -> Result<f64> {
    let h = hamiltonian(eta, boundary, potential, geometry)?.to_f64().unwrap();
    let mut log_sigma = 0.0;
    for (s, x) in eta.atoms() {
        log_sigma += density.sigma_density(s, x).to_f64().unwrap().ln();
    }
    Ok(-h + log_sigma - stats::ln_gamma(eta.len() as f64 + 1.0))
}
