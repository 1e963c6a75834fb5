//! Discrete measures on a window and marked configurations, together with
//! the bijection between the two pictures, pairings and the text format.

use crate::error::{KoneError, Result};
use crate::scalar::{real, Scalar};
use crate::window::Window;
use std::fmt::Write as _;

/// Finite discrete measure `Σ s_i δ_{x_i}` restricted to a window.
///
/// Invariants: strictly positive finite weights, pairwise distinct positions,
/// every position inside the window.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure<S> {
    dim: usize,
    weights: Vec<S>,
    positions: Vec<S>, // flat, dim * len
    window: Window<S>,
}

/// Locally finite set of marked points `(s, x)` with distinct sites.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkedConfiguration<S> {
    dim: usize,
    weights: Vec<S>,
    positions: Vec<S>,
}

fn validate_atoms<S: Scalar>(
    dim: usize,
    weights: &[S],
    positions: &[S],
    window: Option<&Window<S>>,
) -> Result<()> {
    if positions.len() != dim * weights.len() {
        return Err(KoneError::DimensionMismatch {
            expected: dim * weights.len(),
            got: positions.len(),
        });
    }
    let mut total = S::zero();
    for (i, w) in weights.iter().enumerate() {
        if !(*w > S::zero()) || !w.is_finite() {
            return Err(KoneError::InvalidMeasure(format!(
                "weight {i} must be strictly positive and finite, got {w}"
            )));
        }
        total = total + *w;
        let x = &positions[i * dim..(i + 1) * dim];
        if x.iter().any(|v| !v.is_finite()) {
            return Err(KoneError::InvalidMeasure(format!("position {i} is not finite")));
        }
        if let Some(win) = window {
            if !win.contains(x) {
                return Err(KoneError::OutsideWindow(i));
            }
        }
    }
    if !total.is_finite() {
        return Err(KoneError::InvalidMeasure("total mass is not finite".into()));
    }
    // positions must be pairwise distinct (exact comparison; samplers make
    // collisions a null event, constructors reject them outright)
    for i in 0..weights.len() {
        for j in (i + 1)..weights.len() {
            if positions[i * dim..(i + 1) * dim] == positions[j * dim..(j + 1) * dim] {
                return Err(KoneError::DuplicatePosition(j));
            }
        }
    }
    Ok(())
}

impl<S: Scalar> DiscreteMeasure<S> {
    pub fn new(weights: Vec<S>, positions: Vec<S>, window: Window<S>) -> Result<Self> {
        let dim = window.dim();
        validate_atoms(dim, &weights, &positions, Some(&window))?;
        Ok(Self { dim, weights, positions, window })
    }

    pub fn empty(window: Window<S>) -> Self {
        let dim = window.dim();
        Self { dim, weights: Vec::new(), positions: Vec::new(), window }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn window(&self) -> &Window<S> {
        &self.window
    }

    pub fn weight(&self, i: usize) -> S {
        self.weights[i]
    }

    pub fn position(&self, i: usize) -> &[S] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn positions_flat(&self) -> &[S] {
        &self.positions
    }

    pub fn atoms(&self) -> impl Iterator<Item = (S, &[S])> {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| (*w, &self.positions[i * self.dim..(i + 1) * self.dim]))
    }

    /// Total mass η(Λ) of the window.
    pub fn total_mass(&self) -> S {
        self.weights.iter().copied().sum()
    }

    /// Mass η(A) carried by a sub-box.
    pub fn mass_in(&self, region: &Window<S>) -> S {
        self.atoms()
            .filter(|(_, x)| region.contains(x))
            .map(|(s, _)| s)
            .sum()
    }

    /// `⟨f, η⟩ = Σ s_i f(x_i)` for a function on positions.
    pub fn pair<F: Fn(&[S]) -> S>(&self, f: F) -> S {
        self.atoms().map(|(s, x)| s * f(x)).sum()
    }

    /// `⟨⟨φ, η⟩⟩ = Σ φ(s_i, x_i)` for a function on marks and positions.
    pub fn pair_marked<F: Fn(S, &[S]) -> S>(&self, phi: F) -> S {
        self.atoms().map(|(s, x)| phi(s, x)).sum()
    }

    /// Strip the window: the marked-configuration image of the measure.
    pub fn to_configuration(&self) -> MarkedConfiguration<S> {
        MarkedConfiguration {
            dim: self.dim,
            weights: self.weights.clone(),
            positions: self.positions.clone(),
        }
    }

    /// Inverse of [`MarkedConfiguration::to_measure`]; fails if the
    /// configuration violates the measure invariants for this window.
    pub fn from_configuration(gamma: &MarkedConfiguration<S>, window: Window<S>) -> Result<Self> {
        Self::new(gamma.weights.clone(), gamma.positions.clone(), window)
    }

    /// Return a copy with one atom appended (used for insertion identities).
    pub fn with_atom(&self, s: S, x: &[S]) -> Result<Self> {
        let mut weights = self.weights.clone();
        let mut positions = self.positions.clone();
        weights.push(s);
        positions.extend_from_slice(x);
        Self::new(weights, positions, self.window.clone())
    }

    /// Serialize to the line-oriented text format:
    /// a `# d=<dim> window=<lo..hi,...>` header, optional `# key=value`
    /// metadata lines, then one `s x_1 ... x_d` line per atom with 17
    /// significant digits.
    pub fn to_text(&self, metadata: &[(&str, String)]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# d={} window={}", self.dim, self.window.render());
        for (k, v) in metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        for (s, x) in self.atoms() {
            let _ = write!(out, "{:.16e}", s);
            for v in x {
                let _ = write!(out, " {:.16e}", v);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (dim, window, weights, positions, _) = parse_atom_lines::<S>(text)?;
        let window = window.ok_or_else(|| {
            KoneError::Parse("measure text requires a window in the header".into())
        })?;
        if window.dim() != dim {
            return Err(KoneError::DimensionMismatch { expected: dim, got: window.dim() });
        }
        Self::new(weights, positions, window)
    }
}

impl<S: Scalar> MarkedConfiguration<S> {
    pub fn new(weights: Vec<S>, positions: Vec<S>, dim: usize) -> Result<Self> {
        validate_atoms(dim, &weights, &positions, None)?;
        Ok(Self { dim, weights, positions })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, weights: Vec::new(), positions: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize) -> S {
        self.weights[i]
    }

    pub fn position(&self, i: usize) -> &[S] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = (S, &[S])> {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| (*w, &self.positions[i * self.dim..(i + 1) * self.dim]))
    }

    /// `⟨f, γ⟩ = Σ f(s, x)` over marked points.
    pub fn pair<F: Fn(S, &[S]) -> S>(&self, f: F) -> S {
        self.points().map(|(s, x)| f(s, x)).sum()
    }

    /// Local mass: total weight carried by points with position in `region`.
    pub fn local_mass(&self, region: &Window<S>) -> S {
        self.points()
            .filter(|(_, x)| region.contains(x))
            .map(|(s, _)| s)
            .sum()
    }

    /// The measure `Σ s_i δ_{x_i}` on the given window.
    pub fn to_measure(&self, window: Window<S>) -> Result<DiscreteMeasure<S>> {
        DiscreteMeasure::from_configuration(self, window)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# d={}", self.dim);
        for (s, x) in self.points() {
            let _ = write!(out, "{:.16e}", s);
            for v in x {
                let _ = write!(out, " {:.16e}", v);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (dim, _, weights, positions, _) = parse_atom_lines::<S>(text)?;
        Self::new(weights, positions, dim)
    }
}

type ParsedAtoms<S> = (usize, Option<Window<S>>, Vec<S>, Vec<S>, Vec<(String, String)>);

fn parse_atom_lines<S: Scalar>(text: &str) -> Result<ParsedAtoms<S>> {
    let mut dim: Option<usize> = None;
    let mut window: Option<Window<S>> = None;
    let mut metadata = Vec::new();
    let mut weights = Vec::new();
    let mut positions = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            for token in rest.split_whitespace() {
                let Some((key, value)) = token.split_once('=') else {
                    continue;
                };
                match key {
                    "d" => {
                        dim = Some(value.parse().map_err(|e| {
                            KoneError::Parse(format!("line {}: bad dimension: {e}", lineno + 1))
                        })?);
                    }
                    "window" => {
                        if value != "none" {
                            window = Some(Window::parse(value)?);
                        }
                    }
                    _ => metadata.push((key.to_string(), value.to_string())),
                }
            }
            continue;
        }
        let d = dim.ok_or_else(|| {
            KoneError::Parse(format!("line {}: atom before `# d=` header", lineno + 1))
        })?;
        let mut vals = line.split_whitespace().map(|t| {
            t.parse::<f64>()
                .map_err(|e| KoneError::Parse(format!("line {}: {e}", lineno + 1)))
        });
        let s = vals.next().ok_or_else(|| {
            KoneError::Parse(format!("line {}: empty atom line", lineno + 1))
        })??;
        weights.push(real::<S>(s));
        let mut count = 0usize;
        for v in vals {
            positions.push(real::<S>(v?));
            count += 1;
        }
        if count != d {
            return Err(KoneError::Parse(format!(
                "line {}: expected {} coordinates, got {}",
                lineno + 1,
                d,
                count
            )));
        }
    }
    let dim = dim.ok_or_else(|| KoneError::Parse("missing `# d=` header".into()))?;
    Ok((dim, window, weights, positions, metadata))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_window() -> Window<f64> {
        Window::cube(2, 1.0).unwrap()
    }

    #[test]
    fn empty_measure_round_trip() {
        let eta = DiscreteMeasure::<f64>::empty(unit_window());
        let gamma = eta.to_configuration();
        assert!(gamma.is_empty());
        let back = gamma.to_measure(unit_window()).unwrap();
        assert_eq!(eta, back);
    }

    #[test]
    fn single_atom_round_trip() {
        let eta =
            DiscreteMeasure::new(vec![1.0], vec![0.0, 0.0], unit_window()).unwrap();
        let gamma = eta.to_configuration();
        assert_eq!(gamma.len(), 1);
        assert_eq!(gamma.weight(0), 1.0);
        assert_eq!(gamma.position(0), &[0.0, 0.0]);
        assert_eq!(gamma.to_measure(unit_window()).unwrap(), eta);
    }

    #[test]
    fn invariants_enforced() {
        let w = unit_window();
        assert!(matches!(
            DiscreteMeasure::new(vec![0.0], vec![0.5, 0.5], w.clone()),
            Err(KoneError::InvalidMeasure(_))
        ));
        assert!(matches!(
            DiscreteMeasure::new(vec![1.0], vec![1.5, 0.5], w.clone()),
            Err(KoneError::OutsideWindow(0))
        ));
        assert!(matches!(
            DiscreteMeasure::new(
                vec![1.0, 2.0],
                vec![0.25, 0.25, 0.25, 0.25],
                w
            ),
            Err(KoneError::DuplicatePosition(1))
        ));
    }

    #[test]
    fn pairings_match_loops() {
        let eta = DiscreteMeasure::new(
            vec![2.0, 3.0],
            vec![0.1, 0.2, 0.6, 0.7],
            unit_window(),
        )
        .unwrap();
        // ⟨1, η⟩ = total mass
        assert_relative_eq!(eta.pair(|_| 1.0), 5.0);
        // ⟨⟨s, η⟩⟩ = Σ s
        assert_relative_eq!(eta.pair_marked(|s, _| s), 5.0);
        // zero test function
        assert_relative_eq!(eta.pair_marked(|_, _| 0.0), 0.0);
    }

    #[test]
    fn indicator_pairing_is_sub_mass() {
        let eta = DiscreteMeasure::new(
            vec![1.0, 2.0, 4.0],
            vec![0.1, 0.1, 0.6, 0.6, 0.9, 0.9],
            unit_window(),
        )
        .unwrap();
        let half = Window::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        let ind = eta.pair(|x| if half.contains(x) { 1.0 } else { 0.0 });
        assert_relative_eq!(ind, eta.mass_in(&half));
        assert_relative_eq!(ind, 1.0);
    }

    #[test]
    fn local_mass_counts_only_inside() {
        let gamma = MarkedConfiguration::new(
            vec![1.0, 2.0],
            vec![0.0, 0.0, 5.0, 5.0],
            2,
        )
        .unwrap();
        let lam = Window::centered_cube(2, 1.0).unwrap();
        assert_relative_eq!(gamma.local_mass(&lam), 1.0);
        assert_relative_eq!(MarkedConfiguration::<f64>::empty(2).local_mass(&lam), 0.0);
    }

    #[test]
    fn text_round_trip_with_metadata() {
        let eta = DiscreteMeasure::new(
            vec![0.123456789012345678, 2.0 / 3.0],
            vec![0.1, 0.9, 1.0 / 3.0, 0.25],
            unit_window(),
        )
        .unwrap();
        let text = eta.to_text(&[("s_min", "1e-3".to_string())]);
        let back = DiscreteMeasure::<f64>::from_text(&text).unwrap();
        assert_eq!(eta, back); // bit-exact through 17 significant digits
    }
}
