//! Cell-list neighbor index over a window. Bin size is at least the
//! interaction range, so any pair within range lives in adjacent bins.
//! Small systems fall back to brute force at the call sites.

use crate::scalar::Scalar;
use crate::window::{Geometry, Window};

/// Number of atoms below which energy loops skip the index entirely.
pub const BRUTE_FORCE_THRESHOLD: usize = 32;

#[derive(Clone, Debug)]
pub struct CellList<S> {
    window: Window<S>,
    geometry: Geometry,
    bins_per_axis: Vec<usize>,
    bins: Vec<Vec<u32>>,
    bin_of: Vec<usize>,
}

impl<S: Scalar> CellList<S> {
    pub fn new(window: Window<S>, geometry: Geometry, range: S) -> Self {
        let dim = window.dim();
        let mut bins_per_axis = Vec::with_capacity(dim);
        for axis in 0..dim {
            let n = (window.side(axis) / range).to_f64().unwrap_or(1.0).floor() as usize;
            bins_per_axis.push(n.max(1));
        }
        let total: usize = bins_per_axis.iter().product();
        Self { window, geometry, bins_per_axis, bins: vec![Vec::new(); total], bin_of: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.bin_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_of.is_empty()
    }

    fn bin_index(&self, x: &[S]) -> usize {
        let mut idx = 0usize;
        for axis in 0..self.window.dim() {
            let n = self.bins_per_axis[axis];
            let frac = ((x[axis] - self.window.lo()[axis]) / self.window.side(axis))
                .to_f64()
                .unwrap_or(0.0);
            let mut b = (frac * n as f64).floor() as isize;
            b = b.clamp(0, n as isize - 1);
            idx = idx * n + b as usize;
        }
        idx
    }

    /// Rebuild from a flat position array (dim-strided).
    pub fn rebuild(&mut self, positions: &[S]) {
        for bin in &mut self.bins {
            bin.clear();
        }
        let dim = self.window.dim();
        let n = positions.len() / dim;
        self.bin_of.clear();
        self.bin_of.reserve(n);
        for i in 0..n {
            let b = self.bin_index(&positions[i * dim..(i + 1) * dim]);
            self.bins[b].push(i as u32);
            self.bin_of.push(b);
        }
    }

    pub fn insert(&mut self, index: usize, x: &[S]) {
        debug_assert_eq!(index, self.bin_of.len());
        let b = self.bin_index(x);
        self.bins[b].push(index as u32);
        self.bin_of.push(b);
    }

    /// Remove atom `index` under swap-remove semantics: the caller moves the
    /// last atom into slot `index`, and this updates the bins accordingly.
    pub fn swap_remove(&mut self, index: usize) {
        let last = self.bin_of.len() - 1;
        let bin = self.bin_of[index];
        let pos = self.bins[bin].iter().position(|&i| i as usize == index).expect("indexed");
        self.bins[bin].swap_remove(pos);
        if index != last {
            let last_bin = self.bin_of[last];
            let lp = self.bins[last_bin]
                .iter()
                .position(|&i| i as usize == last)
                .expect("indexed");
            self.bins[last_bin][lp] = index as u32;
            self.bin_of[index] = last_bin;
        }
        self.bin_of.pop();
    }

    pub fn move_atom(&mut self, index: usize, new_x: &[S]) {
        let b = self.bin_index(new_x);
        let old = self.bin_of[index];
        if b == old {
            return;
        }
        let pos = self.bins[old].iter().position(|&i| i as usize == index).expect("indexed");
        self.bins[old].swap_remove(pos);
        self.bins[b].push(index as u32);
        self.bin_of[index] = b;
    }

    /// Visit indices in the 3^d neighborhood of `x` (deduplicated when an
    /// axis has fewer than three bins).
    pub fn for_neighbors<F: FnMut(usize)>(&self, x: &[S], mut f: F) {
        let dim = self.window.dim();
        // decompose the center bin into per-axis coordinates
        let center = self.bin_index(x);
        let mut coords = vec![0usize; dim];
        let mut rem = center;
        for axis in (0..dim).rev() {
            let n = self.bins_per_axis[axis];
            coords[axis] = rem % n;
            rem /= n;
        }
        let mut offsets = vec![-1isize; dim];
        let mut visited = Vec::with_capacity(3usize.pow(dim as u32));
        'outer: loop {
            let mut idx = 0usize;
            let mut valid = true;
            for axis in 0..dim {
                let n = self.bins_per_axis[axis] as isize;
                let mut c = coords[axis] as isize + offsets[axis];
                match self.geometry {
                    Geometry::Periodic => c = (c % n + n) % n,
                    Geometry::Open => {
                        if c < 0 || c >= n {
                            valid = false;
                            break;
                        }
                    }
                }
                idx = idx * n as usize + c as usize;
            }
            if valid && !visited.contains(&idx) {
                visited.push(idx);
                for &i in &self.bins[idx] {
                    f(i as usize);
                }
            }
            // odometer over {-1, 0, 1}^dim
            for axis in 0..=dim {
                if axis == dim {
                    break 'outer;
                }
                offsets[axis] += 1;
                if offsets[axis] <= 1 {
                    break;
                }
                offsets[axis] = -1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn positions(n: usize, seed: u64) -> Vec<f64> {
        // simple deterministic scatter in [0, 4)^2
        let mut s = seed as f64 / 17.0 + 0.123;
        let mut out = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            s = (s * 997.0 + 0.3711).fract();
            out.push(s * 4.0);
        }
        out
    }

    fn neighbor_set(cl: &CellList<f64>, x: &[f64]) -> Vec<usize> {
        let mut v = Vec::new();
        cl.for_neighbors(x, |i| v.push(i));
        v.sort_unstable();
        v
    }

    #[test]
    fn finds_every_pair_within_range() {
        let w = Window::cube(2, 4.0).unwrap();
        for geometry in [Geometry::Open, Geometry::Periodic] {
            let pos = positions(60, 5);
            let mut cl = CellList::new(w.clone(), geometry, 1.0);
            cl.rebuild(&pos);
            for i in 0..60 {
                let xi = &pos[2 * i..2 * i + 2];
                let neigh = neighbor_set(&cl, xi);
                for j in 0..60 {
                    if w.dist2(geometry, xi, &pos[2 * j..2 * j + 2]) <= 1.0 {
                        assert!(neigh.contains(&j), "{geometry:?}: missing pair {i},{j}");
                    }
                }
            }
        }
    }

    #[test]
    fn mutations_preserve_coverage() {
        let w = Window::cube(2, 4.0).unwrap();
        let mut pos = positions(40, 9);
        let mut cl = CellList::new(w.clone(), Geometry::Periodic, 1.0);
        cl.rebuild(&pos);

        // move an atom across the window
        pos[0] = 3.9;
        pos[1] = 0.05;
        cl.move_atom(0, &pos[0..2]);
        // insert a new one
        pos.extend_from_slice(&[2.0, 2.0]);
        cl.insert(40, &pos[80..82]);
        // swap-remove atom 3 (emulating the owner's swap_remove)
        let last = pos.len() / 2 - 1;
        let (lx, ly) = (pos[2 * last], pos[2 * last + 1]);
        pos[6] = lx;
        pos[7] = ly;
        pos.truncate(2 * last);
        cl.swap_remove(3);

        let n = pos.len() / 2;
        assert_eq!(cl.len(), n);
        for i in 0..n {
            let xi = &pos[2 * i..2 * i + 2];
            let neigh = neighbor_set(&cl, xi);
            for j in 0..n {
                if w.dist2(Geometry::Periodic, xi, &pos[2 * j..2 * j + 2]) <= 1.0 {
                    assert!(neigh.contains(&j), "missing pair {i},{j} after mutations");
                }
            }
        }
    }

    #[test]
    fn small_windows_do_not_duplicate() {
        // 2 bins per axis with periodic wrap: offsets alias, indices must not repeat
        let w = Window::cube(2, 2.0).unwrap();
        let pos = vec![0.5, 0.5, 1.5, 1.5, 0.1, 1.9];
        let mut cl = CellList::new(w, Geometry::Periodic, 1.0);
        cl.rebuild(&pos);
        let neigh = neighbor_set(&cl, &[0.5, 0.5]);
        assert_eq!(neigh, vec![0, 1, 2]);
    }
}
