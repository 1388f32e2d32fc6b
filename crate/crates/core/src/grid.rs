//! Uniform periodic grids on a box centred at the origin.
//!
//! A grid with `N_j` samples and extent `L_j` along axis `j` places sample
//! `i_j` at `x_j = (i_j - N_j/2) h_j` with `h_j = L_j / N_j`, so the origin is
//! the sample with index `N_j/2` on every axis. The dual lattice consists of
//! `xi_j = k_j / L_j` with `k_j` in `[-N_j/2, N_j/2)`; storage of spectra
//! follows FFT order, i.e. storage slot `s` holds `k = s` for `s < N/2` and
//! `k = s - N` otherwise (the Nyquist slot is the negative end).
//!
//! Multi-dimensional arrays are row-major: the last axis varies fastest.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_grid, invalid_input, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    counts: Vec<usize>,
    extents: Vec<f64>,
}

impl GridSpec {
    pub fn new(counts: Vec<usize>, extents: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(invalid_grid("grid needs at least one axis"));
        }
        if counts.len() != extents.len() {
            return Err(invalid_grid(format!(
                "{} sample counts but {} extents",
                counts.len(),
                extents.len()
            )));
        }
        for (&n, &l) in counts.iter().zip(&extents) {
            if n < 2 || !n.is_power_of_two() {
                return Err(invalid_grid(format!(
                    "sample count {n} is not a power of two >= 2"
                )));
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(invalid_grid(format!(
                    "extent {l} must be positive and finite"
                )));
            }
        }
        Ok(Self { counts, extents })
    }

    /// Square grid with the same count and extent on every axis.
    pub fn cube(dim: usize, count: usize, extent: f64) -> Result<Self> {
        Self::new(vec![count; dim], vec![extent; dim])
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.counts[axis] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.spacing(j)).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.spacing(j)).product()
    }

    /// Product of the extents; the volume of the torus.
    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for j in (0..self.dim().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * self.counts[j + 1];
        }
        strides
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for j in (0..self.dim()).rev() {
            out[j] = flat % self.counts[j];
            flat /= self.counts[j];
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.counts)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    /// Signed lattice offset of sample index `i` relative to the origin sample.
    pub fn centered_index(&self, axis: usize, i: usize) -> i64 {
        i as i64 - (self.counts[axis] / 2) as i64
    }

    /// Index of the origin sample.
    pub fn origin(&self) -> usize {
        let idx: Vec<usize> = self.counts.iter().map(|n| n / 2).collect();
        self.ravel(&idx)
    }

    /// Coordinates of the sample stored at `flat`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for j in (0..self.dim()).rev() {
            let i = rem % self.counts[j];
            rem /= self.counts[j];
            out[j] = self.centered_index(j, i) as f64 * self.spacing(j);
        }
    }

    /// Signed frequency index stored in spectral slot `s` along `axis`.
    pub fn freq_index(&self, axis: usize, s: usize) -> i64 {
        let n = self.counts[axis];
        if s < n / 2 {
            s as i64
        } else {
            s as i64 - n as i64
        }
    }

    /// Storage slot of signed frequency index `k` along `axis`.
    pub fn freq_slot(&self, axis: usize, k: i64) -> usize {
        let n = self.counts[axis] as i64;
        k.rem_euclid(n) as usize
    }

    /// Dual-lattice frequency stored at spectral slot `flat`.
    pub fn frequency(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for j in (0..self.dim()).rev() {
            let s = rem % self.counts[j];
            rem /= self.counts[j];
            out[j] = self.freq_index(j, s) as f64 / self.extents[j];
        }
    }

    /// Largest representable frequency magnitude along `axis` on the positive
    /// side, `(N/2 - 1)/L`; the Nyquist frequency `N/(2L)` itself is stored on
    /// the negative side.
    pub fn nyquist(&self, axis: usize) -> f64 {
        self.counts[axis] as f64 / (2.0 * self.extents[axis])
    }

    /// Grid with every extent scaled by `factors` and the same sample counts.
    pub fn scaled(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.dim() {
            return Err(invalid_input(
                "scale factor count does not match grid dimension",
            ));
        }
        Self::new(
            self.counts.clone(),
            self.extents
                .iter()
                .zip(factors)
                .map(|(l, f)| l * f)
                .collect(),
        )
    }

    /// Grid with doubled extents and doubled counts (same spacing).
    pub fn doubled(&self) -> Self {
        Self {
            counts: self.counts.iter().map(|n| 2 * n).collect(),
            extents: self.extents.iter().map(|l| 2.0 * l).collect(),
        }
    }
}

/// A region of a grid, stored as one flag per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: GridSpec,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(grid: GridSpec, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != grid.len() {
            return Err(invalid_input(format!(
                "mask has {} cells, grid has {}",
                cells.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, cells })
    }

    pub fn empty(grid: GridSpec) -> Self {
        let n = grid.len();
        Self {
            grid,
            cells: vec![false; n],
        }
    }

    pub fn from_fn(grid: GridSpec, mut inside: impl FnMut(&[f64]) -> bool) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let cells = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut x);
                inside(&x)
            })
            .collect();
        Self { grid, cells }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn get(&self, i: usize) -> bool {
        self.cells[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.cells[i] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            cells: self.cells.iter().map(|c| !c).collect(),
        }
    }

    /// Complement cells with at least one axis neighbour inside the mask.
    /// Neighbours are taken without wrap-around.
    pub fn outer_boundary(&self) -> Vec<usize> {
        let strides = self.grid.strides();
        let mut idx = vec![0; self.grid.dim()];
        (0..self.grid.len())
            .filter(|&i| {
                if self.cells[i] {
                    return false;
                }
                self.grid.unravel(i, &mut idx);
                (0..self.grid.dim()).any(|j| {
                    (idx[j] > 0 && self.cells[i - strides[j]])
                        || (idx[j] + 1 < self.grid.counts()[j] && self.cells[i + strides[j]])
                })
            })
            .collect()
    }

    /// True when no mask cell lies on the outer faces of the grid box.
    pub fn is_interior(&self) -> bool {
        let mut idx = vec![0; self.grid.dim()];
        (0..self.grid.len()).all(|i| {
            if !self.cells[i] {
                return true;
            }
            self.grid.unravel(i, &mut idx);
            idx.iter()
                .zip(self.grid.counts())
                .all(|(&k, &n)| k > 0 && k + 1 < n)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(GridSpec::new(vec![12, 16], vec![1.0, 1.0]).is_err());
        assert!(GridSpec::new(vec![16, 16], vec![1.0, 0.0]).is_err());
        assert!(GridSpec::new(vec![16], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn ravel_roundtrip_and_origin() {
        let g = GridSpec::new(vec![4, 8], vec![2.0, 4.0]).unwrap();
        let mut idx = vec![0; 2];
        for flat in 0..g.len() {
            g.unravel(flat, &mut idx);
            assert_eq!(g.ravel(&idx), flat);
        }
        let mut x = vec![0.0; 2];
        g.point(g.origin(), &mut x);
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn nyquist_slot_is_negative() {
        let g = GridSpec::cube(1, 8, 2.0).unwrap();
        assert_eq!(g.freq_index(0, 4), -4);
        assert_eq!(g.freq_index(0, 3), 3);
        assert_eq!(g.freq_slot(0, -1), 7);
    }

    #[test]
    fn outer_boundary_of_single_cell() {
        let g = GridSpec::cube(2, 8, 8.0).unwrap();
        let mut m = Mask::empty(g.clone());
        m.set(g.origin(), true);
        assert_eq!(m.outer_boundary().len(), 4);
        assert!(m.is_interior());
    }
}
