//! Sampled fields and their Fourier transforms.
//!
//! The transform follows `f^(xi) = int f(x) e^{-2 pi i <x, xi>} dx`, discretised
//! as a cell-volume-scaled DFT over the centred sample positions, so a field
//! and its spectrum approximate the continuum objects directly and no factors
//! of `2 pi` appear in multipliers beyond those in their definitions.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftDirection;

use crate::dilation::DilationGroup;
use crate::error::{invalid_grid, invalid_input, invalid_param, Result};
use crate::fft::fft_nd;
use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coefficients: Vec<Complex64>,
}

/// `(-1)^{sum_j s_j}` for spectral slot `flat`; the phase of the origin offset.
fn checker_sign(grid: &GridSpec, flat: usize) -> f64 {
    let mut rem = flat;
    let mut parity = 0usize;
    for &n in grid.counts().iter().rev() {
        parity += rem % n;
        rem /= n;
    }
    if parity % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl SampledField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid_input(format!(
                "{} values for a grid of {} samples",
                values.len(),
                grid.len()
            )));
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(invalid_input("field values must be finite"));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: GridSpec, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::default(); n],
        }
    }

    pub fn constant(grid: GridSpec, c: Complex64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![c; n],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut x);
                f(&x)
            })
            .collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// `e^{2 pi i <x, xi>}` for the dual-lattice frequency with signed integer
    /// indices `k` (`xi_j = k_j / L_j`).
    pub fn plane_wave(grid: GridSpec, k: &[i64]) -> Result<Self> {
        if k.len() != grid.dim() {
            return Err(invalid_input("frequency index has the wrong dimension"));
        }
        for (j, &kj) in k.iter().enumerate() {
            let half = (grid.counts()[j] / 2) as i64;
            if kj < -half || kj >= half {
                return Err(invalid_input(format!(
                    "frequency index {kj} outside the dual lattice"
                )));
            }
        }
        let xi: Vec<f64> = k
            .iter()
            .zip(grid.extents())
            .map(|(&kj, l)| kj as f64 / l)
            .collect();
        Ok(Self::from_fn(grid, |x| {
            let ph: f64 = x.iter().zip(&xi).map(|(a, b)| a * b).sum();
            Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ph)
        }))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value_at(&self, idx: &[usize]) -> Complex64 {
        self.values[self.grid.ravel(idx)]
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        if self.grid != other.grid {
            return Err(invalid_input("fields live on different grids"));
        }
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |f - g|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `int f dx` over the box.
    pub fn integral(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() * self.grid.cell_volume()
    }

    /// Periodic translation: returns `g(x) = f(x - v)` for the lattice vector
    /// with integer cell offsets `shift`.
    pub fn translate(&self, shift: &[i64]) -> Self {
        let grid = &self.grid;
        let mut idx = vec![0usize; grid.dim()];
        let mut src = vec![0usize; grid.dim()];
        let mut out = vec![Complex64::default(); grid.len()];
        for (flat, o) in out.iter_mut().enumerate() {
            grid.unravel(flat, &mut idx);
            for j in 0..grid.dim() {
                let n = grid.counts()[j] as i64;
                src[j] = (idx[j] as i64 - shift[j]).rem_euclid(n) as usize;
            }
            *o = self.values[grid.ravel(&src)];
        }
        Self {
            grid: grid.clone(),
            values: out,
        }
    }

    /// `f^`, approximating the continuum transform at the dual lattice.
    pub fn forward(&self) -> SpectralField {
        let mut data = self.values.clone();
        fft_nd(&mut data, self.grid.counts(), FftDirection::Forward);
        let vol = self.grid.cell_volume();
        for (i, v) in data.iter_mut().enumerate() {
            *v *= vol * checker_sign(&self.grid, i);
        }
        SpectralField {
            grid: self.grid.clone(),
            coefficients: data,
        }
    }

    /// `||f||_p`; `p = f64::INFINITY` gives the sup norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm_of(&self.moduli(), self.grid.cell_volume(), p)
    }

    /// `|{x : |f(x)| > beta}|`.
    pub fn distribution_function(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(invalid_param(format!("beta = {beta} must be positive")));
        }
        Ok(distribution_of(
            &self.moduli(),
            self.grid.cell_volume(),
            beta,
        ))
    }

    /// Little-endian binary dump; layout documented in the book's formats chapter.
    pub fn write_binary(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.grid.dim() as u64).to_le_bytes())?;
        for &n in self.grid.counts() {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for &l in self.grid.extents() {
            w.write_all(&l.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl std::io::Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(invalid_input("not a field dump (bad magic)"));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let dim = u64::from_le_bytes(b8) as usize;
        if dim == 0 || dim > 16 {
            return Err(invalid_input(format!("implausible dimension {dim}")));
        }
        let mut counts = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut b8)?;
            counts.push(u64::from_le_bytes(b8) as usize);
        }
        let mut extents = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut b8)?;
            extents.push(f64::from_le_bytes(b8));
        }
        let grid = GridSpec::new(counts, extents)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            values.push(Complex64::new(re, im));
        }
        Self::new(grid, values)
    }

    /// CSV with columns `x1..xn,re,im`, one row per sample in storage order.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let dim = self.grid.dim();
        let header: Vec<String> = (1..=dim).map(|j| format!("x{j}")).collect();
        writeln!(w, "{},re,im", header.join(","))?;
        let mut x = vec![0.0; dim];
        for (i, v) in self.values.iter().enumerate() {
            self.grid.point(i, &mut x);
            let coords: Vec<String> = x.iter().map(|c| format!("{c:e}")).collect();
            writeln!(w, "{},{:e},{:e}", coords.join(","), v.re, v.im)?;
        }
        Ok(())
    }

    /// Inverse of [`SampledField::write_csv`]. The grid is recovered from the
    /// coordinate columns: `N_j` distinct values spaced `h_j`, `L_j = N_j h_j`.
    pub fn read_csv(r: impl std::io::BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| invalid_input("empty CSV"))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        let dim = cols.len().saturating_sub(2);
        let expected: Vec<String> = (1..=dim).map(|j| format!("x{j}")).chain(["re".into(), "im".into()]).collect();
        if dim == 0 || cols != expected {
            return Err(invalid_input(format!("unexpected CSV header `{}`", header.trim())));
        }
        let mut coords = vec![Vec::new(); dim];
        let mut values = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| invalid_input(format!("CSV row {}: {e}", n + 2)))?;
            if row.len() != dim + 2 {
                return Err(invalid_input(format!("CSV row {} has {} columns", n + 2, row.len())));
            }
            for j in 0..dim {
                coords[j].push(row[j]);
            }
            values.push(Complex64::new(row[dim], row[dim + 1]));
        }
        let mut counts = Vec::with_capacity(dim);
        let mut extents = Vec::with_capacity(dim);
        for c in &coords {
            let mut u = c.clone();
            u.sort_by(f64::total_cmp);
            u.dedup();
            if u.len() < 2 {
                return Err(invalid_input("CSV needs at least two samples per axis"));
            }
            let h = (u[u.len() - 1] - u[0]) / (u.len() - 1) as f64;
            counts.push(u.len());
            extents.push(h * u.len() as f64);
        }
        let grid = GridSpec::new(counts, extents)?;
        if values.len() != grid.len() {
            return Err(invalid_input(format!("CSV has {} rows for a grid of {}", values.len(), grid.len())));
        }
        let field = Self::new(grid, values)?;
        let mut x = vec![0.0; dim];
        for i in 0..field.len() {
            field.grid.point(i, &mut x);
            let tol = 1e-6 * field.grid.spacings().iter().cloned().fold(f64::INFINITY, f64::min);
            if (0..dim).any(|j| (x[j] - coords[j][i]).abs() > tol) {
                return Err(invalid_input(format!("CSV row {} is out of storage order", i + 2)));
            }
        }
        Ok(field)
    }
}

pub(crate) const BINARY_MAGIC: &[u8; 8] = b"ANHFLD01";

pub(crate) fn lp_norm_of(moduli: &[f64], cell: f64, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(invalid_param(format!("p = {p} must be >= 1")));
    }
    if p.is_infinite() {
        return Ok(moduli.iter().copied().fold(0.0, f64::max));
    }
    let s: f64 = moduli.iter().map(|m| m.powf(p)).sum();
    Ok((s * cell).powf(1.0 / p))
}

pub(crate) fn distribution_of(moduli: &[f64], cell: f64, beta: f64) -> f64 {
    moduli.iter().filter(|&&m| m > beta).count() as f64 * cell
}

impl SpectralField {
    pub fn new(grid: GridSpec, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.len() {
            return Err(invalid_input("coefficient count does not match the grid"));
        }
        Ok(Self { grid, coefficients })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self {
            grid,
            coefficients: vec![Complex64::default(); n],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    /// Coefficient at the signed frequency indices `k`.
    pub fn at(&self, k: &[i64]) -> Complex64 {
        let slots: Vec<usize> = k
            .iter()
            .enumerate()
            .map(|(j, &kj)| self.grid.freq_slot(j, kj))
            .collect();
        self.coefficients[self.grid.ravel(&slots)]
    }

    /// The zero-frequency coefficient `f^(0) = int f`.
    pub fn zero_mode(&self) -> Complex64 {
        self.coefficients[0]
    }

    /// Pointwise product with a multiplier given in spectral storage order.
    pub fn multiply(&self, multiplier: &[f64]) -> Self {
        Self {
            grid: self.grid.clone(),
            coefficients: self
                .coefficients
                .iter()
                .zip(multiplier)
                .map(|(c, m)| c * m)
                .collect(),
        }
    }

    pub fn multiply_complex(&self, multiplier: &[Complex64]) -> Self {
        Self {
            grid: self.grid.clone(),
            coefficients: self
                .coefficients
                .iter()
                .zip(multiplier)
                .map(|(c, m)| c * m)
                .collect(),
        }
    }

    /// `(sum |f^|^2 / prod L_j)^{1/2}`, the frequency-side `L^2` norm.
    pub fn l2_norm(&self) -> f64 {
        (self.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.grid.volume()).sqrt()
    }

    pub fn inverse(&self) -> SampledField {
        let mut data: Vec<Complex64> = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * checker_sign(&self.grid, i))
            .collect();
        fft_nd(&mut data, self.grid.counts(), FftDirection::Inverse);
        let s = 1.0 / self.grid.volume();
        for v in data.iter_mut() {
            *v *= s;
        }
        SampledField {
            grid: self.grid.clone(),
            values: data,
        }
    }
}

/// Smooth bump on `(1, 2)` used to shape band-limited spectra.
fn annulus_bump(r: f64) -> f64 {
    if r <= 1.0 || r >= 2.0 {
        0.0
    } else {
        (-1.0 / ((r - 1.0) * (2.0 - r)) + 4.0).exp()
    }
}

/// A real function whose spectrum is a random smooth profile supported in the
/// annulus `1 <= rho(xi) <= 2`, normalised to `||eta||_2 = 1`.
///
/// Coefficients are drawn in lexicographic order of the integer frequency
/// indices inside the annulus, so grids sharing the extents (any resolution
/// fine enough to hold the annulus) produce the same function.
pub fn make_band_limited(
    grid: &GridSpec,
    group: &DilationGroup,
    seed: u64,
) -> Result<SampledField> {
    if group.dim() != grid.dim() {
        return Err(invalid_input("group and grid dimensions differ"));
    }
    let nyq = group.nyquist_rho(grid);
    if nyq <= 2.0 {
        return Err(invalid_grid(format!(
            "Nyquist faces sit at rho = {nyq:.3}; the annulus 1 <= rho <= 2 is not resolved"
        )));
    }
    if let Some(l) = grid.extents().iter().find(|&&l| l < 4.0) {
        return Err(invalid_grid(format!(
            "extent {l} gives a dual spacing coarser than 1/4; the annulus is not resolved"
        )));
    }
    let dim = grid.dim();
    let bounds: Vec<i64> = (0..dim)
        .map(|j| (2f64.powf(group.exponents()[j]) * grid.extents()[j]).ceil() as i64)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = SpectralField::zeros(grid.clone());
    let mut k = bounds.iter().map(|b| -b).collect::<Vec<i64>>();
    let mut xi = vec![0.0; dim];
    loop {
        // Hermitian pairs: draw for the lexicographically positive member only.
        let first_nonzero = k.iter().find(|&&v| v != 0).copied().unwrap_or(0);
        if first_nonzero > 0 {
            for j in 0..dim {
                xi[j] = k[j] as f64 / grid.extents()[j];
            }
            let w = annulus_bump(group.rho_unchecked(&xi));
            if w > 0.0 {
                let z = {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                } * w;
                let pos = spec_slot(grid, &k);
                let neg_k: Vec<i64> = k.iter().map(|v| -v).collect();
                let neg = spec_slot(grid, &neg_k);
                spec.coefficients[pos] = z;
                spec.coefficients[neg] = z.conj();
            }
        }
        let mut j = dim;
        loop {
            if j == 0 {
                let eta = spec.inverse();
                let norm = eta.lp_norm(2.0)?;
                if norm == 0.0 {
                    return Err(invalid_grid(
                        "no dual-lattice point falls inside the annulus",
                    ));
                }
                return Ok(eta.scale(1.0 / norm));
            }
            j -= 1;
            if k[j] < bounds[j] {
                k[j] += 1;
                break;
            }
            k[j] = -bounds[j];
        }
    }
}

/// `eta_t(x) = t^{-gamma} eta(A_t^{-1} x)`, periodised on `grid`, for the
/// fixed real `eta` with `eta^(xi) = b(rho(xi))` and `b` the smooth bump on
/// `(1, 2)`. The spectrum of `eta_t` is the annulus `1/t <= rho <= 2/t`.
pub fn dilated_annulus_bump(grid: &GridSpec, group: &DilationGroup, t: f64) -> Result<SampledField> {
    if group.dim() != grid.dim() {
        return Err(invalid_input("group and grid dimensions differ"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid_input(format!("t = {t} must be positive")));
    }
    // the bump vanishes on rho >= 2/t, so the stored Nyquist slot N/2 may sit on it
    let nyq = (0..grid.dim())
        .map(|j| (grid.counts()[j] as f64 / (2.0 * grid.extents()[j])).powf(1.0 / group.exponents()[j]))
        .fold(f64::INFINITY, f64::min);
    if nyq < 2.0 / t {
        return Err(invalid_grid(format!(
            "Nyquist faces sit at rho = {nyq:.3}; the annulus at t = {t} reaches rho = {:.3}",
            2.0 / t
        )));
    }
    let mut xi = vec![0.0; grid.dim()];
    let coefficients = (0..grid.len())
        .map(|i| {
            grid.frequency(i, &mut xi);
            Complex64::new(annulus_bump(t * group.rho_unchecked(&xi)), 0.0)
        })
        .collect();
    let eta = SpectralField::new(grid.clone(), coefficients)?.inverse();
    if eta.max_abs() == 0.0 {
        return Err(invalid_grid(format!("no dual-lattice point falls inside the annulus at t = {t}")));
    }
    Ok(eta)
}

fn spec_slot(grid: &GridSpec, k: &[i64]) -> usize {
    let slots: Vec<usize> = k
        .iter()
        .enumerate()
        .map(|(j, &kj)| grid.freq_slot(j, kj))
        .collect();
    grid.ravel(&slots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_field(grid: &GridSpec, seed: u64) -> SampledField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals = (0..grid.len())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        SampledField::new(grid.clone(), vals).unwrap()
    }

    #[test]
    fn zero_field_transforms_to_zero() {
        let g = GridSpec::cube(2, 16, 4.0).unwrap();
        let f = SampledField::zeros(g.clone());
        assert!(f.forward().coefficients().iter().all(|c| c.norm() == 0.0));
        assert!(SpectralField::zeros(g)
            .inverse()
            .values()
            .iter()
            .all(|c| c.norm() == 0.0));
    }

    #[test]
    fn plane_wave_is_a_single_spike() {
        let g = GridSpec::new(vec![16, 8], vec![4.0, 2.0]).unwrap();
        let f = SampledField::plane_wave(g.clone(), &[3, -2]).unwrap();
        let s = f.forward();
        let peak = s.at(&[3, -2]);
        assert_relative_eq!(peak.norm(), g.volume(), max_relative = 1e-12);
        let rest: f64 = s.coefficients().iter().map(|c| c.norm()).sum::<f64>() - peak.norm();
        assert!(rest < 1e-10);
        // and back
        let mut spike = SpectralField::zeros(g.clone());
        let slot = spec_slot(&g, &[3, -2]);
        spike.coefficients_mut()[slot] = Complex64::new(g.volume(), 0.0);
        assert!(spike.inverse().max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn gaussian_is_self_dual() {
        let g = GridSpec::cube(2, 256, 16.0).unwrap();
        let pi = std::f64::consts::PI;
        let f =
            SampledField::from_real_fn(g.clone(), |x| (-pi * (x[0] * x[0] + x[1] * x[1])).exp());
        let s = f.forward();
        let mut xi = vec![0.0; 2];
        let mut worst: f64 = 0.0;
        for (i, c) in s.coefficients().iter().enumerate() {
            g.frequency(i, &mut xi);
            let want = (-pi * (xi[0] * xi[0] + xi[1] * xi[1])).exp();
            worst = worst.max((c - want).norm());
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = GridSpec::new(vec![32, 16], vec![3.0, 5.0]).unwrap();
        let f = random_field(&g, 7);
        let back = f.forward().inverse();
        assert!(back.max_abs_diff(&f) <= 1e-12 * f.max_abs());
        assert_relative_eq!(
            f.lp_norm(2.0).unwrap(),
            f.forward().l2_norm(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn translation_is_a_phase() {
        let g = GridSpec::new(vec![16, 16], vec![4.0, 2.0]).unwrap();
        let f = random_field(&g, 3);
        let shift = [3i64, -5];
        let lhs = f.translate(&shift).forward();
        let s = f.forward();
        let v = [
            shift[0] as f64 * g.spacing(0),
            shift[1] as f64 * g.spacing(1),
        ];
        let mut xi = vec![0.0; 2];
        for i in 0..g.len() {
            g.frequency(i, &mut xi);
            let ph = Complex64::from_polar(
                1.0,
                -2.0 * std::f64::consts::PI * (v[0] * xi[0] + v[1] * xi[1]),
            );
            assert!((lhs.coefficients()[i] - s.coefficients()[i] * ph).norm() < 1e-10);
        }
    }

    #[test]
    fn norms() {
        let g = GridSpec::cube(2, 16, 3.0).unwrap();
        let one = SampledField::constant(g.clone(), Complex64::new(1.0, 0.0));
        assert_relative_eq!(one.lp_norm(2.0).unwrap(), 3.0, max_relative = 1e-14);
        let f = random_field(&g, 1);
        let c = -2.5;
        for p in [1.0, 1.5, 2.0, f64::INFINITY] {
            assert_relative_eq!(
                f.scale(c).lp_norm(p).unwrap(),
                2.5 * f.lp_norm(p).unwrap(),
                max_relative = 1e-12
            );
        }
        assert!(f.lp_norm(0.5).is_err());
    }

    #[test]
    fn indicator_of_ball_has_ball_volume() {
        let group = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let g = GridSpec::new(vec![256, 256], vec![4.0, 8.0]).unwrap();
        let r = 1.3;
        let f = SampledField::from_real_fn(g.clone(), |x| {
            if group.rho_unchecked(x) < r {
                1.0
            } else {
                0.0
            }
        });
        let want = group.ball_volume(r).unwrap();
        // boundary layer: perimeter of the ball times one cell diameter
        let layer = 2.0 * std::f64::consts::PI * 4.0 * g.spacing(0).hypot(g.spacing(1));
        assert!((f.lp_norm(1.0).unwrap() - want).abs() < layer);
    }

    #[test]
    fn distribution_function_examples() {
        let g = GridSpec::cube(2, 32, 2.0).unwrap();
        let f = random_field(&g, 11);
        assert_eq!(f.distribution_function(10.0).unwrap(), 0.0);
        let ind = SampledField::from_real_fn(g.clone(), |x| if x[0] > 0.25 { 1.0 } else { 0.0 });
        let m = ind.values().iter().filter(|v| v.re > 0.5).count() as f64 * g.cell_volume();
        assert_eq!(ind.distribution_function(0.5).unwrap(), m);
        let brute = f.values().iter().filter(|v| v.norm() > 0.3).count() as f64 * g.cell_volume();
        assert_eq!(f.distribution_function(0.3).unwrap(), brute);
        assert!(f.distribution_function(0.0).is_err());
    }

    #[test]
    fn band_limited_properties() {
        let group = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let g = GridSpec::new(vec![64, 128], vec![8.0, 8.0]).unwrap();
        let eta = make_band_limited(&g, &group, 42).unwrap();
        assert_relative_eq!(eta.lp_norm(2.0).unwrap(), 1.0, max_relative = 1e-12);
        let again = make_band_limited(&g, &group, 42).unwrap();
        assert_eq!(eta, again);
        let s = eta.forward();
        let mut xi = vec![0.0; 2];
        for (i, c) in s.coefficients().iter().enumerate() {
            g.frequency(i, &mut xi);
            let r = group.rho_unchecked(&xi);
            if !(1.0..=2.0).contains(&r) {
                assert!(c.norm() < 1e-12, "leak at rho = {r}");
            }
        }
        // real valued
        assert!(eta.values().iter().all(|v| v.im.abs() < 1e-12));
        // same function on a finer grid with the same box
        let fine = GridSpec::new(vec![128, 256], vec![8.0, 8.0]).unwrap();
        let eta_fine = make_band_limited(&fine, &group, 42).unwrap();
        assert_relative_eq!(
            eta.value_at(&[32, 64]).re,
            eta_fine.value_at(&[64, 128]).re,
            max_relative = 1e-10
        );
        // too coarse
        let coarse = GridSpec::new(vec![8, 8], vec![8.0, 8.0]).unwrap();
        assert!(make_band_limited(&coarse, &group, 1).is_err());
    }

    #[test]
    fn binary_and_csv_dumps() {
        let g = GridSpec::new(vec![4, 8], vec![1.0, 2.0]).unwrap();
        let f = random_field(&g, 5);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 2 * 8 + 2 * 8 + 32 * 16);
        let back = SampledField::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, f);
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 33);
        assert!(text.starts_with("x1,x2,re,im"));
        let back = SampledField::read_csv(&mut text.as_bytes()).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.values(), f.values());
        let shuffled: String = text.lines().take(1).chain(text.lines().skip(2)).chain(text.lines().skip(1).take(1)).map(|l| format!("{l}\n")).collect();
        assert!(SampledField::read_csv(&mut shuffled.as_bytes()).is_err());
    }

    #[test]
    fn dilated_bump_tracks_the_dilation() {
        let group = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![64, 2048], vec![4.0, 8.0]).unwrap();
        let rho = group.rho_spectrum(&grid);
        for t in [1.0, 0.5, 0.25] {
            let eta = dilated_annulus_bump(&grid, &group, t).unwrap();
            let peak = eta.max_abs();
            assert!(eta.values().iter().all(|v| v.im.abs() < 1e-12 * peak));
            let spec = eta.forward();
            for (c, &r) in spec.coefficients().iter().zip(&rho) {
                if c.norm() > 1e-12 {
                    assert!(r > 1.0 / t && r < 2.0 / t);
                }
            }
        }
        assert!(dilated_annulus_bump(&grid, &group, 0.1).is_err());
    }
}
