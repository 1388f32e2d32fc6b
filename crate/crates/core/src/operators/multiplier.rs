use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dilation::DilationGroup;
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::field::{SampledField, SpectralField};
use crate::grid::GridSpec;
use crate::kernels::lp_bump;

/// `|f^(0)| / ||f||_2` above which a field counts as carrying a mean.
pub const MEAN_TOLERANCE: f64 = 1e-8;

pub(crate) fn check_group(group: &DilationGroup, grid: &GridSpec) -> Result<()> {
    if group.dim() != grid.dim() {
        return Err(invalid_input(format!(
            "group has dimension {}, field has dimension {}",
            group.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

pub(crate) fn check_mean(spec: &SpectralField, norm: f64) -> Result<()> {
    let measured = spec.zero_mode().norm();
    let allowed = MEAN_TOLERANCE * norm;
    if measured > allowed {
        return Err(Error::MeanNotRemoved { measured, allowed });
    }
    Ok(())
}

/// Multiply the spectrum by `m(xi, rho(xi))` and transform back.
pub(crate) fn apply_symbol(
    spec: &SpectralField,
    rho: &[f64],
    m: impl Fn(&[f64], f64) -> Complex64 + Sync,
) -> SampledField {
    let grid = spec.grid();
    let coeffs: Vec<Complex64> = spec
        .coefficients()
        .par_iter()
        .enumerate()
        .map_init(
            || vec![0.0; grid.dim()],
            |xi, (i, c)| {
                grid.frequency(i, xi);
                c * m(xi, rho[i])
            },
        )
        .collect();
    SpectralField::new(grid.clone(), coeffs)
        .expect("sizes agree")
        .inverse()
}

pub(crate) fn riesz_symbol(alpha: f64) -> impl Fn(&[f64], f64) -> Complex64 + Sync {
    move |_, r| {
        Complex64::new(
            if r > 0.0 {
                (2.0 * PI * r).powf(-alpha)
            } else {
                0.0
            },
            0.0,
        )
    }
}

fn check_alpha_gamma(alpha: f64, group: &DilationGroup) -> Result<()> {
    if !(alpha > 0.0 && alpha < group.gamma()) {
        return Err(invalid_param(format!(
            "alpha = {alpha} must lie in (0, gamma = {})",
            group.gamma()
        )));
    }
    Ok(())
}

/// `I_alpha f`, the multiplier `(2 pi rho)^{-alpha}` with the zero frequency
/// dropped. The input must be mean-free up to [`MEAN_TOLERANCE`].
pub fn riesz_potential(
    f: &SampledField,
    alpha: f64,
    group: &DilationGroup,
) -> Result<SampledField> {
    check_group(group, f.grid())?;
    check_alpha_gamma(alpha, group)?;
    let spec = f.forward();
    check_mean(&spec, f.lp_norm(2.0)?)?;
    Ok(apply_symbol(
        &spec,
        &group.rho_spectrum(f.grid()),
        riesz_symbol(alpha),
    ))
}

/// [`riesz_potential`] without the mean check; the zero mode is discarded.
pub fn riesz_potential_unchecked(
    f: &SampledField,
    alpha: f64,
    group: &DilationGroup,
) -> Result<SampledField> {
    check_group(group, f.grid())?;
    check_alpha_gamma(alpha, group)?;
    Ok(apply_symbol(
        &f.forward(),
        &group.rho_spectrum(f.grid()),
        riesz_symbol(alpha),
    ))
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid_param(format!("t = {t} must be positive")));
    }
    Ok(())
}

/// `K_t * f`, the multiplier `e^{-2 pi t rho}`.
pub fn poisson_semigroup(f: &SampledField, t: f64, group: &DilationGroup) -> Result<SampledField> {
    check_group(group, f.grid())?;
    check_t(t)?;
    Ok(apply_symbol(
        &f.forward(),
        &group.rho_spectrum(f.grid()),
        move |_, r| Complex64::new((-2.0 * PI * t * r).exp(), 0.0),
    ))
}

pub(crate) fn q_symbol(t: f64, r: f64) -> f64 {
    let u = 2.0 * PI * t * r;
    -u * (-u).exp()
}

/// `Q_t * f`, the multiplier `-2 pi t rho e^{-2 pi t rho} = t d/dt e^{-2 pi t rho}`.
pub fn q_semigroup(f: &SampledField, t: f64, group: &DilationGroup) -> Result<SampledField> {
    check_group(group, f.grid())?;
    check_t(t)?;
    Ok(apply_symbol(
        &f.forward(),
        &group.rho_spectrum(f.grid()),
        move |_, r| Complex64::new(q_symbol(t, r), 0.0),
    ))
}

/// Spectral partial derivative `d f / d x_axis`; the Nyquist slot is zeroed.
pub fn gradient(f: &SampledField, axis: usize) -> Result<SampledField> {
    if axis >= f.grid().dim() {
        return Err(invalid_param(format!("axis {axis} out of range")));
    }
    let grid = f.grid().clone();
    let n = grid.counts()[axis];
    let mut spec = f.forward();
    let mut idx = vec![0usize; grid.dim()];
    let l = grid.extents()[axis];
    for (i, c) in spec.coefficients_mut().iter_mut().enumerate() {
        grid.unravel(i, &mut idx);
        if idx[axis] == n / 2 {
            *c = Complex64::default();
        } else {
            let xi = grid.freq_index(axis, idx[axis]) as f64 / l;
            *c *= Complex64::new(0.0, 2.0 * PI * xi);
        }
    }
    Ok(spec.inverse())
}

/// Littlewood-Paley blocks `Delta_j`, multiplier `Phi(2^j rho)`, for
/// `j_min <= j <= j_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpPartition {
    pub j_min: i32,
    pub j_max: i32,
}

impl LpPartition {
    pub fn new(j_min: i32, j_max: i32) -> Result<Self> {
        if j_min > j_max {
            return Err(invalid_param(format!(
                "empty block range [{j_min}, {j_max}]"
            )));
        }
        Ok(Self { j_min, j_max })
    }

    /// Every block whose support annulus `2^{-j-1} <= rho <= 2^{1-j}` lies
    /// between the first dual-lattice step and the Nyquist faces of `grid`.
    pub fn resolved(group: &DilationGroup, grid: &GridSpec) -> Result<Self> {
        check_group(group, grid)?;
        let nyq = group.nyquist_rho(grid);
        let step = dual_step(group, grid);
        let j_min = (1.0 - nyq.log2()).ceil() as i32;
        let j_max = (-step.log2() - 1.0).floor() as i32;
        Self::new(j_min, j_max)
    }

    pub fn blocks(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    /// Blocks whose support meets the annulus `lo <= rho <= hi`.
    pub fn blocks_meeting(&self, lo: f64, hi: f64) -> Vec<i32> {
        self.blocks()
            .filter(|&j| {
                let s = 2f64.powi(-j);
                0.5 * s < hi && 2.0 * s > lo
            })
            .collect()
    }

    pub fn contains(&self, j: i32) -> bool {
        (self.j_min..=self.j_max).contains(&j)
    }
}

/// Largest `rho`-length of a single dual-lattice step.
pub(crate) fn dual_step(group: &DilationGroup, grid: &GridSpec) -> f64 {
    grid.extents()
        .iter()
        .zip(group.exponents())
        .map(|(l, a)| (1.0 / l).powf(1.0 / a))
        .fold(0.0, f64::max)
}

pub(crate) fn block_symbol(j: i32) -> impl Fn(&[f64], f64) -> Complex64 + Sync {
    let s = 2f64.powi(j);
    move |_, r| Complex64::new(if r > 0.0 { lp_bump(s * r) } else { 0.0 }, 0.0)
}

pub(crate) fn check_block(
    j: i32,
    part: &LpPartition,
    group: &DilationGroup,
    grid: &GridSpec,
) -> Result<()> {
    if !part.contains(j) {
        return Err(invalid_param(format!(
            "block {j} outside the partition [{}, {}]",
            part.j_min, part.j_max
        )));
    }
    let resolved = LpPartition::resolved(group, grid)?;
    if !resolved.contains(j) {
        return Err(invalid_param(format!(
            "block {j} is not resolved on this grid (resolved blocks {}..={})",
            resolved.j_min, resolved.j_max
        )));
    }
    Ok(())
}

/// `Delta_j f`.
pub fn lp_block(
    f: &SampledField,
    j: i32,
    part: &LpPartition,
    group: &DilationGroup,
) -> Result<SampledField> {
    check_group(group, f.grid())?;
    check_block(j, part, group, f.grid())?;
    Ok(apply_symbol(
        &f.forward(),
        &group.rho_spectrum(f.grid()),
        block_symbol(j),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_band_limited;
    use approx::assert_relative_eq;

    fn setup() -> (DilationGroup, GridSpec) {
        (
            DilationGroup::new(vec![1.0, 2.0]).unwrap(),
            GridSpec::new(vec![64, 128], vec![8.0, 8.0]).unwrap(),
        )
    }

    #[test]
    fn riesz_on_plane_wave() {
        let (g, grid) = setup();
        let f = SampledField::plane_wave(grid, &[3, -5]).unwrap();
        let r = g.rho(&[3.0 / 8.0, -5.0 / 8.0]).unwrap();
        let out = riesz_potential(&f, 0.5, &g).unwrap();
        assert!(out.max_abs_diff(&f.scale((2.0 * PI * r).powf(-0.5))) < 1e-12);
    }

    #[test]
    fn riesz_rejects_mean() {
        let (g, grid) = setup();
        let f = SampledField::from_real_fn(grid, |x| (-x[0] * x[0] - x[1] * x[1]).exp());
        assert!(matches!(
            riesz_potential(&f, 0.5, &g),
            Err(Error::MeanNotRemoved { .. })
        ));
        assert!(riesz_potential_unchecked(&f, 0.5, &g).is_ok());
    }

    #[test]
    fn semigroups_on_constants() {
        let (g, grid) = setup();
        let c = SampledField::constant(grid, Complex64::new(2.5, 0.0));
        assert!(poisson_semigroup(&c, 0.7, &g).unwrap().max_abs_diff(&c) < 1e-12);
        assert!(q_semigroup(&c, 0.7, &g).unwrap().max_abs() < 1e-12);
        assert!(poisson_semigroup(&c, 0.0, &g).is_err());
        assert!(q_semigroup(&c, -1.0, &g).is_err());
    }

    #[test]
    fn q_is_t_times_time_derivative() {
        let (g, grid) = setup();
        let f = make_band_limited(&grid, &g, 3).unwrap();
        let t = 0.3;
        let h = 1e-4 * t;
        let fd = poisson_semigroup(&f, t + h, &g)
            .unwrap()
            .sub(&poisson_semigroup(&f, t - h, &g).unwrap())
            .unwrap()
            .scale(t / (2.0 * h));
        let q = q_semigroup(&f, t, &g).unwrap();
        assert!(fd.sub(&q).unwrap().lp_norm(2.0).unwrap() < 1e-6 * q.lp_norm(2.0).unwrap());
    }

    #[test]
    fn riesz_norm_range_on_annulus() {
        let (g, grid) = setup();
        let eta = make_band_limited(&grid, &g, 9).unwrap();
        let n = riesz_potential(&eta, 0.5, &g)
            .unwrap()
            .lp_norm(2.0)
            .unwrap();
        assert!(n >= (4.0 * PI).powf(-0.5) && n <= (2.0 * PI).powf(-0.5));
    }

    #[test]
    fn gradient_of_plane_wave() {
        let grid = GridSpec::new(vec![16, 32], vec![2.0, 4.0]).unwrap();
        let f = SampledField::plane_wave(grid, &[2, 3]).unwrap();
        let d = gradient(&f, 1).unwrap();
        let want = f.map(|v| v * Complex64::new(0.0, 2.0 * PI * 0.75));
        assert!(d.max_abs_diff(&want) < 1e-11);
    }

    #[test]
    fn blocks_resolve_and_sum() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![64, 256], vec![4.0, 4.0]).unwrap();
        let part = LpPartition::resolved(&g, &grid).unwrap();
        assert_eq!(part, LpPartition::new(-1, 0).unwrap());
        let f = make_band_limited(&grid, &g, 5).unwrap();
        let mut sum = SampledField::zeros(grid.clone());
        for j in part.blocks() {
            sum = sum.add(&lp_block(&f, j, &part, &g).unwrap()).unwrap();
        }
        assert!(sum.max_abs_diff(&f) < 1e-10 * f.max_abs());
        assert!(lp_block(&f, part.j_max + 1, &part, &g).is_err());
        assert_relative_eq!(
            lp_block(&f, 0, &part, &g).unwrap().integral().norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn distant_blocks_annihilate() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![256, 1024], vec![16.0, 16.0]).unwrap();
        let part = LpPartition::resolved(&g, &grid).unwrap();
        assert_eq!(part, LpPartition::new(-1, 1).unwrap());
        let f = make_band_limited(&grid, &g, 8).unwrap();
        let a = lp_block(&f, -1, &part, &g).unwrap();
        assert!(a.max_abs() > 0.1 * f.max_abs());
        assert!(lp_block(&a, 1, &part, &g).unwrap().max_abs() < 1e-12);
    }
}
