//! Kernels given by their Fourier multipliers, and shell-wise decay profiles.
//!
//! Every kernel except the homogeneous Riesz kernel is synthesised by sampling
//! its multiplier on the dual lattice and inverting the transform, which
//! yields the periodisation of the continuum kernel over the grid box.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dilation::DilationGroup;
use crate::error::{invalid_grid, invalid_input, invalid_param, Result};
use crate::field::{SampledField, SpectralField};
use crate::grid::GridSpec;

/// Largest admissible value of `e^{-2 pi rho}` on the Nyquist faces.
pub const NYQUIST_FLOOR: f64 = 1e-12;

fn flat_exp(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth non-increasing step: 1 on `[0, 1]`, 0 on `[2, inf)`.
pub fn smooth_step(r: f64) -> f64 {
    let a = flat_exp(2.0 - r);
    let b = flat_exp(r - 1.0);
    a / (a + b)
}

/// Dyadic partition bump `Phi(r) = step(r) - step(2r)`, supported in
/// `[1/2, 2]`, with `sum_j Phi(2^j r) = 1` for every `r > 0`.
pub fn lp_bump(r: f64) -> f64 {
    smooth_step(r) - smooth_step(2.0 * r)
}

/// Wide bump `step(r/2) - step(4r)`: identically 1 on `[1/2, 2]` (the support
/// of [`lp_bump`]) and supported in `[1/4, 4]`.
pub fn lp_bump_wide(r: f64) -> f64 {
    smooth_step(0.5 * r) - smooth_step(4.0 * r)
}

/// Which kernel to synthesise. Axis indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// Multiplier `e^{-2 pi rho}`.
    K,
    /// Multiplier `-2 pi rho e^{-2 pi rho}`.
    Q,
    /// Multiplier `xi_k e^{-2 pi rho}`.
    Deriv { k: usize },
    /// Multiplier `xi_k rho e^{-2 pi rho}`.
    DerivRho { k: usize },
    /// Multiplier `xi_k xi_l e^{-2 pi rho}`.
    Deriv2 { k: usize, l: usize },
    /// Multiplier `(2 pi rho)^{-alpha} Phi~(2^m rho)`.
    RhoTilde { m: i32, alpha: f64 },
    /// Multiplier `2 pi i xi_s (2 pi rho)^{-alpha} Phi~(2^m rho)`.
    RhoTildeDeriv { m: i32, alpha: f64, s: usize },
    /// The kernel of `(2 pi rho)^{-alpha}`, homogeneous of degree `alpha - gamma`.
    Riesz { alpha: f64 },
}

/// How a decay profile weights `|kernel(x)|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayWeight {
    /// `(1 + rho(x))^exponent`
    OnePlusRho,
    /// `rho(x)^exponent`
    Rho,
}

impl KernelKind {
    fn axes(&self) -> Vec<usize> {
        match *self {
            KernelKind::Deriv { k } | KernelKind::DerivRho { k } => vec![k],
            KernelKind::Deriv2 { k, l } => vec![k, l],
            KernelKind::RhoTildeDeriv { s, .. } => vec![s],
            _ => vec![],
        }
    }

    fn validate(&self, group: &DilationGroup) -> Result<()> {
        if let Some(&ax) = self.axes().iter().find(|&&ax| ax >= group.dim()) {
            return Err(invalid_param(format!(
                "axis {ax} out of range for dimension {}",
                group.dim()
            )));
        }
        match *self {
            KernelKind::RhoTilde { alpha, .. } | KernelKind::RhoTildeDeriv { alpha, .. } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(invalid_param(format!("alpha = {alpha} must lie in (0, 1)")));
                }
            }
            KernelKind::Riesz { alpha } => {
                if !(alpha > 0.0 && alpha < group.gamma()) {
                    return Err(invalid_param(format!(
                        "alpha = {alpha} must lie in (0, gamma = {})",
                        group.gamma()
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The decay exponent the kernel is claimed to satisfy.
    pub fn decay_exponent(&self, group: &DilationGroup) -> f64 {
        let g = group.gamma();
        let a = group.exponents();
        match *self {
            KernelKind::K | KernelKind::Q => g + 1.0,
            KernelKind::Deriv { k } | KernelKind::DerivRho { k } => g + 1.0 + a[k],
            KernelKind::Deriv2 { k, l } => g + 1.0 + a[k] + a[l],
            KernelKind::RhoTilde { alpha, .. } | KernelKind::Riesz { alpha } => g - alpha,
            KernelKind::RhoTildeDeriv { alpha, s, .. } => g - alpha + a[s],
        }
    }

    pub fn decay_weight(&self) -> DecayWeight {
        match self {
            KernelKind::RhoTilde { .. }
            | KernelKind::RhoTildeDeriv { .. }
            | KernelKind::Riesz { .. } => DecayWeight::Rho,
            _ => DecayWeight::OnePlusRho,
        }
    }

    fn is_poisson_family(&self) -> bool {
        matches!(
            self,
            KernelKind::K
                | KernelKind::Q
                | KernelKind::Deriv { .. }
                | KernelKind::DerivRho { .. }
                | KernelKind::Deriv2 { .. }
        )
    }

    /// Multiplier value at frequency `xi` with `r = rho(xi)`.
    fn multiplier(&self, xi: &[f64], r: f64) -> Complex64 {
        let e = (-2.0 * PI * r).exp();
        let real = |v: f64| Complex64::new(v, 0.0);
        match *self {
            KernelKind::K => real(e),
            KernelKind::Q => real(-2.0 * PI * r * e),
            KernelKind::Deriv { k } => real(xi[k] * e),
            KernelKind::DerivRho { k } => real(xi[k] * r * e),
            KernelKind::Deriv2 { k, l } => real(xi[k] * xi[l] * e),
            KernelKind::RhoTilde { m, alpha } => real(rho_tilde_symbol(r, m, alpha)),
            KernelKind::RhoTildeDeriv { m, alpha, s } => {
                Complex64::new(0.0, 2.0 * PI * xi[s]) * rho_tilde_symbol(r, m, alpha)
            }
            KernelKind::Riesz { alpha } => real(if r > 0.0 {
                (2.0 * PI * r).powf(-alpha)
            } else {
                0.0
            }),
        }
    }
}

fn rho_tilde_symbol(r: f64, m: i32, alpha: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let w = lp_bump_wide(2f64.powi(m) * r);
    if w == 0.0 {
        0.0
    } else {
        (2.0 * PI * r).powf(-alpha) * w
    }
}

/// A synthesised kernel with the metadata needed to measure its decay.
#[derive(Debug, Clone)]
pub struct KernelField {
    pub field: SampledField,
    pub kind: KernelKind,
    pub group: DilationGroup,
    pub decay_exponent: f64,
    /// Largest `|kernel|` over the outermost faces of the box; a measure of
    /// how much the periodic images can contaminate the kernel.
    pub edge_sup: f64,
}

impl KernelField {
    fn new(field: SampledField, kind: KernelKind, group: &DilationGroup) -> Self {
        let edge_sup = face_sup(&field);
        Self {
            decay_exponent: kind.decay_exponent(group),
            kind,
            group: group.clone(),
            edge_sup,
            field,
        }
    }
}

fn face_sup(field: &SampledField) -> f64 {
    let grid = field.grid();
    let mut idx = vec![0usize; grid.dim()];
    let mut best: f64 = 0.0;
    for (i, v) in field.values().iter().enumerate() {
        grid.unravel(i, &mut idx);
        if idx.contains(&0) {
            best = best.max(v.norm());
        }
    }
    best
}

fn check_dims(group: &DilationGroup, grid: &GridSpec) -> Result<()> {
    if group.dim() != grid.dim() {
        return Err(invalid_input(format!(
            "group has dimension {}, grid has dimension {}",
            group.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

/// Check that the dual lattice resolves the annulus `inner <= rho <= outer`.
fn check_annulus(group: &DilationGroup, grid: &GridSpec, inner: f64, outer: f64) -> Result<()> {
    let nyq = group.nyquist_rho(grid);
    if nyq <= outer {
        return Err(invalid_grid(format!(
            "Nyquist faces sit at rho = {nyq:.4}, inside the spectral support (outer radius {outer})"
        )));
    }
    for (j, (&l, &a)) in grid.extents().iter().zip(group.exponents()).enumerate() {
        let step = (1.0 / l).powf(1.0 / a);
        if step > 0.5 * inner {
            return Err(invalid_grid(format!(
                "dual step along axis {j} has rho-length {step:.4}, too coarse for the inner radius {inner}"
            )));
        }
    }
    Ok(())
}

/// Synthesise the kernel of the given kind on `grid`.
pub fn synthesize_kernel(
    kind: KernelKind,
    group: &DilationGroup,
    grid: &GridSpec,
) -> Result<KernelField> {
    Ok(synthesize_kernels(&[kind], group, grid)?
        .pop()
        .expect("one kernel requested"))
}

/// Synthesise several kernels on one grid, sharing the evaluation of `rho`
/// over the dual lattice.
pub fn synthesize_kernels(
    kinds: &[KernelKind],
    group: &DilationGroup,
    grid: &GridSpec,
) -> Result<Vec<KernelField>> {
    let mut out = Vec::with_capacity(kinds.len());
    for_each_kernel(kinds, group, grid, |k| {
        out.push(k);
        Ok(())
    })?;
    Ok(out)
}

/// As [`synthesize_kernels`], handing each kernel to `visit` as soon as it is
/// ready so only one is held in memory at a time.
pub fn for_each_kernel(
    kinds: &[KernelKind],
    group: &DilationGroup,
    grid: &GridSpec,
    mut visit: impl FnMut(KernelField) -> Result<()>,
) -> Result<()> {
    check_dims(group, grid)?;
    for kind in kinds {
        kind.validate(group)?;
        match *kind {
            KernelKind::Riesz { .. } => {
                return Err(invalid_input(
                    "use synthesize_riesz_kernel for the homogeneous Riesz kernel",
                ))
            }
            KernelKind::RhoTilde { m, .. } | KernelKind::RhoTildeDeriv { m, .. } => {
                let s = 2f64.powi(-m);
                check_annulus(group, grid, 0.25 * s, 4.0 * s)?;
            }
            _ => {
                let nyq = group.nyquist_rho(grid);
                let tail = (-2.0 * PI * nyq).exp();
                if tail >= NYQUIST_FLOOR {
                    return Err(invalid_grid(format!(
                        "e^(-2 pi rho) = {tail:.3e} on the Nyquist faces (rho = {nyq:.3}); refine the grid"
                    )));
                }
            }
        }
    }
    let rho = group.rho_spectrum(grid);
    for &kind in kinds {
        let coeffs: Vec<Complex64> = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.dim()],
                |xi, i| {
                    grid.frequency(i, xi);
                    kind.multiplier(xi, rho[i])
                },
            )
            .collect();
        let spec = SpectralField::new(grid.clone(), coeffs).expect("sizes agree");
        let mut field = spec.inverse();
        drop(spec);
        if kind.is_poisson_family() || matches!(kind, KernelKind::RhoTilde { .. }) {
            // real multipliers that are even in xi give real kernels
            if !matches!(kind, KernelKind::Deriv { .. } | KernelKind::DerivRho { .. }) {
                for v in field.values_mut() {
                    v.im = 0.0;
                }
            }
        }
        visit(KernelField::new(field, kind, group))?;
    }
    Ok(())
}

/// `rho~_m` for `alpha` in `(0, 1)`.
pub fn synthesize_rho_tilde(
    m: i32,
    alpha: f64,
    group: &DilationGroup,
    grid: &GridSpec,
) -> Result<KernelField> {
    synthesize_kernel(KernelKind::RhoTilde { m, alpha }, group, grid)
}

/// Evaluator for the homogeneous kernel of `(2 pi rho)^{-alpha}`.
///
/// Uses `R(x) = sum_m 2^{m(alpha - gamma)} phi(A_{2^{-m}} x)` where `phi` is
/// the kernel of `(2 pi rho)^{-alpha} Phi(rho)`. `phi` is tabulated once on an
/// oversampled periodic grid and interpolated off-lattice; pieces with
/// `rho(A_{2^{-m}} x)` beyond the table radius are dropped and pieces with
/// tiny `rho(A_{2^{-m}} x)` are summed in closed form with `phi(0)`.
#[derive(Debug, Clone)]
pub struct RieszKernel {
    group: DilationGroup,
    alpha: f64,
    table_grid: GridSpec,
    table: Vec<f64>,
    table_strides: Vec<usize>,
    table_radius: f64,
}

const RIESZ_TABLE_RADIUS: f64 = 16.0;
/// Oversampling of the table relative to the spectral support `rho <= 2`.
const RIESZ_TABLE_OVERSAMPLE: f64 = 2.0;
const RIESZ_TABLE_MAX_POINTS: usize = 1 << 25;
const RIESZ_NEAR_ZERO: f64 = 1e-3;
const LAGRANGE_POINTS: usize = 8;

impl RieszKernel {
    pub fn new(alpha: f64, group: &DilationGroup) -> Result<Self> {
        KernelKind::Riesz { alpha }.validate(group)?;
        let mut counts = Vec::with_capacity(group.dim());
        let mut extents = Vec::with_capacity(group.dim());
        for &a in group.exponents() {
            let l = 2.0 * RIESZ_TABLE_RADIUS.powf(a);
            let n = ((2.0 * RIESZ_TABLE_OVERSAMPLE * 2f64.powf(a) * l).ceil() as usize)
                .next_power_of_two();
            counts.push(n.max(16));
            extents.push(l);
        }
        if counts.iter().product::<usize>() > RIESZ_TABLE_MAX_POINTS {
            return Err(invalid_param(
                "group too anisotropic for the tabulated Riesz kernel",
            ));
        }
        let table_grid = GridSpec::new(counts, extents)?;
        let rho = group.rho_spectrum(&table_grid);
        let coeffs: Vec<Complex64> = rho
            .par_iter()
            .map(|&r| {
                if r <= 0.0 {
                    Complex64::default()
                } else {
                    let w = lp_bump(r);
                    Complex64::new(
                        if w == 0.0 {
                            0.0
                        } else {
                            (2.0 * PI * r).powf(-alpha) * w
                        },
                        0.0,
                    )
                }
            })
            .collect();
        let table = SpectralField::new(table_grid.clone(), coeffs)?
            .inverse()
            .into_values()
            .into_iter()
            .map(|v| v.re)
            .collect();
        Ok(Self {
            group: group.clone(),
            alpha,
            table_strides: table_grid.strides(),
            table_grid,
            table,
            table_radius: RIESZ_TABLE_RADIUS,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Interpolated value of the single dyadic piece `phi` at `z`.
    pub fn piece(&self, z: &[f64]) -> f64 {
        let g = &self.table_grid;
        let dim = g.dim();
        let mut base = [0i64; 8];
        let mut weights = [[0.0f64; LAGRANGE_POINTS]; 8];
        assert!(dim <= 8, "dimension above 8 not supported");
        for j in 0..dim {
            let u = z[j] / g.spacing(j) + (g.counts()[j] / 2) as f64;
            let i0 = u.floor() as i64 - (LAGRANGE_POINTS as i64 / 2 - 1);
            base[j] = i0;
            let t = u - i0 as f64;
            for p in 0..LAGRANGE_POINTS {
                let mut w = 1.0;
                for q in 0..LAGRANGE_POINTS {
                    if q != p {
                        w *= (t - q as f64) / (p as f64 - q as f64);
                    }
                }
                weights[j][p] = w;
            }
        }
        let strides = &self.table_strides;
        let total = LAGRANGE_POINTS.pow(dim as u32);
        let mut acc = 0.0;
        for c in 0..total {
            let mut rem = c;
            let mut w = 1.0;
            let mut flat = 0usize;
            for j in (0..dim).rev() {
                let p = rem % LAGRANGE_POINTS;
                rem /= LAGRANGE_POINTS;
                w *= weights[j][p];
                let idx = (base[j] + p as i64).rem_euclid(g.counts()[j] as i64) as usize;
                flat += idx * strides[j];
            }
            acc += w * self.table[flat];
        }
        acc
    }

    fn piece_at_origin(&self) -> f64 {
        self.table[self.table_grid.origin()]
    }

    /// `R_alpha(x)`; zero at the origin, where the kernel is singular.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = self.group.rho_unchecked(x);
        if r == 0.0 {
            return 0.0;
        }
        let q = 2f64.powf(self.alpha - self.group.gamma());
        let m0 = (r / self.table_radius).log2().ceil() as i32;
        let a = self.group.exponents();
        // z = A_{2^{-m}} x, advanced by one dyadic step per iteration
        let step: Vec<f64> = a.iter().map(|aj| 2f64.powf(-aj)).collect();
        let mut z: Vec<f64> = x
            .iter()
            .zip(a)
            .map(|(xj, aj)| xj * 2f64.powf(-(m0 as f64) * aj))
            .collect();
        let mut rz = r * 2f64.powi(-m0);
        let mut weight = q.powi(m0);
        let mut acc = 0.0;
        loop {
            if rz < RIESZ_NEAR_ZERO {
                return acc + self.piece_at_origin() * weight / (1.0 - q);
            }
            if rz <= self.table_radius {
                acc += weight * self.piece(&z);
            }
            for (zj, sj) in z.iter_mut().zip(&step) {
                *zj *= sj;
            }
            rz *= 0.5;
            weight *= q;
        }
    }
}

/// The homogeneous kernel `R_alpha` sampled on `grid` (value 0 at the origin).
pub fn synthesize_riesz_kernel(
    alpha: f64,
    group: &DilationGroup,
    grid: &GridSpec,
) -> Result<KernelField> {
    check_dims(group, grid)?;
    let rk = RieszKernel::new(alpha, group)?;
    let values: Vec<Complex64> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; grid.dim()],
            |x, i| {
                grid.point(i, x);
                Complex64::new(rk.eval(x), 0.0)
            },
        )
        .collect();
    let field = SampledField::new(grid.clone(), values)?;
    Ok(KernelField::new(field, KernelKind::Riesz { alpha }, group))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayShell {
    pub shell_lo: f64,
    pub shell_hi: f64,
    pub sup_weighted: f64,
}

/// Per-shell sup of the weighted kernel modulus over dyadic `rho`-shells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub exponent: f64,
    pub weight: DecayWeight,
    pub shells: Vec<DecayShell>,
}

impl DecayProfile {
    /// Largest weighted sup over shells lying inside `rho <= r`.
    pub fn max_within(&self, r: f64) -> f64 {
        self.shells
            .iter()
            .filter(|s| s.shell_hi <= r * (1.0 + 1e-12))
            .map(|s| s.sup_weighted)
            .fold(0.0, f64::max)
    }

    /// Shells starting at or beyond `r`.
    pub fn outer(&self, r: f64) -> impl Iterator<Item = &DecayShell> {
        self.shells
            .iter()
            .filter(move |s| s.shell_lo >= r * (1.0 - 1e-12))
    }

    pub fn max(&self) -> f64 {
        self.shells
            .iter()
            .map(|s| s.sup_weighted)
            .fold(0.0, f64::max)
    }

    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "shell_lo,shell_hi,sup_weighted")?;
        for s in &self.shells {
            writeln!(w, "{:e},{:e},{:e}", s.shell_lo, s.shell_hi, s.sup_weighted)?;
        }
        Ok(())
    }
}

/// Fraction of the inscribed `rho`-radius covered by [`decay_profile`];
/// further out the periodic images of the kernel are no longer small.
pub const PROFILE_RADIUS_FRACTION: f64 = 0.4;

pub fn decay_profile(kernel: &KernelField) -> DecayProfile {
    let r = PROFILE_RADIUS_FRACTION * kernel.group.inscribed_radius(kernel.field.grid());
    decay_profile_within(kernel, r).expect("radius is positive")
}

pub fn decay_profile_within(kernel: &KernelField, rho_max: f64) -> Result<DecayProfile> {
    let rho = kernel.group.rho_field(kernel.field.grid());
    decay_profile_with_rho(kernel, &rho, rho_max)
}

/// As [`decay_profile_within`], reusing precomputed spatial `rho` values.
pub fn decay_profile_with_rho(
    kernel: &KernelField,
    rho: &[f64],
    rho_max: f64,
) -> Result<DecayProfile> {
    if !(rho_max > 0.0) {
        return Err(invalid_param(format!(
            "rho_max = {rho_max} must be positive"
        )));
    }
    let grid = kernel.field.grid();
    if rho.len() != grid.len() {
        return Err(invalid_input("rho values do not match the kernel grid"));
    }
    let weight = kernel.kind.decay_weight();
    let p = kernel.decay_exponent;
    let mut edges = Vec::new();
    match weight {
        DecayWeight::OnePlusRho => {
            edges.push(0.0);
            let mut e = 1.0;
            while e < rho_max {
                edges.push(e);
                e *= 2.0;
            }
        }
        DecayWeight::Rho => {
            let cell = grid
                .spacings()
                .iter()
                .zip(kernel.group.exponents())
                .map(|(h, a)| h.powf(1.0 / a))
                .fold(0.0, f64::max);
            let mut e = 2f64.powf(cell.log2().ceil());
            while e < rho_max {
                edges.push(e);
                e *= 2.0;
            }
        }
    }
    edges.push(rho_max);
    let nshell = edges.len() - 1;
    let lo = edges[0];
    let sups = kernel
        .field
        .values()
        .par_iter()
        .zip(rho.par_iter())
        .fold(
            || vec![0.0f64; nshell],
            |mut acc, (v, &r)| {
                if r >= lo && r < rho_max {
                    let s = edges.partition_point(|&e| e <= r) - 1;
                    let w = match weight {
                        DecayWeight::OnePlusRho => (1.0 + r).powf(p),
                        DecayWeight::Rho => r.powf(p),
                    };
                    acc[s] = acc[s].max(v.norm() * w);
                }
                acc
            },
        )
        .reduce(
            || vec![0.0f64; nshell],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
        );
    let shells = (0..nshell)
        .map(|s| DecayShell {
            shell_lo: edges[s],
            shell_hi: edges[s + 1],
            sup_weighted: sups[s],
        })
        .collect();
    Ok(DecayProfile {
        exponent: p,
        weight,
        shells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn partition_of_unity() {
        for &r in &[1e-3, 0.1, 0.37, 1.0, 1.5, 2.9, 17.0, 400.0] {
            let s: f64 = (-40..40).map(|j| lp_bump(2f64.powi(j) * r)).sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-14);
        }
        assert_eq!(lp_bump(0.49), 0.0);
        assert_eq!(lp_bump(2.01), 0.0);
        for &r in &[0.5, 0.8, 1.0, 1.7, 2.0] {
            assert_relative_eq!(lp_bump_wide(r), 1.0, epsilon = 1e-15);
        }
        assert_eq!(lp_bump_wide(0.24), 0.0);
        assert_eq!(lp_bump_wide(4.01), 0.0);
    }

    #[test]
    fn decay_exponents() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(KernelKind::K.decay_exponent(&g), 4.0);
        assert_eq!(KernelKind::Deriv { k: 1 }.decay_exponent(&g), 6.0);
        assert_eq!(KernelKind::Deriv2 { k: 0, l: 1 }.decay_exponent(&g), 7.0);
        assert_eq!(
            KernelKind::RhoTilde { m: 2, alpha: 0.5 }.decay_exponent(&g),
            2.5
        );
        assert_eq!(
            KernelKind::RhoTildeDeriv {
                m: 0,
                alpha: 0.5,
                s: 1
            }
            .decay_exponent(&g),
            4.5
        );
    }

    #[test]
    fn poisson_kernel_at_origin() {
        let g = DilationGroup::isotropic(2);
        let grid = GridSpec::cube(2, 256, 24.0).unwrap();
        let k = synthesize_kernel(KernelKind::K, &g, &grid).unwrap();
        // periodic images add roughly sum over lattice of c2 |L m|^-3
        assert_relative_eq!(
            k.field.value_at(&[128, 128]).re,
            1.0 / (2.0 * PI),
            max_relative = 1e-3
        );
        assert_relative_eq!(k.field.integral().re, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = DilationGroup::isotropic(2);
        let grid = GridSpec::cube(2, 64, 32.0).unwrap();
        assert!(synthesize_kernel(KernelKind::K, &g, &grid).is_err());
        assert!(synthesize_kernel(
            KernelKind::Deriv { k: 2 },
            &g,
            &GridSpec::cube(2, 64, 4.0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn zero_kernel_profile() {
        let g = DilationGroup::isotropic(2);
        let grid = GridSpec::cube(2, 32, 8.0).unwrap();
        let kf = KernelField::new(SampledField::zeros(grid), KernelKind::K, &g);
        let p = decay_profile(&kf);
        assert!(!p.shells.is_empty());
        assert!(p.shells.iter().all(|s| s.sup_weighted == 0.0));
    }

    #[test]
    fn riesz_piece_interpolation_matches_table() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let rk = RieszKernel::new(0.5, &g).unwrap();
        let mut x = vec![0.0; 2];
        for i in [0usize, 17, 4099, 123_457] {
            rk.table_grid.point(i, &mut x);
            assert_relative_eq!(rk.piece(&x), rk.table[i], epsilon = 1e-12);
        }
    }
}
