use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, Mutex};

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use super::multiplier::{check_group, check_mean, q_symbol, LpPartition};
use super::subordination::band_limits;
use crate::dilation::{unit_ball_volume, DilationGroup};
use crate::error::{invalid_param, Result};
use crate::fft::fft_nd;
use crate::field::SampledField;
use crate::grid::GridSpec;
use crate::kernels::{lp_bump, smooth_step};

/// Parameters of the lattice quadrature behind `D_alpha` and `T_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicQuadrature {
    /// Outer `rho`-radius of the tapered lattice sum; `None` picks
    /// `outer_cycles / rho_lo` from the lowest frequency of the input.
    pub outer_radius: Option<f64>,
    pub outer_cycles: f64,
    /// `T_j` shells use polar nodes while the largest phase across them stays
    /// below `polar_max_phase` or their inner radius is under
    /// `resolved_cells` cell diameters, and the folded lattice otherwise.
    pub polar_max_phase: f64,
    pub resolved_cells: f64,
    /// Shells needing more lattice offsets than this are replaced by their
    /// periodic average.
    pub max_points: usize,
}

impl Default for DyadicQuadrature {
    fn default() -> Self {
        Self {
            outer_radius: None,
            outer_cycles: 8.0,
            polar_max_phase: 40.0,
            resolved_cells: 4.0,
            max_points: 1 << 23,
        }
    }
}

fn check_unit_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid_param(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    Ok(())
}

fn raw_forward(values: &[Complex64], grid: &GridSpec) -> Vec<Complex64> {
    let mut v = values.to_vec();
    fft_nd(&mut v, grid.counts(), FftDirection::Forward);
    v
}

fn raw_inverse(mut v: Vec<Complex64>, grid: &GridSpec) -> Vec<Complex64> {
    fft_nd(&mut v, grid.counts(), FftDirection::Inverse);
    let s = 1.0 / v.len() as f64;
    v.iter_mut().for_each(|c| *c *= s);
    v
}

/// Samples of a potential `G` plus its raw spectrum, for the quadratures.
struct Potential {
    values: Vec<Complex64>,
    raw: Vec<Complex64>,
}

impl Potential {
    fn from_raw(raw: Vec<Complex64>, grid: &GridSpec) -> Self {
        Self {
            values: raw_inverse(raw.clone(), grid),
            raw,
        }
    }

    fn is_zero(&self) -> bool {
        self.raw.iter().all(|c| c.norm() == 0.0)
    }

    fn gradient(&self, grid: &GridSpec, axis: usize) -> Vec<Complex64> {
        let n = grid.counts()[axis];
        let l = grid.extents()[axis];
        let stride: usize = grid.counts()[axis + 1..].iter().product();
        let v: Vec<Complex64> = self
            .raw
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let s = (i / stride) % n;
                if s == n / 2 {
                    Complex64::default()
                } else {
                    c * Complex64::new(0.0, 2.0 * PI * grid.freq_index(axis, s) as f64 / l)
                }
            })
            .collect();
        raw_inverse(v, grid)
    }
}

/// Lattice weights folded onto the periodic grid, with their real spectrum.
#[derive(Debug, Clone)]
struct FoldedWeight {
    spectrum: Vec<f64>,
    total: f64,
    moments: Vec<f64>,
    points: usize,
}

fn lattice_half_widths(group: &DilationGroup, grid: &GridSpec, radius: f64) -> Vec<i64> {
    group
        .exponents()
        .iter()
        .enumerate()
        .map(|(j, a)| (radius.powf(*a) / grid.spacing(j)).floor() as i64)
        .collect()
}

fn lattice_count(half: &[i64]) -> f64 {
    half.iter().map(|m| (2 * m + 1) as f64).product()
}

/// Sum `h^n w(rho(y))` over lattice offsets `y != 0` with `rho(y) < radius`,
/// folded modulo the grid.
fn fold_weight(
    group: &DilationGroup,
    grid: &GridSpec,
    radius: f64,
    weight: impl Fn(f64) -> f64 + Sync,
) -> FoldedWeight {
    let dim = grid.dim();
    let half = lattice_half_widths(group, grid, radius);
    let h = grid.spacings();
    let cell = grid.cell_volume();
    let counts = grid.counts().to_vec();
    let strides = grid.strides();
    let rest: Vec<i64> = half[1..].iter().map(|m| 2 * m + 1).collect();
    let rest_len: i64 = rest.iter().product();

    struct Acc {
        folded: Vec<f64>,
        total: f64,
        moments: Vec<f64>,
        points: usize,
    }
    let new_acc = || Acc {
        folded: vec![0.0; grid.len()],
        total: 0.0,
        moments: vec![0.0; dim],
        points: 0,
    };
    let acc = (-half[0]..=half[0])
        .into_par_iter()
        .fold(new_acc, |mut acc, i0| {
            let mut y = vec![0.0; dim];
            let mut idx = vec![0i64; dim];
            idx[0] = i0;
            y[0] = i0 as f64 * h[0];
            for flat in 0..rest_len {
                let mut r = flat;
                for j in (1..dim).rev() {
                    let w = rest[j - 1];
                    idx[j] = r % w - half[j];
                    r /= w;
                    y[j] = idx[j] as f64 * h[j];
                }
                if idx.iter().all(|&v| v == 0) {
                    continue;
                }
                let rho = group.rho_unchecked(&y);
                if rho >= radius {
                    continue;
                }
                let w = weight(rho);
                if w == 0.0 {
                    continue;
                }
                let w = w * cell;
                let slot: usize = (0..dim)
                    .map(|j| idx[j].rem_euclid(counts[j] as i64) as usize * strides[j])
                    .sum();
                acc.folded[slot] += w;
                acc.total += w;
                for j in 0..dim {
                    acc.moments[j] += w * y[j] * y[j];
                }
                acc.points += 1;
            }
            acc
        })
        .reduce(new_acc, |mut a, b| {
            a.folded
                .iter_mut()
                .zip(&b.folded)
                .for_each(|(x, y)| *x += y);
            a.total += b.total;
            a.moments
                .iter_mut()
                .zip(&b.moments)
                .for_each(|(x, y)| *x += y);
            a.points += b.points;
            a
        });
    let raw: Vec<Complex64> = acc.folded.iter().map(|&w| Complex64::new(w, 0.0)).collect();
    let spectrum = raw_forward(&raw, grid).iter().map(|c| c.re).collect();
    FoldedWeight {
        spectrum,
        total: acc.total,
        moments: acc.moments,
        points: acc.points,
    }
}

/// One term `int |G(x+y) - G(x)|^2 dmu(y)` of a quadrature.
#[derive(Debug, Clone)]
enum Piece {
    Lattice(FoldedWeight),
    /// `sum_i m_i |d_i G|^2`
    Taylor(Vec<f64>),
    /// periodic average with total mass `c`
    Uniform(f64),
}

impl Piece {
    fn energy(&self, g: &Potential, grid: &GridSpec, out: &mut [f64]) {
        match self {
            Piece::Lattice(w) => {
                let corr = |x: Vec<Complex64>| {
                    let mut spec = raw_forward(&x, grid);
                    spec.iter_mut().zip(&w.spectrum).for_each(|(c, s)| *c *= s);
                    raw_inverse(spec, grid)
                };
                let p: Vec<Complex64> = g
                    .values
                    .iter()
                    .map(|v| Complex64::new(v.norm_sqr(), 0.0))
                    .collect();
                let cp = corr(p);
                let cg = corr(g.values.clone());
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let v = g.values[i];
                    *o += w.total * v.norm_sqr() + cp[i].re - 2.0 * (v.conj() * cg[i]).re;
                });
            }
            Piece::Taylor(m) => {
                for (axis, &mi) in m.iter().enumerate() {
                    if mi == 0.0 {
                        continue;
                    }
                    let d = g.gradient(grid, axis);
                    out.iter_mut()
                        .zip(&d)
                        .for_each(|(o, v)| *o += mi * v.norm_sqr());
                }
            }
            Piece::Uniform(c) => {
                let n = g.values.len() as f64;
                let mean: Complex64 = g.values.iter().sum::<Complex64>() / n;
                let mean_sq: f64 = g.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
                out.iter_mut().zip(&g.values).for_each(|(o, v)| {
                    *o += c * (v.norm_sqr() + mean_sq - 2.0 * (v.conj() * mean).re);
                });
            }
        }
    }
}

/// `int_{S^{n-1}} theta_i^2 sum_j a_j theta_j^2 dsigma`, the angular factor of
/// the moment `int y_i^2 rho(y)^{-gamma-2 alpha} dy` in polar coordinates.
fn sphere_second_moment(group: &DilationGroup, i: usize) -> f64 {
    let n = group.dim() as f64;
    let area = n * unit_ball_volume(group.dim());
    area * (2.0 * group.exponents()[i] + group.gamma()) / (n * (n + 2.0))
}

fn cell_rho(group: &DilationGroup, grid: &GridSpec) -> f64 {
    grid.spacings()
        .iter()
        .zip(group.exponents())
        .map(|(h, a)| h.powf(1.0 / a))
        .fold(0.0, f64::max)
}

/// Spectral refinement that makes the `rho`-size of a cell equal across axes,
/// so the lattice resolves the anisotropic ridge of the weight.
#[derive(Debug, Clone)]
struct Refinement {
    coarse: GridSpec,
    fine: GridSpec,
    factors: Vec<usize>,
}

const MAX_REFINEMENT: usize = 16;

impl Refinement {
    fn new(group: &DilationGroup, coarse: &GridSpec) -> Self {
        let sizes: Vec<f64> = coarse
            .spacings()
            .iter()
            .zip(group.exponents())
            .map(|(h, a)| h.powf(1.0 / a))
            .collect();
        let finest = sizes.iter().cloned().fold(f64::INFINITY, f64::min);
        let factors: Vec<usize> = sizes
            .iter()
            .zip(group.exponents())
            .map(|(s, a)| {
                (((s / finest).powf(*a) - 1e-9).ceil().max(1.0) as usize)
                    .next_power_of_two()
                    .min(MAX_REFINEMENT)
            })
            .collect();
        let counts = coarse
            .counts()
            .iter()
            .zip(&factors)
            .map(|(n, f)| n * f)
            .collect();
        let fine = GridSpec::new(counts, coarse.extents().to_vec()).expect("refined grid is valid");
        Self {
            coarse: coarse.clone(),
            fine,
            factors,
        }
    }

    /// Zero-padded copy of a raw coarse spectrum with the same samples.
    fn lift(&self, raw: &[Complex64]) -> Vec<Complex64> {
        let scale = (self.fine.len() / self.coarse.len()) as f64;
        let mut out = vec![Complex64::default(); self.fine.len()];
        let mut idx = vec![0usize; self.coarse.dim()];
        for (i, c) in raw.iter().enumerate() {
            self.coarse.unravel(i, &mut idx);
            for (j, s) in idx.iter_mut().enumerate() {
                *s = self.fine.freq_slot(j, self.coarse.freq_index(j, *s));
            }
            out[self.fine.ravel(&idx)] = c * scale;
        }
        out
    }

    fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        let mut idx = vec![0usize; self.coarse.dim()];
        (0..self.coarse.len())
            .map(|i| {
                self.coarse.unravel(i, &mut idx);
                idx.iter_mut().zip(&self.factors).for_each(|(s, f)| *s *= f);
                fine[self.fine.ravel(&idx)]
            })
            .collect()
    }
}

// taper equal to 1 for r <= R/2 and 0 for r >= R
fn taper(r: f64, radius: f64) -> f64 {
    smooth_step(2.0 * r / radius)
}

fn riesz_raw(f: &SampledField, alpha: f64, group: &DilationGroup) -> (Vec<Complex64>, Vec<f64>) {
    let rho = group.rho_spectrum(f.grid());
    let mut raw = raw_forward(f.values(), f.grid());
    raw.iter_mut().zip(&rho).for_each(|(c, &r)| {
        *c *= if r > 0.0 {
            (2.0 * PI * r).powf(-alpha)
        } else {
            0.0
        };
    });
    (raw, rho)
}

fn raw_band(raw: &[Complex64], rho: &[f64]) -> Option<(f64, f64)> {
    let peak = raw.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return None;
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for (c, &r) in raw.iter().zip(rho) {
        if r > 0.0 && c.norm() > 1e-14 * peak {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (hi > 0.0).then_some((lo, hi))
}

fn finish(grid: &GridSpec, energy: Vec<f64>) -> SampledField {
    let values = energy
        .into_iter()
        .map(|e| Complex64::new(e.max(0.0).sqrt(), 0.0))
        .collect();
    SampledField::from_parts(grid.clone(), values)
}

/// Plan for `D_alpha`: a tapered lattice sum, a correction of its second
/// moments against the exact integral (the lattice misses the singular core),
/// and a periodic average beyond the taper.
#[derive(Debug, Clone)]
pub struct DAlpha {
    pub alpha: f64,
    pub outer_radius: f64,
    pub lattice_points: usize,
    /// Lattice minus exact second moments per axis, subtracted from the sum.
    pub moment_error: Vec<f64>,
    /// Mass of the weight beyond the taper, treated as a periodic average.
    pub tail_mass: f64,
    /// Per-axis refinement of the lattice relative to the field grid.
    pub refinement: Vec<usize>,
    refine: Refinement,
    pieces: Vec<Piece>,
}

impl DAlpha {
    pub fn new(
        group: &DilationGroup,
        grid: &GridSpec,
        alpha: f64,
        outer_radius: f64,
        quad: &DyadicQuadrature,
    ) -> Result<Self> {
        check_group(group, grid)?;
        check_unit_alpha(alpha)?;
        let refine = Refinement::new(group, grid);
        let grid = &refine.fine;
        let r = outer_radius;
        if !(r.is_finite() && 0.5 * r > 2.0 * cell_rho(group, grid)) {
            return Err(invalid_param(format!(
                "quadrature range empty: outer radius {r} spans under two cells"
            )));
        }
        let count = lattice_count(&lattice_half_widths(group, grid, r));
        if count > quad.max_points as f64 {
            return Err(invalid_param(format!(
                "outer radius {r} needs {count:.0} lattice offsets, above the limit {}",
                quad.max_points
            )));
        }
        let s = group.gamma() + 2.0 * alpha;
        let weight = fold_weight(group, grid, r, |rho| rho.powf(-s) * taper(rho, r));
        let gl = GaussLegendre::new(24.try_into().expect("nonzero"));
        let moment_error: Vec<f64> = (0..group.dim())
            .map(|i| {
                let b = 2.0 * group.exponents()[i] - 2.0 * alpha;
                // int_0^R r^{b-1} taper(r) dr
                let radial = r.powf(b)
                    * (0.5f64.powf(b) / b
                        + gl.integrate(0.5, 1.0, |u| u.powf(b - 1.0) * smooth_step(2.0 * u)));
                weight.moments[i] - sphere_second_moment(group, i) * radial
            })
            .collect();
        let area = group.gamma() * unit_ball_volume(group.dim());
        let tail_mass = area
            * r.powf(-2.0 * alpha)
            * (1.0 / (2.0 * alpha)
                + gl.integrate(0.5, 1.0, |u| {
                    u.powf(-2.0 * alpha - 1.0) * (1.0 - smooth_step(2.0 * u))
                }));
        let lattice_points = weight.points;
        let correction = moment_error.iter().map(|e| -e).collect();
        Ok(Self {
            alpha,
            outer_radius: r,
            lattice_points,
            moment_error,
            tail_mass,
            refinement: refine.factors.clone(),
            refine,
            pieces: vec![
                Piece::Lattice(weight),
                Piece::Taylor(correction),
                Piece::Uniform(tail_mass),
            ],
        })
    }

    /// Outer radius used for a potential whose lowest frequency is `rho_lo`.
    pub fn default_radius(quad: &DyadicQuadrature, rho_lo: f64) -> f64 {
        quad.outer_radius.unwrap_or(quad.outer_cycles / rho_lo)
    }

    /// `D_alpha f` for a mean-free `f` on the planned grid.
    pub fn apply(&self, f: &SampledField, group: &DilationGroup) -> Result<SampledField> {
        let r = &self.refine;
        if f.grid() != &r.coarse {
            return Err(invalid_param("field grid differs from the planned grid"));
        }
        check_mean(&f.forward(), f.lp_norm(2.0)?)?;
        let (raw, _) = riesz_raw(f, self.alpha, group);
        let g = Potential::from_raw(r.lift(&raw), &r.fine);
        let mut energy = vec![0.0; r.fine.len()];
        if !g.is_zero() {
            for p in &self.pieces {
                p.energy(&g, &r.fine, &mut energy);
            }
        }
        Ok(finish(&r.coarse, r.restrict(&energy)))
    }
}

/// `D_alpha f(x) = (int |I_alpha f(x+y) - I_alpha f(x)|^2 rho(y)^{-gamma-2 alpha} dy)^{1/2}`.
pub fn marcinkiewicz_d_alpha(
    f: &SampledField,
    alpha: f64,
    quad: &DyadicQuadrature,
    group: &DilationGroup,
) -> Result<SampledField> {
    check_group(group, f.grid())?;
    check_unit_alpha(alpha)?;
    let (raw, rho) = riesz_raw(f, alpha, group);
    check_mean(&f.forward(), f.lp_norm(2.0)?)?;
    let Some((lo, _)) = raw_band(&raw, &rho) else {
        return Ok(SampledField::zeros(f.grid().clone()));
    };
    DAlpha::new(
        group,
        f.grid(),
        alpha,
        DAlpha::default_radius(quad, lo),
        quad,
    )?
    .apply(f, group)
}

/// How a dyadic shell `2^k <= rho(y) < 2^{k+1}` is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellKind {
    /// Gauss-Legendre in `r` times the trapezoid rule in angle, with exact
    /// spectral shifts of `G`.
    Polar,
    Lattice,
    Uniform,
}

/// Offsets and weights of a positive polar rule for the shell in `n = 2`.
fn polar_nodes(
    group: &DilationGroup,
    alpha: f64,
    r0: f64,
    r1: f64,
    phase: f64,
) -> Vec<(Vec<f64>, f64)> {
    let angles = 2 * ((phase.ceil() as usize) + 16);
    let radial = GaussLegendre::new(
        ((phase / 2.0).ceil() as usize + 8)
            .try_into()
            .expect("nonzero"),
    );
    let a = group.exponents();
    let mut out = Vec::with_capacity(angles * radial.degree());
    for &(u, wu) in radial.as_node_weight_pairs() {
        let r = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * u;
        let wr = 0.5 * (r1 - r0) * wu * r.powf(-2.0 * alpha - 1.0);
        for m in 0..angles {
            let phi = 2.0 * PI * m as f64 / angles as f64;
            let (s, c) = phi.sin_cos();
            let sigma = a[0] * c * c + a[1] * s * s;
            out.push((
                vec![r.powf(a[0]) * c, r.powf(a[1]) * s],
                wr * sigma * 2.0 * PI / angles as f64,
            ));
        }
    }
    out
}

fn node_energy(nodes: &[(Vec<f64>, f64)], g: &Potential, grid: &GridSpec, out: &mut [f64]) {
    let dim = grid.dim();
    let mut xi = vec![0.0; dim * grid.len()];
    xi.chunks_mut(dim)
        .enumerate()
        .for_each(|(i, x)| grid.frequency(i, x));
    let acc = nodes
        .par_iter()
        .fold(
            || vec![0.0; grid.len()],
            |mut acc, (y, w)| {
                let shifted: Vec<Complex64> = g
                    .raw
                    .iter()
                    .zip(xi.chunks(dim))
                    .map(|(c, x)| {
                        let t: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                        c * Complex64::from_polar(1.0, 2.0 * PI * t)
                    })
                    .collect();
                let shifted = raw_inverse(shifted, grid);
                acc.iter_mut()
                    .zip(shifted.iter().zip(&g.values))
                    .for_each(|(e, (s, v))| *e += w * (s - v).norm_sqr());
                acc
            },
        )
        .reduce(
            || vec![0.0; grid.len()],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    out.iter_mut().zip(&acc).for_each(|(o, a)| *o += a);
}

enum Shell {
    Nodes(Vec<(Vec<f64>, f64)>),
    Weighted(Piece),
}

/// Shell-by-shell quadrature behind `T_j`. Every shell term integrates
/// `|G(x+y) - G(x)|^2` against a positive measure, so the shell form of
/// `D_alpha` is bounded by the sum of the `T_j` pointwise.
pub struct TjDecomposition {
    pub alpha: f64,
    group: DilationGroup,
    grid: GridSpec,
    quad: DyadicQuadrature,
    shells: Mutex<BTreeMap<i32, Arc<(ShellKind, Shell)>>>,
}

impl TjDecomposition {
    pub fn new(
        group: &DilationGroup,
        grid: &GridSpec,
        alpha: f64,
        quad: &DyadicQuadrature,
    ) -> Result<Self> {
        check_group(group, grid)?;
        check_unit_alpha(alpha)?;
        if group.dim() != 2 {
            return Err(invalid_param(
                "the shell quadrature is implemented for n = 2",
            ));
        }
        Ok(Self {
            alpha,
            group: group.clone(),
            grid: grid.clone(),
            quad: quad.clone(),
            shells: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn shell_kind(&self, k: i32) -> ShellKind {
        self.shell(k).0
    }

    fn shell(&self, k: i32) -> Arc<(ShellKind, Shell)> {
        if let Some(p) = self.shells.lock().expect("shell cache").get(&k) {
            return p.clone();
        }
        let g = &self.group;
        let r0 = 2f64.powi(k);
        let r1 = 2.0 * r0;
        // largest phase 2 pi <xi, y> a grid frequency reaches on the shell
        let phase = 2.0 * PI * g.nyquist_rho(&self.grid) * r1;
        let unresolved = r0 < self.quad.resolved_cells * cell_rho(g, &self.grid);
        let piece = if phase <= self.quad.polar_max_phase || unresolved {
            (
                ShellKind::Polar,
                Shell::Nodes(polar_nodes(g, self.alpha, r0, r1, phase)),
            )
        } else if lattice_count(&lattice_half_widths(g, &self.grid, r1))
            > self.quad.max_points as f64
        {
            let c = g.tail_integral(r0, 2.0 * self.alpha) - g.tail_integral(r1, 2.0 * self.alpha);
            (ShellKind::Uniform, Shell::Weighted(Piece::Uniform(c)))
        } else {
            let s = g.gamma() + 2.0 * self.alpha;
            let w = fold_weight(g, &self.grid, r1, |rho| {
                if rho >= r0 {
                    rho.powf(-s)
                } else {
                    0.0
                }
            });
            (ShellKind::Lattice, Shell::Weighted(Piece::Lattice(w)))
        };
        let p = Arc::new(piece);
        self.shells
            .lock()
            .expect("shell cache")
            .insert(k, p.clone());
        p
    }

    fn check_grid(&self, f: &SampledField) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(invalid_param("field grid differs from the planned grid"));
        }
        Ok(())
    }

    fn blocks(&self, f: &SampledField, part: &LpPartition) -> Result<Vec<(i32, Potential)>> {
        self.check_grid(f)?;
        check_mean(&f.forward(), f.lp_norm(2.0)?)?;
        let (raw, rho) = riesz_raw(f, self.alpha, &self.group);
        let peak = raw.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (c, &r) in raw.iter().zip(&rho) {
            if c.norm() > 1e-12 * peak {
                let cover: f64 = part.blocks().map(|j| lp_bump(2f64.powi(j) * r)).sum();
                if (cover - 1.0).abs() > 1e-9 {
                    return Err(invalid_param(format!(
                        "blocks {}..={} do not cover the spectrum at rho = {r}",
                        part.j_min, part.j_max
                    )));
                }
            }
        }
        let mut out = Vec::new();
        for b in part.blocks() {
            let s = 2f64.powi(b);
            let block: Vec<Complex64> = raw
                .iter()
                .zip(&rho)
                .map(|(c, &r)| c * lp_bump(s * r))
                .collect();
            if block.iter().any(|c| c.norm() > 0.0) {
                out.push((b, Potential::from_raw(block, &self.grid)));
            }
        }
        Ok(out)
    }

    fn shell_sum(&self, terms: impl Iterator<Item = (i32, Arc<Potential>)>) -> SampledField {
        let mut energy = vec![0.0; self.grid.len()];
        for (k, g) in terms {
            match &self.shell(k).1 {
                Shell::Nodes(nodes) => node_energy(nodes, &g, &self.grid, &mut energy),
                Shell::Weighted(p) => p.energy(&g, &self.grid, &mut energy),
            }
        }
        finish(&self.grid, energy)
    }

    /// `T_j f`, summing the shells `k` with `k_lo <= k <= k_hi`.
    pub fn t_j_window(
        &self,
        f: &SampledField,
        j: i32,
        part: &LpPartition,
        k_lo: i32,
        k_hi: i32,
    ) -> Result<SampledField> {
        let blocks = self.blocks(f, part)?;
        Ok(self.shell_sum(
            blocks
                .into_iter()
                .map(|(b, g)| (b - j, Arc::new(g)))
                .filter(|(k, _)| (k_lo..=k_hi).contains(k)),
        ))
    }

    /// `T_j f` over every shell met by a block of the partition.
    pub fn t_j(&self, f: &SampledField, j: i32, part: &LpPartition) -> Result<SampledField> {
        self.t_j_window(f, j, part, i32::MIN, i32::MAX)
    }

    /// Shell form of `D_alpha f` restricted to `k_lo <= k <= k_hi`.
    pub fn d_alpha_window(&self, f: &SampledField, k_lo: i32, k_hi: i32) -> Result<SampledField> {
        self.check_grid(f)?;
        check_mean(&f.forward(), f.lp_norm(2.0)?)?;
        let (raw, _) = riesz_raw(f, self.alpha, &self.group);
        let g = Arc::new(Potential::from_raw(raw, &self.grid));
        Ok(self.shell_sum((k_lo..=k_hi).map(|k| (k, g.clone()))))
    }
}

/// `T_j f = (sum_k int_{2^k <= rho(y) < 2^{k+1}} |I_alpha Delta_{j+k} f(x+y) - I_alpha Delta_{j+k} f(x)|^2 rho(y)^{-gamma-2 alpha} dy)^{1/2}`.
pub fn t_j_square_function(
    f: &SampledField,
    j: i32,
    alpha: f64,
    quad: &DyadicQuadrature,
    part: &LpPartition,
    group: &DilationGroup,
) -> Result<SampledField> {
    TjDecomposition::new(group, f.grid(), alpha, quad)?.t_j(f, j, part)
}

/// Geometric grid `t_m = 2^{m / steps_per_octave}`, `lo <= m <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TRange {
    pub lo: i32,
    pub hi: i32,
    pub steps_per_octave: u32,
}

impl TRange {
    pub fn new(lo: i32, hi: i32, steps_per_octave: u32) -> Result<Self> {
        if lo > hi || steps_per_octave == 0 {
            return Err(invalid_param(format!(
                "empty t range [{lo}, {hi}] with {steps_per_octave} steps per octave"
            )));
        }
        Ok(Self {
            lo,
            hi,
            steps_per_octave,
        })
    }

    /// Range whose truncation changes `g_Q^2` by under `1e-10` relative for a
    /// spectrum inside `band`; four steps per octave.
    pub fn for_band(band: (f64, f64)) -> Result<Self> {
        let (lo, hi) = band;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(invalid_param(format!("invalid band [{lo}, {hi}]")));
        }
        let steps = 4u32;
        let t_lo = 7e-6 / (2.0 * PI * hi);
        let t_hi = 13.0 / (2.0 * PI * lo);
        Self::new(
            (t_lo.log2() * steps as f64).floor() as i32,
            (t_hi.log2() * steps as f64).ceil() as i32,
            steps,
        )
    }

    pub fn for_field(f: &SampledField, group: &DilationGroup) -> Result<Self> {
        let band = band_limits(&f.forward(), &group.rho_spectrum(f.grid()))
            .ok_or_else(|| invalid_param("zero field has no band"))?;
        Self::for_band(band)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (self.lo..=self.hi).map(|m| 2f64.powf(m as f64 / self.steps_per_octave as f64))
    }

    pub fn weight(&self) -> f64 {
        LN_2 / self.steps_per_octave as f64
    }

    /// Bound on the relative part of `int |Q_t f|^2 dt/t` outside the range.
    pub fn tail_bound(&self, band: (f64, f64)) -> f64 {
        let t_lo = 2f64.powf(self.lo as f64 / self.steps_per_octave as f64);
        let t_hi = 2f64.powf(self.hi as f64 / self.steps_per_octave as f64);
        let u_lo = 2.0 * PI * t_lo * band.1;
        let u_hi = 2.0 * PI * t_hi * band.0;
        2.0 * u_lo * u_lo + (-2.0 * u_hi).exp() * (2.0 * u_hi + 1.0)
    }
}

/// `g_Q f = (int_0^inf |Q_t f|^2 dt/t)^{1/2}` by the log-trapezoid rule on `t_range`.
pub fn g_q(f: &SampledField, t_range: &TRange, group: &DilationGroup) -> Result<SampledField> {
    check_group(group, f.grid())?;
    check_mean(&f.forward(), f.lp_norm(2.0)?)?;
    let grid = f.grid();
    let rho = group.rho_spectrum(grid);
    let raw = raw_forward(f.values(), grid);
    let w = t_range.weight();
    let mut energy = vec![0.0; grid.len()];
    for t in t_range.nodes() {
        let spec: Vec<Complex64> = raw
            .iter()
            .zip(&rho)
            .map(|(c, &r)| c * q_symbol(t, r))
            .collect();
        let q = raw_inverse(spec, grid);
        energy
            .iter_mut()
            .zip(&q)
            .for_each(|(e, v)| *e += w * v.norm_sqr());
    }
    Ok(finish(grid, energy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_band_limited;
    use crate::quad::{difference_symbol, SymbolQuadrature};
    use approx::assert_relative_eq;

    fn plane_wave_check(group: &DilationGroup, grid: &GridSpec, k: &[i64], tol: f64) {
        let alpha = 0.5;
        let f = SampledField::plane_wave(grid.clone(), k).unwrap();
        let xi: Vec<f64> = k
            .iter()
            .zip(grid.extents())
            .map(|(&k, l)| k as f64 / l)
            .collect();
        let r = group.rho(&xi).unwrap();
        let c = difference_symbol(group, alpha, &xi, &SymbolQuadrature::default()).unwrap();
        let want = (2.0 * PI * r).powf(-alpha) * c.sqrt();
        let d = marcinkiewicz_d_alpha(&f, alpha, &DyadicQuadrature::default(), group).unwrap();
        for v in d.values() {
            assert_relative_eq!(v.re, want, max_relative = tol);
        }
    }

    #[test]
    fn d_alpha_plane_waves() {
        let iso = DilationGroup::isotropic(2);
        let grid = GridSpec::cube(2, 64, 8.0).unwrap();
        plane_wave_check(&iso, &grid, &[11, 4], 5e-3);
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![64, 128], vec![8.0, 8.0]).unwrap();
        plane_wave_check(&g, &grid, &[10, 3], 2e-3);
        plane_wave_check(&g, &grid, &[12, 0], 2e-3);
        plane_wave_check(&g, &grid, &[2, 25], 2e-3);
    }

    #[test]
    fn d_alpha_zero_and_translation() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![32, 128], vec![4.0, 4.0]).unwrap();
        let q = DyadicQuadrature::default();
        let z = marcinkiewicz_d_alpha(&SampledField::zeros(grid.clone()), 0.5, &q, &g).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let f = make_band_limited(&grid, &g, 2).unwrap();
        let d = marcinkiewicz_d_alpha(&f, 0.5, &q, &g).unwrap();
        let ds = marcinkiewicz_d_alpha(&f.translate(&[3, -7]), 0.5, &q, &g).unwrap();
        assert!(ds.max_abs_diff(&d.translate(&[3, -7])) < 1e-10 * d.max_abs());
        assert!(marcinkiewicz_d_alpha(&f, 1.0, &q, &g).is_err());
        let tiny = DyadicQuadrature {
            outer_radius: Some(0.1),
            ..q
        };
        assert!(marcinkiewicz_d_alpha(&f, 0.5, &tiny, &g).is_err());
    }

    #[test]
    fn t_j_plane_wave_matches_shell_integrals() {
        // int_shell |e^{2 pi i <xi, y>} - 1|^2 |y|^{-2-2a} dy by Gauss-Legendre in r
        // and the trapezoid rule on the circle
        let g = DilationGroup::isotropic(2);
        let grid = GridSpec::cube(2, 64, 8.0).unwrap();
        let alpha = 0.5;
        let f = SampledField::plane_wave(grid.clone(), &[8, 0]).unwrap();
        let xi = 1.0;
        let part = LpPartition::new(-1, 1).unwrap();
        let gl = GaussLegendre::new(60.try_into().unwrap());
        let shell = |k: i32| {
            let r0 = 2f64.powi(k);
            gl.integrate(r0, 2.0 * r0, |r| {
                let m = 400;
                let ang: f64 = (0..m)
                    .map(|i| {
                        2.0 - 2.0
                            * (2.0 * PI * r * xi * (2.0 * PI * i as f64 / m as f64).cos()).cos()
                    })
                    .sum::<f64>();
                ang * 2.0 * PI / m as f64 * r.powf(-1.0 - 2.0 * alpha)
            })
        };
        let tj = TjDecomposition::new(&g, &grid, alpha, &DyadicQuadrature::default()).unwrap();
        for j in [-2, 0, 1, 3] {
            let want: f64 = part
                .blocks()
                .map(|b| lp_bump(2f64.powi(b) * xi).powi(2) * shell(b - j))
                .sum::<f64>()
                .sqrt()
                * (2.0 * PI * xi).powf(-alpha);
            let got = tj.t_j(&f, j, &part).unwrap();
            for v in got.values() {
                assert_relative_eq!(v.re, want, max_relative = 5e-3);
            }
        }
    }

    #[test]
    fn shell_d_bounded_by_t_sum() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![32, 128], vec![4.0, 4.0]).unwrap();
        let f = make_band_limited(&grid, &g, 4).unwrap();
        let part = LpPartition::new(-2, 1).unwrap();
        let tj = TjDecomposition::new(&g, &grid, 0.5, &DyadicQuadrature::default()).unwrap();
        let (k_lo, k_hi) = (-4, 2);
        let d = tj.d_alpha_window(&f, k_lo, k_hi).unwrap();
        let mut sum = SampledField::zeros(grid.clone());
        for j in (part.j_min - k_hi)..=(part.j_max - k_lo) {
            sum = sum
                .add(&tj.t_j_window(&f, j, &part, k_lo, k_hi).unwrap())
                .unwrap();
        }
        for (a, b) in d.values().iter().zip(sum.values()) {
            assert!(a.re <= b.re + 1e-8);
        }
        assert_eq!(tj.shell_kind(-4), ShellKind::Polar);
        assert_eq!(tj.shell_kind(1), ShellKind::Lattice);
    }

    #[test]
    fn t_j_block_orthogonality() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![32, 128], vec![4.0, 4.0]).unwrap();
        let part = LpPartition::new(-3, 2).unwrap();
        // a single plane wave at rho = 1.5 lies in blocks -1 and 0 only;
        // shells are a finite window, so T_j vanishes once j + k misses them
        let f = SampledField::plane_wave(grid.clone(), &[12, 0]).unwrap();
        let tj = TjDecomposition::new(&g, &grid, 0.5, &DyadicQuadrature::default()).unwrap();
        let t = tj.t_j_window(&f, 3, &part, -1, 1).unwrap();
        assert!(t.max_abs() < 1e-12);
        let t = tj.t_j_window(&f, 0, &part, -1, 1).unwrap();
        assert!(t.max_abs() > 0.0);
        let narrow = LpPartition::new(0, 0).unwrap();
        assert!(tj.t_j(&f, 0, &narrow).is_err());
    }

    #[test]
    fn g_q_plane_wave_is_one_half() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![32, 128], vec![4.0, 4.0]).unwrap();
        let f = SampledField::plane_wave(grid, &[5, -9]).unwrap();
        let out = g_q(&f, &TRange::for_field(&f, &g).unwrap(), &g).unwrap();
        for v in out.values() {
            assert_relative_eq!(v.re, 0.5, max_relative = 1e-10);
        }
        assert!(TRange::new(3, 2, 4).is_err());
    }

    #[test]
    fn g_q_range_is_saturated() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![32, 128], vec![4.0, 4.0]).unwrap();
        let f = make_band_limited(&grid, &g, 6).unwrap();
        let r = TRange::for_field(&f, &g).unwrap();
        let wide = TRange::new(r.lo - 12, r.hi + 12, r.steps_per_octave).unwrap();
        let a = g_q(&f, &r, &g).unwrap();
        let b = g_q(&f, &wide, &g).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-8 * a.max_abs());
        assert!(r.tail_bound((1.0, 2.0)) < 1e-9);
    }
}
