//! Polar quadrature in the plane and the difference symbol
//! `c(xi) = int |e^{2 pi i <y, xi>} - 1|^2 rho(y)^{-gamma - 2 alpha} dy`.
//!
//! Points are written `y = A_s theta` with `theta` on the Euclidean unit
//! circle, so `dy = s^{gamma - 1} mu(theta) ds dsigma(theta)`.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::dilation::DilationGroup;
use crate::error::{invalid_param, Result};

fn require_plane(group: &DilationGroup) -> Result<()> {
    if group.dim() != 2 {
        return Err(invalid_param(format!(
            "polar quadrature is implemented for n = 2, got n = {}",
            group.dim()
        )));
    }
    Ok(())
}

/// `int_{S^1} f(theta) dsigma` by the trapezoid rule with `m` nodes, which is
/// spectrally accurate for smooth periodic integrands.
pub fn circle_integral(m: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = 2.0 * PI / m as f64;
    (0..m)
        .map(|i| {
            let t = i as f64 * h;
            f(&[t.cos(), t.sin()])
        })
        .sum::<f64>()
        * h
}

/// `int_{S^1} mu dsigma`, which equals `gamma * pi` in the plane.
pub fn polar_weight_integral(group: &DilationGroup, m: usize) -> Result<f64> {
    require_plane(group)?;
    Ok(circle_integral(m, |t| group.polar_weight_unchecked(t)))
}

/// `|B(0, r)|` through the polar formula `(r^gamma / gamma) int mu dsigma`.
pub fn polar_ball_volume(group: &DilationGroup, r: f64, m: usize) -> Result<f64> {
    Ok(r.powf(group.gamma()) / group.gamma() * polar_weight_integral(group, m)?)
}

/// Numerical settings for [`difference_symbol`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolQuadrature {
    /// Angular resolution; sets the refinement depth of the angular panels.
    pub angles: usize,
    /// Radial cut-off; beyond it the integral is closed in form.
    pub radial_cutoff: f64,
    /// Largest phase change per Gauss-Legendre panel.
    pub panel_phase: f64,
}

impl Default for SymbolQuadrature {
    fn default() -> Self {
        Self {
            angles: 256,
            radial_cutoff: 16.0,
            panel_phase: 1.0,
        }
    }
}

const SMALL_S: f64 = 1e-6;
const TAIL_CYCLES: f64 = 64.0;

/// `int_0^inf 4 sin^2(pi phi(s)) s^{-1-2 alpha} ds` for
/// `phi(s) = sum_j c_j s^{a_j}`.
fn radial_integral(
    a: &[f64],
    c: &[f64],
    alpha: f64,
    q: &SymbolQuadrature,
    gl: &GaussLegendre,
) -> f64 {
    let phi = |s: f64| -> f64 { a.iter().zip(c).map(|(aj, cj)| cj * s.powf(*aj)).sum() };
    let slope = |s: f64| -> f64 {
        a.iter()
            .zip(c)
            .map(|(aj, cj)| (aj * cj * s.powf(aj - 1.0)).abs())
            .sum()
    };
    let integrand = |s: f64| -> f64 {
        let v = (PI * phi(s)).sin();
        4.0 * v * v * s.powf(-1.0 - 2.0 * alpha)
    };
    // (0, SMALL_S): 4 pi^2 phi^2 term by term
    let mut total = 0.0;
    for (aj, cj) in a.iter().zip(c) {
        for (ak, ck) in a.iter().zip(c) {
            let e = aj + ak - 2.0 * alpha;
            total += 4.0 * PI * PI * cj * ck * SMALL_S.powf(e) / e;
        }
    }
    // [SMALL_S, 1]: geometric panels
    let ratio: f64 = 1.5;
    let mut lo = SMALL_S;
    while lo < 1.0 {
        let hi = (lo * ratio).min(1.0);
        total += gl.integrate(lo, hi, integrand);
        lo = hi;
    }
    if c.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    // [1, S]: panels sized by the local phase speed; S is pushed out until
    // the phase turns fast enough for the closed-form tail to be accurate
    let mut cut = q.radial_cutoff;
    while slope(cut) * cut < TAIL_CYCLES && cut < 1e12 {
        cut *= 2.0;
    }
    let mut lo = 1.0;
    while lo < cut {
        let speed = 2.0 * PI * slope(lo * 1.5).max(1e-300);
        let width = (q.panel_phase / speed).min(0.5 * lo);
        let hi = (lo + width).min(cut);
        total += gl.integrate(lo, hi, integrand);
        lo = hi;
    }
    // tail: 2 (1 - cos 2 pi phi) s^{-1-2 alpha} with the leading boundary term
    // of the oscillatory part
    total += cut.powf(-2.0 * alpha) / alpha;
    let psi_speed: f64 = 2.0
        * PI
        * a.iter()
            .zip(c)
            .map(|(aj, cj)| aj * cj * cut.powf(aj - 1.0))
            .sum::<f64>();
    if psi_speed.abs() > 1e-8 {
        let g = cut.powf(-1.0 - 2.0 * alpha);
        total += 2.0 * g * (2.0 * PI * phi(cut)).sin() / psi_speed;
    }
    total
}

/// `c(xi)`; homogeneous of degree `2 alpha`: `c(A_t xi) = t^{2 alpha} c(xi)`.
pub fn difference_symbol(
    group: &DilationGroup,
    alpha: f64,
    xi: &[f64],
    q: &SymbolQuadrature,
) -> Result<f64> {
    require_plane(group)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid_param(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if xi.len() != 2 || xi.iter().all(|&v| v == 0.0) {
        return Err(invalid_param("xi must be a non-zero point of the plane"));
    }
    let gl = GaussLegendre::new(8.try_into().expect("non-zero"));
    let a = group.exponents();
    let radial = |t: f64| -> f64 {
        let theta = [t.cos(), t.sin()];
        let (ea, ec) = merge_monomials(a, &[theta[0] * xi[0], theta[1] * xi[1]]);
        group.polar_weight_unchecked(&theta) * radial_integral(&ea, &ec, alpha, q, &gl)
    };
    // sin^2 is even in phi, so theta and -theta contribute equally; the
    // angular integrand is only Holder continuous where a coefficient of the
    // phase vanishes, so panels are graded towards those angles
    let mut cuts = singular_angles(a, xi);
    cuts.push(cuts[0] + PI);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        acc += graded_integral(w[0], w[1], q.angles, &gl, &radial);
    }
    Ok(2.0 * acc)
}

/// Collect `sum_j c_j s^{a_j}` by distinct exponent.
fn merge_monomials(a: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut ea: Vec<f64> = Vec::new();
    let mut ec: Vec<f64> = Vec::new();
    for (&aj, &cj) in a.iter().zip(c) {
        match ea.iter().position(|&e| (e - aj).abs() < 1e-14) {
            Some(p) => ec[p] += cj,
            None => {
                ea.push(aj);
                ec.push(cj);
            }
        }
    }
    (ea, ec)
}

/// Angles in `[0, pi)` at which some coefficient of `t |-> <A_t theta, xi>`
/// vanishes, sorted; always non-empty.
fn singular_angles(a: &[f64], xi: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let push = |v: f64, out: &mut Vec<f64>| out.push(v.rem_euclid(PI));
    if (a[0] - a[1]).abs() < 1e-14 {
        // theta perpendicular to xi
        push(xi[1].atan2(xi[0]) + 0.5 * PI, &mut out);
    } else {
        if xi[0] != 0.0 {
            push(0.5 * PI, &mut out);
        }
        if xi[1] != 0.0 {
            push(0.0, &mut out);
        }
    }
    if out.is_empty() {
        out.push(0.0);
    }
    out.sort_by(|x, y| x.total_cmp(y));
    out.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    out
}

/// Gauss-Legendre over `[lo, hi]` on panels refined geometrically towards
/// both ends; `budget` sets the number of refinement levels and panels.
fn graded_integral(
    lo: f64,
    hi: f64,
    budget: usize,
    gl: &GaussLegendre,
    f: &impl Fn(f64) -> f64,
) -> f64 {
    let levels = (budget / 16).max(4);
    let ratio: f64 = 0.25;
    let half = 0.5 * (hi - lo);
    let mut acc = 0.0;
    // [lo, mid] and [mid, hi], each refined towards its outer end
    for side in [-1.0f64, 1.0] {
        let mut outer = half;
        for level in 0..levels {
            let inner = if level + 1 == levels {
                0.0
            } else {
                outer * ratio
            };
            let (a, b) = if side < 0.0 {
                (lo + inner, lo + outer)
            } else {
                (hi - outer, hi - inner)
            };
            // split wide panels so each spans at most 1/8 of the arc
            let pieces = (((b - a) / (hi - lo) * 8.0).ceil() as usize).max(1);
            let w = (b - a) / pieces as f64;
            for p in 0..pieces {
                acc += gl.integrate(a + p as f64 * w, a + (p + 1) as f64 * w, f);
            }
            outer = inner;
        }
    }
    acc
}

/// Sampled directions and the resulting `L^2` constant
/// `(2 pi)^{-2 alpha} sup_{rho(xi') = 1} c(xi')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2Constant {
    pub alpha: f64,
    /// Euclidean angles of the sampled directions; each is pushed to the unit
    /// `rho`-sphere before evaluating `c`.
    pub angles: Vec<f64>,
    pub symbol: Vec<f64>,
    pub constant: f64,
    /// `min c / max c` over the sampled directions.
    pub spread: f64,
}

/// Evaluate `c` over `directions` equally spaced angles in `[0, pi)` (`c` is
/// even) and take the supremum.
pub fn l2_constant(
    group: &DilationGroup,
    alpha: f64,
    directions: usize,
    q: &SymbolQuadrature,
) -> Result<L2Constant> {
    require_plane(group)?;
    if directions == 0 {
        return Err(invalid_param("need at least one direction"));
    }
    let angles: Vec<f64> = (0..directions)
        .map(|i| PI * i as f64 / directions as f64)
        .collect();
    let symbol = angles
        .iter()
        .map(|&t| {
            let w = [t.cos(), t.sin()];
            let xi = group.apply_unchecked(1.0 / group.rho_unchecked(&w), &w);
            difference_symbol(group, alpha, &xi, q)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = symbol.iter().copied().fold(0.0, f64::max);
    let min = symbol.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(L2Constant {
        alpha,
        constant: (2.0 * PI).powf(-2.0 * alpha) * max,
        spread: min / max,
        angles,
        symbol,
    })
}
