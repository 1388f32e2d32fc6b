//! The dilation group `A_t = diag(t^{a_1}, ..., t^{a_n})` and its quasi-norm.
//!
//! `rho(x)` is the unique `t > 0` with `|A_{1/t} x| = 1`. It is homogeneous,
//! `rho(A_t x) = t rho(x)`, satisfies the triangle inequality, and agrees with
//! the Euclidean norm on the unit sphere. Lebesgue measure splits as
//! `dx = t^{gamma-1} mu(theta) dsigma(theta) dt` under `x = A_t theta`, with
//! `mu(theta) = <P theta, theta>` the normal component of the generator
//! `P theta = d/dt A_t theta |_{t=1}`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::grid::{GridSpec, Mask};

/// Default relative tolerance for the quasi-norm root solve.
pub const DEFAULT_ROOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroupConfig", into = "GroupConfig")]
pub struct DilationGroup {
    exponents: Vec<f64>,
    gamma: f64,
    root_tolerance: f64,
    isotropic: bool,
}

#[derive(Serialize, Deserialize)]
struct GroupConfig {
    exponents: Vec<f64>,
    #[serde(default = "default_tol")]
    root_tolerance: f64,
}

fn default_tol() -> f64 {
    DEFAULT_ROOT_TOLERANCE
}

impl TryFrom<GroupConfig> for DilationGroup {
    type Error = Error;
    fn try_from(c: GroupConfig) -> Result<Self> {
        DilationGroup::with_tolerance(c.exponents, c.root_tolerance)
    }
}

impl From<DilationGroup> for GroupConfig {
    fn from(g: DilationGroup) -> Self {
        GroupConfig {
            exponents: g.exponents,
            root_tolerance: g.root_tolerance,
        }
    }
}

impl DilationGroup {
    pub fn new(exponents: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(exponents, DEFAULT_ROOT_TOLERANCE)
    }

    pub fn with_tolerance(exponents: Vec<f64>, root_tolerance: f64) -> Result<Self> {
        if exponents.is_empty() {
            return Err(invalid_param("at least one exponent is required"));
        }
        if let Some(a) = exponents.iter().find(|a| !(a.is_finite() && **a >= 1.0)) {
            return Err(invalid_param(format!("exponent {a} must be >= 1")));
        }
        if !(root_tolerance > 0.0 && root_tolerance < 1e-3) {
            return Err(invalid_param(format!(
                "root tolerance {root_tolerance} out of range"
            )));
        }
        let gamma = exponents.iter().sum();
        let isotropic = exponents.iter().all(|&a| a == exponents[0]);
        Ok(Self {
            exponents,
            gamma,
            root_tolerance,
            isotropic,
        })
    }

    /// The Euclidean group `A_t = t I` in dimension `n`.
    pub fn isotropic(n: usize) -> Self {
        Self::new(vec![1.0; n]).expect("unit exponents are valid")
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// Homogeneous dimension, the trace of the exponent matrix.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn root_tolerance(&self) -> f64 {
        self.root_tolerance
    }

    /// `A_t x`.
    pub fn apply(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid_param(format!(
                "dilation parameter t = {t} must be positive"
            )));
        }
        self.check_dim(x)?;
        Ok(self.apply_unchecked(t, x))
    }

    pub(crate) fn apply_unchecked(&self, t: f64, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.exponents)
            .map(|(xj, a)| xj * t.powf(*a))
            .collect()
    }

    /// Per-axis factors `t^{a_j}`.
    pub fn factors(&self, t: f64) -> Vec<f64> {
        self.exponents.iter().map(|a| t.powf(*a)).collect()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(invalid_input(format!(
                "point has {} coordinates, group has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Quasi-norm with input validation.
    pub fn rho(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(invalid_input("non-finite coordinate"));
        }
        Ok(self.rho_unchecked(x))
    }

    /// Quasi-norm without validation; every hot loop goes through here.
    pub fn rho_unchecked(&self, x: &[f64]) -> f64 {
        if self.isotropic {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let a = self.exponents[0];
            return if a == 1.0 {
                r2.sqrt()
            } else {
                r2.sqrt().powf(1.0 / a)
            };
        }
        // Bracket: every |x_j|^{1/a_j} is a lower bound, their sum an upper bound.
        let mut lo = 0.0_f64;
        let mut hi = 0.0_f64;
        for (v, a) in x.iter().zip(&self.exponents) {
            let c = v.abs().powf(1.0 / a);
            lo = lo.max(c);
            hi += c;
        }
        if hi == 0.0 {
            return 0.0;
        }
        // Newton on s = ln t for phi(s) = sum x_j^2 e^{-2 a_j s} - 1, which is
        // convex and decreasing, so iterates from the left bracket increase
        // monotonically to the root. Bisection guards against stalls.
        let (mut s_lo, mut s_hi) = (lo.ln(), hi.ln());
        let mut s = s_lo;
        for _ in 0..200 {
            let mut phi = -1.0;
            let mut dphi = 0.0;
            for (v, a) in x.iter().zip(&self.exponents) {
                let term = v * v * (-2.0 * a * s).exp();
                phi += term;
                dphi -= 2.0 * a * term;
            }
            if phi > 0.0 {
                s_lo = s;
            } else {
                s_hi = s;
            }
            let mut next = if dphi < 0.0 {
                s - phi / dphi
            } else {
                0.5 * (s_lo + s_hi)
            };
            if !(next >= s_lo && next <= s_hi) {
                next = 0.5 * (s_lo + s_hi);
            }
            let step = (next - s).abs();
            s = next;
            if step <= self.root_tolerance * 1e-2 || s_hi - s_lo <= self.root_tolerance * 1e-2 {
                break;
            }
        }
        s.exp()
    }

    /// Polar weight `mu(theta) = <P theta, theta>` on the Euclidean unit sphere.
    pub fn polar_weight(&self, theta: &[f64]) -> Result<f64> {
        self.check_dim(theta)?;
        let norm2: f64 = theta.iter().map(|v| v * v).sum();
        if (norm2.sqrt() - 1.0).abs() > 1e-12 {
            return Err(invalid_input(format!(
                "|theta| = {} is not 1",
                norm2.sqrt()
            )));
        }
        Ok(self.polar_weight_unchecked(theta))
    }

    pub(crate) fn polar_weight_unchecked(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(&self.exponents)
            .map(|(t, a)| a * t * t)
            .sum()
    }

    /// `|B(x, r)| = r^gamma omega_n`; the unit rho-ball is the unit Euclidean ball.
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid_param(format!("radius {r} must be positive")));
        }
        Ok(r.powf(self.gamma) * unit_ball_volume(self.dim()))
    }

    /// `int_{rho(y) > r} rho(y)^{-gamma - s} dy = gamma omega_n r^{-s} / s` for `s > 0`.
    pub fn tail_integral(&self, r: f64, s: f64) -> f64 {
        self.gamma * unit_ball_volume(self.dim()) * r.powf(-s) / s
    }

    /// Radius of the largest rho-ball centred at the origin inside the grid box.
    pub fn inscribed_radius(&self, grid: &GridSpec) -> f64 {
        grid.extents()
            .iter()
            .zip(&self.exponents)
            .map(|(l, a)| (0.5 * l).powf(1.0 / a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest value of `rho` over the Nyquist faces of the dual lattice.
    pub fn nyquist_rho(&self, grid: &GridSpec) -> f64 {
        grid.extents()
            .iter()
            .zip(grid.counts())
            .zip(&self.exponents)
            .map(|((l, n), a)| ((*n as f64 - 2.0) / (2.0 * l)).powf(1.0 / a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Evaluate `rho` at every spatial sample.
    pub fn rho_field(&self, grid: &GridSpec) -> Vec<f64> {
        use rayon::prelude::*;
        (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.dim()],
                |x, i| {
                    grid.point(i, x);
                    self.rho_unchecked(x)
                },
            )
            .collect()
    }

    /// Evaluate `rho` at every dual-lattice frequency, in spectral storage order.
    pub fn rho_spectrum(&self, grid: &GridSpec) -> Vec<f64> {
        use rayon::prelude::*;
        (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.dim()],
                |xi, i| {
                    grid.frequency(i, xi);
                    self.rho_unchecked(xi)
                },
            )
            .collect()
    }
}

/// Volume of the Euclidean unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    std::f64::consts::PI.powf(h) / gamma(h + 1.0)
}

/// The open ball `{y : rho(y - center) < radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl RhoBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid_param(format!(
                "ball radius {radius} must be positive"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, group: &DilationGroup, y: &[f64]) -> bool {
        let d: Vec<f64> = y.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        group.rho_unchecked(&d) < self.radius
    }

    pub fn dilate(&self, factor: f64) -> Self {
        Self {
            center: self.center.clone(),
            radius: self.radius * factor,
        }
    }

    /// Flat indices of the grid samples inside the ball (no wrap-around).
    pub fn rasterize(&self, group: &DilationGroup, grid: &GridSpec) -> Vec<usize> {
        let dim = grid.dim();
        // Axis j of the ball lies within |y_j - c_j| < radius^{a_j}.
        let mut lo = vec![0usize; dim];
        let mut hi = vec![0usize; dim];
        for j in 0..dim {
            let h = grid.spacing(j);
            let half = self.radius.powf(group.exponents()[j]);
            let n = grid.counts()[j] as i64;
            let off = (n / 2) as f64;
            let a = ((self.center[j] - half) / h + off).floor() as i64;
            let b = ((self.center[j] + half) / h + off).ceil() as i64;
            lo[j] = a.clamp(0, n - 1) as usize;
            hi[j] = b.clamp(0, n - 1) as usize;
        }
        let mut out = Vec::new();
        let mut idx = lo.clone();
        let mut y = vec![0.0; dim];
        let mut d = vec![0.0; dim];
        loop {
            for j in 0..dim {
                y[j] = grid.centered_index(j, idx[j]) as f64 * grid.spacing(j);
                d[j] = y[j] - self.center[j];
            }
            if group.rho_unchecked(&d) < self.radius {
                out.push(grid.ravel(&idx));
            }
            // odometer increment over the bounding box
            let mut j = dim;
            loop {
                if j == 0 {
                    return out;
                }
                j -= 1;
                if idx[j] < hi[j] {
                    idx[j] += 1;
                    break;
                }
                idx[j] = lo[j];
            }
        }
    }
}

/// `min rho(x - y)` over complement cells `y` of `mask`, exact over the grid.
///
/// The nearest complement cell always touches the mask along an axis (moving
/// one step towards `x` along any axis strictly decreases `rho`), so only the
/// outer boundary is scanned.
pub fn rho_distance_to_complement(group: &DilationGroup, x: &[f64], mask: &Mask) -> Result<f64> {
    let grid = mask.grid();
    if mask.count() == grid.len() {
        return Err(invalid_input("mask complement is empty"));
    }
    if let Some(i) = locate(grid, x) {
        if !mask.get(i) {
            return Ok(0.0);
        }
    }
    let mut y = vec![0.0; grid.dim()];
    let mut d = vec![0.0; grid.dim()];
    let boundary = mask.outer_boundary();
    if boundary.is_empty() {
        // empty mask: scan everything
        return Ok(nearest_over(group, grid, x, 0..grid.len(), &mut y, &mut d));
    }
    Ok(nearest_over(
        group,
        grid,
        x,
        boundary.into_iter(),
        &mut y,
        &mut d,
    ))
}

fn nearest_over(
    group: &DilationGroup,
    grid: &GridSpec,
    x: &[f64],
    cells: impl Iterator<Item = usize>,
    y: &mut [f64],
    d: &mut [f64],
) -> f64 {
    let mut best = f64::INFINITY;
    for i in cells {
        grid.point(i, y);
        for j in 0..x.len() {
            d[j] = x[j] - y[j];
        }
        best = best.min(group.rho_unchecked(d));
    }
    best
}

/// Flat index of the sample at exactly `x`, if `x` is a lattice point.
fn locate(grid: &GridSpec, x: &[f64]) -> Option<usize> {
    let mut idx = vec![0usize; grid.dim()];
    for j in 0..grid.dim() {
        let k = x[j] / grid.spacing(j) + (grid.counts()[j] / 2) as f64;
        let r = k.round();
        if (k - r).abs() > 1e-9 || r < 0.0 || r >= grid.counts()[j] as f64 {
            return None;
        }
        idx[j] = r as usize;
    }
    Some(grid.ravel(&idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn parabolic() -> DilationGroup {
        DilationGroup::new(vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn apply_examples() {
        let g = parabolic();
        assert_eq!(g.apply(1.0, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(g.apply(2.0, &[1.0, 1.0]).unwrap(), vec![2.0, 4.0]);
        let iso = DilationGroup::isotropic(2);
        assert_eq!(iso.apply(3.0, &[1.0, 2.0]).unwrap(), vec![3.0, 6.0]);
        assert!(g.apply(0.0, &[1.0, 1.0]).is_err());
        assert!(g.apply(-1.0, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(DilationGroup::new(vec![0.5, 2.0]).is_err());
        assert!(DilationGroup::new(vec![]).is_err());
        let g = parabolic();
        assert_eq!(g.gamma(), 3.0);
    }

    /// Plain bisection on t |-> |A_{1/t} x|, independent of the Newton path.
    fn rho_bisect(g: &DilationGroup, x: &[f64]) -> f64 {
        let norm = |t: f64| -> f64 {
            x.iter()
                .zip(g.exponents())
                .map(|(v, a)| (v / t.powf(*a)).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let (mut lo, mut hi) = (1e-12f64, 1e12f64);
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            if norm(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }

    #[test]
    fn rho_examples() {
        let g = parabolic();
        assert_relative_eq!(g.rho(&[3.0, 0.0]).unwrap(), 3.0, max_relative = 1e-12);
        assert_relative_eq!(g.rho(&[0.0, 4.0]).unwrap(), 2.0, max_relative = 1e-12);
        // t^4 - t^2 - 1 = 0  =>  t^2 = (1 + sqrt 5)/2
        let closed = ((1.0 + 5f64.sqrt()) / 2.0).sqrt();
        let r = g.rho(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(r, closed, max_relative = 1e-12);
        assert_relative_eq!(r, rho_bisect(&g, &[1.0, 1.0]), max_relative = 1e-12);
        assert_relative_eq!(r, 1.27202, max_relative = 1e-5);
        assert_eq!(g.rho(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(g.rho(&[f64::NAN, 1.0]).is_err());
        let iso = DilationGroup::isotropic(3);
        assert_relative_eq!(
            iso.rho(&[1.0, 2.0, 2.0]).unwrap(),
            3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn rho_matches_bisection_oracle() {
        let g = DilationGroup::new(vec![1.0, 1.5, 3.0]).unwrap();
        for x in [[0.1, -2.0, 5.0], [1e-3, 1e-4, 1e-5], [300.0, -20.0, 1e4]] {
            assert_relative_eq!(g.rho(&x).unwrap(), rho_bisect(&g, &x), max_relative = 1e-11);
        }
    }

    #[test]
    fn polar_weight_examples() {
        let g = parabolic();
        assert_relative_eq!(g.polar_weight(&[0.0, 1.0]).unwrap(), 2.0);
        assert_relative_eq!(g.polar_weight(&[1.0, 0.0]).unwrap(), 1.0);
        let iso = DilationGroup::isotropic(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(
            iso.polar_weight(&[s, s]).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert!(g.polar_weight(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn ball_volume_examples() {
        use std::f64::consts::PI;
        let g = parabolic();
        assert_relative_eq!(g.ball_volume(1.0).unwrap(), PI, max_relative = 1e-14);
        assert_relative_eq!(g.ball_volume(2.0).unwrap(), 8.0 * PI, max_relative = 1e-14);
        let iso = DilationGroup::isotropic(2);
        assert_relative_eq!(
            iso.ball_volume(0.5).unwrap(),
            PI / 4.0,
            max_relative = 1e-14
        );
        assert!(g.ball_volume(0.0).is_err());
    }

    #[test]
    fn distance_examples() {
        let grid = GridSpec::cube(2, 64, 4.0).unwrap();
        let h = grid.spacing(0);
        let iso = DilationGroup::isotropic(2);
        let disk = Mask::from_fn(grid.clone(), |x| x[0] * x[0] + x[1] * x[1] < 1.0);
        let d = rho_distance_to_complement(&iso, &[0.0, 0.0], &disk).unwrap();
        assert!((d - 1.0).abs() <= h * 2f64.sqrt(), "{d}");

        let g = parabolic();
        let ball = Mask::from_fn(grid.clone(), |x| g.rho_unchecked(x) < 2.0);
        let grid_big = GridSpec::new(vec![64, 128], vec![8.0, 16.0]).unwrap();
        let ball_big = Mask::from_fn(grid_big.clone(), |x| g.rho_unchecked(x) < 2.0);
        let d = rho_distance_to_complement(&g, &[0.0, 0.0], &ball_big).unwrap();
        let diam = g.rho_unchecked(&[grid_big.spacing(0), grid_big.spacing(1)]);
        assert!((d - 2.0).abs() <= diam, "{d}");
        // a complement point has distance zero
        assert_eq!(
            rho_distance_to_complement(&g, &[-2.0, 1.5], &ball).unwrap(),
            0.0
        );

        let full = Mask::new(grid.clone(), vec![true; grid.len()]).unwrap();
        assert!(rho_distance_to_complement(&g, &[0.0, 0.0], &full).is_err());
    }

    #[test]
    fn distance_matches_brute_force() {
        let grid = GridSpec::cube(2, 32, 4.0).unwrap();
        let g = parabolic();
        let mask = Mask::from_fn(grid.clone(), |x| {
            (x[0] - 0.3).abs() < 1.1 && x[1].abs() < 0.7
        });
        let mut x = vec![0.0; 2];
        let mut y = vec![0.0; 2];
        for i in (0..grid.len()).step_by(37) {
            grid.point(i, &mut x);
            let fast = rho_distance_to_complement(&g, &x, &mask).unwrap();
            let mut brute = f64::INFINITY;
            for k in 0..grid.len() {
                if !mask.get(k) {
                    grid.point(k, &mut y);
                    brute = brute.min(g.rho_unchecked(&[x[0] - y[0], x[1] - y[1]]));
                }
            }
            assert_relative_eq!(fast, brute, max_relative = 1e-12);
        }
    }

    #[test]
    fn rasterize_matches_contains() {
        let grid = GridSpec::cube(2, 32, 4.0).unwrap();
        let g = parabolic();
        let b = RhoBall::new(vec![0.3, -0.2], 0.9).unwrap();
        let cells = b.rasterize(&g, &grid);
        let mut x = vec![0.0; 2];
        let brute: Vec<usize> = (0..grid.len())
            .filter(|&i| {
                grid.point(i, &mut x);
                b.contains(&g, &x)
            })
            .collect();
        assert_eq!(cells, brute);
    }
}
