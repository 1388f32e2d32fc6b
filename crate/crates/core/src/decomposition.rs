//! Whitney-type covers of grid masks and the Calderon-Zygmund decomposition
//! at height `beta`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dilation::{DilationGroup, RhoBall};
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::field::{lp_norm_of, SampledField};
use crate::grid::{GridSpec, Mask};
use crate::operators::m_s;
use crate::report::{Comparison, ExperimentReport};

/// Expansion constant: `B(c_j, C1 N r_j)` always reaches the complement.
pub const WHITNEY_EXPANSION: f64 = 2.0;
/// `r_j = WHITNEY_FRACTION * d(c_j) / N` with `d` the `rho`-distance to the
/// complement. Any fraction in `[1 / C1, 1)` gives the three conclusions.
pub const WHITNEY_FRACTION: f64 = 0.55;

/// A ball of the cover together with its rasterized cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverBall {
    pub ball: RhoBall,
    /// flat index of the centre cell
    pub center_cell: usize,
    /// distance from the centre to the complement
    pub distance: f64,
    #[serde(skip)]
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhitneyCover {
    pub balls: Vec<CoverBall>,
    pub dilate: f64,
    pub expansion: f64,
    /// `max_x sum_j chi_{B(c_j, N r_j)}(x)` over the grid
    pub overlap: usize,
    /// `max_x sum_j chi_{B(c_j, r_j)}(x)`
    pub ball_overlap: usize,
    /// union of the balls equals the mask cell for cell
    pub covers_exactly: bool,
    /// every `C1 N`-dilate contains a complement cell
    pub expansions_meet_complement: bool,
    #[serde(skip)]
    grid: Option<GridSpec>,
}

impl WhitneyCover {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Number of balls containing each cell.
    pub fn multiplicity(&self) -> Vec<u32> {
        let n = self.grid.as_ref().map_or(0, GridSpec::len);
        let mut m = vec![0u32; n];
        for b in &self.balls {
            for &i in &b.cells {
                m[i] += 1;
            }
        }
        m
    }
}

/// `rho`-distance from every mask cell to the nearest complement cell, zero
/// off the mask. Only complement cells touching the mask are scanned.
fn distances(group: &DilationGroup, mask: &Mask) -> Vec<f64> {
    let grid = mask.grid();
    let dim = grid.dim();
    let inv: Vec<f64> = group.exponents().iter().map(|a| 1.0 / a).collect();
    let boundary: Vec<Vec<f64>> = mask
        .outer_boundary()
        .into_iter()
        .map(|i| {
            let mut y = vec![0.0; dim];
            grid.point(i, &mut y);
            y
        })
        .collect();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if !mask.get(i) {
                return 0.0;
            }
            let mut x = vec![0.0; dim];
            grid.point(i, &mut x);
            let mut d = vec![0.0; dim];
            let mut best = f64::INFINITY;
            for y in &boundary {
                // max_j |d_j|^{1/a_j} <= rho(d) skips most candidates cheaply
                let mut lower = 0.0f64;
                for j in 0..dim {
                    d[j] = x[j] - y[j];
                    lower = lower.max(d[j].abs().powf(inv[j]));
                }
                if lower < best {
                    best = best.min(group.rho_unchecked(&d));
                }
            }
            best
        })
        .collect()
}

/// Greedy cover of `mask` by balls `B(x, r(x))`, `r(x) = 0.55 d(x) / N`:
/// cells are visited by decreasing `r` (ties in flat index order) and a ball
/// is placed at every cell not yet covered.
pub fn whitney_cover(mask: &Mask, group: &DilationGroup, n: f64) -> Result<WhitneyCover> {
    let grid = mask.grid();
    if group.dim() != grid.dim() {
        return Err(invalid_param("group and grid dimensions differ"));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(invalid_param(format!(
            "dilate factor N = {n} must be at least 1"
        )));
    }
    let count = mask.count();
    if count == 0 {
        return Err(invalid_input("mask is empty"));
    }
    if count == grid.len() {
        return Err(invalid_input("mask complement is empty"));
    }
    if !mask.is_interior() {
        return Err(invalid_input("mask touches the boundary of the grid box"));
    }
    let dist = distances(group, mask);
    let mut order: Vec<usize> = (0..grid.len()).filter(|&i| mask.get(i)).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    let mut covered = vec![false; grid.len()];
    let mut balls = Vec::new();
    let mut x = vec![0.0; grid.dim()];
    for i in order {
        if covered[i] {
            continue;
        }
        grid.point(i, &mut x);
        let ball = RhoBall::new(x.clone(), WHITNEY_FRACTION * dist[i] / n)?;
        let cells = ball.rasterize(group, grid);
        for &c in &cells {
            covered[c] = true;
        }
        balls.push(CoverBall {
            ball,
            center_cell: i,
            distance: dist[i],
            cells,
        });
    }
    let count_over = |factor: f64| {
        let mut m = vec![0usize; grid.len()];
        for b in &balls {
            for c in b.ball.dilate(factor).rasterize(group, grid) {
                m[c] += 1;
            }
        }
        m.into_iter().max().unwrap_or(0)
    };
    let overlap = count_over(n);
    let mut union = vec![false; grid.len()];
    let mut ball_mult = vec![0usize; grid.len()];
    for b in &balls {
        for &c in &b.cells {
            union[c] = true;
            ball_mult[c] += 1;
        }
    }
    let covers_exactly = union.as_slice() == mask.cells();
    let expansions_meet_complement = balls.par_iter().all(|b| {
        b.ball
            .dilate(WHITNEY_EXPANSION * n)
            .rasterize(group, grid)
            .into_iter()
            .any(|c| !mask.get(c))
    });
    Ok(WhitneyCover {
        balls,
        dilate: n,
        expansion: WHITNEY_EXPANSION,
        overlap,
        ball_overlap: ball_mult.into_iter().max().unwrap_or(0),
        covers_exactly,
        expansions_meet_complement,
        grid: Some(grid.clone()),
    })
}

/// Bad part `b_j`, stored on the cells of its ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadPart {
    pub ball: usize,
    #[serde(skip)]
    pub cells: Vec<usize>,
    #[serde(skip)]
    pub values: Vec<Complex64>,
    /// `|B_j|^{-1} int_{B_j} f h_j`
    pub average: [f64; 2],
}

impl BadPart {
    pub fn to_field(&self, grid: &GridSpec) -> SampledField {
        let mut v = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (&c, &b) in self.cells.iter().zip(&self.values) {
            v[c] = b;
        }
        SampledField::from_parts(grid.clone(), v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CZDecomposition {
    pub beta: f64,
    pub p: f64,
    /// cover of `Omega = {M(|f|^p) > beta^p}`; empty when `Omega` is
    pub cover: Option<WhitneyCover>,
    pub omega_cells: usize,
    pub bad: Vec<BadPart>,
    #[serde(skip)]
    pub good: SampledField,
    #[serde(skip)]
    omega: Vec<bool>,
}

impl CZDecomposition {
    pub fn omega(&self) -> &[bool] {
        &self.omega
    }
}

/// `f = g + sum_j b_j` at height `beta` with `Omega = {M(|f|^p) > beta^p}`
/// covered by [`whitney_cover`] with dilate factor `n`.
pub fn cz_decompose(
    f: &SampledField,
    beta: f64,
    p: f64,
    group: &DilationGroup,
    n: f64,
) -> Result<CZDecomposition> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid_param(format!("beta = {beta} must be positive")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid_param(format!("p = {p} must lie in [1, inf)")));
    }
    let grid = f.grid();
    if !Mask::new(
        grid.clone(),
        f.values().iter().map(|v| v.norm() > 0.0).collect(),
    )?
    .is_interior()
    {
        return Err(invalid_input(
            "f must vanish on the boundary of the grid box",
        ));
    }
    let maximal: Vec<f64> = if p == 1.0 {
        crate::operators::hl_maximal(f, group)?
            .values()
            .iter()
            .map(|v| v.re)
            .collect()
    } else {
        m_s(f, p, group)?
            .values()
            .iter()
            .map(|v| v.re.powf(p))
            .collect()
    };
    let level = beta.powf(p);
    let omega: Vec<bool> = maximal.iter().map(|&m| m > level).collect();
    let omega_cells = omega.iter().filter(|&&o| o).count();
    if omega_cells == 0 {
        return Ok(CZDecomposition {
            beta,
            p,
            cover: None,
            omega_cells,
            bad: Vec::new(),
            good: f.clone(),
            omega,
        });
    }
    let mask = Mask::new(grid.clone(), omega.clone())?;
    if omega_cells == grid.len() || !mask.is_interior() {
        return Err(Error::BetaTooSmall);
    }
    let cover = whitney_cover(&mask, group, n)?;
    let mult = cover.multiplicity();
    let mut good: Vec<Complex64> = f
        .values()
        .iter()
        .zip(&omega)
        .map(|(&v, &o)| if o { Complex64::new(0.0, 0.0) } else { v })
        .collect();
    let mut bad = Vec::with_capacity(cover.len());
    for (j, b) in cover.balls.iter().enumerate() {
        let fh: Vec<Complex64> = b
            .cells
            .iter()
            .map(|&c| f.values()[c] / mult[c] as f64)
            .collect();
        // |B|^{-1} int_B f h_j with |B| the cell count of the rasterized ball
        let avg = fh.iter().sum::<Complex64>() / b.cells.len() as f64;
        for &c in &b.cells {
            good[c] += avg;
        }
        bad.push(BadPart {
            ball: j,
            cells: b.cells.clone(),
            values: fh.iter().map(|v| v - avg).collect(),
            average: [avg.re, avg.im],
        });
    }
    Ok(CZDecomposition {
        beta,
        p,
        cover: Some(cover),
        omega_cells,
        bad,
        good: SampledField::from_parts(grid.clone(), good),
        omega,
    })
}

/// Check every conclusion of the decomposition and record the measured
/// constant of each. Constants are recorded, not compared with targets, apart
/// from the exact identities (reconstruction, supports, mean zero, cover).
pub fn verify_cz(
    dec: &CZDecomposition,
    f: &SampledField,
    group: &DilationGroup,
) -> Result<ExperimentReport> {
    let grid = f.grid();
    if dec.good.grid() != grid || dec.omega.len() != grid.len() {
        return Err(invalid_input("decomposition was built on another grid"));
    }
    let cell = grid.cell_volume();
    let p = dec.p;
    let beta = dec.beta;
    let mut r = ExperimentReport::new("cz-verify", serde_json::json!({ "beta": beta, "p": p }));
    let f_mod = f.moduli();
    let f_pp = lp_norm_of(&f_mod, cell, p)?.powf(p);
    let weak = f_pp / beta.powf(p);

    // (1) reconstruction
    let mut sum: Vec<Complex64> = dec.good.values().to_vec();
    for b in &dec.bad {
        for (&c, &v) in b.cells.iter().zip(&b.values) {
            sum[c] += v;
        }
    }
    let recon = sum
        .iter()
        .zip(f.values())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    r.check(
        "reconstruction",
        "reconstruction_error",
        recon,
        Comparison::AtMost,
        1e-10,
    );

    let n_cover = dec.cover.as_ref().map_or(0, |c| c.len());
    r.metric("balls", n_cover as f64);
    r.metric("omega_measure", dec.omega_cells as f64 * cell);
    r.metric("omega_measure_ratio", dec.omega_cells as f64 * cell / weak);
    let off = f_mod
        .iter()
        .zip(&dec.omega)
        .filter(|(_, &o)| !o)
        .map(|(v, _)| *v)
        .fold(0.0, f64::max);
    r.metric("off_omega_ratio", off / beta);
    let g_mod = dec.good.moduli();
    r.metric(
        "good_sup_ratio",
        g_mod.iter().fold(0.0f64, |a, &b| a.max(b)) / beta,
    );
    let f_p = f_pp.powf(1.0 / p);
    r.metric(
        "good_lp_ratio",
        if f_p > 0.0 {
            lp_norm_of(&g_mod, cell, p)? / f_p
        } else {
            0.0
        },
    );

    let mut ball_avg = 0.0f64;
    let mut bad_lp = 0.0f64;
    let mut mean: f64 = 0.0;
    let mut outside: f64 = 0.0;
    let mut ball_sum = 0.0;
    if let Some(cover) = &dec.cover {
        r.metric("overlap", cover.overlap as f64);
        r.metric("ball_overlap", cover.ball_overlap as f64);
        r.check(
            "cover_exact",
            "cover_mismatch",
            f64::from(u8::from(
                !cover.covers_exactly
                    || cover
                        .balls
                        .iter()
                        .flat_map(|b| &b.cells)
                        .any(|&c| !dec.omega[c]),
            )),
            Comparison::AtMost,
            0.0,
        );
        r.check(
            "expansion_meets_complement",
            "expansion_misses",
            f64::from(u8::from(!cover.expansions_meet_complement)),
            Comparison::AtMost,
            0.0,
        );
        let stats: Vec<(f64, f64, f64, f64, f64)> = dec
            .bad
            .par_iter()
            .map(|b| {
                let ball = &cover.balls[b.ball];
                let vol = ball.cells.len() as f64 * cell;
                let avg_fp = ball.cells.iter().map(|&c| f_mod[c].powf(p)).sum::<f64>() * cell / vol;
                let bpp = b.values.iter().map(|v| v.norm().powf(p)).sum::<f64>() * cell;
                let l1 = b.values.iter().map(|v| v.norm()).sum::<f64>() * cell;
                let integral = b.values.iter().sum::<Complex64>() * cell;
                // support outside the ball: cells not among the ball's cells
                let inside = ball.cells == b.cells;
                (
                    avg_fp / beta.powf(p),
                    bpp / (beta.powf(p) * vol),
                    integral.norm() / (l1 + 1.0),
                    if inside { 0.0 } else { 1.0 },
                    vol,
                )
            })
            .collect();
        for (a, bl, m, o, v) in stats {
            ball_avg = ball_avg.max(a);
            bad_lp = bad_lp.max(bl);
            mean = mean.max(m);
            outside = outside.max(o);
            ball_sum += v;
        }
    } else {
        r.metric("overlap", 0.0);
        r.metric("ball_overlap", 0.0);
    }
    r.metric("ball_average_ratio", ball_avg);
    r.metric("bad_lp_ratio", bad_lp);
    r.metric("ball_sum_ratio", ball_sum / weak);
    r.check(
        "supports",
        "support_violations",
        outside,
        Comparison::AtMost,
        0.0,
    );
    r.check("mean_zero", "mean_defect", mean, Comparison::AtMost, 1e-10);
    for key in [
        "overlap",
        "omega_measure_ratio",
        "off_omega_ratio",
        "ball_average_ratio",
        "good_sup_ratio",
        "good_lp_ratio",
        "bad_lp_ratio",
        "ball_sum_ratio",
    ] {
        let v = r.metrics[key];
        r.check(
            format!("{key}_finite"),
            key,
            if v.is_finite() { v } else { f64::INFINITY },
            Comparison::AtMost,
            f64::MAX,
        );
    }
    r.note(
        "constants",
        "measured on the grid: |B| is the cell count of the rasterized ball times the cell volume",
    );
    r.note("group", format!("{:?}", group.exponents()));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parabolic() -> DilationGroup {
        DilationGroup::new(vec![1.0, 2.0]).unwrap()
    }

    fn ball_mask(grid: &GridSpec, g: &DilationGroup, c: &[f64], r: f64) -> Mask {
        let b = RhoBall::new(c.to_vec(), r).unwrap();
        let mut m = Mask::empty(grid.clone());
        for i in b.rasterize(g, grid) {
            m.set(i, true);
        }
        m
    }

    #[test]
    fn cover_of_a_ball() {
        let g = parabolic();
        let grid = GridSpec::cube(2, 64, 8.0).unwrap();
        let m = ball_mask(&grid, &g, &[0.0, 0.0], 1.5);
        let c = whitney_cover(&m, &g, 1.0).unwrap();
        assert!(c.covers_exactly && c.expansions_meet_complement);
        assert!(c.overlap >= 1 && c.overlap < 64, "{}", c.overlap);
        // distances never exceed the oracle by more than rounding
        for b in c.balls.iter().take(20) {
            let d = crate::dilation::rho_distance_to_complement(&g, &b.ball.center, &m).unwrap();
            assert!((d - b.distance).abs() < 1e-12);
        }
    }

    #[test]
    fn far_apart_components_stay_apart() {
        let g = DilationGroup::isotropic(2);
        let grid = GridSpec::cube(2, 64, 16.0).unwrap();
        let mut m = ball_mask(&grid, &g, &[-4.0, 0.0], 1.5);
        for i in ball_mask(&grid, &g, &[4.0, 0.0], 1.5)
            .cells()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| i)
        {
            m.set(i, true);
        }
        let c = whitney_cover(&m, &g, 2.0).unwrap();
        assert!(c.covers_exactly);
        for b in &c.balls {
            let left = b.ball.center[0] < 0.0;
            assert!(b.cells.iter().all(|&i| {
                let mut x = [0.0; 2];
                grid.point(i, &mut x);
                (x[0] < 0.0) == left
            }));
        }
    }

    #[test]
    fn cover_rejects_bad_masks() {
        let g = parabolic();
        let grid = GridSpec::cube(2, 16, 4.0).unwrap();
        assert!(whitney_cover(&Mask::empty(grid.clone()), &g, 1.0).is_err());
        assert!(whitney_cover(&Mask::empty(grid.clone()).complement(), &g, 1.0).is_err());
        let m = ball_mask(&grid, &g, &[0.0, 0.0], 1.0);
        assert!(whitney_cover(&m, &g, 0.5).is_err());
    }

    fn spike(grid: &GridSpec) -> SampledField {
        SampledField::from_real_fn(grid.clone(), |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 < 0.1 {
                20.0
            } else if r2 < 4.0 {
                (1.0 - r2 / 4.0).powi(2)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn spike_decomposition() {
        let g = parabolic();
        let grid = GridSpec::cube(2, 64, 8.0).unwrap();
        let f = spike(&grid);
        let dec = cz_decompose(&f, 2.0, 1.0, &g, 1.0).unwrap();
        assert!(!dec.bad.is_empty());
        let rep = verify_cz(&dec, &f, &g).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
        assert!(rep.metrics["good_sup_ratio"] < 20.0);
        let scaled = cz_decompose(&f.scale(2.0), 4.0, 1.0, &g, 1.0).unwrap();
        assert_eq!(scaled.bad.len(), dec.bad.len());
        assert!(scaled.good.max_abs_diff(&dec.good.scale(2.0)) < 1e-12);
    }

    #[test]
    fn trivial_and_too_small() {
        let g = parabolic();
        let grid = GridSpec::cube(2, 32, 8.0).unwrap();
        let f = spike(&grid);
        let dec = cz_decompose(&f, 25.0, 2.0, &g, 1.0).unwrap();
        assert!(dec.bad.is_empty() && dec.good.max_abs_diff(&f) == 0.0);
        assert!(verify_cz(&dec, &f, &g).unwrap().passed());
        let c = SampledField::constant(grid.clone(), Complex64::new(1.0, 0.0));
        assert!(cz_decompose(&c, 0.5, 1.0, &g, 1.0).is_err());
        assert!(matches!(
            cz_decompose(&f, 1e-9, 1.0, &g, 1.0),
            Err(Error::BetaTooSmall)
        ));
    }
}
