use super::{group_tag, ExperimentConfig};
use crate::dilation::DilationGroup;
use crate::error::Result;
use crate::field::{make_band_limited, SampledField};
use crate::grid::GridSpec;
use crate::operators::{
    g_q, marcinkiewicz_d_alpha, DAlpha, DyadicQuadrature, LpPartition, TRange, TjDecomposition,
};
use crate::quad::{difference_symbol, l2_constant, SymbolQuadrature};
use crate::report::{Comparison, ExperimentReport};

fn square_grid(group: &DilationGroup) -> (Vec<usize>, Vec<f64>) {
    if group.exponents() == [1.0, 1.0] {
        (vec![64, 64], vec![8.0, 8.0])
    } else {
        (vec![64, 128], vec![8.0, 8.0])
    }
}

/// Lattice modes used as plane waves, inside the Nyquist box of the default grids.
fn plane_modes(group: &DilationGroup) -> Vec<[i64; 2]> {
    if group.exponents() == [1.0, 1.0] {
        vec![[11, 4], [3, 0], [-7, 9]]
    } else {
        vec![[10, 3], [12, 0], [2, 25], [-5, 14]]
    }
}

/// Plane waves against the closed symbol, and `||D f||^2 / ||f||^2` against
/// the direction-sampled constant for random band-limited fields.
pub(super) fn d_alpha_l2(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("d-alpha-l2", config.echo());
    let alpha = config.alpha_or(0.5);
    let samples = config.samples.unwrap_or(50);
    let quad = DyadicQuadrature::default();
    let sq = SymbolQuadrature::default();
    let wave_tol = config.tol("plane_wave", 0.02);
    let bound_tol = config.tol("l2_bound", 1.05);
    for g in config.groups(&[&[1.0, 1.0], &[1.0, 2.0]])? {
        let tag = group_tag(&g);
        let grid = config.grid(square_grid(&g))?;
        let l = grid.extents().to_vec();
        let mut worst = 0.0f64;
        for k in plane_modes(&g) {
            if (0..2).any(|j| 2 * k[j].unsigned_abs() as usize >= grid.counts()[j]) {
                continue;
            }
            let xi = [k[0] as f64 / l[0], k[1] as f64 / l[1]];
            let f = SampledField::plane_wave(grid.clone(), &k)?;
            let d = marcinkiewicz_d_alpha(&f, alpha, &quad, &g)?;
            let rho = g.rho(&xi)?;
            let expect = (2.0 * std::f64::consts::PI * rho).powf(-alpha)
                * difference_symbol(&g, alpha, &xi, &sq)?.sqrt();
            let err = d
                .values()
                .iter()
                .map(|v| (v.re - expect).abs() / expect)
                .fold(0.0, f64::max);
            r.metric(format!("{tag}.wave[{},{}].expected", k[0], k[1]), expect);
            r.metric(format!("{tag}.wave[{},{}].rel_err", k[0], k[1]), err);
            worst = worst.max(err);
        }
        r.check(format!("{tag}.plane_waves"), format!("{tag}.plane_wave_max_rel_err"), worst, Comparison::AtMost, wave_tol);

        let c = l2_constant(&g, alpha, 64, &sq)?;
        r.metric(format!("{tag}.l2_constant"), c.constant);
        r.metric(format!("{tag}.symbol_spread"), c.spread);
        let mut ratios = Vec::with_capacity(samples);
        // every sample has its spectrum in 1 <= rho <= 2, so one plan serves all
        let plan = DAlpha::new(&g, &grid, alpha, DAlpha::default_radius(&quad, 1.0), &quad)?;
        for s in 0..samples {
            let f = make_band_limited(&grid, &g, config.seed.wrapping_mul(1000).wrapping_add(s as u64))?;
            let d = plan.apply(&f, &g)?;
            let ratio = (d.lp_norm(2.0)? / f.lp_norm(2.0)?).powi(2) / c.constant;
            ratios.push((s as f64, ratio));
        }
        let max = ratios.iter().map(|p| p.1).fold(0.0, f64::max);
        r.series(format!("{tag}.energy_ratio"), ratios);
        r.check(format!("{tag}.l2_bound"), format!("{tag}.max_energy_over_constant"), max, Comparison::AtMost, bound_tol);
    }
    r.metric("alpha", alpha);
    r.note("expected", "(2 pi rho(xi))^{-alpha} c(xi)^{1/2} with c from the polar symbol quadrature");
    r.note("l2_constant", "(2 pi)^{-2 alpha} sup c over 64 directions on the unit rho-sphere");
    Ok(r)
}

/// `D_alpha` of a field sampled on `A_t G` against the same samples on `G`:
/// the values scale by `t^{-gamma}` exactly.
pub(super) fn d_alpha_covariance(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("d-alpha-covariance", config.echo());
    let alpha = config.alpha_or(0.5);
    let tol = config.tol("covariance", 0.01);
    let quad = DyadicQuadrature::default();
    let ts = config.t_values.clone().unwrap_or_else(|| vec![0.5, 2.0]);
    for g in config.groups(&[&[1.0, 1.0], &[1.0, 2.0]])? {
        let tag = group_tag(&g);
        let grid = config.grid(square_grid(&g))?;
        let f = make_band_limited(&grid, &g, config.seed)?;
        let d = marcinkiewicz_d_alpha(&f, alpha, &quad, &g)?;
        let peak = d.max_abs();
        let mut worst = 0.0f64;
        for &t in &ts {
            let scaled = grid.scaled(&g.factors(t))?;
            let ft = SampledField::new(scaled, f.values().to_vec())?.scale(t.powf(-g.gamma()));
            let dt = marcinkiewicz_d_alpha(&ft, alpha, &quad, &g)?;
            let c = t.powf(-g.gamma());
            let err = dt
                .values()
                .iter()
                .zip(d.values())
                .map(|(a, b)| (a.re - c * b.re).abs())
                .fold(0.0, f64::max)
                / (c * peak);
            r.metric(format!("{tag}.t={t}.max_rel_err"), err);
            worst = worst.max(err);
        }
        r.check(format!("{tag}.covariance"), format!("{tag}.worst_rel_err"), worst, Comparison::AtMost, tol);
    }
    r.metric("alpha", alpha);
    r.note("covariance", "D(f_t) = t^{-gamma} (D f)(A_t^{-1} x) for f_t = t^{-gamma} f(A_t^{-1} x); error relative to max D f");
    Ok(r)
}

/// `||T_j f|| / ||f||` against `C 2^{j alpha} min(1, 2^{-j})` with `C` taken
/// at `j = 0`, the shell bound `D <= sum_j T_j`, and slope fits on each side.
pub(super) fn tj_decay(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("tj-decay", config.echo());
    let alpha = config.alpha_or(0.5);
    let (j_lo, j_hi) = config.range_or(-4, 4)?;
    let tol = config.tol("decay", 1.1);
    let quad = DyadicQuadrature::default();
    let part = LpPartition::new(-1, 0)?;
    for g in config.groups(&[&[1.0, 1.0], &[1.0, 2.0]])? {
        let tag = group_tag(&g);
        let grid = config.grid(square_grid(&g))?;
        let f = make_band_limited(&grid, &g, config.seed)?;
        let norm = f.lp_norm(2.0)?;
        let tj = TjDecomposition::new(&g, &grid, alpha, &quad)?;
        let mut norms = Vec::new();
        for j in j_lo..=j_hi {
            norms.push((j, tj.t_j(&f, j, &part)?.lp_norm(2.0)? / norm));
        }
        let envelope = |j: i32| 2f64.powf(j as f64 * alpha) * f64::min(1.0, 2f64.powi(-j));
        let c0 = norms
            .iter()
            .find(|p| p.0 == 0)
            .map(|p| p.1)
            .unwrap_or_else(|| norms[0].1 / envelope(norms[0].0));
        let ratios: Vec<(f64, f64)> = norms
            .iter()
            .map(|&(j, v)| (j as f64, v / (c0 * envelope(j))))
            .collect();
        let worst = ratios.iter().map(|p| p.1).fold(0.0, f64::max);
        r.metric(format!("{tag}.c_at_0"), c0);
        r.series(format!("{tag}.ratio"), ratios);
        r.check(format!("{tag}.decay"), format!("{tag}.max_ratio_to_envelope"), worst, Comparison::AtMost, tol);
        let low: Vec<(f64, f64)> = norms.iter().filter(|p| p.0 <= 0).map(|&(j, v)| (2f64.powi(j), v)).collect();
        let high: Vec<(f64, f64)> = norms.iter().filter(|p| p.0 >= 1).map(|&(j, v)| (2f64.powi(j), v)).collect();
        for (name, pts) in [("low", low), ("high", high)] {
            if pts.len() >= 2 {
                let key = format!("{tag}.norms_{name}");
                r.series(key.clone(), pts);
                r.fit(&key)?;
            }
        }
        // D against the sum of T_j over a window of shells.
        let (k_lo, k_hi) = (-4, 2);
        let d = tj.d_alpha_window(&f, k_lo, k_hi)?;
        let mut sum = SampledField::zeros(grid.clone());
        for j in (-1 - k_hi)..=(-k_lo) {
            sum = sum.add(&tj.t_j_window(&f, j, &part, k_lo, k_hi)?)?;
        }
        let excess = d
            .values()
            .iter()
            .zip(sum.values())
            .map(|(a, b)| a.re - b.re)
            .fold(f64::NEG_INFINITY, f64::max)
            / d.max_abs();
        r.check(format!("{tag}.minkowski"), format!("{tag}.d_minus_t_sum"), excess, Comparison::AtMost, 1e-9);
    }
    r.metric("alpha", alpha);
    r.note("ratio", "||T_j f|| / (||f|| C 2^{j alpha} min(1, 2^{-j})), C = ||T_0 f|| / ||f||; blocks j in {-1, 0} cover the annulus spectrum");
    r.note("norms_high", "slope of ||T_j f|| / ||f|| against 2^j for j >= 1; the envelope has slope alpha - 1");
    r.note("norms_low", "same for j <= 0; the envelope has slope alpha");
    Ok(r)
}

fn gq_grids(group: &DilationGroup) -> (GridSpec, GridSpec) {
    let l = if group.exponents() == [1.0, 1.0] { vec![8.0, 8.0] } else { vec![8.0, 4.0] };
    (
        GridSpec::new(vec![64, 64], l.clone()).expect("valid grid"),
        GridSpec::new(vec![128, 128], l).expect("valid grid"),
    )
}

fn gq_ratio(f: &SampledField, alpha: f64, group: &DilationGroup) -> Result<f64> {
    let d = marcinkiewicz_d_alpha(f, alpha, &DyadicQuadrature::default(), group)?;
    let q = g_q(f, &TRange::for_field(f, group)?, group)?;
    let floor = 1e-6 * d.max_abs();
    Ok(q.values()
        .iter()
        .zip(d.values())
        .filter(|(_, d)| d.re > floor)
        .map(|(q, d)| q.re / d.re)
        .fold(0.0, f64::max))
}

/// `max g_Q / D_alpha` over cells where `D_alpha` is significant, for the
/// same band-limited functions sampled at two resolutions.
pub(super) fn gq_domination(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("gq-domination", config.echo());
    let alpha = config.alpha_or(0.5);
    let samples = config.samples.unwrap_or(10);
    let tol = config.tol("refinement_change", 0.2);
    for g in config.groups(&[&[1.0, 1.0], &[1.0, 2.0]])? {
        let tag = group_tag(&g);
        let (coarse, fine) = gq_grids(&g);
        let mut worst = 0.0f64;
        let mut sup = 0.0f64;
        let mut pts = Vec::new();
        for s in 0..samples {
            let seed = config.seed.wrapping_mul(1000).wrapping_add(s as u64);
            let a = gq_ratio(&make_band_limited(&coarse, &g, seed)?, alpha, &g)?;
            let b = gq_ratio(&make_band_limited(&fine, &g, seed)?, alpha, &g)?;
            let change = (b / a - 1.0).abs();
            r.metric(format!("{tag}.field{s}.ratio_64"), a);
            r.metric(format!("{tag}.field{s}.ratio_128"), b);
            pts.push((s as f64, b));
            worst = worst.max(if a.is_finite() && b.is_finite() { change } else { f64::INFINITY });
            sup = sup.max(a).max(b);
        }
        r.series(format!("{tag}.ratio_128"), pts);
        r.metric(format!("{tag}.sup_ratio"), sup);
        r.check(format!("{tag}.stable"), format!("{tag}.worst_refinement_change"), worst, Comparison::AtMost, tol);
    }
    r.metric("alpha", alpha);
    r.note("ratio", "max g_Q / D_alpha over cells with D_alpha > 1e-6 max D_alpha");
    Ok(r)
}
