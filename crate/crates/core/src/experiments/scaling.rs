use super::{group_tag, ExperimentConfig};
use crate::dilation::DilationGroup;
use crate::error::{Error, Result};
use crate::field::{dilated_annulus_bump, SampledField};
use crate::grid::GridSpec;
use crate::operators::{marcinkiewicz_d_alpha, riesz_potential, DyadicQuadrature};
use crate::report::{Comparison, ExperimentReport};

fn scaling_grid(group: &DilationGroup) -> (Vec<usize>, Vec<f64>) {
    if group.exponents() == [1.0, 1.0] {
        (vec![512, 512], vec![8.0, 8.0])
    } else {
        (vec![128, 8192], vec![4.0, 8.0])
    }
}

fn critical_exponent(group: &DilationGroup, alpha: f64) -> Result<f64> {
    let gamma = group.gamma();
    let p0 = 2.0 * gamma / (gamma + 2.0 * alpha);
    if p0 <= 1.0 {
        return Err(Error::HypothesisViolated(format!(
            "p0 = 2 gamma / (gamma + 2 alpha) = {p0} is not above 1"
        )));
    }
    Ok(p0)
}

struct Setup {
    group: DilationGroup,
    grid: GridSpec,
    alpha: f64,
    ts: Vec<f64>,
    quad: DyadicQuadrature,
}

fn setup(config: &ExperimentConfig) -> Result<Setup> {
    let group = config.groups(&[&[1.0, 2.0]])?.remove(0);
    let alpha = config.alpha_or(0.5);
    let grid = config.grid(scaling_grid(&group))?;
    let ts = config.t_values.clone().unwrap_or_else(|| vec![1.0, 0.5, 0.25, 0.125]);
    if ts.len() < 4 || ts.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(crate::error::invalid_param("need at least four scales t in (0, 1]"));
    }
    // The taper stops past the box; the periodic average takes over there.
    let quad = DyadicQuadrature {
        outer_radius: Some(1.5 * group.inscribed_radius(&grid)),
        ..DyadicQuadrature::default()
    };
    Ok(Setup { group, grid, alpha, ts, quad })
}

/// `sup_beta beta^p |{|v| > beta}|`, attained just below a sample value.
fn weak_norm(f: &SampledField, p: f64) -> f64 {
    let mut v = f.moduli();
    v.sort_by(|a, b| b.total_cmp(a));
    let cell = f.grid().cell_volume();
    v.iter()
        .enumerate()
        .map(|(i, x)| x.powf(p) * (i + 1) as f64 * cell)
        .fold(0.0, f64::max)
}

/// `S(t) = sup_beta beta^{p0} |{D f_t > beta}| / ||f_t||_{p0}^{p0}` for the
/// focusing bumps `f_t = t^{-gamma} eta(A_t^{-1} x)`.
pub(super) fn weak_type(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("weak-type", config.echo());
    let s = setup(config)?;
    let p0 = critical_exponent(&s.group, s.alpha)?;
    let tol = config.tol("weak_spread", 4.0);
    let tag = group_tag(&s.group);
    let mut pts = Vec::new();
    for &t in &s.ts {
        let f = dilated_annulus_bump(&s.grid, &s.group, t)?;
        let d = marcinkiewicz_d_alpha(&f, s.alpha, &s.quad, &s.group)?;
        let v = weak_norm(&d, p0) / f.lp_norm(p0)?.powf(p0);
        r.metric(format!("{tag}.t={t}.weak_ratio"), v);
        pts.push((t, v));
    }
    let hi = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    r.series(format!("{tag}.weak_ratio"), pts);
    r.check(format!("{tag}.bounded"), format!("{tag}.max_over_min"), hi / lo, Comparison::AtMost, tol);
    r.metric("p0", p0);
    r.metric("alpha", s.alpha);
    r.note("weak_ratio", "sup over beta from the sorted samples of D_alpha f_t; the ratio is homogeneous of degree 0 in f_t");
    Ok(r)
}

/// Log-log slopes in `t` of the norms along `eta_t = t^{-gamma} eta(A_t^{-1} x)`
/// on a fixed box, for one exponent below `p0` and one above.
pub(super) fn sharpness(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("sharpness", config.echo());
    let s = setup(config)?;
    let p0 = critical_exponent(&s.group, s.alpha)?;
    let gamma = s.group.gamma();
    let ps = [1.2, 1.8];
    let slope_tol = config.tol("exponent", 0.05);
    let tag = group_tag(&s.group);
    let mut i2 = Vec::new();
    let mut by_p: Vec<[Vec<(f64, f64)>; 4]> = ps.iter().map(|_| Default::default()).collect();
    let mut leak = 0.0f64;
    let mut chain = 0.0f64;
    let rho = s.group.rho_spectrum(&s.grid);
    for &t in &s.ts {
        let eta = dilated_annulus_bump(&s.grid, &s.group, t)?;
        let spec = eta.forward();
        let peak = spec.coefficients().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let outside = spec
            .coefficients()
            .iter()
            .zip(&rho)
            .filter(|(_, &q)| !(1.0 / t..=2.0 / t).contains(&q))
            .map(|(c, _)| c.norm())
            .fold(0.0, f64::max);
        leak = leak.max(outside / peak);
        let ie = riesz_potential(&eta, s.alpha, &s.group)?;
        let d = marcinkiewicz_d_alpha(&eta, s.alpha, &s.quad, &s.group)?;
        let n2 = ie.lp_norm(2.0)?;
        i2.push((t, n2));
        for (k, &p) in ps.iter().enumerate() {
            let (e, dp, ip) = (eta.lp_norm(p)?, d.lp_norm(p)?, ie.lp_norm(p)?);
            let s = &mut by_p[k];
            s[0].push((t, e));
            s[1].push((t, dp));
            s[2].push((t, ip));
            s[3].push((t, dp / e));
            chain = chain.max(n2 / (dp + ip));
        }
    }
    r.check(format!("{tag}.spectral_mask"), format!("{tag}.annulus_leak"), leak, Comparison::AtMost, 1e-12);
    r.check(format!("{tag}.chain_finite"), format!("{tag}.chain_constant"), chain, Comparison::AtMost, f64::MAX);
    let key = format!("{tag}.riesz_l2");
    r.series(key.clone(), i2);
    let fit = r.fit(&key)?;
    r.check(
        format!("{tag}.riesz_l2_exponent"),
        format!("{tag}.riesz_l2_exponent_error"),
        fit.slope - (s.alpha - gamma / 2.0),
        Comparison::AbsAtMost,
        slope_tol,
    );
    for (k, &p) in ps.iter().enumerate() {
        let names = ["eta", "d_alpha", "riesz", "ratio"];
        let mut slopes = [0.0; 4];
        for (i, pts) in std::mem::take(&mut by_p[k]).into_iter().enumerate() {
            let key = format!("{tag}.p={p}.{}", names[i]);
            r.series(key.clone(), pts);
            slopes[i] = r.fit(&key)?.slope;
        }
        r.check(
            format!("{tag}.p={p}.eta_exponent"),
            format!("{tag}.p={p}.eta_exponent_error"),
            slopes[0] - (-gamma + gamma / p),
            Comparison::AbsAtMost,
            slope_tol,
        );
        if p < p0 {
            r.check(format!("{tag}.p={p}.blow_up"), format!("{tag}.p={p}.ratio_slope"), slopes[3], Comparison::AtMost, config.tol("blow_up_slope", -0.1));
        } else {
            r.check(format!("{tag}.p={p}.flat"), format!("{tag}.p={p}.ratio_slope"), slopes[3], Comparison::AbsAtMost, config.tol("flat_slope", 0.05));
        }
    }
    r.metric("p0", p0);
    r.metric("alpha", s.alpha);
    r.note("eta_t", "eta_t(x) = t^{-gamma} eta(A_t^{-1} x), eta^(xi) = b(rho(xi)) with b the smooth bump on (1, 2); then ||eta_t||_p ~ t^{-gamma + gamma/p} and ||I_alpha eta_t||_2 ~ t^{alpha - gamma/2}");
    r.note("chain_constant", "max over t and p of ||I eta_t||_2 / (||D eta_t||_p + ||I eta_t||_p)");
    r.note("box", "the fixed periodic box truncates the rho^{-gamma/2 - alpha} tail of D eta_t, which is what separates p below and above p0");
    Ok(r)
}
