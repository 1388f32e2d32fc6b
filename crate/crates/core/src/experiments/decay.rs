use super::{group_tag, ExperimentConfig};
use crate::dilation::DilationGroup;
use crate::error::Result;
use crate::grid::GridSpec;
use crate::kernels::{
    decay_profile_with_rho, for_each_kernel, synthesize_rho_tilde, DecayProfile, KernelKind,
    PROFILE_RADIUS_FRACTION,
};
use crate::report::{Comparison, ExperimentReport};

const INNER_RADIUS: f64 = 4.0;

fn poisson_family(n: usize) -> Vec<KernelKind> {
    let mut kinds = vec![KernelKind::K, KernelKind::Q];
    kinds.extend((0..n).map(|k| KernelKind::Deriv { k }));
    kinds.extend((0..n).map(|k| KernelKind::DerivRho { k }));
    for k in 0..n {
        kinds.extend((k..n).map(|l| KernelKind::Deriv2 { k, l }));
    }
    kinds
}

fn kind_tag(kind: &KernelKind) -> String {
    match *kind {
        KernelKind::K => "K".into(),
        KernelKind::Q => "Q".into(),
        KernelKind::Deriv { k } => format!("deriv{k}"),
        KernelKind::DerivRho { k } => format!("deriv_rho{k}"),
        KernelKind::Deriv2 { k, l } => format!("deriv2_{k}{l}"),
        KernelKind::RhoTilde { m, .. } => format!("rho_tilde{m}"),
        KernelKind::RhoTildeDeriv { m, s, .. } => format!("rho_tilde{m}_d{s}"),
        KernelKind::Riesz { .. } => "riesz".into(),
    }
}

/// Smallest grids on which every kernel of the family is resolved at the
/// Nyquist faces and the profile reaches past `rho = 4`.
fn default_grid(group: &DilationGroup) -> (Vec<usize>, Vec<f64>) {
    if group.exponents() == [1.0, 1.0] {
        (vec![512, 512], vec![56.0, 56.0])
    } else {
        (vec![256, 16384], vec![28.0, 400.0])
    }
}

fn profiles(
    kinds: &[KernelKind],
    group: &DilationGroup,
    grid: &GridSpec,
    radii: &[f64],
) -> Result<Vec<(Vec<DecayProfile>, f64)>> {
    let rho = group.rho_field(grid);
    let mut out = Vec::new();
    for_each_kernel(kinds, group, grid, |k| {
        let p = radii
            .iter()
            .map(|&r| decay_profile_with_rho(&k, &rho, r))
            .collect::<Result<Vec<_>>>()?;
        out.push((p, k.edge_sup));
        Ok(())
    })?;
    Ok(out)
}

/// Outer shells of the doubled box against the inner maximum, and the change
/// of every common shell when the box is doubled.
pub(super) fn kernel_decay(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("kernel-decay", config.echo());
    let bound = config.tol("bound_ratio", 1.15);
    let stability = config.tol("doubling_change", 0.10);
    for g in config.groups(&[&[1.0, 1.0], &[1.0, 2.0]])? {
        let tag = group_tag(&g);
        let grid = config.grid(default_grid(&g))?;
        let big = grid.doubled();
        let kinds = poisson_family(g.dim());
        let r_base = PROFILE_RADIUS_FRACTION * g.inscribed_radius(&grid);
        let r_big = PROFILE_RADIUS_FRACTION * g.inscribed_radius(&big);
        let base = profiles(&kinds, &g, &grid, &[r_base])?;
        let doubled = profiles(&kinds, &g, &big, &[r_big, r_base])?;
        let mut worst_bound = 0.0f64;
        let mut worst_change = 0.0f64;
        for ((kind, (pb, _)), (pd, edge)) in kinds.iter().zip(&base).zip(&doubled) {
            let (pb, common, pd) = (&pb[0], &pd[1], &pd[0]);
            let name = format!("{tag}.{}", kind_tag(kind));
            let inner = pd.max_within(INNER_RADIUS);
            let outer = pd.outer(INNER_RADIUS).map(|s| s.sup_weighted).fold(0.0, f64::max);
            let ratio = outer / inner;
            let change = pb
                .shells
                .iter()
                .zip(&common.shells)
                .map(|(a, b)| {
                    (a.sup_weighted - b.sup_weighted).abs() / a.sup_weighted.max(f64::MIN_POSITIVE)
                })
                .fold(0.0, f64::max);
            r.metric(format!("{name}.bound_ratio"), ratio);
            r.metric(format!("{name}.doubling_change"), change);
            r.metric(format!("{name}.edge_sup"), *edge);
            r.series(
                format!("{name}.profile"),
                pd.shells.iter().map(|s| (s.shell_hi, s.sup_weighted)).collect(),
            );
            worst_bound = worst_bound.max(ratio);
            worst_change = worst_change.max(change);
        }
        r.metric(format!("{tag}.profile_radius"), r_big);
        r.check(format!("{tag}.bound"), format!("{tag}.worst_bound_ratio"), worst_bound, Comparison::AtMost, bound);
        r.check(
            format!("{tag}.doubling"),
            format!("{tag}.worst_doubling_change"),
            worst_change,
            Comparison::AtMost,
            stability,
        );
    }
    r.note("bound_ratio", "max over shells rho >= 4 divided by max over rho <= 4, on the doubled box");
    r.note("doubling_change", "relative change of each shell sup between the box and the doubled box");
    Ok(r)
}

fn rho_tilde_base(group: &DilationGroup) -> (Vec<usize>, Vec<f64>) {
    if group.exponents() == [1.0, 1.0] {
        (vec![512, 512], vec![56.0, 56.0])
    } else {
        (vec![256, 16384], vec![28.0, 400.0])
    }
}

/// `rho~_m` on the grids `A_{2^m}` applied to a base grid, so every piece is
/// sampled at the same relative resolution, plus a common grid for
/// `m` in `{-1, 0, 1}` when the group is isotropic.
pub(super) fn rho_tilde_decay(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("rho-tilde-decay", config.echo());
    let alpha = config.alpha_or(0.5);
    let (m_lo, m_hi) = config.range_or(-3, 3)?;
    let tol = config.tol("uniformity", 1.25);
    for g in config.groups(&[&[1.0, 1.0], &[1.0, 2.0]])? {
        let tag = group_tag(&g);
        let base = config.grid(rho_tilde_base(&g))?;
        let mut maxima = Vec::new();
        for m in m_lo..=m_hi {
            let grid = base.scaled(&g.factors(2f64.powi(m)))?;
            let k = synthesize_rho_tilde(m, alpha, &g, &grid)?;
            let rho = g.rho_field(&grid);
            let p = decay_profile_with_rho(&k, &rho, PROFILE_RADIUS_FRACTION * g.inscribed_radius(&grid))?;
            r.series(format!("{tag}.m{m}.profile"), p.shells.iter().map(|s| (s.shell_hi, s.sup_weighted)).collect());
            r.metric(format!("{tag}.m{m}.max"), p.max());
            r.metric(format!("{tag}.m{m}.edge_sup"), k.edge_sup);
            maxima.push((m as f64, p.max()));
        }
        let hi = maxima.iter().map(|p| p.1).fold(0.0, f64::max);
        let lo = maxima.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        r.series(format!("{tag}.maxima"), maxima);
        r.check(format!("{tag}.uniform"), format!("{tag}.max_over_min"), hi / lo, Comparison::AtMost, tol);
        if g.exponents() == [1.0, 1.0] && !config.has_grid() && alpha > 0.0 {
            let common = GridSpec::new(vec![1024, 1024], vec![56.0, 56.0])?;
            let rho = g.rho_field(&common);
            let mut ms = Vec::new();
            for m in -1..=1 {
                let k = synthesize_rho_tilde(m, alpha, &g, &common)?;
                let p = decay_profile_with_rho(&k, &rho, PROFILE_RADIUS_FRACTION * g.inscribed_radius(&common))?;
                r.metric(format!("{tag}.common.m{m}.max"), p.max());
                ms.push(p.max());
            }
            let hi = ms.iter().copied().fold(0.0, f64::max);
            let lo = ms.iter().copied().fold(f64::INFINITY, f64::min);
            r.check(format!("{tag}.common_grid_uniform"), format!("{tag}.common.max_over_min"), hi / lo, Comparison::AtMost, tol);
        }
    }
    r.metric("alpha", alpha);
    r.note("grids", "piece m is sampled on the base grid dilated by A_{2^m}; the isotropic common-grid check uses one 1024^2 grid with L = 56");
    Ok(r)
}
