use std::collections::BTreeMap;

use super::{group_tag, ExperimentConfig};
use crate::decomposition::{cz_decompose, verify_cz, whitney_cover};
use crate::dilation::DilationGroup;
use crate::error::{invalid_param, Result};
use crate::field::SampledField;
use crate::grid::{GridSpec, Mask};
use crate::report::{Comparison, ExperimentReport};

/// Constants of the decomposition whose spread across `beta` and resolution
/// is checked.
const CONSTANTS: &[&str] = &[
    "omega_measure_ratio",
    "off_omega_ratio",
    "good_sup_ratio",
    "good_lp_ratio",
    "ball_average_ratio",
    "bad_lp_ratio",
    "ball_sum_ratio",
    "overlap",
];

/// A pedestal of height 0.2 on `rho < 1` carrying a tall spike at the origin.
/// The spike is wider for anisotropic groups so that its thin axis still
/// spans a cell on the coarsest grid.
fn test_function(grid: &GridSpec, group: &DilationGroup) -> SampledField {
    let (radius, height) = if group.exponents().iter().all(|&a| a == 1.0) { (0.2, 20.0) } else { (0.5, 3.0) };
    SampledField::from_real_fn(grid.clone(), |x| {
        let r = group.rho_unchecked(x);
        if r >= 1.0 {
            0.0
        } else {
            0.2 + height * (1.0 - (r / radius).powi(2)).max(0.0).powi(3)
        }
    })
}

/// `max / min` over the positive values. A constant that is zero everywhere
/// holds with any bound and counts as stable.
fn spread(v: &[f64]) -> f64 {
    let pos: Vec<f64> = v.iter().copied().filter(|&x| x > 0.0).collect();
    if pos.is_empty() {
        return 1.0;
    }
    pos.iter().copied().fold(0.0, f64::max) / pos.iter().copied().fold(f64::INFINITY, f64::min)
}

fn median_of_support(f: &SampledField) -> f64 {
    let mut v: Vec<f64> = f.moduli().into_iter().filter(|&m| m > 0.0).collect();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn masks(grid: &GridSpec, group: &DilationGroup) -> Vec<(&'static str, Mask)> {
    let rho = |x: &[f64], c: [f64; 2]| group.rho_unchecked(&[x[0] - c[0], x[1] - c[1]]);
    vec![
        ("ball", Mask::from_fn(grid.clone(), |x| rho(x, [0.0, 0.0]) < 1.5)),
        ("annulus", Mask::from_fn(grid.clone(), |x| (0.8..1.8).contains(&rho(x, [0.0, 0.0])))),
        (
            "two_blobs",
            Mask::from_fn(grid.clone(), |x| rho(x, [-1.5, 0.0]) < 0.9 || rho(x, [1.4, 0.5]) < 0.6),
        ),
    ]
}

/// Whitney covers of three masks, then the Calderon-Zygmund decomposition of
/// one function at three heights and three resolutions.
pub(super) fn cz_suite(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("cz-suite", config.echo());
    let p = config.p.unwrap_or(1.0);
    let overlap_tol = config.tol("overlap", 64.0);
    let spread_tol = config.tol("constant_spread", 2.0);
    let exact_tol = config.tol("exact", 1e-10);
    let factors = config.betas.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let counts: Vec<usize> = match &config.counts {
        Some(c) => c.clone(),
        None => vec![64, 128, 256],
    };
    for g in config.groups(&[&[1.0, 1.0], &[1.0, 2.0]])? {
        if g.dim() != 2 {
            return Err(invalid_param("the suite builds planar masks"));
        }
        let tag = group_tag(&g);
        let extents = match &config.extents {
            Some(e) => e.clone(),
            None if g.exponents() == [1.0, 1.0] => vec![8.0, 8.0],
            None => vec![8.0, 16.0],
        };
        let mask_grid = GridSpec::new(vec![128, 128], extents.clone())?;
        let mut worst_overlap = 0usize;
        let mut all_exact = true;
        for (name, m) in masks(&mask_grid, &g) {
            let cover = whitney_cover(&m, &g, 2.0)?;
            r.metric(format!("{tag}.mask.{name}.balls"), cover.len() as f64);
            r.metric(format!("{tag}.mask.{name}.overlap"), cover.overlap as f64);
            worst_overlap = worst_overlap.max(cover.overlap);
            all_exact &= cover.covers_exactly && cover.expansions_meet_complement;
        }
        r.check(format!("{tag}.whitney_overlap"), format!("{tag}.whitney_max_overlap"), worst_overlap as f64, Comparison::AtMost, overlap_tol);
        r.check(format!("{tag}.whitney_exact"), format!("{tag}.whitney_failures"), f64::from(u8::from(!all_exact)), Comparison::AtMost, 0.0);

        let mut values: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        let mut recon = 0.0f64;
        let mut mean = 0.0f64;
        let mut structural = true;
        for &n in &counts {
            let grid = GridSpec::new(vec![n, n], extents.clone())?;
            let f = test_function(&grid, &g);
            let median = median_of_support(&f);
            for &s in &factors {
                let beta = s * median;
                let dec = cz_decompose(&f, beta, p, &g, 2.0)?;
                let rep = verify_cz(&dec, &f, &g)?;
                let key = format!("{tag}.n{n}.beta{s}");
                recon = recon.max(rep.metrics["reconstruction_error"] / f.max_abs());
                mean = mean.max(rep.metrics.get("mean_defect").copied().unwrap_or(0.0));
                structural &= ["cover_exact", "expansion_meets_complement", "supports"]
                    .iter()
                    .all(|v| rep.verdicts.get(*v).is_none_or(|v| v.passed));
                for c in CONSTANTS {
                    let v = rep.metrics[*c];
                    r.metric(format!("{key}.{c}"), v);
                    values.entry(c).or_default().push(v);
                }
                r.metric(format!("{key}.balls"), rep.metrics["balls"]);
            }
        }
        r.check(format!("{tag}.reconstruction"), format!("{tag}.max_reconstruction_error"), recon, Comparison::AtMost, exact_tol);
        r.check(format!("{tag}.mean_zero"), format!("{tag}.max_mean_defect"), mean, Comparison::AtMost, exact_tol);
        r.check(format!("{tag}.structure"), format!("{tag}.structural_failures"), f64::from(u8::from(!structural)), Comparison::AtMost, 0.0);
        let nb = factors.len();
        for (c, v) in values {
            r.check(format!("{tag}.{c}.stable"), format!("{tag}.{c}.spread"), spread(&v), Comparison::AtMost, spread_tol);
            let across_grids = (0..nb)
                .map(|b| spread(&v.iter().skip(b).step_by(nb).copied().collect::<Vec<_>>()))
                .fold(0.0, f64::max);
            r.metric(format!("{tag}.{c}.grid_spread"), across_grids);
        }
    }
    r.metric("p", p);
    r.note("beta", "multiples of the median of |f| over its support, per grid");
    r.note("spread", "max / min of the positive values of each constant over every beta and resolution");
    r.note("grid_spread", "largest max / min over resolutions at a fixed beta");
    Ok(r)
}
