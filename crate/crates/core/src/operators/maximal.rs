use std::collections::VecDeque;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::multiplier::check_group;
use crate::dilation::{unit_ball_volume, DilationGroup};
use crate::error::{invalid_param, Result};
use crate::field::SampledField;
use crate::grid::GridSpec;

/// Constants relating averages over `prod [-r^{a_j}, r^{a_j}]` to averages over
/// `rho`-balls: `B(0, r)` lies in the rectangle, which lies in `B(0, c r)` with
/// `c = rho(1, .., 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalComparability {
    /// ball average <= this times the rectangle average
    pub ball_by_rectangle: f64,
    /// rectangle average <= this times the average over the dilated ball
    pub rectangle_by_ball: f64,
    pub corner_rho: f64,
}

pub fn rectangle_comparability(group: &DilationGroup) -> MaximalComparability {
    let n = group.dim();
    let omega = unit_ball_volume(n);
    let corner_rho = group.rho_unchecked(&vec![1.0; n]);
    let cube = 2f64.powi(n as i32);
    MaximalComparability {
        ball_by_rectangle: cube / omega,
        rectangle_by_ball: corner_rho.powf(group.gamma()) * omega / cube,
        corner_rho,
    }
}

/// Apply `op` to every line along `axis`, producing lines of length `out_len`.
fn along_axis(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    out_len: usize,
    op: impl Fn(&[f64], &mut [f64]) + Sync,
) -> (Vec<f64>, Vec<usize>) {
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out_shape = shape.to_vec();
    out_shape[axis] = out_len;
    let mut out = vec![0.0; outer * out_len * inner];
    out.par_chunks_mut(out_len * inner)
        .enumerate()
        .for_each(|(o, block)| {
            let mut line = vec![0.0; n];
            let mut res = vec![0.0; out_len];
            for k in 0..inner {
                for i in 0..n {
                    line[i] = data[(o * n + i) * inner + k];
                }
                op(&line, &mut res);
                for i in 0..out_len {
                    block[i * inner + k] = res[i];
                }
            }
        });
    (out, out_shape)
}

// sums over windows [p, p + w) for every start p in [-(w-1), n-1], zero outside
fn window_sums(line: &[f64], w: usize, out: &mut [f64]) {
    let n = line.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + line[i];
    }
    for (q, o) in out.iter_mut().enumerate() {
        let start = q as i64 - (w as i64 - 1);
        let lo = start.clamp(0, n as i64) as usize;
        let hi = (start + w as i64).clamp(0, n as i64) as usize;
        *o = prefix[hi] - prefix[lo];
    }
}

// out[x] = max of ext[x..x + w] (ext has length n + w - 1)
fn sliding_max(ext: &[f64], w: usize, out: &mut [f64]) {
    let mut dq: VecDeque<usize> = VecDeque::new();
    for (i, &v) in ext.iter().enumerate() {
        while dq.back().is_some_and(|&b| ext[b] <= v) {
            dq.pop_back();
        }
        dq.push_back(i);
        if i + 1 >= w {
            let x = i + 1 - w;
            while dq.front().is_some_and(|&f| f < x) {
                dq.pop_front();
            }
            out[x] = ext[*dq.front().expect("nonempty window")];
        }
    }
}

/// Cell half-widths `floor(r^{a_j} / h_j)` of the dyadic rectangles, from the
/// single cell up to rectangles covering the grid, without repeats.
fn dyadic_half_widths(group: &DilationGroup, grid: &GridSpec) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![0; grid.dim()]];
    let mut k = -64i32;
    loop {
        let r = 2f64.powi(k);
        let hw: Vec<usize> = group
            .exponents()
            .iter()
            .enumerate()
            .map(|(j, a)| {
                (r.powf(*a) / grid.spacing(j))
                    .floor()
                    .min(2.0 * grid.counts()[j] as f64) as usize
            })
            .collect();
        if out.last() != Some(&hw) {
            out.push(hw.clone());
        }
        if hw.iter().zip(grid.counts()).all(|(&h, &n)| h >= n) {
            break;
        }
        k += 1;
    }
    out
}

/// Maximal averages of `values` over every dyadic rectangle containing each
/// cell, with zero extension outside the grid.
pub(crate) fn maximal_real(values: &[f64], group: &DilationGroup, grid: &GridSpec) -> Vec<f64> {
    let dim = grid.dim();
    let mut best = values.to_vec();
    for hw in dyadic_half_widths(group, grid).into_iter().skip(1) {
        let widths: Vec<usize> = hw.iter().map(|h| 2 * h + 1).collect();
        let mut data = values.to_vec();
        let mut shape = grid.counts().to_vec();
        for axis in 0..dim {
            let w = widths[axis];
            let len = shape[axis] + w - 1;
            (data, shape) = along_axis(&data, &shape, axis, len, |l, o| window_sums(l, w, o));
        }
        let area: f64 = widths.iter().map(|&w| w as f64).product();
        data.iter_mut().for_each(|v| *v /= area);
        for axis in 0..dim {
            let w = widths[axis];
            let len = shape[axis] + 1 - w;
            (data, shape) = along_axis(&data, &shape, axis, len, |l, o| sliding_max(l, w, o));
        }
        best.iter_mut().zip(&data).for_each(|(b, v)| *b = b.max(*v));
    }
    best
}

/// Uncentred dyadic maximal function of `|f|` over rectangles
/// `x + prod [-r^{a_j}, r^{a_j}]`, `r = 2^k`, containing each cell.
pub fn hl_maximal(f: &SampledField, group: &DilationGroup) -> Result<SampledField> {
    check_group(group, f.grid())?;
    let m = maximal_real(&f.moduli(), group, f.grid());
    Ok(SampledField::from_parts(
        f.grid().clone(),
        m.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    ))
}

/// `M_s f = M(|f|^s)^{1/s}`.
pub fn m_s(f: &SampledField, s: f64, group: &DilationGroup) -> Result<SampledField> {
    check_group(group, f.grid())?;
    if !(s > 1.0 && s.is_finite()) {
        return Err(invalid_param(format!("s = {s} must exceed 1")));
    }
    let pow: Vec<f64> = f.moduli().iter().map(|v| v.powf(s)).collect();
    let m = maximal_real(&pow, group, f.grid());
    Ok(SampledField::from_parts(
        f.grid().clone(),
        m.into_iter()
            .map(|v| Complex64::new(v.powf(1.0 / s), 0.0))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::RhoBall;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // direct search over every rectangle placement containing the cell
    fn brute(values: &[f64], grid: &GridSpec, group: &DilationGroup, cell: usize) -> f64 {
        let n = grid.counts();
        let x = [cell / n[1], cell % n[1]];
        let mut best = values[cell];
        for hw in dyadic_half_widths(group, grid) {
            let w = [2 * hw[0] + 1, 2 * hw[1] + 1];
            for p0 in (x[0] as i64 - w[0] as i64 + 1)..=(x[0] as i64) {
                for p1 in (x[1] as i64 - w[1] as i64 + 1)..=(x[1] as i64) {
                    let mut s = 0.0;
                    for i in p0.max(0)..(p0 + w[0] as i64).min(n[0] as i64) {
                        for j in p1.max(0)..(p1 + w[1] as i64).min(n[1] as i64) {
                            s += values[i as usize * n[1] + j as usize];
                        }
                    }
                    best = best.max(s / (w[0] * w[1]) as f64);
                }
            }
        }
        best
    }

    #[test]
    fn constants_and_pointwise_bound() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![16, 32], vec![4.0, 4.0]).unwrap();
        let c = SampledField::constant(grid.clone(), Complex64::new(0.0, -3.0));
        // zero extension lowers averages of windows leaving the grid, but the
        // single cell keeps the value
        assert!(hl_maximal(&c, &g)
            .unwrap()
            .values()
            .iter()
            .all(|v| (v.re - 3.0).abs() < 1e-12));
        assert!(m_s(&c, 2.0, &g)
            .unwrap()
            .values()
            .iter()
            .all(|v| (v.re - 3.0).abs() < 1e-12));
        assert!(m_s(&c, 1.0, &g).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = SampledField::from_real_fn(grid, |_| rng.gen_range(-1.0..1.0));
        let m = hl_maximal(&f, &g).unwrap();
        let m2 = m_s(&f, 2.0, &g).unwrap();
        for ((a, b), v) in m.values().iter().zip(m2.values()).zip(f.values()) {
            assert!(a.re >= v.norm() - 1e-12);
            assert!(b.re >= a.re - 1e-12);
        }
    }

    #[test]
    fn matches_brute_force() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![16, 32], vec![4.0, 2.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vals: Vec<f64> = (0..grid.len())
            .map(|_| rng.gen_range(0.0..1.0f64).powi(3))
            .collect();
        let f = SampledField::from_real_fn(grid.clone(), {
            let mut it = vals.iter();
            move |_| *it.next().unwrap()
        });
        let m = hl_maximal(&f, &g).unwrap();
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let m2 = m_s(&f, 2.0, &g).unwrap();
        for _ in 0..40 {
            let cell = rng.gen_range(0..grid.len());
            assert!((m.values()[cell].re - brute(&vals, &grid, &g, cell)).abs() < 1e-12);
            assert!((m2.values()[cell].re - brute(&sq, &grid, &g, cell).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_indicator_tail() {
        let g = DilationGroup::new(vec![1.0, 2.0]).unwrap();
        let grid = GridSpec::new(vec![128, 512], vec![32.0, 256.0]).unwrap();
        let ball = RhoBall::new(vec![0.0, 0.0], 1.0).unwrap();
        let mut f = SampledField::zeros(grid.clone());
        for i in ball.rasterize(&g, &grid) {
            f.values_mut()[i] = Complex64::new(1.0, 0.0);
        }
        let m = hl_maximal(&f, &g).unwrap();
        let rho = g.rho_field(&grid);
        let mut lowest = f64::INFINITY;
        for (v, &r) in m.values().iter().zip(&rho) {
            if (1.0..=8.0).contains(&r) {
                lowest = lowest.min(v.re * r.powf(g.gamma()));
            }
        }
        assert!(lowest > 0.01, "{lowest}");
        let c = rectangle_comparability(&g);
        assert!((c.ball_by_rectangle - 4.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!(c.corner_rho > 1.0 && c.rectangle_by_ball > 1.0);
    }
}
