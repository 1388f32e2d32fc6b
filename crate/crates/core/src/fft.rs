//! Separable n-dimensional FFT over row-major buffers.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};

/// In-place unnormalised DFT along every axis.
pub(crate) fn fft_nd(data: &mut [Complex64], counts: &[usize], direction: FftDirection) {
    let total: usize = counts.iter().product();
    assert_eq!(data.len(), total);
    let mut planner = FftPlanner::<f64>::new();
    let dim = counts.len();
    let mut inner = 1usize;
    for axis in (0..dim).rev() {
        let n = counts[axis];
        let fft = planner.plan_fft(n, direction);
        if inner == 1 {
            // contiguous lines
            data.par_chunks_mut(n * 64).for_each(|chunk| {
                let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                fft.process_with_scratch(chunk, &mut scratch);
            });
        } else {
            // lines with stride `inner`; gather column tiles, transform, scatter
            const TILE: usize = 16;
            let block = n * inner;
            for blk in data.chunks_mut(block) {
                let view: &[Complex64] = blk;
                let tiles: Vec<(usize, Vec<Complex64>)> = (0..inner)
                    .step_by(TILE)
                    .collect::<Vec<_>>()
                    .into_par_iter()
                    .map(|k0| {
                        let w = TILE.min(inner - k0);
                        let mut line = vec![Complex64::default(); n * w];
                        for i in 0..n {
                            for k in 0..w {
                                line[k * n + i] = view[i * inner + k0 + k];
                            }
                        }
                        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
                        fft.process_with_scratch(&mut line, &mut scratch);
                        (k0, line)
                    })
                    .collect();
                for (k0, line) in tiles {
                    let w = line.len() / n;
                    for i in 0..n {
                        for k in 0..w {
                            blk[i * inner + k0 + k] = line[k * n + i];
                        }
                    }
                }
            }
        }
        inner *= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft_2d(x: &[Complex64], n0: usize, n1: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n0 * n1];
        for k0 in 0..n0 {
            for k1 in 0..n1 {
                let mut acc = Complex64::default();
                for i0 in 0..n0 {
                    for i1 in 0..n1 {
                        let ph = -2.0
                            * std::f64::consts::PI
                            * ((k0 * i0) as f64 / n0 as f64 + (k1 * i1) as f64 / n1 as f64);
                        acc += x[i0 * n1 + i1] * Complex64::from_polar(1.0, ph);
                    }
                }
                out[k0 * n1 + k1] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let (n0, n1) = (4, 8);
        let x: Vec<Complex64> = (0..n0 * n1)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut y = x.clone();
        fft_nd(&mut y, &[n0, n1], FftDirection::Forward);
        let z = naive_dft_2d(&x, n0, n1);
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
