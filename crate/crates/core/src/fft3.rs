//! 3-D complex FFT on flat y₁-fastest arrays, with a cached planner.
//!
//! Forward transforms are normalized by 1/N so spectral coefficients are
//! mode amplitudes: f(y) = Σ_k c_k e^{i k·y}. Coefficients are therefore
//! grid-size independent, which is what makes zero-padding exact.

use crate::grid::Grid;
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut plans = PLANS.lock().unwrap();
    plans
        .entry((n, forward))
        .or_insert_with(|| {
            let dir = if forward {
                FftDirection::Forward
            } else {
                FftDirection::Inverse
            };
            FftPlanner::new().plan_fft(n, dir)
        })
        .clone()
}

/// Transform along axis 1 (contiguous lines).
fn fft_axis1(grid: &Grid, data: &mut [Complex64], forward: bool) {
    let p = plan(grid.n1, forward);
    let scratch_len = p.get_inplace_scratch_len();
    data.par_chunks_mut(grid.n1).for_each_init(
        || vec![Complex64::default(); scratch_len],
        |scratch, line| p.process_with_scratch(line, scratch),
    );
}

/// Transform along axis 2 or 3 (strided lines, gathered into a scratch line).
fn fft_axis_strided(grid: &Grid, data: &mut [Complex64], axis: usize, forward: bool) {
    let (n1, n2, n3) = (grid.n1, grid.n2, grid.n3);
    let (len, stride) = if axis == 2 { (n2, n1) } else { (n3, n1 * n2) };
    let p = plan(len, forward);
    let scratch_len = p.get_inplace_scratch_len();

    // Slabs over the slowest non-transformed axis keep borrows disjoint.
    if axis == 2 {
        data.par_chunks_mut(n1 * n2).for_each_init(
            || {
                (
                    vec![Complex64::default(); len],
                    vec![Complex64::default(); scratch_len],
                )
            },
            |(line, scratch), slab| {
                for i1 in 0..n1 {
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = slab[i1 + stride * j];
                    }
                    p.process_with_scratch(line, scratch);
                    for (j, v) in line.iter().enumerate() {
                        slab[i1 + stride * j] = *v;
                    }
                }
            },
        );
    } else {
        // axis 3: lines are strided across the whole array; parallelize over i2.
        let planes: Vec<usize> = (0..n2).collect();
        let base = data.as_mut_ptr() as usize;
        planes.par_iter().for_each_init(
            || {
                (
                    vec![Complex64::default(); len],
                    vec![Complex64::default(); scratch_len],
                )
            },
            |(line, scratch), &i2| {
                // Lines for distinct i2 never overlap.
                let data = unsafe {
                    std::slice::from_raw_parts_mut(base as *mut Complex64, n1 * n2 * n3)
                };
                for i1 in 0..n1 {
                    let off = i1 + n1 * i2;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[off + stride * j];
                    }
                    p.process_with_scratch(line, scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[off + stride * j] = *v;
                    }
                }
            },
        );
    }
}

/// Physical (real) values -> normalized spectral coefficients.
pub fn forward(grid: &Grid, phys: &[f64]) -> Vec<Complex64> {
    debug_assert_eq!(phys.len(), grid.len());
    let mut data: Vec<Complex64> = phys.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_axis1(grid, &mut data, true);
    fft_axis_strided(grid, &mut data, 2, true);
    fft_axis_strided(grid, &mut data, 3, true);
    let scale = 1.0 / grid.len() as f64;
    for v in &mut data {
        *v *= scale;
    }
    data
}

/// Spectral coefficients -> physical values (real parts of the inverse sum).
pub fn inverse(grid: &Grid, spec: &[Complex64]) -> Vec<f64> {
    debug_assert_eq!(spec.len(), grid.len());
    let mut data = spec.to_vec();
    fft_axis1(grid, &mut data, false);
    fft_axis_strided(grid, &mut data, 2, false);
    fft_axis_strided(grid, &mut data, 3, false);
    data.iter().map(|v| v.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DealiasMode;

    #[test]
    fn round_trip_identity() {
        let grid = Grid::new(8, 10, 12, DealiasMode::Pad32).unwrap();
        let phys: Vec<f64> = (0..grid.len()).map(|i| ((i * 37 + 11) % 101) as f64).collect();
        let spec = forward(&grid, &phys);
        let back = inverse(&grid, &spec);
        let max_err = phys
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = phys.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(max_err / scale < 1e-12, "round trip error {max_err}");
    }

    #[test]
    fn single_mode_coefficient() {
        let grid = Grid::cubic(8).unwrap();
        // f = sin(y2) = (e^{i y2} - e^{-i y2}) / (2i)
        let mut phys = vec![0.0; grid.len()];
        for i3 in 0..grid.n3 {
            for i2 in 0..grid.n2 {
                for i1 in 0..grid.n1 {
                    phys[grid.idx(i1, i2, i3)] = Grid::coord(i2, grid.n2).sin();
                }
            }
        }
        let spec = forward(&grid, &phys);
        let plus = spec[grid.idx(0, 1, 0)];
        let minus = spec[grid.idx(0, grid.n2 - 1, 0)];
        assert!((plus - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((minus - Complex64::new(0.0, 0.5)).norm() < 1e-14);
    }
}
