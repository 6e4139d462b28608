//! Multi-dimensional complex FFT over row-major torus arrays, built from
//! rustfft 1-D plans applied axis by axis.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use super::grid::TorusGrid;
use crate::par::{for_each_chunk_mut, Execution};

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, direction: FftDirection) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, direction == FftDirection::Forward);
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

/// Lines per parallel task; small grids stay on one worker.
const LINES_PER_TASK: usize = 32;

fn transform(grid: &TorusGrid, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.n();
    let dim = grid.dim();
    debug_assert_eq!(data.len(), grid.len());
    let fft = plan(n, direction);
    let exec = if data.len() >= 1 << 14 {
        Execution::Parallel
    } else {
        Execution::Sequential
    };

    let run_lines = |buf: &mut [Complex64]| {
        for_each_chunk_mut(buf, n * LINES_PER_TASK, exec, |_, chunk| {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            for line in chunk.chunks_mut(n) {
                fft.process_with_scratch(line, &mut scratch);
            }
        });
    };

    // Last axis is contiguous.
    run_lines(data);

    // Remaining axes: gather strided lines into a contiguous buffer.
    let total = data.len();
    let mut buf = vec![Complex64::default(); total];
    for axis in (0..dim - 1).rev() {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        let lines_per_block = stride;
        // line index = (block b, offset o); element i at b*block + i*stride + o
        let n_blocks = total / block;
        for b in 0..n_blocks {
            for o in 0..lines_per_block {
                let line = b * lines_per_block + o;
                let base = b * block + o;
                for i in 0..n {
                    buf[line * n + i] = data[base + i * stride];
                }
            }
        }
        run_lines(&mut buf);
        for b in 0..n_blocks {
            for o in 0..lines_per_block {
                let line = b * lines_per_block + o;
                let base = b * block + o;
                for i in 0..n {
                    data[base + i * stride] = buf[line * n + i];
                }
            }
        }
    }
}

/// Forward transform of real samples to normalized coefficients `c_k`.
pub fn forward(grid: &TorusGrid, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(grid, &mut data, FftDirection::Forward);
    let scale = 1.0 / grid.len() as f64;
    for c in &mut data {
        *c *= scale;
    }
    data
}

/// Inverse transform; returns the real part of `Σ_k c_k e^{iξ·x}` on the grid.
pub fn inverse(grid: &TorusGrid, coeffs: &[Complex64]) -> Vec<f64> {
    let mut data = coeffs.to_vec();
    transform(grid, &mut data, FftDirection::Inverse);
    data.into_iter().map(|c| c.re).collect()
}
