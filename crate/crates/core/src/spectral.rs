//! Two-dimensional FFT machinery for periodic grids.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::ComplexGrid;

struct Plan {
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

fn plan(nx: usize, ny: usize) -> Arc<Plan> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Plan>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((nx, ny))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plan {
                fwd_x: planner.plan_fft_forward(nx),
                inv_x: planner.plan_fft_inverse(nx),
                fwd_y: planner.plan_fft_forward(ny),
                inv_y: planner.plan_fft_inverse(ny),
            })
        })
        .clone()
}

/// Lines per parallel task; each task transforms its block with one scratch buffer.
const LINES_PER_TASK: usize = 32;

fn fft_lines(fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n: usize) {
    data.par_chunks_mut(n * LINES_PER_TASK).for_each(|block| fft.process(block));
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    // Tiled so that both the reads and the writes stay within a few cache lines.
    const TILE: usize = 16;
    dst.par_chunks_mut(rows * TILE).enumerate().for_each(|(jb, block)| {
        let j0 = jb * TILE;
        let jn = block.len() / rows;
        for i0 in (0..rows).step_by(TILE) {
            for i in i0..(i0 + TILE).min(rows) {
                let row = &src[i * cols + j0..i * cols + j0 + jn];
                for (dj, v) in row.iter().enumerate() {
                    block[dj * rows + i] = *v;
                }
            }
        }
    });
}

fn fft2(nx: usize, ny: usize, data: &mut [Complex64], inverse: bool) {
    let p = plan(nx, ny);
    let (fy, fx) = if inverse { (&p.inv_y, &p.inv_x) } else { (&p.fwd_y, &p.fwd_x) };
    fft_lines(fy, data, ny);
    // Transform along x on a transposed copy so each line is contiguous.
    let mut t = vec![Complex64::new(0.0, 0.0); nx * ny];
    transpose(data, nx, ny, &mut t);
    fft_lines(fx, &mut t, nx);
    transpose(&t, ny, nx, data);
    if inverse {
        let s = 1.0 / (nx * ny) as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Signed integer frequency of FFT bin `k` out of `n`.
pub(crate) fn frequency(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

fn wavenumbers(n: usize, l: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            // The Nyquist bin of an even-length transform has no sign; its
            // derivative is taken to be zero so derivatives stay real-preserving.
            if n % 2 == 0 && k == n / 2 {
                0.0
            } else {
                2.0 * std::f64::consts::PI * frequency(k, n) as f64 / l
            }
        })
        .collect()
}

/// Fourier coefficients of a field on a periodic grid.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: ComplexGrid,
    coeffs: Vec<Complex64>,
    kx: Vec<f64>,
    ky: Vec<f64>,
}

impl Spectrum {
    pub fn new(f: &ScalarField) -> Result<Self> {
        let grid = *f.grid();
        if !grid.is_periodic() {
            return Err(Error::NonPeriodicGrid);
        }
        let mut coeffs = f.values().to_vec();
        fft2(grid.nx, grid.ny, &mut coeffs, false);
        Ok(Self { grid, coeffs, kx: wavenumbers(grid.nx, grid.lx), ky: wavenumbers(grid.ny, grid.ly) })
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.grid
    }

    /// Symbol of d/dz at bin (i, j).
    #[inline]
    pub fn sym_dz(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(0.5 * self.ky[j], 0.5 * self.kx[i])
    }

    /// Symbol of d/dzbar at bin (i, j).
    #[inline]
    pub fn sym_dzbar(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(-0.5 * self.ky[j], 0.5 * self.kx[i])
    }

    /// Zeroth Fourier coefficient divided by the number of points (the mean).
    pub fn mean(&self) -> Complex64 {
        self.coeffs[0] / self.grid.len() as f64
    }

    /// Multiplies every coefficient by `symbol(i, j)` and transforms back.
    pub fn apply(&self, symbol: impl Fn(usize, usize) -> Complex64 + Sync) -> ScalarField {
        let ny = self.grid.ny;
        let mut out = self.coeffs.clone();
        out.par_chunks_mut(ny).enumerate().for_each(|(i, row)| {
            for (j, c) in row.iter_mut().enumerate() {
                *c *= symbol(i, j);
            }
        });
        fft2(self.grid.nx, ny, &mut out, true);
        ScalarField::from_values(self.grid, out).expect("spectrum size matches grid")
    }

    /// `d_z^m d_zbar^n` of the underlying field.
    pub fn derivative(&self, m: u32, n: u32) -> ScalarField {
        self.apply(|i, j| {
            let mut s = Complex64::new(1.0, 0.0);
            for _ in 0..m {
                s *= self.sym_dz(i, j);
            }
            for _ in 0..n {
                s *= self.sym_dzbar(i, j);
            }
            s
        })
    }

    /// Keeps only modes with |frequency| < n/3 on both axes.
    pub fn dealiased(&self) -> ScalarField {
        self.apply(|i, j| if self.in_band(i, j) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    /// Whether bin (i, j) survives the 2/3 rule.
    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        3 * frequency(i, self.grid.nx).unsigned_abs() < self.grid.nx as u64
            && 3 * frequency(j, self.grid.ny).unsigned_abs() < self.grid.ny as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ComplexGrid;

    #[test]
    fn roundtrip_is_identity() {
        let g = ComplexGrid::new(12, 10, 0.0, 0.0, 1.0, 2.0, crate::grid::BoundaryMode::Periodic).unwrap();
        let f = ScalarField::sample(g, |z| Complex64::new((3.0 * z.re).sin(), z.im.cos()) + z * 0.1);
        let back = Spectrum::new(&f).unwrap().apply(|_, _| Complex64::new(1.0, 0.0));
        let err = crate::field::max_abs_diff(&f, &back, None);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn frequencies_wrap() {
        assert_eq!(frequency(0, 8), 0);
        assert_eq!(frequency(4, 8), 4);
        assert_eq!(frequency(5, 8), -3);
        assert_eq!(frequency(4, 7), -3);
    }
}
