//! Normalized discrete Fourier transforms on periodic grids.
//!
//! Convention: `f̂(k) = N⁻¹ Σ_j f_j e^{-2πi jk/N}` and `f_j = Σ_k f̂(k) e^{2πi jk/N}`,
//! so a single mode `e^{2πi k x / L}` has coefficient exactly 1 at `k`.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    plan.process(buf);
}

/// Forward transform, divided by `N`.
pub fn dft(values: &[Complex64]) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    transform(&mut buf, false);
    let s = 1.0 / values.len() as f64;
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

/// Inverse transform (unnormalized sum over modes).
pub fn idft(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    transform(&mut buf, true);
    buf
}

fn columns(values: &mut [Complex64], nx: usize, ny: usize, inverse: bool) {
    let mut col = vec![Complex64::default(); ny];
    for ix in 0..nx {
        for iy in 0..ny {
            col[iy] = values[iy * nx + ix];
        }
        transform(&mut col, inverse);
        for iy in 0..ny {
            values[iy * nx + ix] = col[iy];
        }
    }
}

/// 2D forward transform of `values[iy * nx + ix]`, divided by `nx·ny`.
pub fn dft2(values: &[Complex64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    for row in buf.chunks_mut(nx) {
        transform(row, false);
    }
    columns(&mut buf, nx, ny, false);
    let s = 1.0 / (nx * ny) as f64;
    buf.iter_mut().for_each(|c| *c *= s);
    buf
}

/// 2D inverse of [`dft2`].
pub fn idft2(coeffs: &[Complex64], nx: usize, ny: usize) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    for row in buf.chunks_mut(nx) {
        transform(row, true);
    }
    columns(&mut buf, nx, ny, true);
    buf
}

/// Representative of index `k` in `(-N/2, N/2]`.
pub fn symmetric_index(k: usize, n: usize) -> i64 {
    let k = k as i64;
    let n = n as i64;
    if k > n / 2 {
        k - n
    } else {
        k
    }
}

/// Array slot of a signed frequency index, wrapping modulo `N`.
pub fn slot(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}
