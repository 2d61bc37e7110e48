//! Multi-dimensional FFT on periodic grids, one axis at a time.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// In-place FFT over a `dims`-dimensional cube of side `size`, row-major with
/// axis 0 slowest. The inverse is normalized so that a round trip is exact.
pub fn fft_nd(data: &mut [Complex<f64>], dims: usize, size: usize, inverse: bool) {
    debug_assert_eq!(data.len(), size.pow(dims as u32));
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(size)
    } else {
        planner.plan_fft_forward(size)
    };
    let mut line = vec![Complex::new(0.0, 0.0); size];
    for axis in 0..dims {
        let stride = size.pow((dims - 1 - axis) as u32);
        let block = stride * size;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / data.len() as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Signed wavenumber of FFT bin `k` on a grid of `size` points; the Nyquist
/// bin maps to `-size/2`.
pub fn wavenumber(k: usize, size: usize) -> i64 {
    if k < size / 2 {
        k as i64
    } else {
        k as i64 - size as i64
    }
}

pub fn to_complex(values: &[f64]) -> Vec<Complex<f64>> {
    values.iter().map(|&v| Complex::new(v, 0.0)).collect()
}
