//! Shared FFT helpers built on rustfft, with a thread-local planner cache.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn fft_forward(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub fn fft_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// In-place forward FFT.
pub fn fft_in_place(buf: &mut [Complex64]) {
    fft_forward(buf.len()).process(buf);
}

/// In-place inverse FFT including the 1/N normalization.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    fft_inverse(n).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// FFT bin center frequencies for an `n`-point transform at rate `fs`,
/// in natural FFT order (DC first, negative frequencies in the upper half).
pub fn fft_freqs(n: usize, fs: f64) -> Vec<f64> {
    let df = fs / n as f64;
    (0..n)
        .map(|k| {
            if k <= (n - 1) / 2 {
                k as f64 * df
            } else {
                (k as f64 - n as f64) * df
            }
        })
        .collect()
}

pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}
