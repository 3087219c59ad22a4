//! Seeded synthetic corpora.
//!
//! Randomness comes from ChaCha8 seeded with a `u64`, so a seed fixes every
//! generated value on every platform. Low-pass data is Gaussian noise passed
//! through a first-order autoregressive filter `x[i] = ρ·x[i−1] + √(1−ρ²)·e[i]`
//! (started from the stationary distribution), then scaled so the largest
//! magnitude is 1. Images apply the filter along rows, then along columns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::{Matrix, Signal};

/// Correlation coefficient of the default low-pass corpus.
pub const AR_RHO: f64 = 0.95;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ar_filter(x: &mut [f64], stride: usize, count: usize, rho: f64) {
    let gain = (1.0 - rho * rho).sqrt();
    for i in 1..count {
        x[i * stride] = rho * x[(i - 1) * stride] + gain * x[i * stride];
    }
}

fn normalize(x: &mut [f64]) {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
}

fn gaussian(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// AR(ρ) signal scaled to `[−1, 1]`.
pub fn ar_signal(rng: &mut impl Rng, len: usize, rho: f64) -> Signal {
    let mut x = gaussian(rng, len);
    ar_filter(&mut x, 1, len, rho);
    normalize(&mut x);
    Signal::new(x).expect("finite non-empty signal")
}

/// Separable 2-D AR(ρ) image scaled to `[−1, 1]`.
pub fn ar_image(rng: &mut impl Rng, rows: usize, cols: usize, rho: f64) -> Matrix {
    let mut x = gaussian(rng, rows * cols);
    for r in 0..rows {
        ar_filter(&mut x[r * cols..], 1, cols, rho);
    }
    for c in 0..cols {
        ar_filter(&mut x[c..], cols, rows, rho);
    }
    normalize(&mut x);
    Matrix::from_vec(rows, cols, x).expect("finite image")
}

/// Benchmark operands for an `n×inner` by `inner×n` product: two AR(0.95)
/// images drawn in order from `seed`.
pub fn gemm_corpus(seed: u64, n: usize, inner: usize) -> (Matrix, Matrix) {
    let mut r = rng(seed);
    let a = ar_image(&mut r, n, inner, AR_RHO);
    let b = ar_image(&mut r, inner, n, AR_RHO);
    (a, b)
}

/// Benchmark signal of `signal_len` samples and kernel of `kernel_len`
/// taps: two AR(0.95) signals drawn in order from `seed`.
pub fn conv_corpus(seed: u64, signal_len: usize, kernel_len: usize) -> (Signal, Signal) {
    let mut r = rng(seed);
    let s = ar_signal(&mut r, signal_len, AR_RHO);
    let k = ar_signal(&mut r, kernel_len, AR_RHO);
    (s, k)
}

/// Independent uniform entries in `[−1, 1]`.
pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..=1.0))
}

pub fn uniform_signal(rng: &mut impl Rng, len: usize) -> Signal {
    Signal::new((0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()).expect("finite signal")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag1(x: &[f64]) -> f64 {
        let num: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
        let den: f64 = x.iter().map(|v| v * v).sum();
        num / den
    }

    #[test]
    fn deterministic_and_bounded() {
        let a = ar_signal(&mut rng(7), 500, AR_RHO);
        let b = ar_signal(&mut rng(7), 500, AR_RHO);
        assert_eq!(a, b);
        assert_ne!(a, ar_signal(&mut rng(8), 500, AR_RHO));
        let peak = a.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 1.0).abs() < 1e-15);
    }

    #[test]
    fn low_pass_correlation() {
        let s = ar_signal(&mut rng(1), 20_000, AR_RHO);
        let mean = s.as_slice().iter().sum::<f64>() / s.len() as f64;
        let centred: Vec<f64> = s.as_slice().iter().map(|v| v - mean).collect();
        assert!((lag1(&centred) - AR_RHO).abs() < 0.03);
        let img = ar_image(&mut rng(2), 64, 64, AR_RHO);
        assert!(img.max_abs() <= 1.0);
        assert!(lag1(img.row(10)) > 0.5);
    }

    #[test]
    fn corpora_shapes() {
        let (a, b) = gemm_corpus(1, 144, 40);
        assert_eq!((a.rows(), a.cols(), b.rows(), b.cols()), (144, 40, 40, 144));
        assert_eq!(gemm_corpus(1, 144, 40).0, a);
        let (s, k) = conv_corpus(2, 1000, 60);
        assert_eq!((s.len(), k.len()), (1000, 60));
        assert_ne!(s.as_slice()[..60], *k.as_slice());
    }

    #[test]
    fn uniform_range() {
        let m = uniform_matrix(&mut rng(3), 10, 10);
        assert!(m.max_abs() <= 1.0);
        assert_eq!(uniform_signal(&mut rng(3), 9).len(), 9);
    }
}
