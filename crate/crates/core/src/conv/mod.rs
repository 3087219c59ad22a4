//! One-dimensional convolution and cross-correlation.
//!
//! Conventions (all indices start at zero):
//!
//! * `Conv`: `r[m] = Σ_j s[m−j]·k[j]`, length `s.len + k.len − 1`.
//! * `Xcorr`: `r[i] = Σ_t s[t + i − (k.len−1)]·k[t]`, so index `i` holds lag
//!   `i − (k.len−1)`; same length as `Conv`.
//! * `CircConv`: `r[m] = Σ_n s[n]·k[(m−n) mod N]`.
//! * `CircXcorr`: `r[m] = Σ_t s[(t+m) mod N]·k[t]`.

mod projected;
mod translate;

pub use projected::{alignment_calibrate, conv_projected_blocked, AlignmentTable, ProjectedConvolver, SegmentedOutput};
pub use translate::{conv_translate_project, PermutationIndex};

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::counter::MacCounter;
use crate::error::{Error, Result};
use crate::matrix::Signal;
use crate::real::{dot, Precision, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvVariant {
    Conv,
    Xcorr,
    CircConv,
    CircXcorr,
}

impl ConvVariant {
    pub fn is_circular(self) -> bool {
        matches!(self, ConvVariant::CircConv | ConvVariant::CircXcorr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvMode {
    #[default]
    TimeDomain,
    FreqDomain,
}

/// Overlap-save geometry: segments of `block` input samples convolved with
/// a kernel of `kernel_len` taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvPlan {
    pub block: usize,
    pub kernel_len: usize,
    pub mode: ConvMode,
}

impl ConvPlan {
    pub fn new(block: usize, kernel_len: usize, mode: ConvMode) -> Result<Self> {
        if kernel_len == 0 {
            return Err(Error::invalid("kernel length must be positive"));
        }
        if block < kernel_len {
            return Err(Error::dims(format!(
                "block of {block} samples shorter than kernel of {kernel_len}"
            )));
        }
        Ok(ConvPlan {
            block,
            kernel_len,
            mode,
        })
    }

    /// The minimum-size blocking `W = 3N + 1`.
    pub fn minimal(kernel_len: usize, mode: ConvMode) -> Result<Self> {
        ConvPlan::new(3 * kernel_len + 1, kernel_len, mode)
    }

    /// Output samples produced per segment.
    pub fn hop(&self) -> usize {
        self.block - self.kernel_len + 1
    }
}

/// Computes outputs `lo..hi` of the full linear convolution of `s` with the
/// kernel whose reversal is `kr`, adding them into `out[0..hi−lo]`. Only
/// products of actual samples are formed and counted.
pub(crate) fn conv_range<S: Real>(s: &[S], kr: &[S], lo: usize, hi: usize, out: &mut [S], counter: &MacCounter) {
    let (n, k) = (s.len(), kr.len());
    let mut macs = 0u64;
    for (m, o) in (lo..hi).zip(out.iter_mut()) {
        // j ranges over [max(0, m+1−n), min(k−1, m)].
        let j_lo = (m + 1).saturating_sub(n);
        let j_hi = m.min(k - 1);
        if j_lo > j_hi {
            continue;
        }
        let len = j_hi - j_lo + 1;
        let s_start = m - j_hi;
        let k_start = k - 1 - j_hi;
        *o += dot(&s[s_start..s_start + len], &kr[k_start..k_start + len]);
        macs += len as u64;
    }
    counter.add(macs);
}

fn to_real<S: Real>(x: &[f64]) -> Vec<S> {
    x.iter().map(|&v| S::from_f64(v)).collect()
}

fn full_conv<S: Real>(s: &[f64], k: &[f64], counter: &MacCounter) -> Vec<f64> {
    let ss = to_real::<S>(s);
    let kr: Vec<S> = k.iter().rev().map(|&v| S::from_f64(v)).collect();
    let len = s.len() + k.len() - 1;
    let mut out = vec![S::zero(); len];
    conv_range(&ss, &kr, 0, len, &mut out, counter);
    out.into_iter().map(Real::to_f64).collect()
}

/// Time-domain convolution kernels at a chosen evaluation precision.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConvKernel {
    pub precision: Precision,
}

impl ConvKernel {
    pub fn new(precision: Precision) -> Self {
        ConvKernel { precision }
    }

    pub fn direct(&self, s: &Signal, k: &Signal, variant: ConvVariant, counter: &MacCounter) -> Result<Signal> {
        if variant.is_circular() {
            if s.len() != k.len() {
                return Err(Error::dims(format!(
                    "circular variants need equal lengths, got {} and {}",
                    s.len(),
                    k.len()
                )));
            }
            let n = s.len();
            let (s, k) = (s.as_slice(), k.as_slice());
            let out = (0..n)
                .map(|m| match variant {
                    ConvVariant::CircConv => (0..n).map(|i| s[i] * k[(m + n - i) % n]).sum(),
                    _ => (0..n).map(|t| s[(t + m) % n] * k[t]).sum(),
                })
                .collect();
            counter.add((n * n) as u64);
            return Ok(Signal::from_vec_unchecked(out));
        }
        if k.len() > s.len() {
            return Err(Error::dims(format!(
                "kernel of {} samples longer than signal of {}",
                k.len(),
                s.len()
            )));
        }
        let kernel: Vec<f64> = match variant {
            ConvVariant::Conv => k.as_slice().to_vec(),
            _ => k.as_slice().iter().rev().copied().collect(),
        };
        let out = match self.precision {
            Precision::Single => full_conv::<f32>(s.as_slice(), &kernel, counter),
            Precision::Double => full_conv::<f64>(s.as_slice(), &kernel, counter),
        };
        Ok(Signal::from_vec_unchecked(out))
    }

    /// Overlap-save convolution. Each segment of `plan.block` samples is
    /// convolved independently and contributes `plan.hop()` outputs.
    pub fn overlap_save(&self, s: &Signal, k: &Signal, plan: &ConvPlan, counter: &MacCounter) -> Result<Signal> {
        if plan.kernel_len != k.len() {
            return Err(Error::dims(format!(
                "plan is for a {}-tap kernel, got {}",
                plan.kernel_len,
                k.len()
            )));
        }
        if plan.block < k.len() {
            return Err(Error::dims("block shorter than kernel"));
        }
        let (n, taps, w) = (s.len(), k.len(), plan.block);
        let out_len = n + taps - 1;
        let hop = plan.hop();
        let segments = out_len.div_ceil(hop);
        // Zero history in front; zeros behind so the last segment is full.
        let mut padded = vec![0.0; taps - 1];
        padded.extend_from_slice(s.as_slice());
        padded.resize((segments - 1) * hop + w, 0.0);

        let mut out = vec![0.0; segments * hop];
        match plan.mode {
            ConvMode::TimeDomain => {
                let seg_out = |seg: &[f64], dst: &mut [f64]| match self.precision {
                    Precision::Single => segment_valid::<f32>(seg, k.as_slice(), dst, counter),
                    Precision::Double => segment_valid::<f64>(seg, k.as_slice(), dst, counter),
                };
                for (j, dst) in out.chunks_exact_mut(hop).enumerate() {
                    seg_out(&padded[j * hop..j * hop + w], dst);
                }
            }
            ConvMode::FreqDomain => {
                let fft = FftConvolver::new(w.next_power_of_two(), k.as_slice());
                for (j, dst) in out.chunks_exact_mut(hop).enumerate() {
                    let full = fft.circular(&padded[j * hop..j * hop + w]);
                    dst.copy_from_slice(&full[taps - 1..w]);
                }
            }
        }
        out.truncate(out_len);
        Ok(Signal::from_vec_unchecked(out))
    }
}

/// Valid (fully overlapped) outputs of one segment: indices `N−1 .. W−1` of
/// its full convolution.
fn segment_valid<S: Real>(seg: &[f64], k: &[f64], dst: &mut [f64], counter: &MacCounter) {
    let ss = to_real::<S>(seg);
    let kr: Vec<S> = k.iter().rev().map(|&v| S::from_f64(v)).collect();
    let mut tmp = vec![S::zero(); dst.len()];
    conv_range(&ss, &kr, k.len() - 1, seg.len(), &mut tmp, counter);
    for (d, v) in dst.iter_mut().zip(tmp) {
        *d = v.to_f64();
    }
}

struct FftConvolver {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kernel_spectrum: Vec<Complex<f64>>,
}

impl FftConvolver {
    fn new(size: usize, kernel: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut kernel_spectrum: Vec<Complex<f64>> = kernel.iter().map(|&v| Complex::new(v, 0.0)).collect();
        kernel_spectrum.resize(size, Complex::new(0.0, 0.0));
        forward.process(&mut kernel_spectrum);
        FftConvolver {
            size,
            forward,
            inverse,
            kernel_spectrum,
        }
    }

    /// Circular convolution of `x` (zero-padded to `size`) with the kernel.
    fn circular(&self, x: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(self.size, Complex::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_spectrum) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// Direct evaluation in double precision.
pub fn conv_direct(s: &Signal, k: &Signal, variant: ConvVariant) -> Result<Signal> {
    ConvKernel::default().direct(s, k, variant, &MacCounter::new())
}

/// Linear convolution through a radix-2 FFT, zero-padded to the next power
/// of two at or above `s.len + k.len − 1`.
pub fn conv_fft(s: &Signal, k: &Signal) -> Result<Signal> {
    if k.len() > s.len() {
        return Err(Error::dims(format!(
            "kernel of {} samples longer than signal of {}",
            k.len(),
            s.len()
        )));
    }
    let len = s.len() + k.len() - 1;
    let fft = FftConvolver::new(len.next_power_of_two(), k.as_slice());
    let mut out = fft.circular(s.as_slice());
    out.truncate(len);
    Ok(Signal::from_vec_unchecked(out))
}

/// Overlap-save convolution in double precision.
pub fn conv_overlap_save(s: &Signal, k: &Signal, plan: &ConvPlan) -> Result<Signal> {
    ConvKernel::default().overlap_save(s, k, plan, &MacCounter::new())
}
