//! Blocked projected convolution.
//!
//! For output phase `φ` the signal (front-padded with `L−1` zeros) is cut
//! into groups of `L` samples starting at `φ` and each group is projected
//! onto column `l` of `C`. The kernel is projected group-wise onto row `l`
//! of `D`, read in reverse within each group. Convolving the two compacted
//! sequences gives projection `l`'s share of every `L`-th output sample;
//! summing over all `L` projections reproduces those samples exactly, and
//! truncating the sum gives the approximation.

use crate::counter::MacCounter;
use crate::error::{Error, Result};
use crate::gemm::{PrecisionConfig, SampleMode};
use crate::matrix::Signal;
use crate::projection::ProjectionPair;
use crate::real::{Precision, Real};

use super::conv_range;

/// Per-phase output offset of the blocked path, measured with impulses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentTable {
    offsets: Vec<isize>,
}

impl AlignmentTable {
    pub fn projection_size(&self) -> usize {
        self.offsets.len()
    }

    pub fn offset(&self, phase: usize) -> isize {
        self.offsets[phase]
    }

    pub fn offsets(&self) -> &[isize] {
        &self.offsets
    }
}

fn to_real<S: Real>(x: &[f64]) -> Vec<S> {
    x.iter().map(|&v| S::from_f64(v)).collect()
}

fn project_groups<S: Real>(data: &[S], phase: usize, weights: &[S]) -> Vec<S> {
    let n = weights.len();
    let tail = &data[phase.min(data.len())..];
    let chunks = tail.chunks_exact(n);
    let rem = chunks.remainder();
    let mut out: Vec<S> = chunks.map(|g| crate::real::dot(g, weights)).collect();
    if !rem.is_empty() {
        out.push(crate::real::dot(rem, &weights[..rem.len()]));
    }
    out
}

/// Reversed projected kernel for every retained projection. The kernel is
/// zero-padded to a multiple of `L`.
fn project_kernel<S: Real>(k: &[f64], pair: &ProjectionPair, p: usize, counter: &MacCounter) -> Vec<Vec<S>> {
    let n = pair.size();
    let groups = k.len().div_ceil(n);
    (0..p)
        .map(|l| {
            let d = pair.inverse_row(l);
            let mut kq: Vec<S> = (0..groups)
                .map(|j| {
                    let mut acc = S::zero();
                    for b in 0..n.min(k.len() - j * n) {
                        acc += S::from_f64(k[j * n + b]) * S::from_f64(d[n - 1 - b]);
                    }
                    acc
                })
                .collect();
            counter.add(k.len() as u64);
            kq.reverse();
            kq
        })
        .collect()
}

/// Outputs `t_lo..t_hi` of phase `phase`, summed over the projections in
/// `kq_rev`. `padded` is the signal with `L−1` leading zeros.
fn phase_sum<S: Real>(
    padded: &[S],
    phase: usize,
    columns: &[Vec<S>],
    kq_rev: &[Vec<S>],
    t_lo: usize,
    t_hi: usize,
    counter: &MacCounter,
) -> Vec<S> {
    let mut acc = vec![S::zero(); t_hi.saturating_sub(t_lo)];
    for (c, kq) in columns.iter().zip(kq_rev) {
        let sp = project_groups(padded, phase, c);
        counter.add((padded.len() - phase) as u64);
        conv_range(&sp, kq, t_lo, t_hi, &mut acc, counter);
    }
    acc
}

fn front_padded<S: Real>(s: &[f64], lead: usize, trail: usize) -> Vec<S> {
    let mut v = vec![S::zero(); lead];
    v.extend(s.iter().map(|&x| S::from_f64(x)));
    v.resize(v.len() + trail, S::zero());
    v
}

/// Measures the output offset of every phase by pushing impulses through
/// the full-projection blocked path and locating the response peak.
pub fn alignment_calibrate(pair: &ProjectionPair) -> Result<AlignmentTable> {
    let n = pair.size();
    let counter = MacCounter::new();
    let columns: Vec<Vec<f64>> = (0..n).map(|l| pair.forward_column(l).to_vec()).collect();
    let mut probe_k = vec![0.0; n];
    probe_k[0] = 1.0;
    let kq_rev = project_kernel::<f64>(&probe_k, pair, n, &counter);
    let len = 4 * n;
    let mut offsets = Vec::with_capacity(n);
    for phase in 0..n {
        let mut found = None;
        for q in 2 * n..3 * n {
            let padded = front_padded::<f64>(Signal::impulse(len, q).as_slice(), n - 1, n - 1);
            let groups = (padded.len() - phase).div_ceil(n);
            let u = phase_sum(
                &padded,
                phase,
                &columns,
                &kq_rev,
                0,
                groups + kq_rev[0].len() - 1,
                &counter,
            );
            let peak = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak < 0.5 {
                continue;
            }
            let hits: Vec<usize> = (0..u.len()).filter(|&t| u[t].abs() >= peak - 1e-9).collect();
            if hits.len() != 1 {
                return Err(Error::CalibrationFailed {
                    phase,
                    reason: format!("{} equal response maxima", hits.len()),
                });
            }
            found = Some(q as isize - phase as isize - (n * hits[0]) as isize);
            break;
        }
        match found {
            Some(off) => offsets.push(off),
            None => {
                return Err(Error::CalibrationFailed {
                    phase,
                    reason: "no impulse response".into(),
                })
            }
        }
    }
    Ok(AlignmentTable { offsets })
}

/// Linear interpolation of unknown samples between known neighbours; ends
/// take the nearest known value.
fn fill_missing(out: &mut [f64], known: &[bool]) {
    let idx: Vec<usize> = (0..out.len()).filter(|&i| known[i]).collect();
    let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
        return;
    };
    for i in 0..first {
        out[i] = out[first];
    }
    for i in last + 1..out.len() {
        out[i] = out[last];
    }
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in a + 1..b {
            let f = (i - a) as f64 / (b - a) as f64;
            out[i] = out[a] + (out[b] - out[a]) * f;
        }
    }
}

/// Result of a segmented run: the output and how many `W`-sample segments
/// were processed (summed over phases).
#[derive(Debug, Clone)]
pub struct SegmentedOutput {
    pub output: Signal,
    pub segments: usize,
}

/// A blocked projected convolution prepared for one projection pair.
#[derive(Debug, Clone)]
pub struct ProjectedConvolver {
    pair: ProjectionPair,
    cfg: PrecisionConfig,
    precision: Precision,
    alignment: AlignmentTable,
}

impl ProjectedConvolver {
    pub fn new(pair: &ProjectionPair, cfg: PrecisionConfig, precision: Precision) -> Result<Self> {
        cfg.check_pair(pair)?;
        Ok(ProjectedConvolver {
            pair: pair.clone(),
            cfg,
            precision,
            alignment: alignment_calibrate(pair)?,
        })
    }

    pub fn alignment(&self) -> &AlignmentTable {
        &self.alignment
    }

    pub fn config(&self) -> &PrecisionConfig {
        &self.cfg
    }

    fn phases(&self) -> Vec<usize> {
        match self.cfg.sample_mode() {
            SampleMode::AllPhases => (0..self.pair.size()).collect(),
            SampleMode::HalfInterpolate => vec![0],
        }
    }

    fn check(&self, s: &Signal, k: &Signal) -> Result<()> {
        let n = self.pair.size();
        if !k.len().is_multiple_of(n) {
            return Err(Error::dims(format!(
                "kernel length {} is not a multiple of the projection size {n}",
                k.len()
            )));
        }
        if k.len() > s.len() {
            return Err(Error::dims(format!(
                "kernel of {} samples longer than signal of {}",
                k.len(),
                s.len()
            )));
        }
        Ok(())
    }

    /// Range of `t` whose output position `phase + L·t + offset` lies in
    /// `0..out_len`.
    fn t_range(&self, phase: usize, out_len: usize) -> (usize, usize) {
        let n = self.pair.size() as isize;
        let base = phase as isize + self.alignment.offset(phase);
        let lo = if base >= 0 { 0 } else { (-base + n - 1) / n };
        let last = out_len as isize - 1 - base;
        let hi = if last < 0 { 0 } else { last / n + 1 };
        (lo as usize, (hi as usize).max(lo as usize))
    }

    fn place(&self, phase: usize, t_lo: usize, values: &[f64], out: &mut [f64], known: &mut [bool]) {
        let n = self.pair.size() as isize;
        let base = phase as isize + self.alignment.offset(phase);
        for (i, &v) in values.iter().enumerate() {
            let m = (base + n * (t_lo + i) as isize) as usize;
            out[m] += v;
            known[m] = true;
        }
    }

    /// Whole-signal blocked evaluation.
    pub fn run(&self, s: &Signal, k: &Signal, counter: &MacCounter) -> Result<Signal> {
        self.check(s, k)?;
        Ok(match self.precision {
            Precision::Single => self.run_typed::<f32>(s.as_slice(), k.as_slice(), counter),
            Precision::Double => self.run_typed::<f64>(s.as_slice(), k.as_slice(), counter),
        })
    }

    fn run_typed<S: Real>(&self, s: &[f64], k: &[f64], counter: &MacCounter) -> Signal {
        let n = self.pair.size();
        let p = self.cfg.projections_used();
        let out_len = s.len() + k.len() - 1;
        let kq_rev = project_kernel::<S>(k, &self.pair, p, counter);
        let columns: Vec<Vec<S>> = (0..p).map(|l| to_real(self.pair.forward_column(l))).collect();
        let padded = front_padded::<S>(s, n - 1, n - 1);
        let mut out = vec![0.0; out_len];
        let mut known = vec![false; out_len];
        for phase in self.phases() {
            let (t_lo, t_hi) = self.t_range(phase, out_len);
            let acc = phase_sum(&padded, phase, &columns, &kq_rev, t_lo, t_hi, counter);
            let vals: Vec<f64> = acc.into_iter().map(Real::to_f64).collect();
            self.place(phase, t_lo, &vals, &mut out, &mut known);
        }
        fill_missing(&mut out, &known);
        Signal::from_vec_unchecked(out)
    }

    /// Overlap-save evaluation with the minimal geometry `W = 3N + 1` for an
    /// `N`-tap kernel. Every segment projects its `W` samples and the kernel
    /// and produces `2N/L` compacted outputs per phase, so the MAC count per
    /// segment is exactly `(l+1)(4N+1) + 2(l+1)(N/L)²`.
    pub fn run_overlap_save(&self, s: &Signal, k: &Signal, counter: &MacCounter) -> Result<SegmentedOutput> {
        self.check(s, k)?;
        Ok(match self.precision {
            Precision::Single => self.segmented_typed::<f32>(s.as_slice(), k.as_slice(), counter),
            Precision::Double => self.segmented_typed::<f64>(s.as_slice(), k.as_slice(), counter),
        })
    }

    fn segmented_typed<S: Real>(&self, s: &[f64], k: &[f64], counter: &MacCounter) -> SegmentedOutput {
        let n = self.pair.size();
        let p = self.cfg.projections_used();
        let taps = k.len();
        let nd = taps / n;
        let w = 3 * taps + 1;
        let hop = 2 * nd;
        let out_len = s.len() + taps - 1;
        let columns: Vec<Vec<S>> = (0..p).map(|l| to_real(self.pair.forward_column(l))).collect();
        // (nd−1) zero groups of history ahead of the usual L−1 leading zeros.
        let lead = (nd - 1) * n + n - 1;
        let mut padded = front_padded::<S>(s, lead, 0);

        let mut out = vec![0.0; out_len];
        let mut known = vec![false; out_len];
        let mut segments = 0;
        for phase in self.phases() {
            let (t_lo, t_hi) = self.t_range(phase, out_len);
            if t_lo >= t_hi {
                continue;
            }
            let (g_lo, g_hi) = (t_lo / hop, t_hi.div_ceil(hop));
            let need = phase + n * hop * (g_hi - 1) + w;
            if padded.len() < need {
                padded.resize(need, S::zero());
            }
            let mut vals = vec![0.0; (g_hi - g_lo) * hop];
            for g in g_lo..g_hi {
                let start = phase + n * hop * g;
                let seg = &padded[start..start + w];
                let kq_rev = project_kernel::<S>(k, &self.pair, p, counter);
                let mut acc = vec![S::zero(); hop];
                for (c, kq) in columns.iter().zip(&kq_rev) {
                    let sp = project_groups(seg, 0, c);
                    counter.add(w as u64);
                    conv_range(&sp[..3 * nd], kq, nd - 1, 3 * nd - 1, &mut acc, counter);
                }
                let dst = &mut vals[(g - g_lo) * hop..(g - g_lo + 1) * hop];
                for (d, a) in dst.iter_mut().zip(acc) {
                    *d = a.to_f64();
                }
                segments += 1;
            }
            let first = t_lo - g_lo * hop;
            self.place(phase, t_lo, &vals[first..first + (t_hi - t_lo)], &mut out, &mut known);
        }
        fill_missing(&mut out, &known);
        SegmentedOutput {
            output: Signal::from_vec_unchecked(out),
            segments,
        }
    }
}

/// Blocked projected convolution in double precision.
pub fn conv_projected_blocked(s: &Signal, k: &Signal, pair: &ProjectionPair, cfg: &PrecisionConfig) -> Result<Signal> {
    ProjectedConvolver::new(pair, *cfg, Precision::Double)?.run(s, k, &MacCounter::new())
}
