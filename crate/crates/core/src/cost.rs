//! Closed-form MAC and memory-transfer models.
//!
//! `n` is the subblock size for GEMM and the kernel length for CONV, `l` the
//! highest projection index computed (so `l + 1` projections) and `big_l`
//! the projection size. CONV models assume the minimal overlap-save segment
//! of `3N + 1` samples. Frequency-domain counts are approximations and are
//! rounded to the nearest integer.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Gemm,
    ConvTime,
    ConvFreq,
}

impl Domain {
    pub fn is_conv(self) -> bool {
        !matches!(self, Domain::Gemm)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Gemm => "gemm",
            Domain::ConvTime => "conv-time",
            Domain::ConvFreq => "conv-freq",
        })
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gemm" => Ok(Domain::Gemm),
            "conv-time" | "conv_time" => Ok(Domain::ConvTime),
            "conv-freq" | "conv_freq" | "conv" => Ok(Domain::ConvFreq),
            _ => Err(Error::Config(format!("unknown cost domain {s:?}"))),
        }
    }
}

fn domain_err(msg: String) -> Error {
    Error::DomainError(msg)
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(domain_err("size N must be at least 1".into()));
    }
    Ok(())
}

fn check_proj(n: u64, l: u64, big_l: u64) -> Result<()> {
    check_n(n)?;
    if big_l < 2 {
        return Err(domain_err(format!("projection size must be at least 2, got {big_l}")));
    }
    if l >= big_l {
        return Err(domain_err(format!("projection index {l} not below L={big_l}")));
    }
    Ok(())
}

fn check_divisible(n: u64, big_l: u64) -> Result<()> {
    if !n.is_multiple_of(big_l) {
        return Err(domain_err(format!("N={n} is not divisible by L={big_l}")));
    }
    Ok(())
}

/// `N³`.
pub fn mac_gemm_plain(n: u64) -> Result<u64> {
    check_n(n)?;
    Ok(n * n * n)
}

/// `N²[(l+1)N/L + 3l + 2]`; requires `L | N`.
pub fn mac_gemm_proj(n: u64, l: u64, big_l: u64) -> Result<u64> {
    check_proj(n, l, big_l)?;
    check_divisible(n, big_l)?;
    Ok(n * n * ((l + 1) * n / big_l + 3 * l + 2))
}

/// `2N²`.
pub fn mac_conv_plain_time(n: u64) -> Result<u64> {
    check_n(n)?;
    Ok(2 * n * n)
}

fn fft_conv_estimate(n: u64) -> f64 {
    let n = n as f64;
    (45.0 * n + 15.0) * (3.0 * n + 1.0).log2() + 3.0 * n + 1.0
}

/// `(45N+15)·log₂(3N+1) + 3N + 1`, rounded.
pub fn mac_conv_plain_freq(n: u64) -> Result<u64> {
    check_n(n)?;
    Ok(fft_conv_estimate(n).round() as u64)
}

/// `(l+1)(4N+1) + 2(l+1)⌈N/L⌉²`.
pub fn mac_conv_proj_time(n: u64, l: u64, big_l: u64) -> Result<u64> {
    check_proj(n, l, big_l)?;
    let c = n.div_ceil(big_l);
    Ok((l + 1) * (4 * n + 1) + 2 * (l + 1) * c * c)
}

/// `(l+1)(4N+1) + (l+1)[(45c+15)·log₂(3c+1) + 3c + 1]` with `c = ⌈N/L⌉`,
/// rounded.
pub fn mac_conv_proj_freq(n: u64, l: u64, big_l: u64) -> Result<u64> {
    check_proj(n, l, big_l)?;
    let c = n.div_ceil(big_l);
    let p = (l + 1) as f64;
    Ok((p * (4 * n + 1) as f64 + p * fft_conv_estimate(c)).round() as u64)
}

pub fn mac_plain(domain: Domain, n: u64) -> Result<u64> {
    match domain {
        Domain::Gemm => mac_gemm_plain(n),
        Domain::ConvTime => mac_conv_plain_time(n),
        Domain::ConvFreq => mac_conv_plain_freq(n),
    }
}

pub fn mac_proj(domain: Domain, n: u64, l: u64, big_l: u64) -> Result<u64> {
    match domain {
        Domain::Gemm => mac_gemm_proj(n, l, big_l),
        Domain::ConvTime => mac_conv_proj_time(n, l, big_l),
        Domain::ConvFreq => mac_conv_proj_freq(n, l, big_l),
    }
}

/// Conventional `M×K` by `K×W` product: `MKW`.
pub fn mac_gemm_plain_dims(m: u64, k: u64, w: u64) -> u64 {
    m * k * w
}

/// Projected `M×K` by `K×W` product with `K` zero-padded to `K'`, a
/// multiple of `L`: `(l+1)K'(M+W) + (l+1)M(K'/L)W + lMW`. Reduces to
/// [`mac_gemm_proj`] for `M = K = W = N`.
pub fn mac_gemm_proj_dims(m: u64, k: u64, w: u64, l: u64, big_l: u64) -> Result<u64> {
    check_proj(m.min(k).min(w), l, big_l)?;
    let kp = k.div_ceil(big_l) * big_l;
    let p = l + 1;
    Ok(p * kp * (m + w) + p * m * (kp / big_l) * w + l * m * w)
}

/// Full linear convolution of `s_len` samples with `k_len` taps.
pub fn mac_conv_direct(s_len: u64, k_len: u64) -> u64 {
    s_len * k_len
}

/// Number of `3N + 1`-sample segments the projected overlap-save path
/// processes for one output phase of a length-`s_len` signal.
pub fn conv_proj_segments(s_len: u64, n: u64, big_l: u64) -> Result<u64> {
    check_proj(n, 0, big_l)?;
    let outputs = (s_len + n - 2) / big_l + 1;
    Ok(outputs.div_ceil(2 * n.div_ceil(big_l)))
}

/// MACs of the projected overlap-save path over output phases `0..phases`:
/// the segments of every phase times [`mac_conv_proj_time`]. Half-samples
/// mode evaluates one phase, the all-samples mode `L`.
pub fn mac_conv_proj_segmented(s_len: u64, n: u64, l: u64, big_l: u64, phases: u64) -> Result<u64> {
    check_proj(n, l, big_l)?;
    check_divisible(n, big_l)?;
    if phases == 0 || phases > big_l {
        return Err(domain_err(format!("phase count {phases} not in 1..={big_l}")));
    }
    if s_len < n {
        return Err(domain_err(format!("signal of {s_len} samples shorter than N={n}")));
    }
    let per = mac_conv_proj_time(n, l, big_l)?;
    let mut segments = 0;
    for phase in 0..phases {
        // Phase φ yields ⌈(s_len + N − 1 − φ)/L⌉ outputs, the phase-0 count
        // of a signal φ samples shorter.
        segments += conv_proj_segments(s_len - phase, n, big_l)?;
    }
    Ok(segments * per)
}

/// Number of `3N + 1`-sample segments a conventional overlap-save pass with
/// `2N` outputs per segment needs for a length-`s_len` signal.
pub fn conv_plain_segments(s_len: u64, n: u64) -> Result<u64> {
    check_n(n)?;
    Ok((s_len + n - 1).div_ceil(2 * n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemTransfer {
    pub plain_bits: u64,
    pub proj_bits: u64,
    /// `(1 − (l+1)/L)·100`.
    pub reduction_percent: f64,
}

impl MemTransfer {
    /// Reduction computed from the bit counts themselves; differs from
    /// `reduction_percent` by less than one `b_repr` quantum for CONV.
    pub fn bits_reduction_percent(&self) -> f64 {
        (1.0 - self.proj_bits as f64 / self.plain_bits as f64) * 100.0
    }
}

/// Bits moved to the kernels. GEMM: `2N²b` plain and `2(l+1)N²b/L`
/// projected. CONV: `(4N+1)b` plain and `⌈(l+1)(4N+1)/L⌉b` projected.
pub fn mem_transfer(domain: Domain, n: u64, l: u64, big_l: u64, b_repr: u64) -> Result<MemTransfer> {
    check_proj(n, l, big_l)?;
    check_b_repr(b_repr)?;
    let p = l + 1;
    let (plain_bits, proj_bits) = match domain {
        Domain::Gemm => {
            check_divisible(n, big_l)?;
            (2 * n * n * b_repr, 2 * p * n * n * b_repr / big_l)
        }
        Domain::ConvTime | Domain::ConvFreq => {
            let words = 4 * n + 1;
            (words * b_repr, (p * words).div_ceil(big_l) * b_repr)
        }
    };
    Ok(MemTransfer {
        plain_bits,
        proj_bits,
        reduction_percent: (1.0 - p as f64 / big_l as f64) * 100.0,
    })
}

fn check_b_repr(b_repr: u64) -> Result<()> {
    if b_repr != 32 && b_repr != 64 {
        return Err(domain_err(format!("b_repr must be 32 or 64, got {b_repr}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRow {
    pub domain: Domain,
    pub n: u64,
    pub projection_size: u64,
    pub l: u64,
    pub ratio_percent: f64,
}

pub const RATIO_CSV_HEADER: &str = "domain,N,L,l,ratio_percent";

/// `C_proj / C_plain · 100` for every `(N, L)` pair, `N` outer.
pub fn ratio_table(domain: Domain, ns: &[u64], ls: &[u64], l: u64) -> Result<Vec<RatioRow>> {
    let mut rows = Vec::with_capacity(ns.len() * ls.len());
    for &n in ns {
        let plain = mac_plain(domain, n)? as f64;
        for &big_l in ls {
            let proj = mac_proj(domain, n, l, big_l)? as f64;
            rows.push(RatioRow {
                domain,
                n,
                projection_size: big_l,
                l,
                ratio_percent: proj / plain * 100.0,
            });
        }
    }
    Ok(rows)
}

pub fn write_ratio_csv<W: Write>(mut out: W, rows: &[RatioRow]) -> io::Result<()> {
    writeln!(out, "{RATIO_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.4}",
            r.domain, r.n, r.projection_size, r.l, r.ratio_percent
        )?;
    }
    Ok(())
}

/// Model counts for `instances` kernel invocations, optionally paired with
/// an instrumented measurement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    pub domain: Domain,
    pub n: u64,
    /// `(l, L)` for projected runs.
    pub projection: Option<(u64, u64)>,
    pub b_repr: u64,
    pub instances: u64,
    pub macs_model: u64,
    pub macs_measured: Option<u64>,
    pub bytes_model: u64,
}

impl CostReport {
    pub fn plain(domain: Domain, n: u64, b_repr: u64, instances: u64) -> Result<Self> {
        check_b_repr(b_repr)?;
        let macs = mac_plain(domain, n)?;
        let bits = match domain {
            Domain::Gemm => 2 * n * n * b_repr,
            _ => (4 * n + 1) * b_repr,
        };
        Ok(CostReport {
            domain,
            n,
            projection: None,
            b_repr,
            instances,
            macs_model: macs * instances,
            macs_measured: None,
            bytes_model: bits * instances / 8,
        })
    }

    pub fn projected(domain: Domain, n: u64, l: u64, big_l: u64, b_repr: u64, instances: u64) -> Result<Self> {
        let macs = mac_proj(domain, n, l, big_l)?;
        let mem = mem_transfer(domain, n, l, big_l, b_repr)?;
        Ok(CostReport {
            domain,
            n,
            projection: Some((l, big_l)),
            b_repr,
            instances,
            macs_model: macs * instances,
            macs_measured: None,
            bytes_model: mem.proj_bits * instances / 8,
        })
    }

    pub fn with_measured(mut self, macs: u64) -> Self {
        self.macs_measured = Some(macs);
        self
    }
}

/// Checks that the instrumented count equals the model exactly.
pub fn validate_counters(report: CostReport) -> Result<CostReport> {
    match report.macs_measured {
        Some(m) if m == report.macs_model => Ok(report),
        Some(m) => Err(Error::CounterMismatch {
            measured: m,
            model: report.macs_model,
        }),
        None => Err(Error::invalid("cost report carries no measured count")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_values() {
        assert_eq!(mac_gemm_plain(144).unwrap(), 2_985_984);
        assert_eq!(mac_gemm_plain(1).unwrap(), 1);
        assert_eq!(mac_gemm_plain(2).unwrap(), 8);
        assert_eq!(mac_gemm_proj(144, 0, 8).unwrap(), 414_720);
        assert_eq!(mac_gemm_proj(144, 7, 8).unwrap(), 3_462_912);
        assert_eq!(mac_gemm_proj(16, 0, 8).unwrap(), 1024);
        for big_l in [2u64, 4, 8] {
            let n = big_l;
            assert_eq!(mac_gemm_proj(n, big_l - 1, big_l).unwrap(), n * n * (n + 3 * big_l - 1));
        }
        assert!(matches!(mac_gemm_proj(144, 8, 8), Err(Error::DomainError(_))));
        assert!(mac_gemm_proj(20, 0, 8).is_err());
        assert!(mac_gemm_plain(0).is_err());
    }

    #[test]
    fn gemm_dims_reduce_to_square() {
        for (n, l, big_l) in [(16, 0, 8), (144, 3, 8), (40, 1, 2)] {
            assert_eq!(
                mac_gemm_proj_dims(n, n, n, l, big_l).unwrap(),
                mac_gemm_proj(n, l, big_l).unwrap()
            );
        }
        assert_eq!(mac_gemm_plain_dims(144, 40, 144), 829_440);
    }

    #[test]
    fn segmented_model() {
        // 20000 + 599 outputs in phase 0: 10300 compacted, 600 per segment.
        assert_eq!(conv_proj_segments(20_000, 600, 2).unwrap(), 18);
        assert_eq!(mac_conv_proj_segmented(20_000, 600, 0, 2, 1).unwrap(), 18 * 182_401);
        // Phase 1 has 10299 outputs, still 18 segments.
        assert_eq!(mac_conv_proj_segmented(20_000, 600, 0, 2, 2).unwrap(), 36 * 182_401);
        assert!(mac_conv_proj_segmented(20_000, 600, 0, 2, 3).is_err());
        assert!(mac_conv_proj_segmented(100, 600, 0, 2, 1).is_err());
    }

    #[test]
    fn conv_values() {
        assert_eq!(mac_conv_plain_time(600).unwrap(), 720_000);
        assert_eq!(mac_conv_plain_time(1).unwrap(), 2);
        assert_eq!(mac_conv_plain_freq(600).unwrap(), 293_957);
        assert_eq!(mac_conv_proj_time(600, 0, 2).unwrap(), 182_401);
        assert_eq!(mac_conv_proj_time(600, 1, 2).unwrap(), 364_802);
        for big_l in [2u64, 8] {
            assert_eq!(mac_conv_proj_time(big_l, 0, big_l).unwrap(), 4 * big_l + 1 + 2);
        }
        assert_eq!(mac_conv_proj_freq(600, 0, 2).unwrap(), 135_957);
    }

    #[test]
    fn memory() {
        let g = mem_transfer(Domain::Gemm, 144, 0, 8, 32).unwrap();
        assert_eq!((g.plain_bits, g.proj_bits), (1_327_104, 165_888));
        assert_eq!(g.reduction_percent, 87.5);
        assert_eq!(g.bits_reduction_percent(), 87.5);
        let c = mem_transfer(Domain::ConvTime, 600, 0, 2, 32).unwrap();
        assert_eq!(c.plain_bits, 76_832);
        assert_eq!(c.proj_bits, 1201 * 32);
        assert_eq!(c.reduction_percent, 50.0);
        assert!((c.bits_reduction_percent() - 50.0).abs() * c.plain_bits as f64 / 100.0 <= 32.0);
        assert_eq!(
            mem_transfer(Domain::Gemm, 144, 7, 8, 64).unwrap().reduction_percent,
            0.0
        );
        assert!(mem_transfer(Domain::Gemm, 144, 0, 8, 16).is_err());
    }

    #[test]
    fn ratios_and_csv() {
        let rows = ratio_table(Domain::Gemm, &[144], &[2, 4, 8, 16], 0).unwrap();
        let mut buf = Vec::new();
        write_ratio_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "domain,N,L,l,ratio_percent\n\
             gemm,144,2,0,51.3889\n\
             gemm,144,4,0,26.3889\n\
             gemm,144,8,0,13.8889\n\
             gemm,144,16,0,7.6389\n"
        );
        let conv = ratio_table(Domain::ConvFreq, &[600, 1200], &[2, 4, 8, 16], 0).unwrap();
        for pair in conv.windows(2).filter(|w| w[0].n == w[1].n) {
            assert!(pair[1].ratio_percent < pair[0].ratio_percent);
        }
        assert!(ratio_table(Domain::Gemm, &[144], &[1], 0).is_err());
    }

    #[test]
    fn asymptotic_gemm_ratio() {
        for big_l in [2u64, 8] {
            let n = 10_000 * big_l;
            let r = mac_gemm_proj(n, 0, big_l).unwrap() as f64 / mac_gemm_plain(n).unwrap() as f64;
            assert!((r * big_l as f64 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn counter_validation() {
        let r = CostReport::plain(Domain::Gemm, 16, 64, 1).unwrap().with_measured(4096);
        assert!(validate_counters(r).is_ok());
        let r = CostReport::projected(Domain::Gemm, 16, 0, 8, 64, 1)
            .unwrap()
            .with_measured(1000);
        assert!(matches!(
            validate_counters(r),
            Err(Error::CounterMismatch {
                measured: 1000,
                model: 1024
            })
        ));
        assert!(CostReport::plain(Domain::Gemm, 0, 64, 1).is_err());
    }

    #[test]
    fn segment_counts() {
        assert_eq!(conv_proj_segments(3 * 16 + 1, 16, 2).unwrap(), 2);
        assert_eq!(conv_plain_segments(20_000, 600).unwrap(), 18);
    }
}
