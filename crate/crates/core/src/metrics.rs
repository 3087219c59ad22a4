//! Fidelity and throughput measurement.

use std::io::{self, Write};
use std::time::Instant;

use crate::error::{Error, Result};

/// Reported when the approximation is exact (or better than double
/// precision can express).
pub const SNR_CAP_DB: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrReport {
    pub snr_db: f64,
    pub mse: f64,
    pub n: usize,
    /// Error energy was zero or the ratio exceeded the cap.
    pub exact: bool,
}

/// `10·log₁₀(Σr² / Σ(r − r̂)²)`, capped at [`SNR_CAP_DB`].
pub fn snr(reference: &[f64], approx: &[f64]) -> Result<SnrReport> {
    if reference.len() != approx.len() {
        return Err(Error::dims(format!(
            "reference has {} samples, approximation {}",
            reference.len(),
            approx.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::dims("SNR of an empty sequence"));
    }
    let signal: f64 = reference.iter().map(|r| r * r).sum();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let error: f64 = reference.iter().zip(approx).map(|(r, a)| (r - a) * (r - a)).sum();
    let mse = error / reference.len() as f64;
    let db = if error == 0.0 {
        SNR_CAP_DB
    } else {
        10.0 * (signal / error).log10()
    };
    Ok(SnrReport {
        snr_db: db.min(SNR_CAP_DB),
        mse,
        n: reference.len(),
        exact: db >= SNR_CAP_DB,
    })
}

/// SNR over `reference[border .. len − border]`.
pub fn snr_interior(reference: &[f64], approx: &[f64], border: usize) -> Result<SnrReport> {
    if reference.len() != approx.len() {
        return Err(Error::dims(format!(
            "reference has {} samples, approximation {}",
            reference.len(),
            approx.len()
        )));
    }
    if 2 * border >= reference.len() {
        return Err(Error::dims(format!(
            "border of {border} leaves no interior in {} samples",
            reference.len()
        )));
    }
    let end = reference.len() - border;
    snr(&reference[border..end], &approx[border..end])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputReport {
    pub samples_produced: usize,
    /// Median wall time of one run.
    pub wall_seconds: f64,
    pub mean_seconds: f64,
    pub repetitions: usize,
    pub msamples_per_sec: f64,
    /// Fewer than three timed runs.
    pub low_confidence: bool,
}

/// Times `task` `repetitions` times after one untimed warm-up run. The task
/// returns the number of output samples it produced, which must not vary.
pub fn measure_throughput(repetitions: usize, mut task: impl FnMut() -> usize) -> Result<ThroughputReport> {
    if repetitions == 0 {
        return Err(Error::invalid("at least one repetition is required"));
    }
    let samples = task();
    let mut times = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let produced = task();
        times.push(start.elapsed().as_secs_f64());
        if produced != samples {
            return Err(Error::invalid(format!(
                "task produced {produced} samples after {samples} on warm-up"
            )));
        }
    }
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    let median = if times.len() % 2 == 1 {
        times[mid]
    } else {
        0.5 * (times[mid - 1] + times[mid])
    };
    let wall = median.max(1e-9);
    Ok(ThroughputReport {
        samples_produced: samples,
        wall_seconds: wall,
        mean_seconds: times.iter().sum::<f64>() / times.len() as f64,
        repetitions,
        msamples_per_sec: samples as f64 / wall / 1e6,
        low_confidence: repetitions < 3,
    })
}

pub const METRICS_CSV_HEADER: &str = "kernel,config,snr_db,mse,msamples_per_sec,macs_model,macs_measured";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub kernel: String,
    pub config: String,
    pub snr: Option<SnrReport>,
    pub throughput: Option<ThroughputReport>,
    pub macs_model: Option<u64>,
    pub macs_measured: Option<u64>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the header, `comments` as `#` lines, the rows, then one `#` line
/// per timed row with its mean wall time.
pub fn write_metrics_csv<W: Write>(mut out: W, comments: &[String], rows: &[MetricsRow]) -> io::Result<()> {
    writeln!(out, "{METRICS_CSV_HEADER}")?;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    for r in rows {
        let (snr_db, mse) = match r.snr {
            Some(s) => (format!("{:.4}", s.snr_db), format!("{:.6e}", s.mse)),
            None => (String::new(), String::new()),
        };
        let tput = r.throughput.map(|t| format!("{:.4}", t.msamples_per_sec));
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.kernel,
            r.config,
            snr_db,
            mse,
            opt(tput),
            opt(r.macs_model),
            opt(r.macs_measured)
        )?;
    }
    for r in rows {
        if let Some(t) = r.throughput {
            writeln!(
                out,
                "# mean_seconds {} {} {:.9} over {} runs{}",
                r.kernel,
                r.config,
                t.mean_seconds,
                t.repetitions,
                if t.low_confidence { " (low confidence)" } else { "" }
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_examples() {
        let r = snr(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.snr_db, SNR_CAP_DB);
        assert!(r.exact);
        assert_eq!(snr(&[1.0, 1.0], &[0.0, 0.0]).unwrap().snr_db, 0.0);
        let r = snr(&[3.0, 4.0], &[3.0, 4.5]).unwrap();
        assert!((r.snr_db - 20.0).abs() < 1e-12);
        assert!((r.mse - 0.125).abs() < 1e-15);
        assert!(matches!(snr(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::ZeroReference)));
        assert!(matches!(snr(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn interior_excludes_borders() {
        let r = [9.0, 1.0, 2.0, 9.0];
        let a = [0.0, 1.0, 2.0, 0.0];
        assert!(snr_interior(&r, &a, 1).unwrap().exact);
        assert!(snr_interior(&r, &a, 2).is_err());
    }

    #[test]
    fn throughput_arithmetic() {
        let rep = measure_throughput(5, || 144 * 144).unwrap();
        assert_eq!(rep.samples_produced, 20_736);
        assert!((rep.msamples_per_sec - 0.020736 / rep.wall_seconds).abs() < 1e-9 * rep.msamples_per_sec);
        assert!(!rep.low_confidence);
        assert!(measure_throughput(1, || 3).unwrap().low_confidence);
        assert!(measure_throughput(0, || 3).is_err());
        let mut n = 0;
        assert!(measure_throughput(2, || {
            n += 1;
            n
        })
        .is_err());
    }

    #[test]
    fn csv_layout() {
        let row = MetricsRow {
            kernel: "gemm-projected".into(),
            config: "L=8 proj=1".into(),
            snr: Some(snr(&[3.0, 4.0], &[3.0, 4.5]).unwrap()),
            throughput: None,
            macs_model: Some(1024),
            macs_measured: Some(1024),
        };
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &["note".into()], &[row]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "kernel,config,snr_db,mse,msamples_per_sec,macs_model,macs_measured\n\
             # note\n\
             gemm-projected,L=8 proj=1,20.0000,1.250000e-1,,1024,1024\n"
        );
    }
}
