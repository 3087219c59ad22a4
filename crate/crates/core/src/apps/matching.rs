//! Feature matching by cross-correlation.

use std::path::Path;

use crate::conv::{ConvKernel, ConvVariant, ProjectedConvolver};
use crate::cost::{mac_conv_direct, mac_conv_proj_segmented};
use crate::counter::MacCounter;
use crate::error::{Error, Result};
use crate::gemm::{PrecisionConfig, SampleMode};
use crate::io::{read_manifest, read_signal};
use crate::matrix::Signal;
use crate::projection::ProjectionPair;
use crate::real::Precision;

/// Which correlation kernel the matcher uses.
#[derive(Debug, Clone)]
pub enum CorrelationMode {
    Conventional,
    Projected(ProjectedConvolver),
}

impl CorrelationMode {
    pub fn projected(pair: &ProjectionPair, cfg: PrecisionConfig) -> Result<Self> {
        Ok(CorrelationMode::Projected(ProjectedConvolver::new(
            pair,
            cfg,
            Precision::Double,
        )?))
    }

    pub fn label(&self) -> String {
        match self {
            CorrelationMode::Conventional => "conventional".into(),
            CorrelationMode::Projected(c) => {
                let cfg = c.config();
                format!(
                    "L={} proj={} {}",
                    cfg.projection_size(),
                    cfg.projections_used(),
                    match cfg.sample_mode() {
                        SampleMode::AllPhases => "all",
                        SampleMode::HalfInterpolate => "half",
                    }
                )
            }
        }
    }

    /// Full linear cross-correlation; index `i` holds lag `i − (k.len − 1)`.
    pub fn xcorr(&self, s: &Signal, k: &Signal, counter: &MacCounter) -> Result<Signal> {
        match self {
            CorrelationMode::Conventional => ConvKernel::default().direct(s, k, ConvVariant::Xcorr, counter),
            CorrelationMode::Projected(conv) => {
                let (taps, s_len) = projected_geometry(conv, s.len(), k.len());
                // Zeros appended to the reversed kernel leave the first
                // s.len + k.len − 1 outputs unchanged.
                let kr = k.reversed().zero_extended(taps);
                let out_len = s.len() + k.len() - 1;
                let s = s.zero_extended(s_len);
                let mut out = conv.run_overlap_save(&s, &kr, counter)?.output.into_vec();
                out.truncate(out_len);
                Signal::new(out)
            }
        }
    }

    /// MACs of one [`xcorr`](Self::xcorr) call according to the cost model.
    pub fn model_macs(&self, s_len: usize, k_len: usize) -> Result<u64> {
        match self {
            CorrelationMode::Conventional => Ok(mac_conv_direct(s_len as u64, k_len as u64)),
            CorrelationMode::Projected(conv) => {
                let cfg = conv.config();
                let (taps, s_len) = projected_geometry(conv, s_len, k_len);
                let phases = match cfg.sample_mode() {
                    SampleMode::AllPhases => cfg.projection_size(),
                    SampleMode::HalfInterpolate => 1,
                };
                mac_conv_proj_segmented(
                    s_len as u64,
                    taps as u64,
                    cfg.last_index() as u64,
                    cfg.projection_size() as u64,
                    phases as u64,
                )
            }
        }
    }
}

/// Kernel length rounded up to a multiple of `L`, and the signal length
/// after padding to at least that many samples.
fn projected_geometry(conv: &ProjectedConvolver, s_len: usize, k_len: usize) -> (usize, usize) {
    let l_size = conv.config().projection_size();
    let taps = k_len.div_ceil(l_size) * l_size;
    (taps, s_len.max(taps))
}

/// Named feature vectors.
#[derive(Debug, Clone)]
pub struct FeatureDb {
    entries: Vec<(String, Signal)>,
}

impl FeatureDb {
    pub fn new(entries: Vec<(String, Signal)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDb);
        }
        Ok(FeatureDb { entries })
    }

    /// Reads every PKS/PKSB file listed in a manifest.
    pub fn load(manifest: &Path) -> Result<Self> {
        let entries = read_manifest(manifest)?
            .into_iter()
            .map(|e| Ok((e.id, read_signal(&e.path)?)))
            .collect::<Result<Vec<_>>>()?;
        FeatureDb::new(entries)
    }

    pub fn entries(&self) -> &[(String, Signal)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Position of the winning entry in the database.
    pub index: usize,
    pub id: String,
    /// Peak `|xcorr|` divided by the entry's energy.
    pub score: f64,
    /// Lag of the peak: the query matches the entry delayed by this many
    /// samples.
    pub lag: isize,
    /// Entries skipped because they carry no energy.
    pub skipped: Vec<String>,
}

/// Scores every entry against the query and returns the best; ties go to
/// the lowest position. Zero-energy entries are skipped.
pub fn xcorr_match(query: &Signal, db: &FeatureDb, mode: &CorrelationMode) -> Result<MatchResult> {
    xcorr_match_counted(query, db, mode, &MacCounter::new())
}

pub fn xcorr_match_counted(
    query: &Signal,
    db: &FeatureDb,
    mode: &CorrelationMode,
    counter: &MacCounter,
) -> Result<MatchResult> {
    let mut best: Option<(usize, f64, isize)> = None;
    let mut skipped = Vec::new();
    for (idx, (id, entry)) in db.entries().iter().enumerate() {
        let energy = entry.energy();
        if energy == 0.0 {
            skipped.push(id.clone());
            continue;
        }
        let q = if query.len() < entry.len() {
            query.zero_extended(entry.len())
        } else {
            query.clone()
        };
        let r = mode.xcorr(&q, entry, counter)?;
        let (peak_i, peak) = r
            .as_slice()
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc },
            );
        let score = peak / energy;
        if best.is_none_or(|b| score > b.1) {
            best = Some((idx, score, peak_i as isize - (entry.len() as isize - 1)));
        }
    }
    match best {
        Some((index, score, lag)) => Ok(MatchResult {
            index,
            id: db.entries()[index].0.clone(),
            score,
            lag,
            skipped,
        }),
        None => Err(Error::ZeroEnergyEntry { id: skipped.remove(0) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::make_haar_pair;
    use crate::synth::{ar_signal, rng, AR_RHO};

    fn db(seed: u64) -> FeatureDb {
        let mut r = rng(seed);
        FeatureDb::new(vec![
            ("1".into(), ar_signal(&mut r, 64, AR_RHO)),
            ("2".into(), ar_signal(&mut r, 64, AR_RHO)),
        ])
        .unwrap()
    }

    #[test]
    fn delayed_entry_is_found() {
        let db = db(4);
        let v2 = db.entries()[1].1.as_slice();
        let mut q = vec![0.0; 200];
        q[37..37 + 64].copy_from_slice(v2);
        let q = Signal::new(q).unwrap();
        let m = xcorr_match(&q, &db, &CorrelationMode::Conventional).unwrap();
        assert_eq!((m.id.as_str(), m.lag), ("2", 37));
        let pair = make_haar_pair(2).unwrap();
        let full = CorrelationMode::projected(&pair, PrecisionConfig::full(2)).unwrap();
        let mp = xcorr_match(&q, &db, &full).unwrap();
        assert_eq!((mp.id.as_str(), mp.lag), ("2", 37));
        assert!((mp.score - m.score).abs() < 1e-12);
    }

    #[test]
    fn self_match_scores_one() {
        let db = db(5);
        let q = db.entries()[0].1.clone();
        let m = xcorr_match(&q, &db, &CorrelationMode::Conventional).unwrap();
        assert_eq!(m.index, 0);
        assert!((m.score - 1.0).abs() < 1e-9);
        assert_eq!(m.lag, 0);
    }

    #[test]
    fn odd_lengths_in_projected_mode() {
        let mut r = rng(9);
        let entry = ar_signal(&mut r, 33, AR_RHO);
        let q = ar_signal(&mut r, 90, AR_RHO);
        let pair = make_haar_pair(4).unwrap();
        let cfg = PrecisionConfig::full(4).with_sample_mode(SampleMode::AllPhases);
        let mode = CorrelationMode::projected(&pair, cfg).unwrap();
        let c = MacCounter::new();
        let exact = CorrelationMode::Conventional.xcorr(&q, &entry, &c).unwrap();
        let approx = mode.xcorr(&q, &entry, &c).unwrap();
        assert_eq!(exact.len(), approx.len());
        let err = exact
            .as_slice()
            .iter()
            .zip(approx.as_slice())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-10);
    }

    #[test]
    fn counted_macs_follow_the_model() {
        let mut r = rng(11);
        let entry = ar_signal(&mut r, 50, AR_RHO);
        let q = ar_signal(&mut r, 301, AR_RHO);
        let pair = make_haar_pair(2).unwrap();
        for mode in [SampleMode::HalfInterpolate, SampleMode::AllPhases] {
            let cfg = PrecisionConfig::new(2, 1).unwrap().with_sample_mode(mode);
            let proj = CorrelationMode::projected(&pair, cfg).unwrap();
            for m in [&CorrelationMode::Conventional, &proj] {
                let c = MacCounter::new();
                m.xcorr(&q, &entry, &c).unwrap();
                assert_eq!(c.get(), m.model_macs(301, 50).unwrap(), "{}", m.label());
            }
        }
    }

    #[test]
    fn empty_and_silent_entries() {
        assert!(matches!(FeatureDb::new(vec![]), Err(Error::EmptyDb)));
        let q = Signal::new(vec![1.0, 2.0, 3.0]).unwrap();
        let silent = FeatureDb::new(vec![("z".into(), Signal::zeros(2))]).unwrap();
        assert!(matches!(
            xcorr_match(&q, &silent, &CorrelationMode::Conventional),
            Err(Error::ZeroEnergyEntry { .. })
        ));
        let mixed = FeatureDb::new(vec![
            ("z".into(), Signal::zeros(2)),
            ("a".into(), Signal::new(vec![1.0, 1.0]).unwrap()),
        ])
        .unwrap();
        let m = xcorr_match(&q, &mixed, &CorrelationMode::Conventional).unwrap();
        assert_eq!((m.id.as_str(), m.skipped.clone()), ("a", vec!["z".to_string()]));
    }
}
