//! Seeded synthetic end-to-end runs of the two pipelines.

use rand::Rng;

use crate::cost::{mac_gemm_plain_dims, mac_gemm_proj_dims};
use crate::counter::MacCounter;
use crate::error::Result;
use crate::matrix::{Matrix, Signal};
use crate::synth::{ar_image, ar_signal, rng, AR_RHO};

use super::matching::{xcorr_match_counted, CorrelationMode, FeatureDb};
use super::pca::{pca_match, train, GemmMode, TrainingSet};

/// Decisions of one pipeline run against ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoRun {
    pub decisions: Vec<usize>,
    pub truth: Vec<usize>,
    pub macs: u64,
}

impl DemoRun {
    pub fn accuracy(&self) -> f64 {
        agreement(&self.decisions, &self.truth)
    }
}

/// Fraction of positions where the two decision lists agree.
pub fn agreement(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaDemoConfig {
    pub subjects: usize,
    pub per_subject: usize,
    /// The first images of each subject go to training, the rest are queries.
    pub train_per_subject: usize,
    pub size: usize,
    pub features: usize,
    /// Amplitude of per-image variation relative to the subject prototype.
    pub variation: f64,
    pub seed: u64,
}

impl Default for PcaDemoConfig {
    fn default() -> Self {
        PcaDemoConfig {
            subjects: 10,
            per_subject: 8,
            train_per_subject: 4,
            size: 64,
            features: 10,
            variation: 0.8,
            seed: 1,
        }
    }
}

impl PcaDemoConfig {
    pub fn train_count(&self) -> usize {
        self.subjects * self.train_per_subject
    }

    pub fn query_count(&self) -> usize {
        self.subjects * (self.per_subject - self.train_per_subject)
    }

    /// MACs of [`run_pca_demo`] according to the cost model.
    pub fn model_macs(&self, mode: &GemmMode) -> Result<u64> {
        pca_model_macs(self.size, self.features, self.train_count(), self.query_count(), mode)
    }
}

/// Model MACs of training on `train` `n×n` images with `d` features and
/// recognizing `queries` images: one `n×n` by `n×n` product per training
/// image, then one `n×n` by `n×d` product per training and query image. In
/// projected mode the basis is projected once for all of them.
pub fn pca_model_macs(n: usize, d: usize, train: usize, queries: usize, mode: &GemmMode) -> Result<u64> {
    let (n, d, t, q) = (n as u64, d as u64, train as u64, queries as u64);
    Ok(match mode {
        GemmMode::Conventional => t * mac_gemm_plain_dims(n, n, n) + (t + q) * mac_gemm_plain_dims(n, n, d),
        GemmMode::Projected { pair, cfg } => {
            let (l, big_l) = (cfg.last_index() as u64, pair.size() as u64);
            let basis = (l + 1) * n.div_ceil(big_l) * big_l * d;
            t * mac_gemm_proj_dims(n, n, n, l, big_l)?
                + (t + q) * (mac_gemm_proj_dims(n, n, d, l, big_l)? - basis)
                + basis
        }
    })
}

/// Training set, subject of each training image, query images and the
/// subject of each query.
pub type SyntheticFaces = (TrainingSet, Vec<usize>, Vec<Matrix>, Vec<usize>);

/// Synthetic subjects: a low-pass prototype image each, with every sample
/// adding independent low-pass variation. Returns the training set with its
/// subject indices and the query images with theirs.
pub fn synthetic_faces(cfg: &PcaDemoConfig) -> Result<SyntheticFaces> {
    let mut r = rng(cfg.seed);
    let n = cfg.size;
    let mut train = Vec::new();
    let mut train_subj = Vec::new();
    let mut tests = Vec::new();
    let mut test_subj = Vec::new();
    for s in 0..cfg.subjects {
        let proto = ar_image(&mut r, n, n, AR_RHO);
        for k in 0..cfg.per_subject {
            let noise = ar_image(&mut r, n, n, AR_RHO);
            let img = proto.add(&noise.scale(cfg.variation))?;
            if k < cfg.train_per_subject {
                train.push(img);
                train_subj.push(s);
            } else {
                let mean = img.mean();
                tests.push(Matrix::from_fn(n, n, |i, j| img[(i, j)] - mean));
                test_subj.push(s);
            }
        }
    }
    let labels = train_subj.iter().map(|s| format!("s{s}")).collect();
    Ok((TrainingSet::new(train, labels)?, train_subj, tests, test_subj))
}

/// Trains, extracts query features and recognizes every query. Decisions
/// are subject indices.
pub fn run_pca_demo(cfg: &PcaDemoConfig, mode: &GemmMode) -> Result<DemoRun> {
    let (set, train_subj, tests, truth) = synthetic_faces(cfg)?;
    let counter = MacCounter::new();
    let decisions = recognize(&set, &tests, cfg.features, mode, &counter)?
        .into_iter()
        .map(|i| train_subj[i])
        .collect();
    Ok(DemoRun {
        decisions,
        truth,
        macs: counter.get(),
    })
}

/// Index of the nearest training image for every query.
fn recognize(
    set: &TrainingSet,
    queries: &[Matrix],
    d: usize,
    mode: &GemmMode,
    counter: &MacCounter,
) -> Result<Vec<usize>> {
    let (_, gallery, extractor) = train(set, d, mode, counter)?;
    queries
        .iter()
        .map(|b| pca_match(&extractor.extract(b, counter)?, &gallery))
        .collect()
}

/// Recognition over labelled data. Labels are numbered in order of first
/// appearance in the training set; a decision is the number of the nearest
/// training image's label, and a query whose label never occurs in
/// training has truth `usize::MAX`.
pub fn run_pca_dataset(set: &TrainingSet, queries: &[(String, Matrix)], d: usize, mode: &GemmMode) -> Result<DemoRun> {
    let mut subjects: Vec<&str> = Vec::new();
    for l in set.labels() {
        if !subjects.contains(&l.as_str()) {
            subjects.push(l);
        }
    }
    let number = |label: &str| subjects.iter().position(|s| *s == label).unwrap_or(usize::MAX);
    let images: Vec<Matrix> = queries.iter().map(|(_, m)| m.clone()).collect();
    let counter = MacCounter::new();
    let decisions = recognize(set, &images, d, mode, &counter)?
        .into_iter()
        .map(|i| number(&set.labels()[i]))
        .collect();
    Ok(DemoRun {
        decisions,
        truth: queries.iter().map(|(l, _)| number(l)).collect(),
        macs: counter.get(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchDemoConfig {
    pub entries: usize,
    pub queries: usize,
    pub entry_len: usize,
    pub query_len: usize,
    /// Amplitude of the low-pass background the entry is embedded in.
    pub noise: f64,
    pub seed: u64,
}

impl Default for MatchDemoConfig {
    fn default() -> Self {
        MatchDemoConfig {
            entries: 20,
            queries: 100,
            entry_len: 256,
            query_len: 1024,
            noise: 0.5,
            seed: 1,
        }
    }
}

impl MatchDemoConfig {
    /// MACs of [`run_match_demo`] according to the cost model: one
    /// correlation of every query with every entry.
    pub fn model_macs(&self, mode: &CorrelationMode) -> Result<u64> {
        Ok((self.queries * self.entries) as u64 * mode.model_macs(self.query_len, self.entry_len)?)
    }
}

/// Model MACs of matching queries of the given lengths against `db`.
/// Silent entries are skipped and short queries are zero-extended to the
/// entry length, as the matcher does.
pub fn match_model_macs(db: &FeatureDb, query_lens: &[usize], mode: &CorrelationMode) -> Result<u64> {
    let mut total = 0;
    for &q in query_lens {
        for (_, e) in db.entries() {
            if e.energy() != 0.0 {
                total += mode.model_macs(q.max(e.len()), e.len())?;
            }
        }
    }
    Ok(total)
}

/// A database of low-pass entries and queries that embed a random entry at
/// a random delay in low-pass background. Returns the database, queries and
/// the true entry index of each query.
pub fn synthetic_matching(cfg: &MatchDemoConfig) -> Result<(FeatureDb, Vec<Signal>, Vec<usize>)> {
    let mut r = rng(cfg.seed);
    let entries: Vec<(String, Signal)> = (0..cfg.entries)
        .map(|i| (format!("e{i}"), ar_signal(&mut r, cfg.entry_len, AR_RHO)))
        .collect();
    let mut queries = Vec::with_capacity(cfg.queries);
    let mut truth = Vec::with_capacity(cfg.queries);
    for _ in 0..cfg.queries {
        let which = r.random_range(0..cfg.entries);
        let at = r.random_range(0..=cfg.query_len - cfg.entry_len);
        let mut q: Vec<f64> = ar_signal(&mut r, cfg.query_len, AR_RHO)
            .into_vec()
            .into_iter()
            .map(|v| v * cfg.noise)
            .collect();
        for (d, s) in q[at..].iter_mut().zip(entries[which].1.as_slice()) {
            *d += s;
        }
        queries.push(Signal::new(q)?);
        truth.push(which);
    }
    Ok((FeatureDb::new(entries)?, queries, truth))
}

pub fn run_match_demo(cfg: &MatchDemoConfig, mode: &CorrelationMode) -> Result<DemoRun> {
    let (db, queries, truth) = synthetic_matching(cfg)?;
    let counter = MacCounter::new();
    Ok(DemoRun {
        decisions: best_entries(&db, &queries, mode, &counter)?,
        truth,
        macs: counter.get(),
    })
}

fn best_entries(
    db: &FeatureDb,
    queries: &[Signal],
    mode: &CorrelationMode,
    counter: &MacCounter,
) -> Result<Vec<usize>> {
    queries
        .iter()
        .map(|q| Ok(xcorr_match_counted(q, db, mode, counter)?.index))
        .collect()
}

/// Matching over labelled queries. Each query's id names its true entry;
/// decisions and truth are database positions, with `usize::MAX` for ids
/// absent from the database.
pub fn run_match_dataset(db: &FeatureDb, queries: &[(String, Signal)], mode: &CorrelationMode) -> Result<DemoRun> {
    let signals: Vec<Signal> = queries.iter().map(|(_, s)| s.clone()).collect();
    let counter = MacCounter::new();
    let decisions = best_entries(db, &signals, mode, &counter)?;
    let truth = queries
        .iter()
        .map(|(id, _)| db.entries().iter().position(|(e, _)| e == id).unwrap_or(usize::MAX))
        .collect();
    Ok(DemoRun {
        decisions,
        truth,
        macs: counter.get(),
    })
}
