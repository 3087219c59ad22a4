use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use projscale::apps::{
    agreement, ingest_images, match_model_macs, pca_model_macs, run_match_dataset, run_match_demo, run_pca_dataset,
    run_pca_demo, CorrelationMode, DemoRun, FeatureDb, GemmMode, ImageFormat, MatchDemoConfig, PcaDemoConfig,
};
use projscale::io::{read_manifest, read_signal};
use projscale::{measure_throughput, Error, Matrix, Precision, PrecisionConfig, Result, SampleMode, Signal};

use crate::bench::check_counted;
use crate::{config_err, output, write_err, Global, PairKind, SamplesArg};

pub const DEMO_CSV_HEADER: &str = "mode,config,accuracy,agreement,decisions_per_sec,macs_model,macs_measured";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Pgm,
    Pkm,
}

#[derive(Args, Debug)]
pub struct PcaArgs {
    /// Use a seeded synthetic corpus instead of image manifests.
    #[arg(long)]
    synthetic: bool,
    /// Manifest of training images; the id column is the subject label.
    #[arg(long, conflicts_with = "synthetic", requires = "query")]
    train: Option<PathBuf>,
    /// Manifest of query images labelled like the training manifest.
    #[arg(long, conflicts_with = "synthetic", requires = "train")]
    query: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Pgm)]
    format: FormatArg,
    /// Centre-crop or pad every image to this square size.
    #[arg(long)]
    crop: Option<usize>,
    #[arg(long, default_value_t = 10)]
    subjects: usize,
    #[arg(long, default_value_t = 8)]
    per_subject: usize,
    /// Images per subject used for training; the rest are queries.
    #[arg(long, default_value_t = 4)]
    train_per_subject: usize,
    /// Side of the synthetic images.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Number of eigenvectors D.
    #[arg(long, default_value_t = 10)]
    features: usize,
    /// Projection sizes to compare against the conventional pipeline.
    #[arg(long = "L", value_delimiter = ',', default_values_t = [8usize])]
    big_l: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    proj: usize,
    #[arg(long, value_enum, default_value_t = PairKind::Dct)]
    pair: PairKind,
}

#[derive(Args, Debug)]
pub struct MatchArgs {
    /// Use a seeded synthetic corpus instead of signal manifests.
    #[arg(long)]
    synthetic: bool,
    /// Manifest of database signals.
    #[arg(long, conflicts_with = "synthetic", requires = "query")]
    db: Option<PathBuf>,
    /// Manifest of query signals; each id names the expected entry.
    #[arg(long, conflicts_with = "synthetic", requires = "db")]
    query: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    entries: usize,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 256)]
    entry_len: usize,
    #[arg(long, default_value_t = 1024)]
    query_len: usize,
    /// Projection sizes to compare against the conventional pipeline.
    #[arg(long = "L", value_delimiter = ',', default_values_t = [2usize])]
    big_l: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    proj: usize,
    #[arg(long, value_enum, default_value_t = SamplesArg::Half)]
    samples: SamplesArg,
    #[arg(long, value_enum, default_value_t = PairKind::Haar)]
    pair: PairKind,
}

struct DemoRow {
    mode: String,
    config: String,
    run: DemoRun,
    model: u64,
    decisions_per_sec: f64,
    mean_seconds: f64,
}

/// Runs `pipeline` once for its decisions and MACs, checks the count
/// against `model`, then times it.
fn evaluate(
    g: &Global,
    mode: String,
    config: String,
    model: u64,
    mut pipeline: impl FnMut() -> Result<DemoRun>,
) -> Result<DemoRow> {
    let run = pipeline()?;
    check_counted(run.macs, model)?;
    let t = measure_throughput(g.reps, || pipeline().expect("pipeline already ran").decisions.len())?;
    Ok(DemoRow {
        mode,
        config,
        run,
        model,
        decisions_per_sec: t.msamples_per_sec * 1e6,
        mean_seconds: t.mean_seconds,
    })
}

fn write_demo(g: &Global, name: &str, comments: &[String], rows: &[DemoRow]) -> Result<()> {
    let baseline = &rows[0].run.decisions;
    let mut sink = output(g)?;
    let mut body = || -> std::io::Result<()> {
        writeln!(sink, "{DEMO_CSV_HEADER}")?;
        for c in comments {
            writeln!(sink, "# {c}")?;
        }
        for r in rows {
            writeln!(
                sink,
                "{},{},{:.4},{:.4},{:.4},{},{}",
                r.mode,
                r.config,
                r.run.accuracy(),
                agreement(&r.run.decisions, baseline),
                r.decisions_per_sec,
                r.model,
                r.run.macs
            )?;
        }
        for r in rows {
            writeln!(
                sink,
                "# mean_seconds {} {} {:.9} over {} runs",
                r.mode, r.config, r.mean_seconds, g.reps
            )?;
        }
        sink.flush()
    };
    body().map_err(write_err(g))?;
    let summary: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{} {}: accuracy {:.4} agreement {:.4}",
                r.mode,
                r.config,
                r.run.accuracy(),
                agreement(&r.run.decisions, baseline)
            )
        })
        .collect();
    eprintln!("{name}: {}", summary.join("; "));
    Ok(())
}

fn precision_note(g: &Global) -> Option<String> {
    (g.precision == Precision::Single).then(|| "pipelines run in double precision; --precision ignored".to_string())
}

fn gemm_modes(a: &PcaArgs) -> Result<Vec<GemmMode>> {
    let mut modes = vec![GemmMode::Conventional];
    for &l in &a.big_l {
        modes.push(GemmMode::projected(a.pair.make(l)?, PrecisionConfig::new(l, a.proj)?)?);
    }
    Ok(modes)
}

fn mode_name(conventional: bool) -> String {
    if conventional { "conventional" } else { "projected" }.into()
}

fn labelled_images(manifest: &Path, crop: Option<usize>, format: ImageFormat) -> Result<Vec<(String, Matrix)>> {
    let set = ingest_images(&read_manifest(manifest)?, crop, format)?;
    Ok(set.labels().iter().cloned().zip(set.images().iter().cloned()).collect())
}

pub fn pca_demo(g: &Global, a: &PcaArgs) -> Result<()> {
    let modes = gemm_modes(a)?;
    let mut comments: Vec<String> = precision_note(g).into_iter().collect();
    let mut rows = Vec::new();
    if a.synthetic {
        if a.train_per_subject == 0 || a.train_per_subject >= a.per_subject || a.subjects == 0 {
            return Err(config_err(
                "need at least one subject and 1 <= --train-per-subject < --per-subject",
            ));
        }
        let cfg = PcaDemoConfig {
            subjects: a.subjects,
            per_subject: a.per_subject,
            train_per_subject: a.train_per_subject,
            size: a.size,
            features: a.features,
            seed: g.seed,
            ..PcaDemoConfig::default()
        };
        comments.push(format!(
            "synthetic seed={} subjects={} per_subject={} train_per_subject={} size={} D={}",
            g.seed, a.subjects, a.per_subject, a.train_per_subject, a.size, a.features
        ));
        for mode in &modes {
            let model = cfg.model_macs(mode)?;
            let conventional = matches!(mode, GemmMode::Conventional);
            rows.push(evaluate(g, mode_name(conventional), mode.label(), model, || {
                run_pca_demo(&cfg, mode)
            })?);
        }
    } else {
        let (Some(train), Some(query)) = (&a.train, &a.query) else {
            return Err(config_err("pass --synthetic or both --train and --query"));
        };
        let format = match a.format {
            FormatArg::Pgm => ImageFormat::Pgm,
            FormatArg::Pkm => ImageFormat::Pkm,
        };
        let set = ingest_images(&read_manifest(train)?, a.crop, format)?;
        let queries = labelled_images(query, a.crop, format)?;
        let n = set.size();
        if let Some((_, m)) = queries.iter().find(|(_, m)| m.rows() != n) {
            return Err(Error::HeterogeneousDims {
                file: query.clone(),
                expected: (n, n),
                found: (m.rows(), m.cols()),
            });
        }
        comments.push(format!(
            "train={} query={} images={} queries={} size={n} D={}",
            train.display(),
            query.display(),
            set.len(),
            queries.len(),
            a.features
        ));
        for mode in &modes {
            let model = pca_model_macs(n, a.features, set.len(), queries.len(), mode)?;
            let conventional = matches!(mode, GemmMode::Conventional);
            rows.push(evaluate(g, mode_name(conventional), mode.label(), model, || {
                run_pca_dataset(&set, &queries, a.features, mode)
            })?);
        }
    }
    write_demo(g, "pca-demo", &comments, &rows)
}

fn correlation_modes(a: &MatchArgs) -> Result<Vec<CorrelationMode>> {
    let samples = match a.samples {
        SamplesArg::Half => SampleMode::HalfInterpolate,
        SamplesArg::All => SampleMode::AllPhases,
    };
    let mut modes = vec![CorrelationMode::Conventional];
    for &l in &a.big_l {
        let cfg = PrecisionConfig::new(l, a.proj)?.with_sample_mode(samples);
        modes.push(CorrelationMode::projected(&a.pair.make(l)?, cfg)?);
    }
    Ok(modes)
}

pub fn match_demo(g: &Global, a: &MatchArgs) -> Result<()> {
    let modes = correlation_modes(a)?;
    let mut comments: Vec<String> = precision_note(g).into_iter().collect();
    let mut rows = Vec::new();
    if a.synthetic {
        if a.entries == 0 || a.queries == 0 || a.entry_len == 0 || a.entry_len > a.query_len {
            return Err(config_err("need entries, queries and 1 <= --entry-len <= --query-len"));
        }
        let cfg = MatchDemoConfig {
            entries: a.entries,
            queries: a.queries,
            entry_len: a.entry_len,
            query_len: a.query_len,
            seed: g.seed,
            ..MatchDemoConfig::default()
        };
        comments.push(format!(
            "synthetic seed={} entries={} queries={} entry_len={} query_len={}",
            g.seed, a.entries, a.queries, a.entry_len, a.query_len
        ));
        for mode in &modes {
            let model = cfg.model_macs(mode)?;
            let conventional = matches!(mode, CorrelationMode::Conventional);
            rows.push(evaluate(g, mode_name(conventional), mode.label(), model, || {
                run_match_demo(&cfg, mode)
            })?);
        }
    } else {
        let (Some(db_path), Some(query)) = (&a.db, &a.query) else {
            return Err(config_err("pass --synthetic or both --db and --query"));
        };
        let db = FeatureDb::load(db_path)?;
        let queries = read_manifest(query)?
            .into_iter()
            .map(|e| Ok((e.id, read_signal(&e.path)?)))
            .collect::<Result<Vec<(String, Signal)>>>()?;
        let lens: Vec<usize> = queries.iter().map(|(_, s)| s.len()).collect();
        comments.push(format!(
            "db={} query={} entries={} queries={}",
            db_path.display(),
            query.display(),
            db.len(),
            queries.len()
        ));
        for mode in &modes {
            let model = match_model_macs(&db, &lens, mode)?;
            let conventional = matches!(mode, CorrelationMode::Conventional);
            rows.push(evaluate(g, mode_name(conventional), mode.label(), model, || {
                run_match_dataset(&db, &queries, mode)
            })?);
        }
    }
    write_demo(g, "match-demo", &comments, &rows)
}
