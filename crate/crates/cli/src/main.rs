//! Benchmarks, cost-model sweeps and demo pipelines for projected kernels.
//! Every subcommand writes CSV to `--out` or stdout.

mod bench;
mod demo;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use projscale::projection::{make_dct_pair, make_haar_pair};
use projscale::{Error, Precision, ProjectionPair, Result};

#[derive(Parser)]
#[command(
    name = "projscale",
    version,
    about = "Precision-scalable GEMM and convolution benchmarks"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Arithmetic precision of the benchmarked kernels.
    #[arg(long, global = true, default_value = "double", value_parser = parse_precision)]
    pub precision: Precision,
    /// Seed of the synthetic inputs.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Timed repetitions per row (one untimed warm-up run precedes them).
    #[arg(long, global = true, default_value_t = 5)]
    pub reps: usize,
    /// CSV destination; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

fn parse_precision(s: &str) -> std::result::Result<Precision, String> {
    s.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairKind {
    Dct,
    Haar,
}

impl PairKind {
    pub fn make(self, l: usize) -> Result<ProjectionPair> {
        match self {
            PairKind::Dct => make_dct_pair(l),
            PairKind::Haar => make_haar_pair(l),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplesArg {
    Half,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Projected GEMM at every projection count against the conventional kernel.
    BenchGemm(bench::GemmArgs),
    /// Projected and conventional convolution of a long signal.
    BenchConv(bench::ConvArgs),
    /// Projected-to-conventional MAC ratios for GEMM and frequency-domain CONV.
    CostModel(bench::CostArgs),
    /// 2-D PCA recognition with conventional and projected GEMM.
    PcaDemo(demo::PcaArgs),
    /// Cross-correlation matching with conventional and projected CONV.
    MatchDemo(demo::MatchArgs),
}

/// CSV sink: a file from `--out` or stdout.
pub fn output(global: &Global) -> Result<Box<dyn Write>> {
    Ok(match &global.out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Wraps a write failure on the CSV sink.
pub fn write_err(global: &Global) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: global.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>")),
        source,
    }
}

pub fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_data_error() {
        3
    } else if matches!(e, Error::CounterMismatch { .. } | Error::CalibrationFailed { .. }) {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.reps == 0 {
        eprintln!("error: --reps must be at least 1");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::BenchGemm(a) => bench::bench_gemm(&cli.global, a),
        Command::BenchConv(a) => bench::bench_conv(&cli.global, a),
        Command::CostModel(a) => bench::cost_model(&cli.global, a),
        Command::PcaDemo(a) => demo::pca_demo(&cli.global, a),
        Command::MatchDemo(a) => demo::match_demo(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
