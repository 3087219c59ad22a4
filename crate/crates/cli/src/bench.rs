use clap::Args;
use projscale::cost::{
    conv_plain_segments, mac_conv_direct, mac_conv_plain_freq, mac_conv_proj_segmented, mac_gemm_plain_dims,
    mac_gemm_proj_dims, ratio_table, write_ratio_csv,
};
use projscale::gemm::DEFAULT_BLOCK;
use projscale::metrics::{snr_interior, write_metrics_csv, MetricsRow};
use projscale::synth::{conv_corpus, gemm_corpus};
use projscale::{
    measure_throughput, snr, ConvKernel, ConvMode, ConvPlan, ConvVariant, Domain, Error, GemmKernel, GemmPlan,
    MacCounter, Precision, PrecisionConfig, ProjectedConvolver, Result, SampleMode,
};

use crate::{config_err, output, write_err, Global, PairKind};

#[derive(Args, Debug)]
pub struct GemmArgs {
    /// Outer dimension N of the N×inner by inner×N product.
    #[arg(long, default_value_t = DEFAULT_BLOCK)]
    n: usize,
    /// Inner dimension; N when absent. Zero-padded to a multiple of L.
    #[arg(long)]
    inner: Option<usize>,
    /// Projection size L.
    #[arg(long = "L", default_value_t = 8)]
    big_l: usize,
    #[arg(long, value_enum, default_value_t = PairKind::Dct)]
    pair: PairKind,
    /// Subblock size; 144 rounded up to a multiple of L when absent.
    #[arg(long)]
    block: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ConvArgs {
    /// Signal length.
    #[arg(long, default_value_t = 20_000)]
    w: usize,
    /// Kernel length N, a multiple of L.
    #[arg(long, default_value_t = 600)]
    n: usize,
    /// Projection size L.
    #[arg(long = "L", default_value_t = 2)]
    big_l: usize,
    /// Projections computed by the projected rows.
    #[arg(long, default_value_t = 1)]
    proj: usize,
    #[arg(long, value_enum, default_value_t = PairKind::Haar)]
    pair: PairKind,
}

#[derive(Args, Debug)]
pub struct CostArgs {
    /// Kernel sizes N. GEMM rows need every N divisible by every L.
    #[arg(long, value_delimiter = ',', default_values_t = [16u64, 32, 48, 64, 96, 128, 144, 192, 256, 384, 512])]
    n: Vec<u64>,
    /// Projection sizes L.
    #[arg(long = "L", value_delimiter = ',', default_values_t = [2u64, 4, 8, 16])]
    big_l: Vec<u64>,
    /// Highest projection index l.
    #[arg(long, default_value_t = 0)]
    l: u64,
    /// Cost domains to tabulate.
    #[arg(long, value_delimiter = ',', default_values_t = [Domain::Gemm, Domain::ConvFreq])]
    domain: Vec<Domain>,
}

pub fn check_counted(measured: u64, model: u64) -> Result<()> {
    if measured != model {
        return Err(Error::CounterMismatch { measured, model });
    }
    Ok(())
}

pub fn bench_gemm(g: &Global, a: &GemmArgs) -> Result<()> {
    let inner = a.inner.unwrap_or(a.n);
    if a.n == 0 || inner == 0 {
        return Err(config_err("--n and --inner must be positive"));
    }
    let pair = a.pair.make(a.big_l)?;
    let block = a.block.unwrap_or(DEFAULT_BLOCK.div_ceil(a.big_l) * a.big_l);
    let plan = GemmPlan::new(a.n, inner, a.n, block)?.with_projection(a.big_l)?;
    let kernel = GemmKernel::new(block, g.precision)?;
    let (lhs, rhs) = gemm_corpus(g.seed, a.n, inner);
    let reference = GemmKernel::new(block, Precision::Double)?.conventional(&lhs, &rhs, &MacCounter::new())?;
    let samples = a.n * a.n;

    let mut comments = vec![format!(
        "seed={} precision={} N={} inner={} L={} pair={:?} block={block}",
        g.seed, g.precision, a.n, inner, a.big_l, a.pair
    )];
    if plan.is_padded() {
        comments.push(format!(
            "inner dimension {inner} zero-padded to {} for L={}",
            plan.padded_k(),
            a.big_l
        ));
    }
    comments.push("snr against the double-precision conventional product".into());

    let mut rows = Vec::new();
    for p in 1..=a.big_l {
        let cfg = PrecisionConfig::new(a.big_l, p)?;
        let counter = MacCounter::new();
        let out = kernel.projected(&lhs, &rhs, &pair, &cfg, &counter)?;
        let model = mac_gemm_proj_dims(a.n as u64, inner as u64, a.n as u64, (p - 1) as u64, a.big_l as u64)?;
        check_counted(counter.get(), model)?;
        let tput = measure_throughput(g.reps, || {
            kernel
                .projected(&lhs, &rhs, &pair, &cfg, &MacCounter::new())
                .expect("inputs already validated");
            samples
        })?;
        rows.push(MetricsRow {
            kernel: "gemm-projected".into(),
            config: format!("L={} proj={p}", a.big_l),
            snr: Some(snr(reference.as_slice(), out.as_slice())?),
            throughput: Some(tput),
            macs_model: Some(model),
            macs_measured: Some(counter.get()),
        });
    }

    let counter = MacCounter::new();
    let out = kernel.conventional(&lhs, &rhs, &counter)?;
    let model = mac_gemm_plain_dims(a.n as u64, inner as u64, a.n as u64);
    check_counted(counter.get(), model)?;
    let tput = measure_throughput(g.reps, || {
        kernel
            .conventional(&lhs, &rhs, &MacCounter::new())
            .expect("inputs already validated");
        samples
    })?;
    rows.push(MetricsRow {
        kernel: "gemm-conventional".into(),
        config: format!("block={block}"),
        snr: Some(snr(reference.as_slice(), out.as_slice())?),
        throughput: Some(tput),
        macs_model: Some(model),
        macs_measured: Some(counter.get()),
    });

    let mut sink = output(g)?;
    write_metrics_csv(&mut sink, &comments, &rows).map_err(write_err(g))?;
    sink.flush().map_err(write_err(g))
}

pub fn bench_conv(g: &Global, a: &ConvArgs) -> Result<()> {
    if a.n == 0 || a.n > a.w {
        return Err(config_err(format!("kernel length {} must be in 1..={}", a.n, a.w)));
    }
    let pair = a.pair.make(a.big_l)?;
    if !a.n.is_multiple_of(a.big_l) {
        return Err(config_err(format!(
            "kernel length {} is not a multiple of L={}",
            a.n, a.big_l
        )));
    }
    let base = PrecisionConfig::new(a.big_l, a.proj)?;
    let (s, k) = conv_corpus(g.seed, a.w, a.n);
    let reference = ConvKernel::default().direct(&s, &k, ConvVariant::Conv, &MacCounter::new())?;
    let samples = reference.len();
    let border = a.n - 1;
    let quality = |out: &projscale::Signal| snr_interior(reference.as_slice(), out.as_slice(), border);

    let comments = vec![
        format!(
            "seed={} precision={} W={} N={} L={} proj={} pair={:?}",
            g.seed, g.precision, a.w, a.n, a.big_l, a.proj, a.pair
        ),
        format!("snr against double-precision direct convolution, {border} border samples excluded at each end"),
        "conv-fft model: overlap-save segments of 3N+1 samples with 2N outputs each; not instrumented".into(),
    ];

    let mut rows = Vec::new();
    for (mode, label, phases) in [
        (SampleMode::HalfInterpolate, "half", 1),
        (SampleMode::AllPhases, "all", a.big_l),
    ] {
        let conv = ProjectedConvolver::new(&pair, base.with_sample_mode(mode), g.precision)?;
        let counter = MacCounter::new();
        let out = conv.run_overlap_save(&s, &k, &counter)?.output;
        let model = mac_conv_proj_segmented(
            a.w as u64,
            a.n as u64,
            (a.proj - 1) as u64,
            a.big_l as u64,
            phases as u64,
        )?;
        check_counted(counter.get(), model)?;
        let tput = measure_throughput(g.reps, || {
            conv.run_overlap_save(&s, &k, &MacCounter::new())
                .expect("inputs already validated")
                .output
                .len()
        })?;
        rows.push(MetricsRow {
            kernel: "conv-projected".into(),
            config: format!("L={} proj={} {label}", a.big_l, a.proj),
            snr: Some(quality(&out)?),
            throughput: Some(tput),
            macs_model: Some(model),
            macs_measured: Some(counter.get()),
        });
    }

    let direct = ConvKernel::new(g.precision);
    let counter = MacCounter::new();
    let out = direct.direct(&s, &k, ConvVariant::Conv, &counter)?;
    let model = mac_conv_direct(a.w as u64, a.n as u64);
    check_counted(counter.get(), model)?;
    let tput = measure_throughput(g.reps, || {
        direct
            .direct(&s, &k, ConvVariant::Conv, &MacCounter::new())
            .expect("inputs already validated")
            .len()
    })?;
    rows.push(MetricsRow {
        kernel: "conv-direct".into(),
        config: "time".into(),
        snr: Some(quality(&out)?),
        throughput: Some(tput),
        macs_model: Some(model),
        macs_measured: Some(counter.get()),
    });

    let plan = ConvPlan::minimal(a.n, ConvMode::FreqDomain)?;
    let out = direct.overlap_save(&s, &k, &plan, &MacCounter::new())?;
    let model = conv_plain_segments(a.w as u64, a.n as u64)? * mac_conv_plain_freq(a.n as u64)?;
    let tput = measure_throughput(g.reps, || {
        direct
            .overlap_save(&s, &k, &plan, &MacCounter::new())
            .expect("inputs already validated")
            .len()
    })?;
    debug_assert_eq!(out.len(), samples);
    rows.push(MetricsRow {
        kernel: "conv-fft".into(),
        config: format!("W={}", plan.block),
        snr: Some(quality(&out)?),
        throughput: Some(tput),
        macs_model: Some(model),
        macs_measured: None,
    });

    let mut sink = output(g)?;
    write_metrics_csv(&mut sink, &comments, &rows).map_err(write_err(g))?;
    sink.flush().map_err(write_err(g))
}

pub fn cost_model(g: &Global, a: &CostArgs) -> Result<()> {
    if a.n.is_empty() || a.big_l.is_empty() || a.domain.is_empty() {
        return Err(config_err("--n, --L and --domain need at least one value"));
    }
    let mut rows = Vec::new();
    for &d in &a.domain {
        rows.extend(ratio_table(d, &a.n, &a.big_l, a.l)?);
    }
    let mut sink = output(g)?;
    write_ratio_csv(&mut sink, &rows).map_err(write_err(g))?;
    sink.flush().map_err(write_err(g))
}
