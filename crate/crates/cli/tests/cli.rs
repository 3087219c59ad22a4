use std::path::Path;
use std::process::{Command, Output};

use projscale::io::{write_matrix, write_signal};
use projscale::synth::{ar_image, ar_signal, rng, AR_RHO};
use projscale::{Matrix, Signal};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_projscale"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Drops the timing column and the mean-time trailer.
fn without_timing(csv: &str, column: usize) -> String {
    csv.lines()
        .filter(|l| !l.starts_with("# mean_seconds"))
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            if f.len() > column && !l.starts_with('#') {
                f.remove(column);
            }
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn bench_gemm_rows() {
    let csv = stdout_ok(&[
        "bench-gemm",
        "--n",
        "144",
        "--inner",
        "40",
        "--L",
        "8",
        "--seed",
        "1",
        "--reps",
        "1",
    ]);
    assert!(csv.starts_with("kernel,config,snr_db,mse,msamples_per_sec,macs_model,macs_measured\n"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[7][1], "L=8 proj=8");
    assert_eq!(rows[7][2], "300.0000");
    assert_eq!(rows[8][0], "gemm-conventional");
    assert_eq!(rows[8][5], (144 * 40 * 144).to_string());
    for r in &rows {
        assert_eq!(r[5], r[6], "model and measured MACs differ in {r:?}");
    }
    let snrs: Vec<f64> = rows[..8].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(snrs.windows(2).all(|w| w[1] >= w[0]), "{snrs:?}");
}

#[test]
fn bench_gemm_pads_inner_dimension() {
    let csv = stdout_ok(&["bench-gemm", "--inner", "41", "--L", "8", "--reps", "1"]);
    assert!(csv.contains("# inner dimension 41 zero-padded to 48 for L=8"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[7][2], "300.0000");
}

#[test]
fn bench_conv_rows() {
    let csv = stdout_ok(&[
        "bench-conv",
        "--w",
        "4000",
        "--n",
        "120",
        "--L",
        "2",
        "--seed",
        "3",
        "--reps",
        "1",
    ]);
    let rows = data_rows(&csv);
    let kinds: Vec<(&str, &str)> = rows.iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(
        kinds,
        [
            ("conv-projected", "L=2 proj=1 half"),
            ("conv-projected", "L=2 proj=1 all"),
            ("conv-direct", "time"),
            ("conv-fft", "W=361"),
        ]
    );
    for r in &rows[..3] {
        assert_eq!(r[5], r[6]);
    }
    assert_eq!(rows[2][5], (4000 * 120).to_string());
    assert_eq!(rows[3][6], "");
    let fft: f64 = rows[3][2].parse().unwrap();
    assert!(fft >= 180.0, "fft snr {fft}");
    let half: f64 = rows[0][2].parse().unwrap();
    let all: f64 = rows[1][2].parse().unwrap();
    assert!(half > 10.0 && all >= half - 1.0, "half {half} all {all}");
}

#[test]
fn same_seed_same_csv() {
    let args = [
        "bench-conv",
        "--w",
        "2000",
        "--n",
        "64",
        "--L",
        "4",
        "--proj",
        "2",
        "--reps",
        "1",
        "--seed",
        "9",
    ];
    let a = stdout_ok(&args);
    let b = stdout_ok(&args);
    assert_eq!(without_timing(&a, 4), without_timing(&b, 4));
    let args = [
        "bench-gemm",
        "--n",
        "48",
        "--L",
        "4",
        "--reps",
        "1",
        "--seed",
        "9",
        "--precision",
        "single",
    ];
    assert_eq!(
        without_timing(&stdout_ok(&args), 4),
        without_timing(&stdout_ok(&args), 4)
    );
}

#[test]
fn single_precision_rows() {
    let csv = stdout_ok(&[
        "bench-gemm",
        "--n",
        "48",
        "--L",
        "4",
        "--reps",
        "1",
        "--precision",
        "single",
    ]);
    let rows = data_rows(&csv);
    let full: f64 = rows[3][2].parse().unwrap();
    assert!(
        full > 100.0 && full < 300.0,
        "single precision full projection snr {full}"
    );
}

#[test]
fn cost_model_table() {
    let csv = stdout_ok(&["cost-model"]);
    assert_eq!(csv.lines().next(), Some("domain,N,L,l,ratio_percent"));
    assert!(csv.contains("\ngemm,144,8,0,13.8889\n"));
    let rows = data_rows(&csv);
    for domain in ["gemm", "conv-freq"] {
        let mut n_seen = 0;
        for n in rows
            .iter()
            .filter(|r| r[0] == domain)
            .map(|r| r[1].clone())
            .collect::<std::collections::BTreeSet<_>>()
        {
            let ratios: Vec<f64> = rows
                .iter()
                .filter(|r| r[0] == domain && r[1] == n)
                .map(|r| r[4].parse().unwrap())
                .collect();
            assert_eq!(ratios.len(), 4);
            assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{domain} N={n}: {ratios:?}");
            n_seen += 1;
        }
        assert!(n_seen > 3);
    }
    let out = run(&["cost-model", "--n", "100", "--L", "8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pca_demo_synthetic() {
    let csv = stdout_ok(&[
        "pca-demo",
        "--synthetic",
        "--subjects",
        "10",
        "--per-subject",
        "8",
        "--L",
        "8",
        "--proj",
        "1",
        "--seed",
        "1",
        "--reps",
        "1",
    ]);
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][1], "L=8 proj=1");
    let agreement: f64 = rows[1][3].parse().unwrap();
    assert!(agreement >= 0.95, "agreement {agreement}");
    for r in &rows {
        assert_eq!(r[5], r[6]);
    }
}

#[test]
fn match_demo_synthetic() {
    let out = run(&[
        "match-demo",
        "--synthetic",
        "--entries",
        "20",
        "--queries",
        "100",
        "--L",
        "2",
        "--proj",
        "1",
        "--seed",
        "1",
        "--reps",
        "1",
    ]);
    assert!(out.status.success());
    let rows = data_rows(&String::from_utf8(out.stdout).unwrap());
    let agreement: f64 = rows[1][3].parse().unwrap();
    assert!(agreement >= 0.95, "agreement {agreement}");
    assert_eq!(rows[1][5], rows[1][6]);
    let summary = String::from_utf8(out.stderr).unwrap();
    assert!(summary.starts_with("match-demo: conventional"), "{summary}");
}

#[test]
fn writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratios.csv");
    let out = run(&[
        "cost-model",
        "--domain",
        "gemm",
        "--n",
        "144",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["bench-conv", "--n", "601", "--reps", "1"]).status.code(), Some(2));
    assert_eq!(run(&["bench-gemm", "--L", "65"]).status.code(), Some(2));
    assert_eq!(run(&["pca-demo"]).status.code(), Some(2));
    assert_eq!(run(&["bench-gemm", "--reps", "0"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "no tab here\n").unwrap();
    let b = bad.to_str().unwrap();
    assert_eq!(run(&["match-demo", "--db", b, "--query", b]).status.code(), Some(3));
    let missing = dir.path().join("missing.tsv");
    let m = missing.to_str().unwrap();
    assert_eq!(run(&["pca-demo", "--train", m, "--query", m]).status.code(), Some(3));
}

fn manifest(dir: &Path, name: &str, lines: &[(String, String)]) -> String {
    let text: String = lines.iter().map(|(id, p)| format!("{id}\t{p}\n")).collect();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn match_demo_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(21);
    let entries: Vec<Signal> = (0..3).map(|_| ar_signal(&mut r, 40, AR_RHO)).collect();
    let mut db = Vec::new();
    let mut queries = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let name = format!("e{i}.pks");
        write_signal(&dir.path().join(&name), e).unwrap();
        db.push((format!("entry{i}"), name));
        let mut q = vec![0.0; 130];
        q[17 * (i + 1)..17 * (i + 1) + 40].copy_from_slice(e.as_slice());
        let qname = format!("q{i}.pks");
        write_signal(&dir.path().join(&qname), &Signal::new(q).unwrap()).unwrap();
        queries.push((format!("entry{i}"), qname));
    }
    let db = manifest(dir.path(), "db.tsv", &db);
    let q = manifest(dir.path(), "q.tsv", &queries);
    let csv = stdout_ok(&["match-demo", "--db", &db, "--query", &q, "--L", "2,4", "--reps", "1"]);
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][2], "1.0000");
    for r in &rows {
        assert_eq!(r[5], r[6]);
    }
    // All projections and phases reproduce the conventional decisions.
    let csv = stdout_ok(&[
        "match-demo",
        "--db",
        &db,
        "--query",
        &q,
        "--L",
        "4",
        "--proj",
        "4",
        "--samples",
        "all",
        "--reps",
        "1",
    ]);
    assert_eq!(data_rows(&csv)[1][3], "1.0000");
}

#[test]
fn pca_demo_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(22);
    let protos: Vec<Matrix> = (0..3).map(|_| ar_image(&mut r, 24, 24, AR_RHO)).collect();
    let mut train = Vec::new();
    let mut query = Vec::new();
    for (s, p) in protos.iter().enumerate() {
        for k in 0..3 {
            let img = p.add(&ar_image(&mut r, 24, 24, AR_RHO).scale(0.3)).unwrap();
            let name = format!("s{s}_{k}.pkm");
            write_matrix(&dir.path().join(&name), &img).unwrap();
            let list = if k < 2 { &mut train } else { &mut query };
            list.push((format!("subject{s}"), name));
        }
    }
    let t = manifest(dir.path(), "train.tsv", &train);
    let q = manifest(dir.path(), "query.tsv", &query);
    let csv = stdout_ok(&[
        "pca-demo",
        "--train",
        &t,
        "--query",
        &q,
        "--format",
        "pkm",
        "--features",
        "4",
        "--L",
        "8",
        "--reps",
        "1",
    ]);
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][2], "1.0000");
    for r in &rows {
        assert_eq!(r[5], r[6]);
    }
}
