//! File formats.
//!
//! Text: a header line `PKM <rows> <cols>` or `PKS <len>` followed by
//! whitespace-separated decimal values in row-major order. Binary: the header
//! line `PKMB <rows> <cols>` or `PKSB <len>` followed by little-endian `f64`
//! values. Images are 8-bit binary PGM (P5). Manifests list one
//! `id<TAB>path` pair per line; relative paths resolve against the
//! manifest's directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Signal};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(file: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_path_buf(),
        message: message.into(),
    }
}

/// Splits the first line off `bytes`.
fn split_header<'a>(bytes: &'a [u8], file: &Path) -> Result<(&'a str, &'a [u8])> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse_err(file, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| parse_err(file, "header is not UTF-8"))?;
    Ok((header.trim(), &bytes[end + 1..]))
}

fn parse_dim(tok: Option<&str>, file: &Path) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(file, "truncated header"))?;
    match tok.parse::<usize>() {
        Ok(0) => Err(parse_err(file, "zero dimension in header")),
        Ok(v) => Ok(v),
        Err(_) => Err(parse_err(file, format!("bad dimension {tok:?}"))),
    }
}

fn parse_text_values(body: &[u8], count: usize, file: &Path) -> Result<Vec<f64>> {
    let text = std::str::from_utf8(body).map_err(|_| parse_err(file, "body is not UTF-8"))?;
    let values = text
        .split_whitespace()
        .enumerate()
        .map(|(i, tok)| {
            tok.parse::<f64>()
                .map_err(|_| parse_err(file, format!("value {i}: cannot parse {tok:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != count {
        return Err(parse_err(
            file,
            format!("expected {count} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

fn parse_binary_values(body: &[u8], count: usize, file: &Path) -> Result<Vec<f64>> {
    if body.len() != count * 8 {
        return Err(parse_err(
            file,
            format!("expected {} payload bytes, found {}", count * 8, body.len()),
        ));
    }
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn check_finite(values: &[f64], file: &Path) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(parse_err(file, format!("value {i} is not finite"))),
        None => Ok(()),
    }
}

/// Parses a matrix from raw file contents; `file` names the source in errors.
pub fn parse_matrix(bytes: &[u8], file: &Path) -> Result<Matrix> {
    let (header, body) = split_header(bytes, file)?;
    let mut toks = header.split_whitespace();
    let magic = toks.next().unwrap_or_default();
    let rows = parse_dim(toks.next(), file)?;
    let cols = parse_dim(toks.next(), file)?;
    let data = match magic {
        "PKM" => parse_text_values(body, rows * cols, file)?,
        "PKMB" => parse_binary_values(body, rows * cols, file)?,
        _ => return Err(parse_err(file, format!("unknown matrix header {magic:?}"))),
    };
    check_finite(&data, file)?;
    Matrix::from_vec(rows, cols, data)
}

/// Parses a signal from raw file contents.
pub fn parse_signal(bytes: &[u8], file: &Path) -> Result<Signal> {
    let (header, body) = split_header(bytes, file)?;
    let mut toks = header.split_whitespace();
    let magic = toks.next().unwrap_or_default();
    let len = parse_dim(toks.next(), file)?;
    let data = match magic {
        "PKS" => parse_text_values(body, len, file)?,
        "PKSB" => parse_binary_values(body, len, file)?,
        _ => return Err(parse_err(file, format!("unknown signal header {magic:?}"))),
    };
    check_finite(&data, file)?;
    Signal::new(data)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(&fs::read(path).map_err(io_err(path))?, path)
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    parse_signal(&fs::read(path).map_err(io_err(path))?, path)
}

fn text_body(header: String, values: &[f64], per_line: usize) -> Vec<u8> {
    let mut out = header.into_bytes();
    out.push(b'\n');
    for line in values.chunks(per_line.max(1)) {
        let strs: Vec<String> = line.iter().map(|v| format!("{v:?}")).collect();
        out.extend_from_slice(strs.join(" ").as_bytes());
        out.push(b'\n');
    }
    out
}

fn binary_body(header: String, values: &[f64]) -> Vec<u8> {
    let mut out = header.into_bytes();
    out.push(b'\n');
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

/// Writes `PKM` text; values round-trip exactly.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let header = format!("PKM {} {}", m.rows(), m.cols());
    write_bytes(path, &text_body(header, m.as_slice(), m.cols()))
}

pub fn write_matrix_binary(path: &Path, m: &Matrix) -> Result<()> {
    write_bytes(
        path,
        &binary_body(format!("PKMB {} {}", m.rows(), m.cols()), m.as_slice()),
    )
}

pub fn write_signal(path: &Path, s: &Signal) -> Result<()> {
    write_bytes(path, &text_body(format!("PKS {}", s.len()), s.as_slice(), 16))
}

pub fn write_signal_binary(path: &Path, s: &Signal) -> Result<()> {
    write_bytes(path, &binary_body(format!("PKSB {}", s.len()), s.as_slice()))
}

/// Decodes an 8-bit grayscale binary PGM. Pixel values are returned
/// unscaled (0..=255).
pub fn parse_pgm(bytes: &[u8], file: &Path) -> Result<Matrix> {
    if !bytes.starts_with(b"P5") {
        return Err(parse_err(file, "not a binary PGM (missing P5 magic)"));
    }
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Pnm)
        .map_err(|e| parse_err(file, e.to_string()))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        _ => return Err(parse_err(file, "only 8-bit grayscale PGM is supported")),
    };
    let (w, h) = gray.dimensions();
    let data = gray.into_raw().into_iter().map(f64::from).collect();
    Matrix::from_vec(h as usize, w as usize, data)
}

pub fn read_pgm(path: &Path) -> Result<Matrix> {
    parse_pgm(&fs::read(path).map_err(io_err(path))?, path)
}

/// Encodes values in `0..=255` (clamped and rounded) as binary PGM.
pub fn write_pgm(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", m.cols(), m.rows()).into_bytes();
    out.extend(m.as_slice().iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    write_bytes(path, &out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
}

/// Reads a manifest. Blank lines and lines starting with `#` are skipped.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, rel) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, format!("line {}: expected id<TAB>path", no + 1)))?;
        if id.is_empty() || rel.trim().is_empty() {
            return Err(parse_err(path, format!("line {}: empty field", no + 1)));
        }
        let rel = Path::new(rel.trim());
        let full = if rel.is_absolute() {
            rel.to_path_buf()
        } else {
            base.join(rel)
        };
        entries.push(ManifestEntry {
            id: id.to_string(),
            path: full,
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_fn(3, 4, |i, j| (i as f64 + 0.1) * (j as f64 - 1.3) / 7.0);
        let p = dir.path().join("m.pkm");
        write_matrix(&p, &m).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), m);
        let s = Signal::new((0..40).map(|i| (i as f64).sqrt()).collect()).unwrap();
        let p = dir.path().join("s.pks");
        write_signal(&p, &s).unwrap();
        assert_eq!(read_signal(&p).unwrap(), s);
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_fn(5, 2, |i, j| i as f64 - 0.25 * j as f64);
        let p = dir.path().join("m.pkmb");
        write_matrix_binary(&p, &m).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), m);
        let s = Signal::new(vec![1.5, -2.0, 1e-300]).unwrap();
        let p = dir.path().join("s.pksb");
        write_signal_binary(&p, &s).unwrap();
        assert_eq!(read_signal(&p).unwrap(), s);
    }

    #[test]
    fn malformed_inputs_name_the_file() {
        let f = Path::new("bad.pkm");
        for bytes in [
            &b"PKM 2 2\n1 2 3\n"[..],
            b"PKX 1 1\n1\n",
            b"PKM 2\n1 2\n",
            b"PKM 1 1\nnan\n",
            b"PKM 1 2",
        ] {
            let err = parse_matrix(bytes, f).unwrap_err();
            assert!(matches!(err, Error::Parse { .. }), "{err}");
            assert!(err.to_string().contains("bad.pkm"));
        }
        assert!(parse_signal(b"PKS 3\n1 2 x\n", f).is_err());
        assert!(parse_signal(b"PKSB 2\n\0\0", f).is_err());
    }

    #[test]
    fn pgm_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_fn(3, 5, |i, j| (i * 50 + j * 10) as f64);
        let p = dir.path().join("a.pgm");
        write_pgm(&p, &m).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), m);
        let err = parse_pgm(b"P2\n2 2\n255\n0 0 0 0\n", Path::new("x.pgm")).unwrap_err();
        assert!(err.to_string().contains("x.pgm"));
        let err = parse_pgm(b"P5\n2 2\n255\n\0", Path::new("short.pgm")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("db.tsv");
        fs::write(&p, "# songs\nalpha\ta.pks\n\nbeta\t/abs/b.pks\n").unwrap();
        let entries = read_manifest(&p).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].path, dir.path().join("a.pks"));
        assert_eq!(entries[1].path, PathBuf::from("/abs/b.pks"));
        fs::write(&p, "no tab here\n").unwrap();
        assert!(matches!(read_manifest(&p), Err(Error::Parse { .. })));
    }
}
