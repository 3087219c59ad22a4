//! Projection pairs `(C, D = C⁻¹)` and their application to matrix rows,
//! matrix columns and 1-D signals.
//!
//! Projecting the rows of `A` with column `l` of `C` and the columns of `B`
//! with row `l` of `D` splits every inner product `a·b` into `L` partial
//! products `(aC)[l]·(Db)[l]`; summing all of them gives back `a·b` because
//! `CD = I`. An energy-compacting `C` puts most of the result in the first
//! few terms.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Signal};

/// Largest supported projection size.
pub const MAX_PROJECTION_SIZE: usize = 64;

const PIVOT_THRESHOLD: f64 = 1e-12;
const CONDITION_LIMIT: f64 = 1e8;
const INVERSE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    /// Unnormalized DCT, `c[i][j] = cos(π/L · (i + ½) · j)`.
    DctUnnormalized,
    /// Orthonormal Haar wavelet basis, one basis vector per column.
    HaarOrthonormal,
    Custom,
}

/// An `L×L` forward projection `C` together with its inverse `D`.
///
/// Immutable once built; the constructors guarantee `‖CD − I‖_max ≤ 1e−10`,
/// `L ≥ 2` and an ∞-norm condition estimate below `1e8`.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    forward: Matrix,
    inverse: Matrix,
    kind: ProjectionKind,
    condition_estimate: f64,
    // Column-major copy of C, so column l is a contiguous slice.
    forward_cols: Vec<f64>,
}

impl ProjectionPair {
    fn build(forward: Matrix, inverse: Matrix, kind: ProjectionKind) -> Result<Self> {
        let l = forward.rows();
        let condition_estimate = inf_norm(&forward) * inf_norm(&inverse);
        if condition_estimate.is_nan() || condition_estimate >= CONDITION_LIMIT {
            return Err(Error::SingularMatrix(format!(
                "condition estimate {condition_estimate:.3e} exceeds {CONDITION_LIMIT:e}"
            )));
        }
        let residual = identity_residual(&forward, &inverse);
        if residual > INVERSE_TOLERANCE {
            return Err(Error::SingularMatrix(format!(
                "‖CD − I‖_max = {residual:.3e} exceeds {INVERSE_TOLERANCE:e}"
            )));
        }
        let forward_cols = forward.transpose().into_vec();
        debug_assert_eq!(forward_cols.len(), l * l);
        Ok(ProjectionPair {
            forward,
            inverse,
            kind,
            condition_estimate,
            forward_cols,
        })
    }

    /// Projection size `L`.
    #[inline]
    pub fn size(&self) -> usize {
        self.forward.rows()
    }

    /// The forward matrix `C`.
    pub fn forward(&self) -> &Matrix {
        &self.forward
    }

    /// The inverse matrix `D`.
    pub fn inverse(&self) -> &Matrix {
        &self.inverse
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    /// Column `l` of `C`.
    #[inline]
    pub fn forward_column(&self, l: usize) -> &[f64] {
        let n = self.size();
        &self.forward_cols[l * n..(l + 1) * n]
    }

    /// Row `l` of `D`.
    #[inline]
    pub fn inverse_row(&self, l: usize) -> &[f64] {
        self.inverse.row(l)
    }

    pub(crate) fn check_index(&self, l: usize) -> Result<()> {
        if l >= self.size() {
            return Err(Error::IndexOutOfRange {
                what: "projection",
                index: l,
                bound: self.size(),
            });
        }
        Ok(())
    }

    /// `‖CD − I‖_max`.
    pub fn inverse_residual(&self) -> f64 {
        identity_residual(&self.forward, &self.inverse)
    }
}

fn check_size(l: usize) -> Result<()> {
    if !(2..=MAX_PROJECTION_SIZE).contains(&l) {
        return Err(Error::invalid(format!(
            "projection size must be in 2..={MAX_PROJECTION_SIZE}, got {l}"
        )));
    }
    Ok(())
}

fn inf_norm(m: &Matrix) -> f64 {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn identity_residual(c: &Matrix, d: &Matrix) -> f64 {
    let n = c.rows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let v: f64 = (0..n).map(|t| c[(i, t)] * d[(t, j)]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

/// Inverts a square matrix by Gauss-Jordan elimination with partial pivoting.
pub fn invert(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    if n != m.cols() {
        return Err(Error::dims(format!("cannot invert a {}x{} matrix", n, m.cols())));
    }
    let mut a = m.clone();
    let mut inv = Matrix::identity(n);
    // Pivot threshold is relative to the matrix scale.
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (pivot_row, pivot_abs) =
            (col..n)
                .map(|r| (r, a[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs < PIVOT_THRESHOLD * scale {
            return Err(Error::SingularMatrix(format!(
                "pivot {pivot_abs:.3e} in column {col} below {PIVOT_THRESHOLD:e}"
            )));
        }
        if pivot_row != col {
            for j in 0..n {
                a.as_mut_slice().swap(col * n + j, pivot_row * n + j);
                inv.as_mut_slice().swap(col * n + j, pivot_row * n + j);
            }
        }
        let p = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[(r, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[(r, j)] -= f * a[(col, j)];
                inv[(r, j)] -= f * inv[(col, j)];
            }
        }
    }
    Ok(inv)
}

/// The unnormalized `L`-point DCT pair. `D` is obtained by numerical
/// inversion, not by transposition.
pub fn make_dct_pair(l: usize) -> Result<ProjectionPair> {
    check_size(l)?;
    let c = Matrix::from_fn(l, l, |i, j| (PI / l as f64 * (i as f64 + 0.5) * j as f64).cos());
    let d = invert(&c)?;
    ProjectionPair::build(c, d, ProjectionKind::DctUnnormalized)
}

/// Rows of the orthonormal Haar analysis matrix of size `l` (a power of two).
fn haar_analysis(l: usize) -> Matrix {
    if l == 1 {
        return Matrix::identity(1);
    }
    let half = haar_analysis(l / 2);
    let h = l / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = Matrix::zeros(l, l);
    // Coarse rows: previous-level basis upsampled by pairwise sums.
    for i in 0..h {
        for j in 0..h {
            let v = half[(i, j)] * s;
            m[(i, 2 * j)] = v;
            m[(i, 2 * j + 1)] = v;
        }
    }
    // Detail rows: finest-scale pairwise differences.
    for i in 0..h {
        m[(h + i, 2 * i)] = s;
        m[(h + i, 2 * i + 1)] = -s;
    }
    m
}

/// The orthonormal Haar pair: column `l` of `C` is the `l`-th Haar basis
/// vector (column 0 is the scaled average) and `D = Cᵀ`.
pub fn make_haar_pair(l: usize) -> Result<ProjectionPair> {
    check_size(l)?;
    if !l.is_power_of_two() {
        return Err(Error::invalid(format!(
            "Haar projection size must be a power of two, got {l}"
        )));
    }
    let analysis = haar_analysis(l);
    let c = analysis.transpose();
    ProjectionPair::build(c, analysis, ProjectionKind::HaarOrthonormal)
}

/// A pair from an arbitrary invertible `C`.
pub fn make_custom_pair(c: &Matrix) -> Result<ProjectionPair> {
    if c.rows() != c.cols() {
        return Err(Error::dims(format!(
            "projection matrix must be square, got {}x{}",
            c.rows(),
            c.cols()
        )));
    }
    check_size(c.rows())?;
    let d = invert(c)?;
    ProjectionPair::build(c.clone(), d, ProjectionKind::Custom)
}

/// Projects every length-`L` group within the rows of `a` onto column `l`
/// of `C`: `out[i][g] = Σ_t a[i][gL+t]·C[t][l]`.
pub fn project_rows(a: &Matrix, pair: &ProjectionPair, l: usize) -> Result<Matrix> {
    pair.check_index(l)?;
    let n = pair.size();
    if !a.cols().is_multiple_of(n) {
        return Err(Error::dims(format!(
            "{} columns not divisible by projection size {n}",
            a.cols()
        )));
    }
    let groups = a.cols() / n;
    let w = pair.forward_column(l);
    let mut out = Vec::with_capacity(a.rows() * groups);
    for i in 0..a.rows() {
        out.extend(a.row(i).chunks_exact(n).map(|g| crate::real::dot(g, w)));
    }
    Matrix::from_vec(a.rows(), groups, out)
}

/// Projects every length-`L` group within the columns of `b` onto row `l`
/// of `D`: `out[g][j] = Σ_t D[l][t]·b[gL+t][j]`.
pub fn project_cols(b: &Matrix, pair: &ProjectionPair, l: usize) -> Result<Matrix> {
    pair.check_index(l)?;
    let n = pair.size();
    if !b.rows().is_multiple_of(n) {
        return Err(Error::dims(format!(
            "{} rows not divisible by projection size {n}",
            b.rows()
        )));
    }
    let w = pair.inverse_row(l);
    let groups = b.rows() / n;
    let mut out = Matrix::zeros(groups, b.cols());
    for g in 0..groups {
        for (t, &wt) in w.iter().enumerate() {
            let src = b.row(g * n + t);
            let dst = &mut out.as_mut_slice()[g * b.cols()..(g + 1) * b.cols()];
            for (o, &v) in dst.iter_mut().zip(src) {
                *o += wt * v;
            }
        }
    }
    Ok(out)
}

/// Weighted sums of consecutive length-`weights.len()` groups of `data`,
/// starting at `phase`; the trailing partial group is zero-padded.
pub(crate) fn project_groups(data: &[f64], phase: usize, weights: &[f64]) -> Vec<f64> {
    let n = weights.len();
    let tail = &data[phase.min(data.len())..];
    let mut out = Vec::with_capacity(tail.len().div_ceil(n));
    let chunks = tail.chunks_exact(n);
    let rem = chunks.remainder();
    out.extend(chunks.map(|g| crate::real::dot(g, weights)));
    if !rem.is_empty() {
        out.push(rem.iter().zip(weights).map(|(a, b)| a * b).sum());
    }
    out
}

/// Projects consecutive groups of `L` samples of `s`, starting at `phase`,
/// onto column `l` of `C`. Trailing samples that do not fill a group are
/// zero-padded.
pub fn project_signal(s: &Signal, pair: &ProjectionPair, l: usize, phase: usize) -> Result<Signal> {
    pair.check_index(l)?;
    let n = pair.size();
    if phase >= n {
        return Err(Error::IndexOutOfRange {
            what: "phase",
            index: phase,
            bound: n,
        });
    }
    if s.len() < phase + n {
        return Err(Error::dims(format!(
            "signal of {} samples too short for phase {phase} and projection size {n}",
            s.len()
        )));
    }
    Ok(Signal::from_vec_unchecked(project_groups(
        s.as_slice(),
        phase,
        pair.forward_column(l),
    )))
}
