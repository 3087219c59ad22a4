//! Blocked GEMM, conventional and projected.
//!
//! The conventional path reorders `A` into row-raster tiles and `B` into
//! column-raster tiles and sums tile products into each output tile. The
//! projected path applies projection `l` while packing, which shrinks the
//! inner dimension by `L`, and multiplies the compact operands with the same
//! inner kernel. Summing the partial products for `l = 0..L` reproduces `AB`.

mod blocked;

pub use blocked::{reorder_block_major, BlockedOperand, Orientation, Tile};

use rayon::prelude::*;

use crate::counter::MacCounter;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::projection::ProjectionPair;
use crate::real::{dot, Precision, Real};

/// Default subblock size.
pub const DEFAULT_BLOCK: usize = 144;

/// How the convolution kernels treat output phases. Ignored by GEMM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleMode {
    /// Compute every output phase.
    #[default]
    AllPhases,
    /// Compute one phase in `L` and interpolate the rest.
    HalfInterpolate,
}

/// The precision knob: how many of the `L` projections are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionConfig {
    projection_size: usize,
    projections_used: usize,
    sample_mode: SampleMode,
}

impl PrecisionConfig {
    pub fn new(projection_size: usize, projections_used: usize) -> Result<Self> {
        if projections_used == 0 || projections_used > projection_size {
            return Err(Error::invalid(format!(
                "projections_used must be in 1..={projection_size}, got {projections_used}"
            )));
        }
        Ok(PrecisionConfig {
            projection_size,
            projections_used,
            sample_mode: SampleMode::default(),
        })
    }

    /// All `L` projections.
    pub fn full(projection_size: usize) -> Self {
        PrecisionConfig {
            projection_size,
            projections_used: projection_size,
            sample_mode: SampleMode::default(),
        }
    }

    pub fn with_sample_mode(mut self, mode: SampleMode) -> Self {
        self.sample_mode = mode;
        self
    }

    pub fn projection_size(&self) -> usize {
        self.projection_size
    }

    pub fn projections_used(&self) -> usize {
        self.projections_used
    }

    /// The highest projection index computed (`l` in the cost formulas).
    pub fn last_index(&self) -> usize {
        self.projections_used - 1
    }

    pub fn sample_mode(&self) -> SampleMode {
        self.sample_mode
    }

    pub(crate) fn check_pair(&self, pair: &ProjectionPair) -> Result<()> {
        if pair.size() != self.projection_size {
            return Err(Error::invalid(format!(
                "precision config is for L={}, projection pair has L={}",
                self.projection_size,
                pair.size()
            )));
        }
        Ok(())
    }
}

/// Border regions left over when a dimension is not a multiple of the block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cleanup {
    pub row_border: usize,
    pub inner_border: usize,
    pub col_border: usize,
}

/// Geometry of an `M×K` by `K×W` product blocked into `N×N` subblocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GemmPlan {
    pub m: usize,
    pub k: usize,
    pub w: usize,
    pub block: usize,
    pub cleanup: Cleanup,
    projection_size: Option<usize>,
}

impl GemmPlan {
    pub fn new(m: usize, k: usize, w: usize, block: usize) -> Result<Self> {
        if block == 0 || m == 0 || k == 0 || w == 0 {
            return Err(Error::invalid("GEMM dimensions and block size must be positive"));
        }
        Ok(GemmPlan {
            m,
            k,
            w,
            block,
            cleanup: Cleanup {
                row_border: m % block,
                inner_border: k % block,
                col_border: w % block,
            },
            projection_size: None,
        })
    }

    /// Attaches a projection size; the block must be divisible by it.
    pub fn with_projection(mut self, projection_size: usize) -> Result<Self> {
        if !self.block.is_multiple_of(projection_size) {
            return Err(Error::invalid(format!(
                "block size {} not divisible by projection size {projection_size}",
                self.block
            )));
        }
        self.projection_size = Some(projection_size);
        Ok(self)
    }

    /// Inner dimension after zero-padding to a multiple of the projection size.
    pub fn padded_k(&self) -> usize {
        match self.projection_size {
            Some(l) => self.k.div_ceil(l) * l,
            None => self.k,
        }
    }

    pub fn is_padded(&self) -> bool {
        self.padded_k() != self.k
    }

    /// Checks the block against `N = 2k · simd_bits / b_repr`. The rule is
    /// advisory, so a mismatch yields a message rather than an error.
    pub fn sizing_warning(&self, simd_bits: usize, b_repr: usize) -> Option<String> {
        let lanes2 = 2 * simd_bits / b_repr.max(1);
        if lanes2 == 0 || !self.block.is_multiple_of(lanes2) {
            Some(format!(
                "block size {} is not a multiple of 2·{simd_bits}/{b_repr} = {lanes2}",
                self.block
            ))
        } else {
            None
        }
    }
}

/// Blocked GEMM executor: subblock size and evaluation precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GemmKernel {
    pub block: usize,
    pub precision: Precision,
}

impl Default for GemmKernel {
    fn default() -> Self {
        GemmKernel {
            block: DEFAULT_BLOCK,
            precision: Precision::Double,
        }
    }
}

fn check_inner(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.cols() != b.rows() {
        return Err(Error::dims(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// `out += a·b` over packed operands. `out` is row-major `a.rows() × b.cols()`.
fn multiply_packed<S: Real>(a: &BlockedOperand<S>, b: &BlockedOperand<S>, out: &mut [S], counter: &MacCounter) {
    debug_assert_eq!(a.cols(), b.rows());
    debug_assert_eq!(a.col_block(), b.row_block());
    let width = b.cols();
    let (grid_m, grid_k) = a.grid();
    let grid_w = b.grid().1;
    let mut macs = 0u64;
    for bi in 0..grid_m {
        for bj in 0..grid_w {
            for bk in 0..grid_k {
                let (ta, da) = a.tile_at(bi, bk);
                let (tb, db) = b.tile_at(bk, bj);
                let inner = ta.cols;
                for i in 0..ta.rows {
                    let arow = &da[i * inner..(i + 1) * inner];
                    let orow = &mut out[(ta.row0 + i) * width + tb.col0..][..tb.cols];
                    for (j, o) in orow.iter_mut().enumerate() {
                        *o += dot(arow, &db[j * inner..(j + 1) * inner]);
                    }
                }
                macs += (ta.rows * tb.cols * inner) as u64;
            }
        }
    }
    counter.add(macs);
}

fn to_matrix<S: Real>(rows: usize, cols: usize, data: &[S]) -> Matrix {
    Matrix::from_fn(rows, cols, |i, j| data[i * cols + j].to_f64())
}

/// Projected operands for one projection index.
struct ProjectedPanel<S> {
    lhs: BlockedOperand<S>,
    rhs: BlockedOperand<S>,
}

impl GemmKernel {
    pub fn new(block: usize, precision: Precision) -> Result<Self> {
        if block == 0 {
            return Err(Error::invalid("block size must be positive"));
        }
        Ok(GemmKernel { block, precision })
    }

    fn inner_block(&self, projection_size: usize) -> usize {
        self.block.div_ceil(projection_size).max(1)
    }

    /// Exact blocked product `a·b`.
    pub fn conventional(&self, a: &Matrix, b: &Matrix, counter: &MacCounter) -> Result<Matrix> {
        check_inner(a, b)?;
        Ok(match self.precision {
            Precision::Single => self.conventional_impl::<f32>(a, b, counter),
            Precision::Double => self.conventional_impl::<f64>(a, b, counter),
        })
    }

    fn conventional_impl<S: Real>(&self, a: &Matrix, b: &Matrix, counter: &MacCounter) -> Matrix {
        let n = self.block;
        let pa = BlockedOperand::<S>::pack(a, n, n, Orientation::RowWise);
        let pb = BlockedOperand::<S>::pack(b, n, n, Orientation::ColWise);
        let mut out = vec![S::zero(); a.rows() * b.cols()];
        multiply_packed(&pa, &pb, &mut out, counter);
        to_matrix(a.rows(), b.cols(), &out)
    }

    fn check_projected(&self, a: &Matrix, b: &Matrix, pair: &ProjectionPair) -> Result<()> {
        check_inner(a, b)?;
        if !self.block.is_multiple_of(pair.size()) {
            return Err(Error::invalid(format!(
                "block size {} not divisible by projection size {}",
                self.block,
                pair.size()
            )));
        }
        Ok(())
    }

    fn pack_panel<S: Real>(
        &self,
        a: &Matrix,
        b: &Matrix,
        pair: &ProjectionPair,
        l: usize,
        counter: &MacCounter,
    ) -> ProjectedPanel<S> {
        let kb = self.inner_block(pair.size());
        let lhs = BlockedOperand::pack_projected_rows(a, pair, l, self.block, kb);
        let rhs = BlockedOperand::pack_projected_cols(b, pair, l, kb, self.block);
        let padded = (lhs.cols() * pair.size()) as u64;
        counter.add(padded * (a.rows() + b.cols()) as u64);
        ProjectedPanel { lhs, rhs }
    }

    /// The single partial product `R⁽ˡ⁾ = (A·C_N)_l · (D_N·B)_l`.
    pub fn partial(
        &self,
        a: &Matrix,
        b: &Matrix,
        pair: &ProjectionPair,
        l: usize,
        counter: &MacCounter,
    ) -> Result<Matrix> {
        self.check_projected(a, b, pair)?;
        pair.check_index(l)?;
        Ok(match self.precision {
            Precision::Single => self.partial_impl::<f32>(a, b, pair, l, counter),
            Precision::Double => self.partial_impl::<f64>(a, b, pair, l, counter),
        })
    }

    fn partial_impl<S: Real>(
        &self,
        a: &Matrix,
        b: &Matrix,
        pair: &ProjectionPair,
        l: usize,
        counter: &MacCounter,
    ) -> Matrix {
        let panel = self.pack_panel::<S>(a, b, pair, l, counter);
        let mut out = vec![S::zero(); a.rows() * b.cols()];
        multiply_packed(&panel.lhs, &panel.rhs, &mut out, counter);
        to_matrix(a.rows(), b.cols(), &out)
    }

    /// `Σ_{l < projections_used} R⁽ˡ⁾`, accumulated in ascending `l`.
    /// Projection happens while packing each operand.
    pub fn projected(
        &self,
        a: &Matrix,
        b: &Matrix,
        pair: &ProjectionPair,
        cfg: &PrecisionConfig,
        counter: &MacCounter,
    ) -> Result<Matrix> {
        self.check_projected(a, b, pair)?;
        cfg.check_pair(pair)?;
        Ok(match self.precision {
            Precision::Single => self.projected_impl::<f32>(a, b, pair, cfg, counter),
            Precision::Double => self.projected_impl::<f64>(a, b, pair, cfg, counter),
        })
    }

    fn projected_impl<S: Real>(
        &self,
        a: &Matrix,
        b: &Matrix,
        pair: &ProjectionPair,
        cfg: &PrecisionConfig,
        counter: &MacCounter,
    ) -> Matrix {
        let size = a.rows() * b.cols();
        let mut acc = vec![S::zero(); size];
        let mut partial = vec![S::zero(); size];
        for l in 0..cfg.projections_used() {
            let panel = self.pack_panel::<S>(a, b, pair, l, counter);
            if l == 0 {
                multiply_packed(&panel.lhs, &panel.rhs, &mut acc, counter);
            } else {
                partial.fill(S::zero());
                multiply_packed(&panel.lhs, &panel.rhs, &mut partial, counter);
                for (x, &p) in acc.iter_mut().zip(&partial) {
                    *x += p;
                }
                counter.add(size as u64);
            }
        }
        to_matrix(a.rows(), b.cols(), &acc)
    }

    /// Same result as [`GemmKernel::projected`], with the partial products
    /// evaluated concurrently. The reduction stays sequential in ascending
    /// `l`, so the output is bit-identical to the sequential path.
    pub fn projected_par(
        &self,
        a: &Matrix,
        b: &Matrix,
        pair: &ProjectionPair,
        cfg: &PrecisionConfig,
        counter: &MacCounter,
    ) -> Result<Matrix> {
        self.check_projected(a, b, pair)?;
        cfg.check_pair(pair)?;
        Ok(match self.precision {
            Precision::Single => self.projected_par_impl::<f32>(a, b, pair, cfg, counter),
            Precision::Double => self.projected_par_impl::<f64>(a, b, pair, cfg, counter),
        })
    }

    fn projected_par_impl<S: Real>(
        &self,
        a: &Matrix,
        b: &Matrix,
        pair: &ProjectionPair,
        cfg: &PrecisionConfig,
        counter: &MacCounter,
    ) -> Matrix {
        let size = a.rows() * b.cols();
        let partials: Vec<Vec<S>> = (0..cfg.projections_used())
            .into_par_iter()
            .map(|l| {
                let panel = self.pack_panel::<S>(a, b, pair, l, counter);
                let mut out = vec![S::zero(); size];
                multiply_packed(&panel.lhs, &panel.rhs, &mut out, counter);
                out
            })
            .collect();
        let mut iter = partials.into_iter();
        let mut acc = iter.next().expect("at least one projection");
        for p in iter {
            for (x, v) in acc.iter_mut().zip(p) {
                *x += v;
            }
            counter.add(size as u64);
        }
        to_matrix(a.rows(), b.cols(), &acc)
    }

    /// Multiplies `a` by a right operand whose projections were packed once.
    pub fn projected_with_rhs(&self, a: &Matrix, rhs: &ProjectedRhs, counter: &MacCounter) -> Result<Matrix> {
        if a.cols() != rhs.rows {
            return Err(Error::dims(format!(
                "cannot multiply {}x{} by {}x{}",
                a.rows(),
                a.cols(),
                rhs.rows,
                rhs.cols
            )));
        }
        if rhs.kernel != *self {
            return Err(Error::invalid("projected operand was packed for a different kernel"));
        }
        Ok(match &rhs.panels {
            Panels::Single(p) => self.with_rhs_impl::<f32>(a, rhs, p, counter),
            Panels::Double(p) => self.with_rhs_impl::<f64>(a, rhs, p, counter),
        })
    }

    fn with_rhs_impl<S: Real>(
        &self,
        a: &Matrix,
        rhs: &ProjectedRhs,
        panels: &[BlockedOperand<S>],
        counter: &MacCounter,
    ) -> Matrix {
        let pair = &rhs.pair;
        let kb = self.inner_block(pair.size());
        let size = a.rows() * rhs.cols;
        let mut acc = vec![S::zero(); size];
        let mut partial = vec![S::zero(); size];
        for (l, rp) in panels.iter().enumerate() {
            let lhs = BlockedOperand::<S>::pack_projected_rows(a, pair, l, self.block, kb);
            counter.add((lhs.cols() * pair.size() * a.rows()) as u64);
            if l == 0 {
                multiply_packed(&lhs, rp, &mut acc, counter);
            } else {
                partial.fill(S::zero());
                multiply_packed(&lhs, rp, &mut partial, counter);
                for (x, &p) in acc.iter_mut().zip(&partial) {
                    *x += p;
                }
                counter.add(size as u64);
            }
        }
        to_matrix(a.rows(), rhs.cols, &acc)
    }
}

#[derive(Debug, Clone)]
enum Panels {
    Single(Vec<BlockedOperand<f32>>),
    Double(Vec<BlockedOperand<f64>>),
}

/// A right-hand operand projected and packed once, for repeated products
/// against a fixed matrix (e.g. a PCA basis).
#[derive(Debug, Clone)]
pub struct ProjectedRhs {
    rows: usize,
    cols: usize,
    pair: ProjectionPair,
    kernel: GemmKernel,
    panels: Panels,
}

impl ProjectedRhs {
    pub fn new(
        b: &Matrix,
        pair: &ProjectionPair,
        cfg: &PrecisionConfig,
        kernel: &GemmKernel,
        counter: &MacCounter,
    ) -> Result<Self> {
        cfg.check_pair(pair)?;
        if !kernel.block.is_multiple_of(pair.size()) {
            return Err(Error::invalid("block size not divisible by projection size"));
        }
        let kb = kernel.inner_block(pair.size());
        fn pack_all<S: Real>(
            b: &Matrix,
            pair: &ProjectionPair,
            used: usize,
            kb: usize,
            block: usize,
            counter: &MacCounter,
        ) -> Vec<BlockedOperand<S>> {
            (0..used)
                .map(|l| {
                    let p = BlockedOperand::pack_projected_cols(b, pair, l, kb, block);
                    counter.add((p.rows() * pair.size() * b.cols()) as u64);
                    p
                })
                .collect()
        }
        let used = cfg.projections_used();
        let panels = match kernel.precision {
            Precision::Single => Panels::Single(pack_all(b, pair, used, kb, kernel.block, counter)),
            Precision::Double => Panels::Double(pack_all(b, pair, used, kb, kernel.block, counter)),
        };
        Ok(ProjectedRhs {
            rows: b.rows(),
            cols: b.cols(),
            pair: pair.clone(),
            kernel: *kernel,
            panels,
        })
    }
}

/// Exact blocked product with `n×n` subblocks, in double precision.
pub fn gemm_conventional(a: &Matrix, b: &Matrix, n: usize) -> Result<Matrix> {
    GemmKernel::new(n, Precision::Double)?.conventional(a, b, &MacCounter::new())
}

/// Partial product for projection `l`, computed from explicitly projected
/// operands (`project_rows` / `project_cols`) rather than the fused packing.
/// The inner dimension must be divisible by `L`.
pub fn gemm_partial(a: &Matrix, b: &Matrix, pair: &ProjectionPair, l: usize) -> Result<Matrix> {
    check_inner(a, b)?;
    let ac = crate::projection::project_rows(a, pair, l)?;
    let bd = crate::projection::project_cols(b, pair, l)?;
    let kernel = GemmKernel::default();
    let block = kernel.block;
    let inner = kernel.inner_block(pair.size());
    let pa = BlockedOperand::<f64>::pack(&ac, block, inner, Orientation::RowWise);
    let pb = BlockedOperand::<f64>::pack(&bd, inner, block, Orientation::ColWise);
    let mut out = vec![0.0; a.rows() * b.cols()];
    multiply_packed(&pa, &pb, &mut out, &MacCounter::new());
    Ok(to_matrix(a.rows(), b.cols(), &out))
}

/// Approximate product from the first `cfg.projections_used()` projections
/// with the default 144×144 subblocks, in double precision. A shared inner
/// dimension not divisible by `L` is zero-padded.
pub fn gemm_projected(a: &Matrix, b: &Matrix, pair: &ProjectionPair, cfg: &PrecisionConfig) -> Result<Matrix> {
    let kernel = GemmKernel::new(DEFAULT_BLOCK.div_ceil(pair.size()) * pair.size(), Precision::Double)?;
    kernel.projected(a, b, pair, cfg, &MacCounter::new())
}
