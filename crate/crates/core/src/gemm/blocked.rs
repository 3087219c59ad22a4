//! Block-major operand storage.
//!
//! A matrix is cut into a grid of tiles. Tiles are stored back to back in
//! block-row order; within a tile the values are laid out in row raster
//! (`RowWise`, used for the left operand) or column raster (`ColWise`, used
//! for the right operand), so the inner kernel reads both operands
//! sequentially. Tiles on the right and bottom borders are smaller than the
//! nominal block size and form the cleanup region.

use crate::matrix::Matrix;
use crate::projection::ProjectionPair;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    RowWise,
    ColWise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tile {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
    offset: usize,
}

/// A matrix reordered into contiguous tiles.
#[derive(Debug, Clone)]
pub struct BlockedOperand<S = f64> {
    rows: usize,
    cols: usize,
    row_block: usize,
    col_block: usize,
    orientation: Orientation,
    tiles: Vec<Tile>,
    data: Vec<S>,
}

impl<S: Real> BlockedOperand<S> {
    fn layout(rows: usize, cols: usize, row_block: usize, col_block: usize, orientation: Orientation) -> Self {
        let (row_block, col_block) = (row_block.max(1), col_block.max(1));
        let mut tiles = Vec::new();
        let mut offset = 0;
        for row0 in (0..rows).step_by(row_block) {
            for col0 in (0..cols).step_by(col_block) {
                let t = Tile {
                    row0,
                    col0,
                    rows: row_block.min(rows - row0),
                    cols: col_block.min(cols - col0),
                    offset,
                };
                offset += t.rows * t.cols;
                tiles.push(t);
            }
        }
        BlockedOperand {
            rows,
            cols,
            row_block,
            col_block,
            orientation,
            tiles,
            data: vec![S::zero(); offset],
        }
    }

    /// Packs `x` with rectangular tiles, converting to the evaluation precision.
    pub fn pack(x: &Matrix, row_block: usize, col_block: usize, orientation: Orientation) -> Self {
        Self::pack_with(x.rows(), x.cols(), row_block, col_block, orientation, |i, j| {
            S::from_f64(x[(i, j)])
        })
    }

    pub(crate) fn pack_with(
        rows: usize,
        cols: usize,
        row_block: usize,
        col_block: usize,
        orientation: Orientation,
        mut value: impl FnMut(usize, usize) -> S,
    ) -> Self {
        let mut op = Self::layout(rows, cols, row_block, col_block, orientation);
        for t in op.tiles.clone() {
            let dst = &mut op.data[t.offset..t.offset + t.rows * t.cols];
            match orientation {
                Orientation::RowWise => {
                    for i in 0..t.rows {
                        for j in 0..t.cols {
                            dst[i * t.cols + j] = value(t.row0 + i, t.col0 + j);
                        }
                    }
                }
                Orientation::ColWise => {
                    for j in 0..t.cols {
                        for i in 0..t.rows {
                            dst[j * t.rows + i] = value(t.row0 + i, t.col0 + j);
                        }
                    }
                }
            }
        }
        op
    }

    /// Packs the row projection `A·C_N` restricted to column `l` of every
    /// diagonal block, computed while copying (one sequential pass per row).
    /// Columns past `a.cols()` read as zero, which pads the inner dimension
    /// up to a multiple of `L`.
    pub(crate) fn pack_projected_rows(
        a: &Matrix,
        pair: &ProjectionPair,
        l: usize,
        row_block: usize,
        col_block: usize,
    ) -> Self {
        let n = pair.size();
        let groups = a.cols().div_ceil(n);
        let w: Vec<S> = pair.forward_column(l).iter().map(|&v| S::from_f64(v)).collect();
        let mut op = Self::layout(a.rows(), groups, row_block, col_block, Orientation::RowWise);
        for t in op.tiles.clone() {
            let dst = &mut op.data[t.offset..t.offset + t.rows * t.cols];
            for i in 0..t.rows {
                let row = a.row(t.row0 + i);
                for g in 0..t.cols {
                    let start = (t.col0 + g) * n;
                    let seg = &row[start..(start + n).min(row.len())];
                    let mut acc = S::zero();
                    for (&v, &c) in seg.iter().zip(&w) {
                        acc += S::from_f64(v) * c;
                    }
                    dst[i * t.cols + g] = acc;
                }
            }
        }
        op
    }

    /// Packs the column projection `D_N·B` restricted to row `l` of every
    /// diagonal block. Rows past `b.rows()` read as zero.
    pub(crate) fn pack_projected_cols(
        b: &Matrix,
        pair: &ProjectionPair,
        l: usize,
        row_block: usize,
        col_block: usize,
    ) -> Self {
        let n = pair.size();
        let groups = b.rows().div_ceil(n);
        let w: Vec<S> = pair.inverse_row(l).iter().map(|&v| S::from_f64(v)).collect();
        let mut op = Self::layout(groups, b.cols(), row_block, col_block, Orientation::ColWise);
        for t in op.tiles.clone() {
            let dst = &mut op.data[t.offset..t.offset + t.rows * t.cols];
            for j in 0..t.cols {
                let col = t.col0 + j;
                for g in 0..t.rows {
                    let start = (t.row0 + g) * n;
                    let end = (start + n).min(b.rows());
                    let mut acc = S::zero();
                    for (r, &c) in (start..end).zip(&w) {
                        acc += S::from_f64(b[(r, col)]) * c;
                    }
                    dst[j * t.rows + g] = acc;
                }
            }
        }
        op
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_block(&self) -> usize {
        self.row_block
    }

    pub fn col_block(&self) -> usize {
        self.col_block
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    /// Number of tile rows and tile columns in the grid.
    pub fn grid(&self) -> (usize, usize) {
        (self.rows.div_ceil(self.row_block), self.cols.div_ceil(self.col_block))
    }

    #[inline]
    pub(crate) fn tile_at(&self, bi: usize, bj: usize) -> (&Tile, &[S]) {
        let t = &self.tiles[bi * self.grid().1 + bj];
        (t, &self.data[t.offset..t.offset + t.rows * t.cols])
    }

    pub fn tile_data(&self, index: usize) -> &[S] {
        let t = &self.tiles[index];
        &self.data[t.offset..t.offset + t.rows * t.cols]
    }

    /// The raw block-major storage.
    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    /// Tiles of the nominal size.
    pub fn full_blocks(&self) -> usize {
        self.tiles
            .iter()
            .filter(|t| t.rows == self.row_block && t.cols == self.col_block)
            .count()
    }

    /// Border tiles smaller than the nominal size.
    pub fn cleanup_tiles(&self) -> usize {
        self.tiles.len() - self.full_blocks()
    }

    /// Inverse reordering back to a row-major matrix.
    pub fn to_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for (idx, t) in self.tiles.iter().enumerate() {
            let src = self.tile_data(idx);
            for i in 0..t.rows {
                for j in 0..t.cols {
                    let v = match self.orientation {
                        Orientation::RowWise => src[i * t.cols + j],
                        Orientation::ColWise => src[j * t.rows + i],
                    };
                    m[(t.row0 + i, t.col0 + j)] = v.to_f64();
                }
            }
        }
        m
    }
}

/// Reorders `x` into square `n×n` tiles in the given raster orientation.
pub fn reorder_block_major(x: &Matrix, n: usize, orientation: Orientation) -> BlockedOperand<f64> {
    BlockedOperand::pack(x, n, n, orientation)
}
