//! Precision-scalable GEMM and convolution kernels built on linear projections.
//!
//! Operands are projected with an invertible `L×L` matrix while they are
//! blocked for the kernel. Computing only the first few projections gives an
//! approximate result at a fraction of the multiply-accumulates; computing
//! all of them gives the exact result.

pub mod apps;
pub mod conv;
pub mod cost;
pub mod counter;
pub mod error;
pub mod gemm;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod projection;
pub mod real;
pub mod synth;

pub use conv::{
    alignment_calibrate, conv_direct, conv_fft, conv_overlap_save, conv_projected_blocked, conv_translate_project,
    AlignmentTable, ConvKernel, ConvMode, ConvPlan, ConvVariant, PermutationIndex, ProjectedConvolver,
};
pub use cost::{CostReport, Domain};
pub use counter::MacCounter;
pub use error::{Error, Result};
pub use gemm::{
    gemm_conventional, gemm_partial, gemm_projected, reorder_block_major, BlockedOperand, GemmKernel, GemmPlan,
    Orientation, PrecisionConfig, ProjectedRhs, SampleMode,
};
pub use matrix::{Matrix, Signal};
pub use metrics::{measure_throughput, snr, SnrReport, ThroughputReport};
pub use projection::{
    make_custom_pair, make_dct_pair, make_haar_pair, project_cols, project_rows, project_signal, ProjectionKind,
    ProjectionPair,
};
pub use real::Precision;
