//! Error-tolerant demo pipelines: 2-D PCA recognition and cross-correlation
//! feature matching, each switchable between conventional and projected
//! kernels.

pub mod demo;
pub mod matching;
pub mod pca;

pub use demo::{
    agreement, match_model_macs, pca_model_macs, run_match_dataset, run_match_demo, run_pca_dataset, run_pca_demo,
    DemoRun, MatchDemoConfig, PcaDemoConfig,
};
pub use matching::{xcorr_match, xcorr_match_counted, CorrelationMode, FeatureDb, MatchResult};
pub use pca::{
    ingest_images, pca_extract, pca_match, pca_train, pca_train_counted, preprocess_image, symmetric_eigen, EigenBasis,
    FeatureExtractor, FeatureMatrix, GemmMode, ImageFormat, TrainingSet,
};
