//! Two-dimensional PCA recognition.

use std::path::Path;

use crate::counter::MacCounter;
use crate::error::{Error, Result};
use crate::gemm::{GemmKernel, PrecisionConfig, ProjectedRhs, DEFAULT_BLOCK};
use crate::io::{read_matrix, read_pgm, ManifestEntry};
use crate::matrix::Matrix;
use crate::projection::ProjectionPair;
use crate::real::Precision;

/// Which GEMM the pipeline uses.
#[derive(Debug, Clone)]
pub enum GemmMode {
    Conventional,
    Projected { pair: ProjectionPair, cfg: PrecisionConfig },
}

impl GemmMode {
    pub fn projected(pair: ProjectionPair, cfg: PrecisionConfig) -> Result<Self> {
        if pair.size() != cfg.projection_size() {
            return Err(Error::invalid(format!(
                "precision config is for L={}, pair has L={}",
                cfg.projection_size(),
                pair.size()
            )));
        }
        Ok(GemmMode::Projected { pair, cfg })
    }

    pub fn label(&self) -> String {
        match self {
            GemmMode::Conventional => "conventional".into(),
            GemmMode::Projected { pair, cfg } => {
                format!("L={} proj={}", pair.size(), cfg.projections_used())
            }
        }
    }

    fn kernel(&self) -> GemmKernel {
        let block = match self {
            GemmMode::Conventional => DEFAULT_BLOCK,
            GemmMode::Projected { pair, .. } => DEFAULT_BLOCK.div_ceil(pair.size()) * pair.size(),
        };
        GemmKernel {
            block,
            precision: Precision::Double,
        }
    }

    pub fn multiply(&self, a: &Matrix, b: &Matrix, counter: &MacCounter) -> Result<Matrix> {
        let kernel = self.kernel();
        match self {
            GemmMode::Conventional => kernel.conventional(a, b, counter),
            GemmMode::Projected { pair, cfg } => kernel.projected(a, b, pair, cfg, counter),
        }
    }
}

/// Zero-mean square training images with their subject labels.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    images: Vec<Matrix>,
    labels: Vec<String>,
}

impl TrainingSet {
    /// Subtracts each image's mean. All images must be square and of equal
    /// size.
    pub fn new(images: Vec<Matrix>, labels: Vec<String>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyGallery);
        }
        if images.len() != labels.len() {
            return Err(Error::dims(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        let n = images[0].rows();
        for img in &images {
            if img.rows() != n || img.cols() != n {
                return Err(Error::dims(format!(
                    "expected {n}x{n} images, found {}x{}",
                    img.rows(),
                    img.cols()
                )));
            }
        }
        let images = images.into_iter().map(|m| subtract_mean(&m)).collect();
        Ok(TrainingSet { images, labels })
    }

    pub fn images(&self) -> &[Matrix] {
        &self.images
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Side length of the images.
    pub fn size(&self) -> usize {
        self.images[0].rows()
    }
}

fn subtract_mean(m: &Matrix) -> Matrix {
    let first = m.as_slice()[0];
    if m.as_slice().iter().all(|&v| v == first) {
        return Matrix::zeros(m.rows(), m.cols());
    }
    let mean = m.mean();
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] - mean)
}

#[derive(Debug, Clone)]
pub struct EigenBasis {
    /// `n×D`, orthonormal columns.
    pub x: Matrix,
    /// Descending.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(pub Matrix);

pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with the matching eigenvectors
/// as columns.
pub fn symmetric_eigen(g: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = g.rows();
    if g.cols() != n {
        return Err(Error::dims(format!("{}x{} matrix is not square", g.rows(), g.cols())));
    }
    let mut a = g.clone();
    let mut v = Matrix::identity(n);
    let tol = 1e-10 * g.frobenius_norm();
    let off = |a: &Matrix| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a.as_mut_slice()[k * n + p] = c * akp - s * akq;
                    a.as_mut_slice()[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a.as_mut_slice()[p * n + k] = c * apk - s * aqk;
                    a.as_mut_slice()[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v.as_mut_slice()[k * n + p] = c * vkp - s * vkq;
                    v.as_mut_slice()[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off(&a) > tol {
        return Err(Error::ConvergenceFailure {
            sweeps: JACOBI_MAX_SWEEPS,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Scatter matrix `G = Σ A_j A_jᵀ`, basis of the top `d` eigenvectors, and
/// the training features `Y_j = A_j X`.
pub fn pca_train(set: &TrainingSet, d: usize, mode: &GemmMode) -> Result<(EigenBasis, Vec<FeatureMatrix>)> {
    pca_train_counted(set, d, mode, &MacCounter::new())
}

pub fn pca_train_counted(
    set: &TrainingSet,
    d: usize,
    mode: &GemmMode,
    counter: &MacCounter,
) -> Result<(EigenBasis, Vec<FeatureMatrix>)> {
    let (basis, features, _) = train(set, d, mode, counter)?;
    Ok((basis, features))
}

/// Training that also returns the extractor built for the basis, so
/// queries reuse its projected operand.
pub(crate) fn train(
    set: &TrainingSet,
    d: usize,
    mode: &GemmMode,
    counter: &MacCounter,
) -> Result<(EigenBasis, Vec<FeatureMatrix>, FeatureExtractor)> {
    let n = set.size();
    if d == 0 || d > n {
        return Err(Error::invalid(format!("feature count D={d} must be in 1..={n}")));
    }
    let mut g = Matrix::zeros(n, n);
    for a in set.images() {
        g.add_assign(&mode.multiply(a, &a.transpose(), counter)?);
    }
    let g = g.add(&g.transpose())?.scale(0.5);
    let (values, vectors) = symmetric_eigen(&g)?;
    let basis = EigenBasis {
        x: Matrix::from_fn(n, d, |i, j| vectors[(i, j)]),
        eigenvalues: values[..d].iter().map(|v| v.max(0.0)).collect(),
    };
    let extractor = FeatureExtractor::new(&basis, mode, counter)?;
    let features = set
        .images()
        .iter()
        .map(|a| extractor.extract(a, counter))
        .collect::<Result<Vec<_>>>()?;
    Ok((basis, features, extractor))
}

/// Maps images onto a fixed basis. In projected mode the basis is
/// projected and packed once.
pub struct FeatureExtractor {
    basis: Matrix,
    kernel: GemmKernel,
    rhs: Option<ProjectedRhs>,
}

impl FeatureExtractor {
    pub fn new(basis: &EigenBasis, mode: &GemmMode, counter: &MacCounter) -> Result<Self> {
        let kernel = mode.kernel();
        let rhs = match mode {
            GemmMode::Conventional => None,
            GemmMode::Projected { pair, cfg } => Some(ProjectedRhs::new(&basis.x, pair, cfg, &kernel, counter)?),
        };
        Ok(FeatureExtractor {
            basis: basis.x.clone(),
            kernel,
            rhs,
        })
    }

    pub fn extract(&self, b: &Matrix, counter: &MacCounter) -> Result<FeatureMatrix> {
        if b.cols() != self.basis.rows() {
            return Err(Error::dims(format!(
                "image has {} columns, basis has {} rows",
                b.cols(),
                self.basis.rows()
            )));
        }
        let y = match &self.rhs {
            None => self.kernel.conventional(b, &self.basis, counter)?,
            Some(rhs) => self.kernel.projected_with_rhs(b, rhs, counter)?,
        };
        Ok(FeatureMatrix(y))
    }
}

/// `Y = B·X` through the selected GEMM.
pub fn pca_extract(b: &Matrix, basis: &EigenBasis, mode: &GemmMode) -> Result<FeatureMatrix> {
    let counter = MacCounter::new();
    FeatureExtractor::new(basis, mode, &counter)?.extract(b, &counter)
}

/// Index of the gallery entry nearest in Frobenius norm; ties go to the
/// lowest index.
pub fn pca_match(y: &FeatureMatrix, gallery: &[FeatureMatrix]) -> Result<usize> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let mut best = (0, f64::INFINITY);
    for (j, g) in gallery.iter().enumerate() {
        let d = y.0.sub(&g.0)?.frobenius_norm();
        if d < best.1 {
            best = (j, d);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Pkm,
}

/// Scales to `[0, 1]`, centre-crops or zero-pads to `n×n` (no resizing when
/// `crop` is `None`) and subtracts the mean. PGM pixels are divided by 255;
/// PKM values are min-max scaled.
pub fn preprocess_image(raw: &Matrix, format: ImageFormat, crop: Option<usize>) -> Matrix {
    let scaled = match format {
        ImageFormat::Pgm => raw.scale(1.0 / 255.0),
        ImageFormat::Pkm => {
            let lo = raw.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = raw.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                Matrix::from_fn(raw.rows(), raw.cols(), |i, j| (raw[(i, j)] - lo) / (hi - lo))
            } else {
                Matrix::zeros(raw.rows(), raw.cols())
            }
        }
    };
    let framed = match crop {
        Some(n) => {
            let r0 = (scaled.rows() as isize - n as isize) / 2;
            let c0 = (scaled.cols() as isize - n as isize) / 2;
            scaled.padded_window(r0, c0, n, n)
        }
        None => scaled,
    };
    subtract_mean(&framed)
}

/// Loads, preprocesses and labels every manifest entry. Without `crop`
/// all images must already share one square size.
pub fn ingest_images(entries: &[ManifestEntry], crop: Option<usize>, format: ImageFormat) -> Result<TrainingSet> {
    if entries.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let mut images = Vec::with_capacity(entries.len());
    let mut expected: Option<(usize, usize)> = None;
    for e in entries {
        let raw = load_image(&e.path, format)?;
        let found = (raw.rows(), raw.cols());
        if crop.is_none() {
            match expected {
                None if found.0 != found.1 => {
                    return Err(Error::HeterogeneousDims {
                        file: e.path.clone(),
                        expected: (found.0, found.0),
                        found,
                    })
                }
                None => expected = Some(found),
                Some(exp) if exp != found => {
                    return Err(Error::HeterogeneousDims {
                        file: e.path.clone(),
                        expected: exp,
                        found,
                    })
                }
                Some(_) => {}
            }
        }
        images.push(preprocess_image(&raw, format, crop));
    }
    let labels = entries.iter().map(|e| e.id.clone()).collect();
    TrainingSet::new(images, labels)
}

fn load_image(path: &Path, format: ImageFormat) -> Result<Matrix> {
    match format {
        ImageFormat::Pgm => read_pgm(path),
        ImageFormat::Pkm => read_matrix(path),
    }
}
