//! Convolution expressed as a sequence of translated inner products, each
//! evaluated in the projected domain. Slow but transparent; used as a
//! reference for the blocked kernel.

use crate::error::{Error, Result};
use crate::gemm::PrecisionConfig;
use crate::matrix::Signal;
use crate::projection::ProjectionPair;

use super::ConvVariant;

/// Circular translation by `shift` on length-`size` vectors:
/// `(a·P_n)[j] = a[(j + n) mod N]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationIndex {
    shift: usize,
    size: usize,
}

impl PermutationIndex {
    pub fn new(shift: usize, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("permutation size must be positive"));
        }
        if shift >= size {
            return Err(Error::IndexOutOfRange {
                what: "translation",
                index: shift,
                bound: size,
            });
        }
        Ok(PermutationIndex { shift, size })
    }

    pub fn identity(size: usize) -> Result<Self> {
        PermutationIndex::new(0, size)
    }

    pub fn shift(&self) -> usize {
        self.shift
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Source index read by output position `j`.
    #[inline]
    pub fn source(&self, j: usize) -> usize {
        (j + self.shift) % self.size
    }

    pub fn apply(&self, a: &[f64]) -> Result<Vec<f64>> {
        if a.len() != self.size {
            return Err(Error::dims(format!(
                "permutation of size {} applied to {} samples",
                self.size,
                a.len()
            )));
        }
        Ok((0..self.size).map(|j| a[self.source(j)]).collect())
    }

    /// Translation by `self` followed by `other`.
    pub fn compose(&self, other: &PermutationIndex) -> Result<Self> {
        if self.size != other.size {
            return Err(Error::dims("composing permutations of different sizes"));
        }
        Ok(PermutationIndex {
            shift: (self.shift + other.shift) % self.size,
            size: self.size,
        })
    }

    /// The dense `N×N` permutation matrix.
    pub fn to_matrix(&self) -> crate::matrix::Matrix {
        crate::matrix::Matrix::from_fn(self.size, self.size, |i, j| if self.source(j) == i { 1.0 } else { 0.0 })
    }
}

/// Evaluates `variant` by translating `a` through every circular shift and
/// taking the projected inner product with `b`, keeping the first
/// `cfg.projections_used()` projections of every length-`L` group.
///
/// Circular variants need `a.len() == b.len()`, a multiple of `L`. Linear
/// variants zero-extend both operands to a multiple of `L` at least as long
/// as the full output, so no wrap-around occurs.
pub fn conv_translate_project(
    a: &Signal,
    b: &Signal,
    pair: &ProjectionPair,
    cfg: &PrecisionConfig,
    variant: ConvVariant,
) -> Result<Signal> {
    cfg.check_pair(pair)?;
    let l_size = pair.size();
    let (a_ext, b_ext, out_len) = if variant.is_circular() {
        if a.len() != b.len() {
            return Err(Error::dims(format!(
                "circular variants need equal lengths, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        if !a.len().is_multiple_of(l_size) {
            return Err(Error::dims(format!(
                "length {} is not a multiple of the projection size {l_size}",
                a.len()
            )));
        }
        (a.as_slice().to_vec(), b.as_slice().to_vec(), a.len())
    } else {
        let out_len = a.len() + b.len() - 1;
        let n = out_len.div_ceil(l_size) * l_size;
        (a.zero_extended(n).into_vec(), b.zero_extended(n).into_vec(), out_len)
    };
    let n = a_ext.len();
    let conv_like = matches!(variant, ConvVariant::Conv | ConvVariant::CircConv);
    // Convolution is correlation against the circularly reversed kernel.
    let b_eff: Vec<f64> = if conv_like {
        (0..n).map(|j| b_ext[(n - j) % n]).collect()
    } else {
        b_ext
    };

    let p = cfg.projections_used();
    let groups = n / l_size;
    let b_d: Vec<f64> = (0..groups)
        .flat_map(|g| {
            let seg = &b_eff[g * l_size..(g + 1) * l_size];
            (0..p).map(move |l| pair.inverse_row(l).iter().zip(seg).map(|(d, v)| d * v).sum::<f64>())
        })
        .collect();

    let mut v = vec![0.0; n];
    for (shift, out) in v.iter_mut().enumerate() {
        let a_n = PermutationIndex::new(shift, n)?.apply(&a_ext)?;
        let mut acc = 0.0;
        for g in 0..groups {
            let seg = &a_n[g * l_size..(g + 1) * l_size];
            for l in 0..p {
                let a_c: f64 = seg.iter().zip(pair.forward_column(l)).map(|(x, c)| x * c).sum();
                acc += a_c * b_d[g * p + l];
            }
        }
        *out = acc;
    }

    let out = match variant {
        ConvVariant::Conv | ConvVariant::CircConv | ConvVariant::CircXcorr => {
            v.truncate(out_len);
            v
        }
        ConvVariant::Xcorr => {
            // Output index i holds lag i − (b.len − 1).
            let back = b.len() - 1;
            (0..out_len).map(|i| v[(i + n - back) % n]).collect()
        }
    };
    Ok(Signal::from_vec_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::conv_direct;
    use crate::projection::{make_dct_pair, make_haar_pair};

    #[test]
    fn permutation_laws() {
        let a: Vec<f64> = (0..8).map(f64::from).collect();
        let p0 = PermutationIndex::identity(8).unwrap();
        assert_eq!(p0.apply(&a).unwrap(), a);
        let p3 = PermutationIndex::new(3, 8).unwrap();
        assert_eq!(p3.apply(&a).unwrap(), vec![3., 4., 5., 6., 7., 0., 1., 2.]);
        let p6 = PermutationIndex::new(6, 8).unwrap();
        let composed = p3.compose(&p6).unwrap();
        assert_eq!(composed.shift(), 1);
        assert_eq!(composed.apply(&a).unwrap(), p6.apply(&p3.apply(&a).unwrap()).unwrap());
        // Row vector times the dense matrix agrees with apply.
        let m = p3.to_matrix();
        let via_matrix: Vec<f64> = (0..8).map(|j| (0..8).map(|i| a[i] * m[(i, j)]).sum()).collect();
        assert_eq!(via_matrix, p3.apply(&a).unwrap());
        assert!(PermutationIndex::new(8, 8).is_err());
    }

    fn assert_close(x: &Signal, y: &Signal, tol: f64) {
        assert_eq!(x.len(), y.len());
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((a - b).abs() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn full_projection_matches_direct() {
        let a = Signal::new((0..8).map(|i| ((i * 5) % 7) as f64 - 3.0).collect()).unwrap();
        let b = Signal::new((0..8).map(|i| (i as f64 * 0.7).cos()).collect()).unwrap();
        let short = Signal::new(vec![0.5, -1.0, 2.0]).unwrap();
        for pair in [
            make_dct_pair(8).unwrap(),
            make_haar_pair(8).unwrap(),
            make_haar_pair(4).unwrap(),
        ] {
            let cfg = PrecisionConfig::full(pair.size());
            for variant in [ConvVariant::CircConv, ConvVariant::CircXcorr] {
                let r = conv_translate_project(&a, &b, &pair, &cfg, variant).unwrap();
                assert_close(&r, &conv_direct(&a, &b, variant).unwrap(), 1e-9);
            }
            for variant in [ConvVariant::Conv, ConvVariant::Xcorr] {
                let r = conv_translate_project(&a, &short, &pair, &cfg, variant).unwrap();
                assert_close(&r, &conv_direct(&a, &short, variant).unwrap(), 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        let pair = make_haar_pair(4).unwrap();
        let cfg = PrecisionConfig::full(4);
        let a = Signal::zeros(6);
        assert!(matches!(
            conv_translate_project(&a, &a, &pair, &cfg, ConvVariant::CircConv),
            Err(Error::DimensionMismatch(_))
        ));
        let cfg8 = PrecisionConfig::full(8);
        assert!(conv_translate_project(&a, &a, &pair, &cfg8, ConvVariant::Conv).is_err());
    }
}
