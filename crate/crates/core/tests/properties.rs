use proptest::prelude::*;

use projscale::metrics::snr;
use projscale::projection::{make_dct_pair, make_haar_pair, project_signal};
use projscale::synth::{rng, uniform_matrix, uniform_signal};
use projscale::{
    conv_direct, conv_fft, conv_overlap_save, conv_translate_project, gemm_partial, gemm_projected, ConvMode, ConvPlan,
    ConvVariant, Matrix, PermutationIndex, PrecisionConfig, ProjectionPair, Signal,
};

fn pair(haar: bool, l: usize) -> ProjectionPair {
    if haar {
        make_haar_pair(l).unwrap()
    } else {
        make_dct_pair(l).unwrap()
    }
}

fn naive(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|t| a[(i, t)] * b[(t, j)]).sum()
    })
}

fn rel(x: &[f64], y: &[f64]) -> f64 {
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    x.iter().zip(y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

fn sum(parts: &[Matrix]) -> Matrix {
    parts[1..].iter().fold(parts[0].clone(), |acc, p| acc.add(p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signal_projection_is_linear(
        seed in any::<u64>(),
        l_exp in 1u32..4,
        haar in any::<bool>(),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
    ) {
        let l_size = 1usize << l_exp;
        let p = pair(haar, l_size);
        let mut r = rng(seed);
        let x = uniform_signal(&mut r, 5 * l_size + 3);
        let y = uniform_signal(&mut r, 5 * l_size + 3);
        let mix = Signal::new(x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| alpha * a + beta * b).collect()).unwrap();
        for l in 0..l_size {
            for phase in [0, l_size - 1] {
                let px = project_signal(&x, &p, l, phase).unwrap();
                let py = project_signal(&y, &p, l, phase).unwrap();
                let pm = project_signal(&mix, &p, l, phase).unwrap();
                for ((m, a), b) in pm.as_slice().iter().zip(px.as_slice()).zip(py.as_slice()) {
                    prop_assert!((m - (alpha * a + beta * b)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn all_projections_reproduce_the_product(
        seed in any::<u64>(),
        m in 1usize..30,
        k in 1usize..40,
        w in 1usize..30,
        l_exp in 1u32..5,
        haar in any::<bool>(),
    ) {
        let l_size = 1usize << l_exp;
        prop_assume!(!(haar && l_size > 8));
        let p = pair(haar, l_size);
        let mut r = rng(seed);
        let a = uniform_matrix(&mut r, m, k);
        let b = uniform_matrix(&mut r, k, w);
        let exact = naive(&a, &b);
        let got = gemm_projected(&a, &b, &p, &PrecisionConfig::full(l_size)).unwrap();
        prop_assert!(rel(got.as_slice(), exact.as_slice()) <= 1e-10);
    }

    #[test]
    fn partial_sums_add_up_in_any_order(
        seed in any::<u64>(),
        m in 1usize..20,
        groups in 1usize..6,
        w in 1usize..20,
        l_exp in 1u32..4,
        used in 1usize..9,
    ) {
        let l_size = 1usize << l_exp;
        let used = used.min(l_size);
        let p = make_dct_pair(l_size).unwrap();
        let mut r = rng(seed);
        let a = uniform_matrix(&mut r, m, groups * l_size);
        let b = uniform_matrix(&mut r, groups * l_size, w);
        let parts: Vec<Matrix> = (0..used).map(|l| gemm_partial(&a, &b, &p, l).unwrap()).collect();
        let fused = gemm_projected(&a, &b, &p, &PrecisionConfig::new(l_size, used).unwrap()).unwrap();
        let forward = sum(&parts);
        let mut reversed_parts = parts.clone();
        reversed_parts.reverse();
        let backward = sum(&reversed_parts);
        prop_assert!(rel(fused.as_slice(), forward.as_slice()) <= 1e-12);
        prop_assert!(rel(backward.as_slice(), forward.as_slice()) <= 1e-12);
    }

    #[test]
    fn translations_form_a_cyclic_group(
        size in 1usize..40,
        n in 0usize..40,
        m in 0usize..40,
        seed in any::<u64>(),
    ) {
        let (n, m) = (n % size, m % size);
        let x = uniform_signal(&mut rng(seed), size);
        let pn = PermutationIndex::new(n, size).unwrap();
        let pm = PermutationIndex::new(m, size).unwrap();
        let twice = pm.apply(&pn.apply(x.as_slice()).unwrap()).unwrap();
        let once = PermutationIndex::new((n + m) % size, size).unwrap().apply(x.as_slice()).unwrap();
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(pn.compose(&pm).unwrap().apply(x.as_slice()).unwrap(), once);
        prop_assert_eq!(PermutationIndex::identity(size).unwrap().apply(x.as_slice()).unwrap(), x.as_slice().to_vec());
        let back = PermutationIndex::new((size - n) % size, size).unwrap();
        prop_assert_eq!(back.apply(&pn.apply(x.as_slice()).unwrap()).unwrap(), x.as_slice().to_vec());
    }

    #[test]
    fn snr_ignores_common_scale(seed in any::<u64>(), len in 2usize..200, c in 1e-3f64..1e3) {
        let mut r = rng(seed);
        let x = uniform_signal(&mut r, len);
        let noise = uniform_signal(&mut r, len);
        let y: Vec<f64> = x.as_slice().iter().zip(noise.as_slice()).map(|(a, e)| a + 1e-3 * e).collect();
        prop_assume!(x.energy() > 0.0);
        let base = snr(x.as_slice(), &y).unwrap();
        let xs: Vec<f64> = x.as_slice().iter().map(|v| v * c).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        let scaled = snr(&xs, &ys).unwrap();
        prop_assert!((base.snr_db - scaled.snr_db).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn overlap_save_matches_direct(
        seed in any::<u64>(),
        k_len in 1usize..48,
        extra in 0usize..300,
        w_extra in 0usize..200,
        minimal in any::<bool>(),
        freq in any::<bool>(),
    ) {
        let mut r = rng(seed);
        let s = uniform_signal(&mut r, k_len + extra);
        let k = uniform_signal(&mut r, k_len);
        let mode = if freq { ConvMode::FreqDomain } else { ConvMode::TimeDomain };
        let plan = if minimal {
            ConvPlan::minimal(k_len, mode).unwrap()
        } else {
            ConvPlan::new(k_len + w_extra, k_len, mode).unwrap()
        };
        let direct = conv_direct(&s, &k, ConvVariant::Conv).unwrap();
        let os = conv_overlap_save(&s, &k, &plan).unwrap();
        let tol = if freq { 1e-9 } else { 1e-10 };
        prop_assert_eq!(os.len(), direct.len());
        prop_assert!(rel(os.as_slice(), direct.as_slice()) <= tol);
        let fft = conv_fft(&s, &k).unwrap();
        prop_assert!(rel(fft.as_slice(), direct.as_slice()) <= 1e-9);
    }

    #[test]
    fn translate_and_project_is_exact(
        seed in any::<u64>(),
        l_exp in 1u32..4,
        haar in any::<bool>(),
        variant in prop_oneof![
            Just(ConvVariant::CircXcorr),
            Just(ConvVariant::CircConv),
            Just(ConvVariant::Conv),
            Just(ConvVariant::Xcorr),
        ],
    ) {
        let l_size = 1usize << l_exp;
        let p = pair(haar, l_size);
        let mut r = rng(seed);
        let a = uniform_signal(&mut r, l_size);
        let b = uniform_signal(&mut r, l_size);
        let exact = conv_direct(&a, &b, variant).unwrap();
        let got = conv_translate_project(&a, &b, &p, &PrecisionConfig::full(l_size), variant).unwrap();
        prop_assert_eq!(got.len(), exact.len());
        for (g, e) in got.as_slice().iter().zip(exact.as_slice()) {
            prop_assert!((g - e).abs() <= 1e-12);
        }
    }
}
