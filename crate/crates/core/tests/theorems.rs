use hsic_planner::hsic_kernel::{
    gram_f64, hsic, hsic_explicit_centering, nhsic, nhsic_linear_features, raw_gram, Kernel, LinearRepr,
};
use nalgebra::DMatrix;
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn randn(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut rng))
}

/// Random orthogonal matrix from the Q factor of a Gaussian matrix.
fn random_orthogonal(d: usize, seed: u64) -> Array2<f64> {
    let a = randn(d, d, seed);
    let m = DMatrix::from_fn(d, d, |i, j| a[[i, j]]);
    let q = m.qr().q();
    Array2::from_shape_fn((d, d), |(i, j)| q[(i, j)])
}

fn linear_nhsic(x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let kx = gram_f64(x.view(), Kernel::Linear).unwrap();
    let ky = gram_f64(y.view(), Kernel::Linear).unwrap();
    nhsic(&kx, &ky).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_one_side_leaves_nhsic_unchanged(
        seed in any::<u64>(), n in 4usize..48, dx in 1usize..24, dy in 1usize..24, log_beta in -3.0f64..3.0,
    ) {
        let x = randn(n, dx, seed);
        let y = randn(n, dy, seed ^ 0x5555);
        let beta = 10f64.powf(log_beta);
        let base = linear_nhsic(&x, &y);
        let scaled = linear_nhsic(&(&x * beta), &y);
        prop_assert!((base - scaled).abs() <= 1e-10, "{base} vs {scaled}");
    }

    #[test]
    fn orthogonal_transform_leaves_nhsic_unchanged(
        seed in any::<u64>(), n in 4usize..48, dx in 1usize..24, dy in 1usize..24,
    ) {
        let x = randn(n, dx, seed);
        let y = randn(n, dy, seed ^ 0xaaaa);
        let u = random_orthogonal(dx, seed ^ 0x1234);
        let base = linear_nhsic(&x, &y);
        let rotated = linear_nhsic(&x.dot(&u), &y);
        prop_assert!((base - rotated).abs() <= 1e-8, "{base} vs {rotated}");
    }

    #[test]
    fn nhsic_is_symmetric_and_bounded(
        seed in any::<u64>(), n in 3usize..40, dx in 1usize..16, dy in 1usize..16, rbf in any::<bool>(),
    ) {
        let kernel = if rbf { Kernel::Rbf { bandwidth: None } } else { Kernel::Linear };
        let x = randn(n, dx, seed);
        let y = randn(n, dy, seed.wrapping_add(1));
        let kx = gram_f64(x.view(), kernel).unwrap();
        let ky = gram_f64(y.view(), kernel).unwrap();
        let a = nhsic(&kx, &ky).unwrap().value;
        let b = nhsic(&ky, &kx).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
        prop_assert!((nhsic(&kx, &kx).unwrap().value - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn explicit_and_precentered_hsic_agree(
        seed in any::<u64>(), n in 3usize..40, dx in 1usize..16, dy in 1usize..16,
    ) {
        let x = randn(n, dx, seed);
        let y = randn(n, dy, seed ^ 0xf0f0);
        let explicit = hsic_explicit_centering(
            &raw_gram(x.view(), Kernel::Linear).unwrap(),
            &raw_gram(y.view(), Kernel::Linear).unwrap(),
        ).unwrap();
        let kx = gram_f64(x.view(), Kernel::Linear).unwrap();
        let ky = gram_f64(y.view(), Kernel::Linear).unwrap();
        let pre = hsic(&kx, &ky).unwrap();
        prop_assert!((explicit - pre).abs() <= 1e-8 * explicit.abs().max(pre.abs()).max(1e-300));
    }

    #[test]
    fn feature_path_matches_gram_path(
        seed in any::<u64>(), n in 3usize..40, dx in 1usize..64, dy in 1usize..64,
    ) {
        let x = randn(n, dx, seed);
        let y = randn(n, dy, seed ^ 0x0f0f);
        let fast = nhsic_linear_features(x.view(), y.view()).unwrap().value;
        let slow = linear_nhsic(&x, &y);
        let repr = LinearRepr::new(x.view()).unwrap().nhsic(&LinearRepr::new(y.view()).unwrap()).unwrap().value;
        prop_assert!((fast - slow).abs() <= 1e-8);
        prop_assert!((repr - slow).abs() <= 1e-8);
    }
}

#[test]
fn independent_samples_score_low_and_copies_score_one() {
    let x = randn(2000, 2, 1);
    let y = randn(2000, 2, 2);
    assert!(nhsic_linear_features(x.view(), y.view()).unwrap().value < 0.01);
    let shifted = &x + 3.0;
    assert!((nhsic_linear_features(x.view(), shifted.view()).unwrap().value - 1.0).abs() < 1e-12);
}

#[test]
fn constant_layer_is_flagged_degenerate() {
    let x = Array2::from_elem((10, 3), 2.5);
    let y = randn(10, 3, 5);
    let r = nhsic_linear_features(x.view(), y.view()).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.value, 0.0);
}
