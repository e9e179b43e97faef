use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svctx::ops::conv2d;
use svctx::reference::expand_kernels;
use svctx::svconv::{sfc_forward, SvKernels};
use svctx::{ShapeMask, SvConvLayer, Tensor};

#[test]
fn all_ones_mask_is_standard_convolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for trial in 0..50 {
        let k = [1, 3, 5, 7][trial % 4];
        let (d, f) = (rng.random_range(1..5), rng.random_range(1..5));
        let (h, w) = (rng.random_range(1..10), rng.random_range(1..10));
        let layer = SvConvLayer::random(k, d, f, false, &mut rng).unwrap();
        let x = Tensor::randn(&[d, h, w], 1.0, &mut rng);
        let SvKernels::Full(theta) = &layer.kernels else { unreachable!() };
        let expect = conv2d(&x, theta).unwrap();
        let masked = layer.forward(&x, Some(&ShapeMask::ones(k, h, w))).unwrap();
        let fixed = sfc_forward(&x, &layer).unwrap();
        assert!(masked.max_abs_diff(&expect).unwrap() < 1e-12, "trial {trial}");
        assert!(fixed.max_abs_diff(&expect).unwrap() < 1e-12, "trial {trial}");
    }
}

#[test]
fn separable_equals_full_on_factorized_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    for trial in 0..50 {
        let k = [1, 3, 5, 7][trial % 4];
        let (d, f) = (rng.random_range(1..5), rng.random_range(1..5));
        let (h, w) = (rng.random_range(1..10), rng.random_range(1..10));
        let sep = SvConvLayer::random(k, d, f, true, &mut rng).unwrap();
        let full = SvConvLayer::full(expand_kernels(&sep)).unwrap();
        let x = Tensor::randn(&[d, h, w], 1.0, &mut rng);
        let mask = ShapeMask::from_planes(k, Tensor::rand_uniform(&[k * k, h, w], 0.0, 1.0, &mut rng), 3.0)
            .unwrap();
        for m in [None, Some(&mask)] {
            let a = sep.forward(&x, m).unwrap();
            let b = full.forward(&x, m).unwrap();
            assert!(a.max_abs_diff(&b).unwrap() < 1e-12, "trial {trial}");
        }
    }
}

#[test]
fn zero_mask_silences_the_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let layer = SvConvLayer::random(5, 3, 2, true, &mut rng).unwrap();
    let x = Tensor::randn(&[3, 6, 6], 1.0, &mut rng);
    let mask = ShapeMask::from_planes(5, Tensor::zeros(&[25, 6, 6]), 3.0).unwrap();
    assert_eq!(layer.forward(&x, Some(&mask)).unwrap().max_abs(), 0.0);
}
