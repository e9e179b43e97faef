use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svctx::data::pnm::{parse_pgm, parse_ppm, pgm_bytes, ppm_bytes, quantize, read_pgm, write_ppm};
use svctx::data::{confusion, export_mask_image, mask_window_image, Dataset, GrayImage, SceneSpec};
use svctx::net::{checkpoint, Config, Model};
use svctx::{Error, ShapeMask, Tensor};

#[test]
fn hand_counted_confusion_and_metrics() {
    let truth = [0, 0, 1, 1];
    let pred = [0, 1, 1, 1];
    let cm = confusion(&pred, &truth, 2, 255).unwrap();
    assert_eq!((cm.get(0, 0), cm.get(0, 1), cm.get(1, 0), cm.get(1, 1)), (1, 1, 0, 2));
    let m = cm.metrics().unwrap();
    assert_eq!(m.pixel_acc, 0.75);
    assert_eq!(m.mean_acc, (0.5 + 1.0) / 2.0);
    assert_eq!(m.mean_iou, (1.0 / 2.0 + 2.0 / 3.0) / 2.0);
    assert!((m.mean_iou - 7.0 / 12.0).abs() < 1e-15);
}

#[test]
fn absent_classes_and_ignored_pixels() {
    let cm = confusion(&[0, 0, 2, 7], &[0, 0, 2, 255], 4, 255).unwrap();
    assert_eq!(cm.total(), 3);
    let m = cm.metrics().unwrap();
    assert_eq!((m.pixel_acc, m.mean_acc, m.mean_iou), (1.0, 1.0, 1.0));
    assert!(confusion(&[255], &[255], 2, 255).unwrap().metrics().is_err());
    assert!(confusion(&[3], &[0], 2, 255).is_err());
}

#[test]
fn white_pixel_ppm_bytes() {
    let bytes = ppm_bytes(&Tensor::ones(&[3, 1, 1])).unwrap();
    let mut expect = b"P6 1 1 255 ".to_vec();
    expect.extend([0xFF; 3]);
    assert_eq!(bytes, expect);
    assert_eq!(bytes.len(), 14);
}

#[test]
fn pnm_header_errors_carry_offsets() {
    assert!(matches!(parse_pgm(b"P5 1 1 65535 \0\0"), Err(Error::Format { .. })));
    assert!(matches!(parse_pgm(b"P2 1 1 255 \0"), Err(Error::Format { offset: 0, .. })));
    assert!(parse_ppm(b"P6 2 1 255 \x01\x02\x03").is_err());
    assert!(parse_pgm(b"P5 1 1 255 \x01\x02").is_err());
    let with_comment = parse_pgm(b"P5\n# made by hand\n2 1\n255\n\x07\x09").unwrap();
    assert_eq!(with_comment.pixels, vec![7, 9]);
}

#[test]
fn quantization_rounds_half_up() {
    assert_eq!(quantize(0.5), 128);
    assert_eq!(quantize(1.0), 255);
    assert_eq!(quantize(-0.2), 0);
    assert_eq!(quantize(1.7), 255);
}

#[test]
fn mask_pgm_round_trip_equals_quantized_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let mask = ShapeMask::from_planes(5, Tensor::rand_uniform(&[25, 6, 7], 0.0, 1.0, &mut rng), 3.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pgm");
    export_mask_image(&mask, 3, 2, &path, false).unwrap();
    let back = read_pgm(&path).unwrap();
    assert_eq!((back.width, back.height), (5, 5));
    for r in 0..5 {
        for c in 0..5 {
            let v = mask.at(3, 2, 2 - r as isize, 2 - c as isize);
            assert_eq!(back.pixels[r * 5 + c], quantize(v));
        }
    }
    let white = mask_window_image(&ShapeMask::ones(3, 4, 4), 1, 1).unwrap();
    assert!(white.pixels.iter().all(|&p| p == 255));
    assert!(export_mask_image(&mask, 6, 0, dir.path().join("x.pgm"), true).is_err());
}

proptest! {
    #[test]
    fn pgm_round_trip(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
        let pixels: Vec<u8> = (0..w * h).map(|p| (seed.wrapping_mul(p as u64 + 7) >> 13) as u8).collect();
        let img = GrayImage { width: w, height: h, pixels };
        prop_assert_eq!(parse_pgm(&pgm_bytes(&img)).unwrap(), img);
    }

    #[test]
    fn ppm_round_trip_of_quantized_images(w in 1usize..7, h in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Tensor::rand_uniform(&[3, h, w], 0.0, 1.0, &mut rng).map(|v| quantize(v) as f64 / 255.0);
        let back = parse_ppm(&ppm_bytes(&img).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&img).unwrap() < 1e-15);
    }

    #[test]
    fn tensor_blob_round_trip(dims in prop::collection::vec(1usize..5, 1..5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = Tensor::randn(&dims, 1.0, &mut rng);
        let bytes = t.to_bytes();
        let (back, used) = Tensor::from_bytes(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(back, t);
    }
}

#[test]
fn manifest_save_and_load() {
    let spec = SceneSpec { size: 16, object_min: 3, object_max: 4, ..SceneSpec::default() };
    let data = Dataset::from_scenes(svctx::data::gen_scenes(&spec, 9, 3));
    let dir = tempfile::tempdir().unwrap();
    let manifest = data.save(dir.path(), "train").unwrap();
    let back = Dataset::load_manifest(&manifest).unwrap();
    assert_eq!(back.labels, data.labels);
    for (a, b) in back.images.iter().zip(&data.images) {
        assert!(a.max_abs_diff(b).unwrap() <= 0.5 / 255.0 + 1e-12);
    }
    write_ppm(&Tensor::zeros(&[3, 2, 2]), dir.path().join("bad.ppm")).unwrap();
    std::fs::write(dir.path().join("bad.txt"), "bad.ppm missing.pgm\n").unwrap();
    assert!(Dataset::load_manifest(dir.path().join("bad.txt")).is_err());
}

#[test]
fn config_text_round_trip_and_unknown_key() {
    let mut cfg = Config::default();
    cfg.set("network.context", "sfc_full").unwrap();
    cfg.set("optim.max_iter", "17").unwrap();
    cfg.set("data.noise", "0.1").unwrap();
    let back = Config::parse(&cfg.to_text()).unwrap();
    assert_eq!(back, cfg);
    let err = Config::parse("optim.base_lr = 0.1\nnetwork.colour = red\n").unwrap_err();
    assert!(err.to_string().contains("network.colour"), "{err}");
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let mut cfg = Config::default();
    cfg.network.widths = [4, 5, 6];
    cfg.network.context_kernel = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let model = Model::init(&cfg.network, &mut rng).unwrap();
    let bytes = checkpoint::to_bytes(&model, 42);
    let (back, iter) = checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(iter, 42);
    assert_eq!(back, model);
    assert!(matches!(checkpoint::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(checkpoint::from_bytes(&extra).is_err());
    let needle = b"tensor head1.bias 5\n";
    let at = bytes.windows(needle.len()).position(|w| w == needle).unwrap();
    let mut wrong_shape = bytes.clone();
    wrong_shape[at + needle.len() - 2] = b'6';
    assert!(checkpoint::from_bytes(&wrong_shape).is_err());
}
