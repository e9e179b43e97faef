use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svctx::data::scene::{CLASSES, H_SQUARE, V_SQUARE};
use svctx::data::{gen_scene, gen_scenes, SceneSpec};

#[test]
fn per_pixel_nearest_centroid_cannot_tell_squares_apart() {
    let spec = SceneSpec::default();
    let train = gen_scenes(&spec, 70, 100);
    let test = gen_scenes(&spec, 71, 100);
    let mut sums = vec![[0.0f64; 3]; CLASSES];
    let mut counts = vec![0usize; CLASSES];
    for s in &train {
        let plane = s.labels.len();
        for (p, &l) in s.labels.iter().enumerate() {
            for c in 0..3 {
                sums[l as usize][c] += s.image.data()[c * plane + p];
            }
            counts[l as usize] += 1;
        }
    }
    let centroids: Vec<[f64; 3]> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.map(|v| v / n as f64))
        .collect();
    let (mut right, mut total) = (0usize, 0usize);
    for s in &test {
        let plane = s.labels.len();
        for (p, &l) in s.labels.iter().enumerate() {
            if l != H_SQUARE && l != V_SQUARE {
                continue;
            }
            let rgb: Vec<f64> = (0..3).map(|c| s.image.data()[c * plane + p]).collect();
            let nearest = (0..CLASSES)
                .min_by(|&a, &b| {
                    let d = |k: usize| (0..3).map(|c| (rgb[c] - centroids[k][c]).powi(2)).sum::<f64>();
                    d(a).total_cmp(&d(b))
                })
                .unwrap();
            right += (nearest == l as usize) as usize;
            total += 1;
        }
    }
    let acc = right as f64 / total as f64;
    assert!(total > 1000);
    assert!(acc <= 0.55, "nearest-centroid accuracy on squares {acc}");
}

#[test]
fn equal_seeds_give_identical_scenes() {
    let spec = SceneSpec::default();
    let a = gen_scene(&spec, &mut ChaCha8Rng::seed_from_u64(5));
    let b = gen_scene(&spec, &mut ChaCha8Rng::seed_from_u64(5));
    assert_eq!(a.image, b.image);
    assert_eq!(a.labels, b.labels);
    assert_eq!(gen_scenes(&spec, 3, 4)[2].labels, gen_scenes(&spec, 3, 6)[2].labels);
}

#[test]
fn every_scene_has_a_square_and_both_textures() {
    let spec = SceneSpec::default();
    for s in gen_scenes(&spec, 8, 50) {
        let has = |c: u8| s.labels.contains(&c);
        assert!(has(1) && has(2));
        assert!(has(H_SQUARE) || has(V_SQUARE));
        assert!(s.labels.iter().all(|&l| (l as usize) < CLASSES));
        assert!(s.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
