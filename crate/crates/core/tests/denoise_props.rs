use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svctx::denoise::{
    aggregate_step, denoise_aggregate, existence_potential, penalty, thresholds, SkipMode,
};
use svctx::net::model::LD_DELTAS;
use svctx::net::{ContextKind, Model, NetworkConfig};
use svctx::ops::bilinear_upsample;
use svctx::Tensor;

fn tensor(shape: &'static [usize]) -> impl Strategy<Value = Tensor> {
    let n: usize = shape.iter().product();
    prop::collection::vec(-3.0f64..3.0, n).prop_map(move |v| Tensor::from_vec(shape, v).unwrap())
}

proptest! {
    #[test]
    fn penalty_vanishes_iff_existence_reaches_threshold(
        e in prop::collection::vec(0.0f64..1.0, 5),
        delta in prop::collection::vec(0.01f64..2.0, 5),
        t in 0.05f64..0.9,
    ) {
        let e = Tensor::from_vec(&[5], e).unwrap();
        let d = Tensor::from_vec(&[5], delta).unwrap();
        let p = penalty(&e, t, &d).unwrap();
        for (pv, ev) in p.data().iter().zip(e.data()) {
            if *ev >= t {
                prop_assert_eq!(*pv, 0.0);
            } else {
                prop_assert!(*pv > 0.0);
            }
        }
    }

    #[test]
    fn aggregate_dominates_upsampled_higher(
        lower in tensor(&[3, 4, 6]),
        higher in tensor(&[3, 2, 3]),
        pen in prop::collection::vec(0.0f64..2.0, 3),
    ) {
        let up = bilinear_upsample(&higher, 2).unwrap();
        let pen = Tensor::from_vec(&[3], pen).unwrap();
        let out = denoise_aggregate(&lower, &pen, &up).unwrap();
        for (o, u) in out.data().iter().zip(up.data()) {
            prop_assert!(o >= u);
        }
        let delta = Tensor::from_vec(&[3], vec![0.5, 1.0, 2.0]).unwrap();
        let (step, _) = aggregate_step(SkipMode::Denoise, &higher, &lower, 2, 1.0 / 3.0, Some(&delta)).unwrap();
        for (o, u) in step.data().iter().zip(up.data()) {
            prop_assert!(o >= u);
        }
    }

    #[test]
    fn existence_potential_is_a_probability(scores in tensor(&[4, 3, 3])) {
        let (e, _) = existence_potential(&scores).unwrap();
        // the class maxima of a softmax sum to at least one
        prop_assert!(e.sum() >= 1.0 - 1e-12);
        for v in e.data() {
            prop_assert!(*v > 0.0 && *v <= 1.0);
        }
    }
}

#[test]
fn thresholds_double_per_level() {
    assert_eq!(thresholds(5, 2), vec![0.2, 0.4]);
    assert_eq!(thresholds(4, 3), vec![0.25, 0.5, 1.0]);
}

#[test]
fn zero_penalty_weights_reproduce_the_clamped_skip_network() {
    for context in ["none", "svc", "sfc_full"] {
        let mut config = NetworkConfig {
            classes: 4,
            widths: [4, 6, 8],
            context_kernel: 3,
            ..NetworkConfig::default()
        };
        config.set("context", context).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(300);
        let mut ld = Model::init(&config, &mut rng).unwrap();
        for name in LD_DELTAS {
            *ld.params.get_mut(name).unwrap() = Tensor::zeros(&[4]);
        }
        let mut clamped = ld.clone();
        clamped.config.ld_enabled = false;
        clamped.config.clamp_skip = true;
        let mut kept = svctx::net::Params::new();
        for (name, t) in ld.params.iter().filter(|(n, _)| !n.starts_with("ld.")) {
            kept.insert(name.clone(), t.clone());
        }
        clamped.params = kept;
        clamped.validate().unwrap();
        let images: Vec<Tensor> = (0..2)
            .map(|_| Tensor::randn(&[3, 16, 16], 1.0, &mut rng))
            .collect();
        let a = ld.forward_train(&images).unwrap();
        let b = clamped.forward_train(&images).unwrap();
        for (x, y) in a.scores.iter().zip(&b.scores) {
            assert_eq!(x.data(), y.data(), "{context}");
        }
        // the same holds in eval mode
        let a = ld.forward(&images).unwrap();
        let b = clamped.forward(&images).unwrap();
        assert_eq!(a.scores[0].data(), b.scores[0].data());
        assert_eq!(ld.config.context == ContextKind::ShapeVariant, a.masks[0].is_some());
    }
}

#[test]
fn plain_skip_is_clamped_skip_when_lower_scores_are_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let lower = Tensor::rand_uniform(&[3, 4, 4], 0.1, 2.0, &mut rng);
    let higher = Tensor::randn(&[3, 2, 2], 1.0, &mut rng);
    let (plain, _) = aggregate_step(SkipMode::Plain, &higher, &lower, 2, 0.3, None).unwrap();
    let (clamped, _) = aggregate_step(SkipMode::Clamped, &higher, &lower, 2, 0.3, None).unwrap();
    assert_eq!(plain.data(), clamped.data());
}
