mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use quanvolute::harness::checkpoint;
use quanvolute::mnist::{downscale_10x10, epoch_sample};
use quanvolute::model::{Model, ModelConfig, ModelKind};
use quanvolute::nn::{softmax_xent, Optimizer};
use quanvolute::oracle::{apply_dense, dense_unitary_oracle};
use quanvolute::quanv::{FeatureMap, QuanvLayer};
use quanvolute::rng::Rng64;
use quanvolute::StateVector;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_preserve_norm_and_bound_z(seed in any::<u64>(), n in 1usize..=6, gates in 0usize..40) {
        let mut rng = Rng64::seed_from_u64(seed);
        let (c, p) = common::random_circuit(n, gates, &mut rng);
        let s = c.run(&p, &StateVector::new(n).unwrap()).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        for q in 0..n {
            let z = s.expectation_z(q).unwrap();
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&z));
            let p0 = s.measure_probability(q, 0).unwrap();
            prop_assert!((2.0 * p0 - 1.0 - z).abs() < 1e-12);
        }
    }

    #[test]
    fn simulator_matches_dense_oracle(seed in any::<u64>(), n in 2usize..=4, gates in 1usize..25, start in 0usize..16) {
        let mut rng = Rng64::seed_from_u64(seed);
        let (c, p) = common::random_circuit(n, gates, &mut rng);
        let initial = StateVector::basis(n, start % (1 << n)).unwrap();
        let fast = c.run(&p, &initial).unwrap();
        let dense = apply_dense(&dense_unitary_oracle(&c, &p).unwrap(), &initial);
        for (a, b) in fast.amplitudes().iter().zip(&dense) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn quanv_outputs_are_bounded_and_local(seed in any::<u64>(), y in 0usize..6, x in 0usize..6) {
        let mut rng = Rng64::seed_from_u64(seed);
        let layer = QuanvLayer::random(3, 1, &mut rng).unwrap();
        let pixels: Vec<f64> = (0..36).map(|_| rng.next_f64()).collect();
        let input = FeatureMap::from_values(6, 6, 1, pixels.clone()).unwrap();
        let before = layer.forward(&input).unwrap();
        prop_assert!(before.values().iter().all(|v| v.abs() <= 1.0 + 1e-12));
        let mut changed = pixels;
        changed[y * 6 + x] = 1.0 - changed[y * 6 + x];
        let after = layer.forward(&FeatureMap::from_values(6, 6, 1, changed).unwrap()).unwrap();
        for oy in 0..5 {
            for ox in 0..5 {
                let covers = (oy..oy + 2).contains(&y) && (ox..ox + 2).contains(&x);
                if !covers {
                    for c in 0..3 {
                        prop_assert_eq!(before.get(oy, ox, c), after.get(oy, ox, c));
                    }
                }
            }
        }
    }

    #[test]
    fn softmax_xent_is_nonnegative_with_zero_sum_gradient(
        logits in prop::collection::vec(-30.0f64..30.0, 10),
        label in 0usize..10,
    ) {
        let (loss, grad) = softmax_xent(&logits, label).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert!(grad.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn downscale_preserves_mean(pixels in prop::collection::vec(any::<u8>(), 784)) {
        let small = downscale_10x10(&pixels).unwrap();
        let src = pixels.iter().map(|&p| p as f64).sum::<f64>() / (255.0 * 784.0);
        let dst = small.iter().sum::<f64>() / 100.0;
        prop_assert!((src - dst).abs() < 1e-12);
        prop_assert!(small.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn epoch_sample_is_distinct_and_reproducible(n in 1usize..3000, frac in 0.0f64..=1.0, seed in any::<u64>(), epoch in 0u64..100) {
        let k = (n as f64 * frac) as usize;
        let a = epoch_sample(n, k, seed, epoch).unwrap();
        prop_assert_eq!(a.len(), k);
        prop_assert_eq!(a.iter().collect::<HashSet<_>>().len(), k);
        prop_assert!(a.iter().all(|&i| i < n));
        prop_assert_eq!(a, epoch_sample(n, k, seed, epoch).unwrap());
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical(seed in any::<u64>(), kind in 0usize..3, channels in 1usize..5, stride in 1usize..4) {
        let config = ModelConfig { channels, stride, conv_relu: seed % 2 == 0 };
        let m = Model::new(ModelKind::ALL[kind], config, seed).unwrap();
        let text = checkpoint::to_text(&m);
        let back = checkpoint::from_text(&text).unwrap();
        prop_assert_eq!(checkpoint::to_text(&back), text);
    }

    #[test]
    fn zero_gradient_adam_step_is_a_no_op(values in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let mut p = values.clone();
        let g = vec![0.0; values.len()];
        let mut adam = Optimizer::adam(0.1).unwrap();
        adam.step(&mut [&mut p], &[&g]).unwrap();
        prop_assert_eq!(p, values);
    }
}
