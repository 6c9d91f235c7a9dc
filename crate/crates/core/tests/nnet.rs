use ndarray::Array2;
use proptest::prelude::*;

use oodhull::envsim::{sample_environment, EnvSpec, LabeledBatch, TaskSpec, Transform};
use oodhull::nnet::{
    augment, checkpoint, encode, evaluate, init_predictor, train, train_observed, AugmentPolicy, Schedule, TrainConfig,
    TrainMode,
};

fn blobs(n: usize, seed: u64) -> LabeledBatch {
    let env = EnvSpec::new("blobs", TaskSpec::gauss_blobs(2, 0.3), Transform::identity());
    sample_environment(&env, n, seed).unwrap()
}

#[test]
fn pipeline_is_bit_reproducible() {
    let data = blobs(200, 1);
    let cfg = TrainConfig { epochs: 5, seed: 3, ..TrainConfig::default() };
    let run = || {
        let p = init_predictor(&[2, 16, 2], 9).unwrap();
        let (q, h) = train(&p, &data, &cfg).unwrap();
        (q, h.epochs, evaluate(&p, &data).unwrap())
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
}

#[test]
fn head_only_full_batch_loss_is_non_increasing() {
    let data = blobs(256, 2);
    let p = init_predictor(&[2, 16, 2], 4).unwrap();
    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 256,
        lr: 0.05,
        momentum: 0.0,
        weight_decay: 0.0,
        schedule: Schedule::Constant,
        mode: TrainMode::LinearProbeThenFinetune,
        ..TrainConfig::default()
    };
    let mut losses = Vec::new();
    train_observed(&p, &data, &cfg, |epoch, q| {
        if epoch < cfg.epochs / 2 {
            losses.push(q.loss(data.features.view(), &data.labels).unwrap());
        }
    })
    .unwrap();
    assert_eq!(losses.len(), 20);
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
    }
}

#[test]
fn jitter_mean_displacement_matches_rayleigh_mean() {
    let data = blobs(1000, 5);
    let policy = AugmentPolicy { random_crop_pad: 0, hflip_prob: 0.0, jitter_std: 0.05 };
    let out = augment(&data, &policy, 17).unwrap();
    let mean: f64 = (&out.features - &data.features)
        .rows()
        .into_iter()
        .map(|r| r.mapv(|v| v * v).sum().sqrt())
        .sum::<f64>()
        / 1000.0;
    let expected = 0.05 * (std::f64::consts::PI / 2.0).sqrt();
    assert!((mean - expected).abs() <= 0.1 * expected, "{mean} vs {expected}");
    assert_eq!(out.labels, data.labels);
    assert_eq!(out, augment(&data, &policy, 17).unwrap());
}

#[test]
fn flips_on_points_are_unsupported() {
    let policy = AugmentPolicy { random_crop_pad: 0, hflip_prob: 0.5, jitter_std: 0.0 };
    assert_eq!(augment(&blobs(4, 1), &policy, 1).unwrap_err().kind(), "unsupported");
}

fn mean_distance(a: &Array2<f64>, b: &Array2<f64>, same: bool) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for (i, x) in a.rows().into_iter().enumerate() {
        for (j, y) in b.rows().into_iter().enumerate() {
            if same && j <= i {
                continue;
            }
            total += (&x - &y).mapv(|v| v * v).sum().sqrt();
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn trained_representations_separate_far_clusters() {
    let data = blobs(400, 8);
    let p = init_predictor(&[2, 32, 16, 2], 1).unwrap();
    let (q, _) = train(&p, &data, &TrainConfig { epochs: 20, lr: 0.05, seed: 2, ..TrainConfig::default() }).unwrap();
    let reps = encode(&q, &data).unwrap();
    assert_eq!(reps.ncols(), 16);
    let idx = |c: usize| -> Vec<usize> { (0..data.len()).filter(|&i| data.labels[i] == c).take(60).collect() };
    let (r0, r1) = (reps.select(ndarray::Axis(0), &idx(0)), reps.select(ndarray::Axis(0), &idx(1)));
    let inter = mean_distance(&r0, &r1, false);
    let intra = 0.5 * (mean_distance(&r0, &r0, true) + mean_distance(&r1, &r1, true));
    assert!(inter > intra, "inter {inter} <= intra {intra}");
}

#[test]
fn checkpoint_file_round_trip_and_finetune() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    let p = init_predictor(&[2, 8, 2], 6).unwrap();
    checkpoint::save(&p, &path).unwrap();
    assert_eq!(checkpoint::load(&path).unwrap(), p);
    let cfg = TrainConfig {
        epochs: 2,
        mode: TrainMode::FinetuneFrom { checkpoint: path.clone() },
        ..TrainConfig::default()
    };
    let other = init_predictor(&[2, 8, 2], 99).unwrap();
    let (a, _) = train(&other, &blobs(64, 1), &cfg).unwrap();
    let (b, _) = train(&p, &blobs(64, 1), &cfg).unwrap();
    assert_eq!(a, b);
    let missing = TrainConfig { mode: TrainMode::FinetuneFrom { checkpoint: dir.path().join("none") }, ..cfg };
    assert!(train(&p, &blobs(8, 1), &missing).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn zero_input_gives_finite_scores(hidden in prop::collection::vec(1usize..24, 1..4), seed in 0u64..10_000) {
        let mut sizes = vec![5];
        sizes.extend(hidden);
        sizes.push(3);
        let p = init_predictor(&sizes, seed).unwrap();
        let s = p.forward(Array2::zeros((2, 5)).view()).unwrap();
        prop_assert!(s.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn evaluate_ignores_row_order(seed in 0u64..1000, shift in 1usize..63) {
        let data = blobs(64, seed);
        let p = init_predictor(&[2, 8, 2], seed).unwrap();
        let order: Vec<usize> = (0..64).map(|i| (i * 29 + shift) % 64).collect();
        prop_assert_eq!(evaluate(&p, &data).unwrap(), evaluate(&p, &data.select(&order)).unwrap());
    }
}
