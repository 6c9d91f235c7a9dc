use ndarray::{Array2, Axis};
use proptest::prelude::*;

use oodhull::envsim::{
    apply_transform, ground_truth_label, mixture_sample, sample_environment, EnvSpec, EnvironmentSet,
    GroundTruth, TaskSpec, Transform,
};
use oodhull::hull::SimplexWeights;

fn moons(deg: f64, id: &str) -> EnvSpec {
    EnvSpec::rotated(id, TaskSpec::two_moons(0.1), deg)
}

fn glyph_env(id: &str, transform: Transform) -> EnvSpec {
    EnvSpec::new(id, TaskSpec::glyphs(10, 0.1), transform)
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let env = moons(30.0, "r30");
    let a = sample_environment(&env, 64, 7).unwrap();
    assert_eq!(a, sample_environment(&env, 64, 7).unwrap());
    assert_ne!(a.features, sample_environment(&env, 64, 8).unwrap().features);
}

#[test]
fn blurred_glyphs_stay_in_unit_range_with_balanced_labels() {
    let b = sample_environment(&glyph_env("blur3", Transform::Blur { sigma: 3.0 }), 100, 1).unwrap();
    assert_eq!(b.dim(), 64);
    assert!(b.features.iter().all(|v| (0.0..=1.0).contains(v)));
    let mut counts = [0usize; 10];
    for &l in &b.labels {
        counts[l] += 1;
    }
    assert!(counts.iter().all(|&c| (8..=12).contains(&c)), "{counts:?}");
}

fn pixel_variance(features: &Array2<f64>) -> f64 {
    features
        .axis_iter(Axis(0))
        .map(|row| {
            let m = row.mean().unwrap();
            row.iter().map(|v| (v - m).powi(2)).sum::<f64>() / row.len() as f64
        })
        .sum::<f64>()
        / features.nrows() as f64
}

#[test]
fn blur_sweep_never_increases_pixel_variance() {
    let plain = sample_environment(&glyph_env("plain", Transform::identity()), 50, 3).unwrap();
    let base = apply_transform(&plain, &Transform::Blur { sigma: 2.0 }).unwrap();
    let mut last = pixel_variance(&base.features);
    for sigma in [0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
        let v = pixel_variance(&apply_transform(&base, &Transform::Blur { sigma }).unwrap().features);
        assert!(v <= last + 1e-12, "sigma {sigma}: {v} > {last}");
        last = v;
    }
}

#[test]
fn blur_on_points_is_unsupported() {
    let b = sample_environment(&moons(0.0, "r0"), 5, 1).unwrap();
    let err = apply_transform(&b, &Transform::Blur { sigma: 1.0 }).unwrap_err();
    assert_eq!(err.kind(), "unsupported");
}

#[test]
fn mixture_vertex_has_single_provenance() {
    let envs = EnvironmentSet::new(vec![moons(0.0, "a"), moons(60.0, "b")], None);
    let b = mixture_sample(&envs, &SimplexWeights::vertex(2, 0), 50, 4).unwrap();
    assert!(b.env_ids.iter().all(|e| e == "a"));
}

#[test]
fn even_mixture_provenance_is_binomial() {
    let envs = EnvironmentSet::new(vec![moons(0.0, "a"), moons(60.0, "b")], None);
    let b = mixture_sample(&envs, &SimplexWeights::uniform(2), 10_000, 11).unwrap();
    let a = b.env_ids.iter().filter(|e| *e == "a").count() as f64;
    assert!((a - 5000.0).abs() <= 3.0 * 50.0, "{a}");
}

#[test]
fn three_source_mixture_proportions() {
    let envs = EnvironmentSet::new(vec![moons(0.0, "a"), moons(45.0, "b"), moons(90.0, "c")], None);
    let alpha = SimplexWeights::new(vec![0.2, 0.3, 0.5]).unwrap();
    let b = mixture_sample(&envs, &alpha, 10_000, 5).unwrap();
    for (id, want) in [("a", 0.2), ("b", 0.3), ("c", 0.5)] {
        let got = b.env_ids.iter().filter(|e| *e == id).count() as f64 / 10_000.0;
        assert!((got - want).abs() <= 0.02, "{id}: {got}");
    }
}

#[test]
fn mixture_off_simplex_is_rejected() {
    let envs = EnvironmentSet::new(vec![moons(0.0, "a"), moons(60.0, "b")], None);
    assert!(SimplexWeights::new(vec![0.7, 0.7]).is_err());
    let bad = serde_json::from_str::<SimplexWeights>("[0.7, 0.7]").unwrap();
    assert_eq!(mixture_sample(&envs, &bad, 10, 1).unwrap_err().kind(), "validation");
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
fn ks_p_value(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

#[test]
fn vertex_mixture_matches_source_marginals() {
    let envs = EnvironmentSet::new(vec![moons(0.0, "a"), moons(60.0, "b")], None);
    for seed in 0..5u64 {
        let mix = mixture_sample(&envs, &SimplexWeights::vertex(2, 1), 1000, seed).unwrap();
        let direct = sample_environment(&envs.sources[1], 1000, 1000 + seed).unwrap();
        for col in 0..2 {
            let p = ks_p_value(mix.features.column(col).to_vec(), direct.features.column(col).to_vec());
            assert!(p > 0.01, "seed {seed} column {col}: p = {p}");
        }
    }
}

#[test]
fn noise_free_moons_agree_with_ground_truth() {
    let env = EnvSpec::rotated("r25", TaskSpec::two_moons(0.0), 25.0);
    let b = sample_environment(&env, 1000, 9).unwrap();
    let truth = GroundTruth::new(&env).unwrap();
    assert_eq!(truth.label_batch(&b.features).unwrap(), b.labels);
}

#[test]
fn ground_truth_is_deterministic_and_checks_dimension() {
    let env = moons(0.0, "r0");
    let x = ndarray::array![0.3, 0.8];
    assert_eq!(ground_truth_label(&env, x.view()).unwrap(), ground_truth_label(&env, x.view()).unwrap());
    let wrong = ndarray::array![0.3, 0.8, 0.1];
    assert_eq!(ground_truth_label(&env, wrong.view()).unwrap_err().kind(), "validation");
}

#[test]
fn target_id_must_differ_from_sources() {
    let envs = EnvironmentSet::new(vec![moons(0.0, "a"), moons(60.0, "b")], Some(moons(90.0, "a")));
    assert!(envs.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rotations_compose(t1 in -720.0f64..720.0, t2 in -720.0f64..720.0, seed in 0u64..1000) {
        let b = sample_environment(&moons(0.0, "r0"), 16, seed).unwrap();
        let two = apply_transform(
            &apply_transform(&b, &Transform::Rotation { degrees: t1 }).unwrap(),
            &Transform::Rotation { degrees: t2 },
        )
        .unwrap();
        let one = apply_transform(&b, &Transform::Rotation { degrees: (t1 + t2).rem_euclid(360.0) }).unwrap();
        for (x, y) in two.features.iter().zip(one.features.iter()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn transforms_preserve_labels(deg in 0.0f64..360.0, sigma in 0.0f64..3.0, seed in 0u64..1000) {
        let pts = sample_environment(&moons(0.0, "r0"), 8, seed).unwrap();
        prop_assert_eq!(&apply_transform(&pts, &Transform::Rotation { degrees: deg }).unwrap().labels, &pts.labels);
        let img = sample_environment(&glyph_env("plain", Transform::identity()), 8, seed).unwrap();
        for t in [Transform::Rotation { degrees: deg }, Transform::Blur { sigma }] {
            let out = apply_transform(&img, &t).unwrap();
            prop_assert_eq!(&out.labels, &img.labels);
            prop_assert!(out.features.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn rotation_is_an_isometry(deg in -360.0f64..360.0, seed in 0u64..1000) {
        let b = sample_environment(&moons(0.0, "r0"), 6, seed).unwrap();
        let r = apply_transform(&b, &Transform::Rotation { degrees: deg }).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let d0 = (&b.features.row(i) - &b.features.row(j)).mapv(|v| v * v).sum().sqrt();
                let d1 = (&r.features.row(i) - &r.features.row(j)).mapv(|v| v * v).sum().sqrt();
                prop_assert!((d0 - d1).abs() <= 1e-9);
            }
        }
    }
}
