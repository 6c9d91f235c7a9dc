use proptest::prelude::*;

use oodhull::divergence::{
    exact_class_divergence, exact_h_divergence, h_tilde_class, pairwise_divergence_matrix, pairwise_exact,
    proxy_h_divergence, stderr_path, symmetric_proxy, DivergenceMethod, EstimateConfig, FiniteDistribution,
    HypothesisClassSpec, ProxyConfig,
};
use oodhull::envsim::{sample_environment, EnvSpec, EnvironmentSet, LabeledBatch, TaskSpec};

fn moons(deg: f64) -> EnvSpec {
    EnvSpec::rotated(format!("rot{deg}"), TaskSpec::two_moons(0.1), deg)
}

fn dist(probs: &[f64]) -> FiniteDistribution {
    FiniteDistribution::on_range(probs.to_vec()).unwrap()
}

fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_len).prop_flat_map(|n| (weights_of(n), weights_of(n)))
}

fn weights_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(|w| {
        let total: f64 = w.iter().map(|v| v + 1e-9).sum();
        w.iter().map(|v| (v + 1e-9) / total).collect()
    })
}

fn brute_force_subsets(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len();
    (0u32..1 << n)
        .map(|mask| {
            let (mut a, mut b) = (0.0, 0.0);
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    a += p[i];
                    b += q[i];
                }
            }
            (a - b).abs()
        })
        .fold(0.0, f64::max)
        * 2.0
}

#[test]
fn exact_examples() {
    let p = dist(&[0.5, 0.5]);
    assert_eq!(exact_h_divergence(&p, &p).unwrap().value, 0.0);
    assert_eq!(exact_h_divergence(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap().value, 2.0);
    let d = exact_h_divergence(&p, &dist(&[0.9, 0.1])).unwrap();
    assert!((d.value - 0.8).abs() < 1e-12);
    assert_eq!(d.method, DivergenceMethod::Exact);
    assert_eq!(d.stderr, 0.0);
}

#[test]
fn support_mismatch_is_a_validation_error() {
    let e = exact_h_divergence(&dist(&[0.5, 0.5]), &dist(&[0.2, 0.3, 0.5])).unwrap_err();
    assert_eq!(e.kind(), "validation");
    let shifted = FiniteDistribution::new(vec![1, 2], vec![0.5, 0.5]).unwrap();
    assert_eq!(exact_h_divergence(&dist(&[0.5, 0.5]), &shifted).unwrap_err().kind(), "validation");
}

#[test]
fn histogram_cross_check_for_quarter_turn() {
    let a = sample_environment(&moons(0.0), 2000, 1).unwrap();
    let b = sample_environment(&moons(90.0), 2000, 2).unwrap();
    let est = proxy_h_divergence(&a, &b, &HypothesisClassSpec::default(), &ProxyConfig::default().with_seed(3)).unwrap();
    let hist = |batch: &LabeledBatch| -> FiniteDistribution {
        let mut counts = [0.0; 12];
        for row in batch.features.rows() {
            let angle = row[1].atan2(row[0]).rem_euclid(2.0 * std::f64::consts::PI);
            counts[((angle / (std::f64::consts::PI / 6.0)) as usize).min(11)] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        dist(&counts.map(|c| c / total))
    };
    let big_a = sample_environment(&moons(0.0), 50_000, 4).unwrap();
    let big_b = sample_environment(&moons(90.0), 50_000, 5).unwrap();
    let exact = exact_h_divergence(&hist(&big_a), &hist(&big_b)).unwrap().value;
    assert!((est.value - exact).abs() <= 0.15, "proxy {} vs histogram {exact}", est.value);
}

#[test]
fn proxy_grows_with_rotation() {
    let spec = HypothesisClassSpec::PredictorClass { hidden: vec![32] };
    let mut ok = 0;
    for seed in 0..10u64 {
        let base = sample_environment(&moons(0.0), 1000, 10 * seed).unwrap();
        let near = sample_environment(&moons(30.0), 1000, 10 * seed + 1).unwrap();
        let far = sample_environment(&moons(90.0), 1000, 10 * seed + 2).unwrap();
        let cfg = ProxyConfig::default().with_seed(seed);
        let d_near = proxy_h_divergence(&base, &near, &spec, &cfg).unwrap().value;
        let d_far = proxy_h_divergence(&base, &far, &spec, &cfg).unwrap().value;
        if d_near <= d_far {
            ok += 1;
        }
    }
    assert!(ok >= 9, "{ok}/10");
}

#[test]
fn same_environment_proxy_is_small() {
    let a = sample_environment(&moons(45.0), 2000, 21).unwrap();
    let b = sample_environment(&moons(45.0), 2000, 22).unwrap();
    let est = proxy_h_divergence(&a, &b, &HypothesisClassSpec::default(), &ProxyConfig::default().with_seed(5)).unwrap();
    assert!(est.value <= 0.15, "{}", est.value);
    assert_eq!(est.method, DivergenceMethod::DiscriminatorProxy);
}

#[test]
fn proxy_rejects_the_finite_class_and_empty_batches() {
    let a = sample_environment(&moons(0.0), 50, 1).unwrap();
    let e = proxy_h_divergence(&a, &a, &HypothesisClassSpec::AllSubsets, &ProxyConfig::default()).unwrap_err();
    assert_eq!(e.kind(), "validation");
    let empty = LabeledBatch::empty(2);
    assert!(proxy_h_divergence(&a, &empty, &HypothesisClassSpec::default(), &ProxyConfig::default()).is_err());
}

#[test]
fn symmetric_proxy_is_order_free() {
    let a = sample_environment(&moons(0.0), 600, 1).unwrap();
    let b = sample_environment(&moons(60.0), 600, 2).unwrap();
    let spec = HypothesisClassSpec::PredictorClass { hidden: vec![16] };
    let cfg = ProxyConfig::default().with_seed(8);
    let ab = symmetric_proxy(&a, &b, &spec, &cfg).unwrap();
    let ba = symmetric_proxy(&b, &a, &spec, &cfg).unwrap();
    assert_eq!(ab.value, ba.value);
    assert_eq!(ab.stderr, ba.stderr);
}

fn quick_estimate(samples: usize) -> EstimateConfig {
    EstimateConfig {
        spec: HypothesisClassSpec::PredictorClass { hidden: vec![32] },
        samples,
        ..EstimateConfig::default()
    }
}

#[test]
fn single_source_matrix_is_zero() {
    let envs = EnvironmentSet::new(vec![moons(0.0)], None);
    let m = pairwise_divergence_matrix(&envs, &quick_estimate(100)).unwrap();
    assert_eq!(m.values.dim(), (1, 1));
    assert_eq!(m.values[[0, 0]], 0.0);
}

#[test]
fn rotation_triangle_geometry() {
    let envs = EnvironmentSet::new(vec![moons(0.0), moons(30.0), moons(60.0)], None);
    let mut ok = 0;
    for seed in 0..10u64 {
        let m = pairwise_divergence_matrix(&envs, &quick_estimate(1000).with_seed(seed)).unwrap();
        for i in 0..3 {
            assert_eq!(m.values[[i, i]], 0.0);
            for j in 0..3 {
                assert_eq!(m.values[[i, j]], m.values[[j, i]]);
                assert!((0.0..=2.0).contains(&m.values[[i, j]]));
            }
        }
        if m.values[[0, 2]] >= m.values[[0, 1]].max(m.values[[1, 2]]) - 0.1 {
            ok += 1;
        }
    }
    assert!(ok >= 8, "{ok}/10");
}

#[test]
fn matrix_csv_has_env_header_and_stderr_companion() {
    let m = pairwise_exact(&[dist(&[0.5, 0.5]), dist(&[0.9, 0.1])], None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    m.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.lines().next().unwrap(), "s0,s1");
    assert!(stderr_path(&path).exists());
}

proptest! {
    #[test]
    fn exact_matches_subset_enumeration((p, q) in pair(10)) {
        let (a, b) = (dist(&p), dist(&q));
        let d = exact_h_divergence(&a, &b).unwrap().value;
        prop_assert!((d - brute_force_subsets(&p, &q)).abs() <= 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&d));
        prop_assert_eq!(d, exact_h_divergence(&b, &a).unwrap().value);
    }

    #[test]
    fn class_divergence_never_exceeds_all_subsets(
        (p, q) in pair(8),
        masks in prop::collection::vec(any::<u8>(), 1..5),
    ) {
        let n = p.len();
        let class: Vec<Vec<bool>> = masks.iter().map(|m| (0..n).map(|i| m >> (i % 8) & 1 == 1).collect()).collect();
        let (a, b) = (dist(&p), dist(&q));
        let full = exact_h_divergence(&a, &b).unwrap().value;
        let restricted = exact_class_divergence(&a, &b, &class).unwrap().value;
        let tilde = exact_class_divergence(&a, &b, &h_tilde_class(&class)).unwrap().value;
        prop_assert!(restricted <= full + 1e-12);
        prop_assert!(tilde <= full + 1e-12);
    }
}
