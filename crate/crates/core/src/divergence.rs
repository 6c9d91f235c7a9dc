//! H-divergence between environments.
//!
//! `d_H[p, q] = 2 sup_{h in H} |P_p(h = 1) - P_q(h = 1)|`. On finite
//! distributions the supremum is computed exactly, either over all subsets
//! of the support (where it equals twice the total variation) or over an
//! explicitly enumerated hypothesis class. On sampled data a domain
//! discriminator is trained to separate the two samples and its held-out
//! balanced accuracy is turned into a divergence estimate.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envsim::{sample_environment, EnvironmentSet, LabeledBatch};
use crate::error::{Error, Result};
use crate::nnet::{init_predictor, train, Predictor, Schedule, TrainConfig};
use crate::rng;

/// Largest support handled by the exact oracle.
pub const MAX_FINITE_SUPPORT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    pub support: Vec<u32>,
    pub probs: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(support: Vec<u32>, probs: Vec<f64>) -> Result<Self> {
        let d = FiniteDistribution { support, probs };
        d.validate()?;
        Ok(d)
    }

    /// Distribution over support `0..probs.len()`.
    pub fn on_range(probs: Vec<f64>) -> Result<Self> {
        Self::new((0..probs.len() as u32).collect(), probs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.len() != self.probs.len() {
            return Err(Error::Validation("support and probs differ in length".into()));
        }
        if self.support.is_empty() || self.support.len() > MAX_FINITE_SUPPORT {
            return Err(Error::Validation(format!(
                "finite support size must lie in 1..={MAX_FINITE_SUPPORT}, got {}",
                self.support.len()
            )));
        }
        if self.probs.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::Validation("probabilities must be finite and >= 0".into()));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("probabilities sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability mass of the indicator set `members`.
    pub fn mass(&self, members: &[bool]) -> f64 {
        self.probs
            .iter()
            .zip(members)
            .filter(|(_, &m)| m)
            .map(|(p, _)| p)
            .sum()
    }

    /// `sum_i weights_i * dists_i` on a shared support.
    pub fn mixture(dists: &[FiniteDistribution], weights: &[f64]) -> Result<Self> {
        let first = dists
            .first()
            .ok_or_else(|| Error::Validation("mixture of zero distributions".into()))?;
        if weights.len() != dists.len() {
            return Err(Error::Validation("one weight per distribution required".into()));
        }
        for d in dists {
            check_same_support(first, d)?;
        }
        let mut probs = vec![0.0; first.len()];
        for (d, &w) in dists.iter().zip(weights) {
            for (acc, p) in probs.iter_mut().zip(&d.probs) {
                *acc += w * p;
            }
        }
        let d = FiniteDistribution {
            support: first.support.clone(),
            probs,
        };
        // sums drift by a few ulps when mixing
        let total: f64 = d.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 || d.probs.iter().any(|&p| p < 0.0) {
            return Err(Error::Validation(format!("mixture weights are off the simplex (mass {total})")));
        }
        Ok(d)
    }
}

fn check_same_support(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<()> {
    if p.support != q.support {
        return Err(Error::Validation("distributions must share one support list".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceMethod {
    Exact,
    DiscriminatorProxy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: DivergenceMethod,
    pub n_used: (usize, usize),
}

impl DivergenceEstimate {
    fn exact(value: f64, n: usize) -> Self {
        DivergenceEstimate {
            value: value.clamp(0.0, 2.0),
            stderr: 0.0,
            method: DivergenceMethod::Exact,
            n_used: (n, n),
        }
    }
}

fn default_hidden() -> Vec<usize> {
    vec![32]
}

fn default_thresholds() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

fn default_pool() -> usize {
    5
}

/// Which hypothesis class the supremum runs over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HypothesisClassSpec {
    /// Every subset of a finite support (exact oracle only).
    AllSubsets,
    /// MLP discriminators with the given hidden widths.
    PredictorClass {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
    },
    /// Thresholded disagreement `1(|f(x) - f'(x)| > t)` between members of a
    /// pool of trained MLPs (plus the constant-zero hypothesis).
    HTilde {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_thresholds")]
        threshold_grid: Vec<f64>,
        #[serde(default = "default_pool")]
        pool_size: usize,
    },
}

impl Default for HypothesisClassSpec {
    fn default() -> Self {
        HypothesisClassSpec::HTilde {
            hidden: default_hidden(),
            threshold_grid: default_thresholds(),
            pool_size: default_pool(),
        }
    }
}

impl HypothesisClassSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            HypothesisClassSpec::AllSubsets => Ok(()),
            HypothesisClassSpec::PredictorClass { .. } => Ok(()),
            HypothesisClassSpec::HTilde {
                threshold_grid,
                pool_size,
                ..
            } => {
                if threshold_grid.is_empty() || threshold_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(Error::Validation("threshold_grid must be a non-empty subset of [0, 1]".into()));
                }
                if *pool_size == 0 {
                    return Err(Error::Validation("pool_size must be >= 1".into()));
                }
                Ok(())
            }
        }
    }
}

/// Exact `2 sup_S |p(S) - q(S)|` over all subsets of the support.
///
/// The supremum is attained by `S = {p > q}` (or its complement).
pub fn exact_h_divergence(p: &FiniteDistribution, q: &FiniteDistribution) -> Result<DivergenceEstimate> {
    p.validate()?;
    q.validate()?;
    check_same_support(p, q)?;
    let (mut above, mut below) = (0.0, 0.0);
    for (a, b) in p.probs.iter().zip(&q.probs) {
        if a > b {
            above += a - b;
        } else {
            below += b - a;
        }
    }
    Ok(DivergenceEstimate::exact(2.0 * f64::max(above, below), p.len()))
}

/// Exact `2 max_{h in class} |p(h) - q(h)|` for an enumerated class of
/// indicator vectors over the shared support.
pub fn exact_class_divergence(
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    class: &[Vec<bool>],
) -> Result<DivergenceEstimate> {
    check_same_support(p, q)?;
    if class.iter().any(|h| h.len() != p.len()) {
        return Err(Error::Validation("hypothesis length differs from support size".into()));
    }
    let best = class
        .iter()
        .map(|h| (p.mass(h) - q.mass(h)).abs())
        .fold(0.0, f64::max);
    Ok(DivergenceEstimate::exact(2.0 * best, p.len()))
}

/// The disagreement class `{x : f(x) != f'(x)}` over all ordered pairs of a
/// binary class. For {0,1}-valued hypotheses every threshold `t in [0, 1)`
/// of `|f - f'|` yields this same set, and `t = 1` yields the empty set.
pub fn h_tilde_class(class: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let mut out: Vec<Vec<bool>> = Vec::new();
    for f in class {
        for g in class {
            let d: Vec<bool> = f.iter().zip(g).map(|(a, b)| a != b).collect();
            if !out.contains(&d) {
                out.push(d);
            }
        }
    }
    out
}

/// Settings of the discriminator proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxyConfig {
    pub holdout_frac: f64,
    pub folds: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            holdout_frac: 0.3,
            folds: 3,
            train: TrainConfig {
                epochs: 30,
                batch_size: 128,
                lr: 0.05,
                weight_decay: 1e-5,
                momentum: 0.9,
                schedule: Schedule::Cosine,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

impl ProxyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.holdout_frac > 0.0 && self.holdout_frac < 1.0) {
            return Err(Error::Validation("holdout_frac must lie in (0, 1)".into()));
        }
        if self.folds == 0 {
            return Err(Error::Validation("folds must be >= 1".into()));
        }
        self.train.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ProxyConfig { seed, ..self.clone() }
    }
}

struct Split {
    train: Vec<usize>,
    held: Vec<usize>,
}

fn split(n: usize, frac: f64, rng: &mut rng::Rng) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let held = ((n as f64 * frac).round() as usize).clamp(1, n - 1);
    let train = idx.split_off(held);
    Split { train, held: idx }
}

/// Domain-labelled training set; the smaller side is cycled to equal size.
fn balanced_domain_set(a: &LabeledBatch, a_idx: &[usize], b: &LabeledBatch, b_idx: &[usize]) -> LabeledBatch {
    let m = a_idx.len().max(b_idx.len());
    let pick = |idx: &[usize]| -> Vec<usize> { (0..m).map(|k| idx[k % idx.len()]).collect() };
    let xa = a.features.select(Axis(0), &pick(a_idx));
    let xb = b.features.select(Axis(0), &pick(b_idx));
    let features = ndarray::concatenate(Axis(0), &[xa.view(), xb.view()]).expect("equal widths");
    let mut labels = vec![0usize; m];
    labels.extend(std::iter::repeat_n(1usize, m));
    LabeledBatch {
        features,
        labels,
        env_ids: vec![String::new(); 2 * m],
    }
}

fn estimation_error(err: Error, what: &str) -> Error {
    match err {
        Error::TrainingDiverged { epoch, detail } => Error::Estimation(format!(
            "{what}: discriminator diverged at epoch {epoch} ({detail})"
        )),
        other => Error::Estimation(format!("{what}: {other}")),
    }
}

fn fit_discriminator(
    data: &LabeledBatch,
    hidden: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Predictor> {
    let mut sizes = vec![data.dim()];
    sizes.extend_from_slice(hidden);
    sizes.push(2);
    let init = init_predictor(&sizes, seed)?;
    let cfg = TrainConfig {
        seed,
        ..cfg.clone()
    };
    train(&init, data, &cfg)
        .map(|(p, _)| p)
        .map_err(|e| estimation_error(e, "domain discriminator"))
}

fn prob_domain_b(p: &Predictor, x: &Array2<f64>) -> Result<Vec<f64>> {
    Ok(p.predict_proba(x.view())?.column(1).to_vec())
}

struct FoldResult {
    value: f64,
    stderr: f64,
}

fn predictor_fold(
    a: &LabeledBatch,
    b: &LabeledBatch,
    sa: &Split,
    sb: &Split,
    hidden: &[usize],
    cfg: &ProxyConfig,
    fold_seed: u64,
) -> Result<FoldResult> {
    let data = balanced_domain_set(a, &sa.train, b, &sb.train);
    let disc = fit_discriminator(&data, hidden, &cfg.train, fold_seed)?;
    let pa = disc.predict(a.features.select(Axis(0), &sa.held).view())?;
    let pb = disc.predict(b.features.select(Axis(0), &sb.held).view())?;
    let acc_a = pa.iter().filter(|&&y| y == 0).count() as f64 / pa.len() as f64;
    let acc_b = pb.iter().filter(|&&y| y == 1).count() as f64 / pb.len() as f64;
    let balanced = 0.5 * (acc_a + acc_b);
    let var = 0.25 * (acc_a * (1.0 - acc_a) / pa.len() as f64 + acc_b * (1.0 - acc_b) / pb.len() as f64);
    Ok(FoldResult {
        value: (2.0 * (2.0 * balanced - 1.0).abs()).min(2.0),
        stderr: 4.0 * var.sqrt(),
    })
}

#[allow(clippy::too_many_arguments)]
fn htilde_fold(
    a: &LabeledBatch,
    b: &LabeledBatch,
    sa: &Split,
    sb: &Split,
    hidden: &[usize],
    thresholds: &[f64],
    pool_size: usize,
    cfg: &ProxyConfig,
    fold_seed: u64,
) -> Result<FoldResult> {
    let data = balanced_domain_set(a, &sa.train, b, &sb.train);
    let xa_tr = a.features.select(Axis(0), &sa.train);
    let xb_tr = b.features.select(Axis(0), &sb.train);
    let xa_he = a.features.select(Axis(0), &sa.held);
    let xb_he = b.features.select(Axis(0), &sb.held);

    // outputs[k] = (f_k on a-train, b-train, a-held, b-held); member 0 is f = 0
    let mut outputs = vec![(
        vec![0.0; xa_tr.nrows()],
        vec![0.0; xb_tr.nrows()],
        vec![0.0; xa_he.nrows()],
        vec![0.0; xb_he.nrows()],
    )];
    for k in 0..pool_size {
        let member_seed = rng::derive(fold_seed, &[0x706f_6f6c, k as u64]);
        let mut brng = rng::rng(member_seed);
        let boot: Vec<usize> = (0..data.len()).map(|_| brng.random_range(0..data.len())).collect();
        let disc = fit_discriminator(&data.select(&boot), hidden, &cfg.train, member_seed)?;
        outputs.push((
            prob_domain_b(&disc, &xa_tr)?,
            prob_domain_b(&disc, &xb_tr)?,
            prob_domain_b(&disc, &xa_he)?,
            prob_domain_b(&disc, &xb_he)?,
        ));
    }

    let rate = |f: &[f64], g: &[f64], t: f64| -> f64 {
        f.iter().zip(g).filter(|(x, y)| (*x - *y).abs() > t).count() as f64 / f.len() as f64
    };
    let mut best: Option<(f64, usize, usize, f64)> = None;
    for i in 0..outputs.len() {
        for j in i + 1..outputs.len() {
            for &t in thresholds {
                let gap = (rate(&outputs[i].0, &outputs[j].0, t) - rate(&outputs[i].1, &outputs[j].1, t)).abs();
                if best.is_none_or(|(g, ..)| gap > g) {
                    best = Some((gap, i, j, t));
                }
            }
        }
    }
    let (_, i, j, t) = best.expect("pool has at least two members");
    let pa = rate(&outputs[i].2, &outputs[j].2, t);
    let pb = rate(&outputs[i].3, &outputs[j].3, t);
    let var = pa * (1.0 - pa) / xa_he.nrows() as f64 + pb * (1.0 - pb) / xb_he.nrows() as f64;
    Ok(FoldResult {
        value: (2.0 * (pa - pb).abs()).min(2.0),
        stderr: 2.0 * var.sqrt(),
    })
}

/// Divergence estimate from a domain discriminator trained on `a` vs `b`.
pub fn proxy_h_divergence(
    a: &LabeledBatch,
    b: &LabeledBatch,
    spec: &HypothesisClassSpec,
    cfg: &ProxyConfig,
) -> Result<DivergenceEstimate> {
    spec.validate()?;
    cfg.validate()?;
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Validation("each side needs at least 2 samples".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::Validation("samples have different feature widths".into()));
    }
    let mut folds = Vec::with_capacity(cfg.folds);
    for r in 0..cfg.folds {
        let fold_seed = rng::derive(cfg.seed, &[0x666f_6c64, r as u64]);
        let sa = split(a.len(), cfg.holdout_frac, &mut rng::rng_for(fold_seed, &[0xa]));
        let sb = split(b.len(), cfg.holdout_frac, &mut rng::rng_for(fold_seed, &[0xb]));
        let res = match spec {
            HypothesisClassSpec::AllSubsets => {
                return Err(Error::Validation(
                    "all_subsets is only available for finite distributions".into(),
                ))
            }
            HypothesisClassSpec::PredictorClass { hidden } => {
                predictor_fold(a, b, &sa, &sb, hidden, cfg, fold_seed)?
            }
            HypothesisClassSpec::HTilde {
                hidden,
                threshold_grid,
                pool_size,
            } => htilde_fold(a, b, &sa, &sb, hidden, threshold_grid, *pool_size, cfg, fold_seed)?,
        };
        folds.push(res);
    }
    let k = folds.len() as f64;
    Ok(DivergenceEstimate {
        value: (folds.iter().map(|f| f.value).sum::<f64>() / k).clamp(0.0, 2.0),
        stderr: folds.iter().map(|f| f.stderr).sum::<f64>() / k,
        method: DivergenceMethod::DiscriminatorProxy,
        n_used: (a.len(), b.len()),
    })
}

/// Symmetrized proxy: the average of the two directed estimates.
///
/// Both directions share `cfg.seed`, so swapping `a` and `b` gives the same
/// value bit for bit.
pub fn symmetric_proxy(
    a: &LabeledBatch,
    b: &LabeledBatch,
    spec: &HypothesisClassSpec,
    cfg: &ProxyConfig,
) -> Result<DivergenceEstimate> {
    let ab = proxy_h_divergence(a, b, spec, cfg)?;
    let ba = proxy_h_divergence(b, a, spec, cfg)?;
    Ok(DivergenceEstimate {
        value: 0.5 * (ab.value + ba.value),
        stderr: 0.5 * (ab.stderr + ba.stderr),
        method: DivergenceMethod::DiscriminatorProxy,
        n_used: ab.n_used,
    })
}

/// Symmetric divergence matrix with a companion standard-error matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    pub env_ids: Vec<String>,
    pub values: Array2<f64>,
    pub stderr: Array2<f64>,
}

impl PairwiseMatrix {
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.values.nrows();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    best = best.max(self.values[[i, j]]);
                }
            }
        }
        best
    }

    fn write_matrix(&self, path: &Path, m: &Array2<f64>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(&self.env_ids).map_err(|e| Error::csv(path, e))?;
        for row in m.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            w.write_record(&cells).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Values to `path`; standard errors to `<stem>.stderr.csv` beside it.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.write_matrix(path, &self.values)?;
        self.write_matrix(&stderr_path(path), &self.stderr)
    }
}

pub fn stderr_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.stderr.csv"))
}

/// Draw-and-estimate settings for divergences between environment specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateConfig {
    pub spec: HypothesisClassSpec,
    pub proxy: ProxyConfig,
    /// Samples drawn per environment.
    pub samples: usize,
    pub seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            spec: HypothesisClassSpec::default(),
            proxy: ProxyConfig::default(),
            samples: 2000,
            seed: 0,
        }
    }
}

impl EstimateConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        EstimateConfig { seed, ..self.clone() }
    }
}

/// Pairwise divergences between the source environments.
pub fn pairwise_divergence_matrix(envs: &EnvironmentSet, cfg: &EstimateConfig) -> Result<PairwiseMatrix> {
    envs.validate()?;
    let samples = envs
        .sources
        .iter()
        .enumerate()
        .map(|(i, e)| sample_environment(e, cfg.samples, rng::derive(cfg.seed, &[0x656e76, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    let batches: Vec<&LabeledBatch> = samples.iter().collect();
    pairwise_from_batches(&batches, envs.sources.iter().map(|e| e.env_id.clone()).collect(), cfg)
}

pub fn pairwise_from_batches(
    batches: &[&LabeledBatch],
    env_ids: Vec<String>,
    cfg: &EstimateConfig,
) -> Result<PairwiseMatrix> {
    let n = batches.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let estimates = pairs
        .par_iter()
        .map(|&(i, j)| {
            let proxy = cfg.proxy.with_seed(rng::derive(cfg.seed, &[0x7061_6972, i as u64, j as u64]));
            symmetric_proxy(batches[i], batches[j], &cfg.spec, &proxy)
        })
        .collect::<Vec<_>>();
    let mut values = Array2::zeros((n, n));
    let mut stderr = Array2::zeros((n, n));
    for (&(i, j), est) in pairs.iter().zip(estimates) {
        let est = est?;
        values[[i, j]] = est.value;
        values[[j, i]] = est.value;
        stderr[[i, j]] = est.stderr;
        stderr[[j, i]] = est.stderr;
    }
    Ok(PairwiseMatrix {
        env_ids,
        values,
        stderr,
    })
}

/// Exact pairwise matrix for finite distributions over `class`
/// (`None` = all subsets).
pub fn pairwise_exact(dists: &[FiniteDistribution], class: Option<&[Vec<bool>]>) -> Result<PairwiseMatrix> {
    let n = dists.len();
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = match class {
                None => exact_h_divergence(&dists[i], &dists[j])?.value,
                Some(c) => exact_class_divergence(&dists[i], &dists[j], c)?.value,
            };
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    Ok(PairwiseMatrix {
        env_ids: (0..n).map(|i| format!("s{i}")).collect(),
        values,
        stderr: Array2::zeros((n, n)),
    })
}
