//! Convex-hull quantities over source environments.
//!
//! `epsilon` is the largest pairwise divergence between sources (which,
//! because mixture masses are linear in the weights, also bounds the
//! divergence between any two hull members). `delta` is the divergence from
//! a target to its closest mixture, minimized over the simplex by a coarse
//! grid followed by golden-section line searches.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::{
    exact_class_divergence, exact_h_divergence, pairwise_divergence_matrix, pairwise_exact,
    proxy_h_divergence, EstimateConfig, FiniteDistribution, PairwiseMatrix,
};
use crate::envsim::{mixture_sample, sample_environment, EnvSpec, EnvironmentSet, LabeledBatch};
use crate::error::{Error, Result};
use crate::rng;

/// Largest source count the projection solver accepts.
pub const MAX_SOURCES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        let w = SimplexWeights(alpha);
        w.validate()?;
        Ok(w)
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        SimplexWeights(v)
    }

    pub fn uniform(n: usize) -> Self {
        SimplexWeights(vec![1.0 / n as f64; n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Validation("simplex weights are empty".into()));
        }
        if self.0.iter().any(|&a| !(a.is_finite() && a >= 0.0)) {
            return Err(Error::Validation(format!("simplex weights must be >= 0: {:?}", self.0)));
        }
        let total: f64 = self.0.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("simplex weights sum to {total}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn l1_distance(&self, other: &SimplexWeights) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    /// `self + s d`, with rounding residue clipped back onto the simplex.
    fn step(&self, d: &[f64], s: f64) -> SimplexWeights {
        let mut v: Vec<f64> = self.0.iter().zip(d).map(|(a, di)| (a + s * di).max(0.0)).collect();
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|a| *a /= total);
        SimplexWeights(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "ID")]
    Id,
    #[serde(rename = "OOD")]
    Ood,
}

impl Verdict {
    /// OOD iff `delta > epsilon`; ties resolve to ID.
    pub fn from_margin(delta: f64, epsilon: f64) -> Self {
        if delta > epsilon {
            Verdict::Ood
        } else {
            Verdict::Id
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Id => "ID",
            Verdict::Ood => "OOD",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullStats {
    pub epsilon: f64,
    pub pairwise: PairwiseMatrix,
    pub delta: Option<f64>,
    pub alpha_star: Option<SimplexWeights>,
    pub verdict: Option<Verdict>,
}

impl HullStats {
    pub fn from_pairwise(pairwise: PairwiseMatrix) -> Self {
        HullStats {
            epsilon: pairwise.max_off_diagonal(),
            pairwise,
            delta: None,
            alpha_star: None,
            verdict: None,
        }
    }

    pub fn with_projection(mut self, delta: f64, alpha: SimplexWeights) -> Self {
        self.verdict = Some(Verdict::from_margin(delta, self.epsilon));
        self.delta = Some(delta);
        self.alpha_star = Some(alpha);
        self
    }

    /// `delta - epsilon`; positive means OOD.
    pub fn margin(&self) -> Option<f64> {
        self.delta.map(|d| d - self.epsilon)
    }

    pub fn csv_header(num_sources: usize) -> Vec<String> {
        let mut h: Vec<String> = ["epsilon", "delta", "margin", "verdict"].map(String::from).to_vec();
        h.extend((0..num_sources).map(|i| format!("alpha_{i}")));
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = vec![
            self.epsilon.to_string(),
            opt(self.delta),
            opt(self.margin()),
            self.verdict.map(|v| v.to_string()).unwrap_or_default(),
        ];
        match &self.alpha_star {
            Some(a) => row.extend(a.as_slice().iter().map(|x| x.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), self.pairwise.env_ids.len())),
        }
        row
    }

    /// One-row summary at `path` plus the pairwise matrix at
    /// `<stem>.pairwise.csv` (with its stderr companion).
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(Self::csv_header(self.pairwise.env_ids.len()))
            .map_err(|e| Error::csv(path, e))?;
        w.write_record(self.csv_row()).map_err(|e| Error::csv(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
        self.pairwise.write_csv(pairwise_path(path))
    }
}

pub fn pairwise_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.pairwise.csv"))
}

/// Largest off-diagonal estimated divergence between sources.
pub fn epsilon_of(envs: &EnvironmentSet, cfg: &EstimateConfig) -> Result<f64> {
    Ok(pairwise_divergence_matrix(envs, cfg)?.max_off_diagonal())
}

/// Exact epsilon for finite sources; `class = None` means all subsets.
pub fn exact_epsilon(sources: &[FiniteDistribution], class: Option<&[Vec<bool>]>) -> Result<f64> {
    Ok(pairwise_exact(sources, class)?.max_off_diagonal())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Grid resolution `1/K`; `None` picks 10 for up to 3 sources, else 6.
    pub grid_k: Option<usize>,
    /// Refinement sweeps over all line-search directions.
    pub rounds: usize,
    /// Evaluations per golden-section line search.
    pub golden_iters: usize,
    pub estimate: EstimateConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_k: None,
            rounds: 2,
            golden_iters: 6,
            estimate: EstimateConfig::default(),
        }
    }
}

impl SolverConfig {
    /// Settings for cheap deterministic objectives.
    pub fn exact() -> Self {
        SolverConfig {
            rounds: 12,
            golden_iters: 30,
            ..SolverConfig::default()
        }
    }

    pub fn resolution(&self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::Validation("at least one source is required".into()));
        }
        if n > MAX_SOURCES {
            return Err(Error::Unsupported(format!(
                "projection supports at most {MAX_SOURCES} sources, got {n}"
            )));
        }
        match self.grid_k {
            Some(0) => Err(Error::Validation("grid_k must be >= 1".into())),
            Some(k) => Ok(k),
            None if n <= 3 => Ok(10),
            None => Ok(6),
        }
    }
}

/// All points of the simplex grid `{k / K}` in lexicographic order.
pub fn simplex_grid(n: usize, k: usize) -> Vec<SimplexWeights> {
    fn rec(n: usize, left: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<SimplexWeights>) {
        if prefix.len() + 1 == n {
            prefix.push(left);
            out.push(SimplexWeights(prefix.iter().map(|&c| c as f64 / k as f64).collect()));
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            rec(n, left - c, k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, k, k, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub value: f64,
    pub alpha: SimplexWeights,
    pub evaluations: usize,
    pub failures: usize,
}

/// Each grid point and each single coordinate-pair move, plus the moves
/// of one coordinate against the average of the rest.
fn directions(n: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut d = vec![0.0; n];
            d[i] = 1.0;
            d[j] = -1.0;
            dirs.push(d);
        }
    }
    if n >= 3 {
        for i in 0..n {
            let mut d = vec![-1.0 / (n - 1) as f64; n];
            d[i] = 1.0;
            dirs.push(d);
        }
    }
    dirs
}

/// Feasible step range `[lo, hi]` of `alpha + s d` inside the simplex.
fn feasible(alpha: &SimplexWeights, d: &[f64]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&a, &di) in alpha.as_slice().iter().zip(d) {
        if di > 0.0 {
            lo = lo.max(-a / di);
        } else if di < 0.0 {
            hi = hi.min(a / -di);
        }
    }
    (lo, hi)
}

/// Minimize `objective` over the simplex of dimension `n`.
///
/// Failed evaluations are skipped; more than half failing on the grid is a
/// projection failure.
pub fn minimize_on_simplex<F>(n: usize, cfg: &SolverConfig, objective: F) -> Result<SolverOutcome>
where
    F: Fn(&SimplexWeights) -> Result<f64> + Sync,
{
    let k = cfg.resolution(n)?;
    let grid = simplex_grid(n, k);
    let values: Vec<Option<f64>> = grid
        .par_iter()
        .map(|a| objective(a).ok().filter(|v| v.is_finite()))
        .collect();
    let mut failures = values.iter().filter(|v| v.is_none()).count();
    let mut evaluations = grid.len();
    if 2 * failures > grid.len() {
        return Err(Error::ProjectionFailed {
            failed: failures,
            total: grid.len(),
        });
    }
    let (mut best_v, mut best_a) = (f64::INFINITY, grid[0].clone());
    for (a, v) in grid.iter().zip(&values) {
        if let Some(v) = *v {
            if v < best_v {
                best_v = v;
                best_a = a.clone();
            }
        }
    }

    let mut eval = |a: &SimplexWeights| -> f64 {
        evaluations += 1;
        match objective(a) {
            Ok(v) if v.is_finite() => v,
            _ => {
                failures += 1;
                f64::INFINITY
            }
        }
    };
    let dirs = if n > 1 { directions(n) } else { Vec::new() };
    let mut h = 1.0 / k as f64;
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for _ in 0..cfg.rounds {
        let mut improved = false;
        for d in &dirs {
            let (lo, hi) = feasible(&best_a, d);
            let (mut a, mut b) = (lo.max(-h), hi.min(h));
            if b - a <= 1e-12 {
                continue;
            }
            let mut c = b - INV_PHI * (b - a);
            let mut e = a + INV_PHI * (b - a);
            let mut fc = eval(&best_a.step(d, c));
            let mut fe = eval(&best_a.step(d, e));
            let (mut cand_v, mut cand_s) = if fc <= fe { (fc, c) } else { (fe, e) };
            for _ in 2..cfg.golden_iters.max(2) {
                if fc <= fe {
                    b = e;
                    e = c;
                    fe = fc;
                    c = b - INV_PHI * (b - a);
                    fc = eval(&best_a.step(d, c));
                    if fc < cand_v {
                        (cand_v, cand_s) = (fc, c);
                    }
                } else {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + INV_PHI * (b - a);
                    fe = eval(&best_a.step(d, e));
                    if fe < cand_v {
                        (cand_v, cand_s) = (fe, e);
                    }
                }
            }
            if cand_v < best_v {
                best_v = cand_v;
                best_a = best_a.step(d, cand_s);
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok(SolverOutcome {
        value: best_v,
        alpha: best_a,
        evaluations,
        failures,
    })
}

/// Exhaustive minimum over the `1/k` simplex grid.
pub fn grid_minimum<F>(n: usize, k: usize, objective: F) -> Result<(f64, SimplexWeights)>
where
    F: Fn(&SimplexWeights) -> Result<f64>,
{
    let mut best: Option<(f64, SimplexWeights)> = None;
    for a in simplex_grid(n, k) {
        let v = objective(&a)?;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, a));
        }
    }
    best.ok_or_else(|| Error::Validation("empty simplex".into()))
}

/// Target of a projection: a spec to sample or a fixed sample.
#[derive(Debug, Clone)]
pub enum Target {
    Spec(EnvSpec),
    Sample(LabeledBatch),
}

impl Target {
    fn materialize(&self, n: usize, seed: u64) -> Result<LabeledBatch> {
        match self {
            Target::Spec(env) => {
                env.validate()?;
                sample_environment(env, n, rng::derive(seed, &[0x746774]))
            }
            Target::Sample(b) => {
                b.validate()?;
                Ok(b.clone())
            }
        }
    }
}

/// Minimized target-to-mixture divergence and its minimizer.
///
/// Every mixture evaluation reuses the same mixture seed and estimator
/// seed, so differences between weights are not masked by resampling.
pub fn delta_projection(
    target: &Target,
    envs: &EnvironmentSet,
    cfg: &SolverConfig,
) -> Result<(f64, SimplexWeights)> {
    envs.validate()?;
    let est = &cfg.estimate;
    let t = target.materialize(est.samples, est.seed)?;
    if t.dim() != envs.task().dim() {
        return Err(Error::Validation("target width differs from the sources".into()));
    }
    let mix_seed = rng::derive(est.seed, &[0x6d6978]);
    let proxy = est.proxy.with_seed(rng::derive(est.seed, &[0x6465_6c74]));
    let out = minimize_on_simplex(envs.num_sources(), cfg, |alpha| {
        let m = mixture_sample(envs, alpha, est.samples, mix_seed)?;
        Ok(proxy_h_divergence(&t, &m, &est.spec, &proxy)?.value)
    })?;
    Ok((out.value.max(0.0), out.alpha))
}

/// Exact delta for finite distributions; `class = None` means all subsets.
pub fn exact_delta(
    target: &FiniteDistribution,
    sources: &[FiniteDistribution],
    class: Option<&[Vec<bool>]>,
    cfg: &SolverConfig,
) -> Result<SolverOutcome> {
    minimize_on_simplex(sources.len(), cfg, |alpha| {
        exact_mixture_divergence(target, sources, alpha, class)
    })
}

pub fn exact_mixture_divergence(
    target: &FiniteDistribution,
    sources: &[FiniteDistribution],
    alpha: &SimplexWeights,
    class: Option<&[Vec<bool>]>,
) -> Result<f64> {
    let mix = FiniteDistribution::mixture(sources, alpha.as_slice())?;
    Ok(match class {
        None => exact_h_divergence(target, &mix)?.value,
        Some(c) => exact_class_divergence(target, &mix, c)?.value,
    })
}

/// ID/OOD verdict for `target` relative to the hull of `envs`.
pub fn classify_unseen(target: &Target, envs: &EnvironmentSet, cfg: &SolverConfig) -> Result<(Verdict, HullStats)> {
    let pairwise = pairwise_divergence_matrix(envs, &cfg.estimate)?;
    let (delta, alpha) = delta_projection(target, envs, cfg)?;
    let stats = HullStats::from_pairwise(pairwise).with_projection(delta, alpha);
    Ok((stats.verdict.expect("projection sets the verdict"), stats))
}

/// Finite-instance analogue of [`classify_unseen`].
pub fn classify_exact(
    target: &FiniteDistribution,
    sources: &[FiniteDistribution],
    class: Option<&[Vec<bool>]>,
    cfg: &SolverConfig,
) -> Result<(Verdict, HullStats)> {
    let pairwise = pairwise_exact(sources, class)?;
    let out = exact_delta(target, sources, class, cfg)?;
    let stats = HullStats::from_pairwise(pairwise).with_projection(out.value, out.alpha);
    Ok((stats.verdict.expect("projection sets the verdict"), stats))
}

pub fn write_hull_text(stats: &HullStats, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "epsilon = {:.6}", stats.epsilon)?;
    if let (Some(d), Some(a), Some(v)) = (stats.delta, &stats.alpha_star, stats.verdict) {
        writeln!(out, "delta   = {d:.6}")?;
        writeln!(out, "margin  = {:+.6}", d - stats.epsilon)?;
        writeln!(out, "alpha*  = {:?}", a.as_slice())?;
        writeln!(out, "verdict = {v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::on_range(p.to_vec()).unwrap()
    }

    #[test]
    fn grid_sizes_are_binomial() {
        assert_eq!(simplex_grid(1, 10).len(), 1);
        assert_eq!(simplex_grid(2, 10).len(), 11);
        assert_eq!(simplex_grid(3, 10).len(), 66);
        assert_eq!(simplex_grid(5, 6).len(), 210);
        assert!(simplex_grid(3, 10).iter().all(|a| a.validate().is_ok()));
    }

    #[test]
    fn weights_validate() {
        assert!(SimplexWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexWeights::new(vec![0.6, 0.5]).is_err());
        assert!(SimplexWeights::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexWeights::new(vec![]).is_err());
    }

    #[test]
    fn too_many_sources_are_rejected() {
        let err = minimize_on_simplex(6, &SolverConfig::exact(), |_| Ok(0.0));
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn mostly_failing_grid_is_a_projection_failure() {
        let err = minimize_on_simplex(2, &SolverConfig::exact(), |a| {
            if a.as_slice()[0] > 0.3 {
                Err(Error::Estimation("boom".into()))
            } else {
                Ok(1.0)
            }
        });
        assert!(matches!(err, Err(Error::ProjectionFailed { .. })));
    }

    #[test]
    fn solver_finds_off_grid_quadratic_minimum() {
        let target = [0.23, 0.41, 0.36];
        let out = minimize_on_simplex(3, &SolverConfig::exact(), |a| {
            Ok(a.as_slice().iter().zip(&target).map(|(x, t)| (x - t).powi(2)).sum())
        })
        .unwrap();
        assert!(out.value < 1e-8, "{}", out.value);
    }

    #[test]
    fn vertex_target_has_zero_delta() {
        let s = vec![fd(&[0.7, 0.2, 0.1]), fd(&[0.1, 0.3, 0.6])];
        let out = exact_delta(&s[1], &s, None, &SolverConfig::exact()).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.alpha, SimplexWeights::vertex(2, 1));
    }

    #[test]
    fn verdict_ties_are_id() {
        assert_eq!(Verdict::from_margin(0.3, 0.3), Verdict::Id);
        assert_eq!(Verdict::from_margin(0.31, 0.3), Verdict::Ood);
    }

    #[test]
    fn epsilon_of_triple() {
        // exact divergences 0.4, 0.6 and 0.8
        let s = vec![
            fd(&[0.5, 0.5, 0.0, 0.0]),
            fd(&[0.3, 0.5, 0.2, 0.0]),
            fd(&[0.1, 0.5, 0.1, 0.3]),
        ];
        let m = pairwise_exact(&s, None).unwrap();
        assert!((m.values[[0, 1]] - 0.4).abs() < 1e-12);
        assert!((m.values[[1, 2]] - 0.6).abs() < 1e-12);
        assert!((m.values[[0, 2]] - 0.8).abs() < 1e-12);
        assert!((exact_epsilon(&s, None).unwrap() - 0.8).abs() < 1e-12);
    }
}
