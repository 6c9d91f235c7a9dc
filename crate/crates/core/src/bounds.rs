//! Target-risk bounds from hull quantities.
//!
//! With `R_s = sum_i alpha_i R_i(f)` and `lambda` the smaller of the two
//! label-disagreement expectations between the source ensemble and the
//! target labeling:
//!
//! * ID: `R_t(f) <= R_s + 2 epsilon + lambda`
//! * OOD: `R_t(f) <= R_s + delta + epsilon + lambda`

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng as _;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::divergence::{h_tilde_class, FiniteDistribution};
use crate::envsim::{mixture_sample, sample_environment, EnvSpec, EnvironmentSet, GroundTruth, LabeledBatch};
use crate::error::{Error, Result};
use crate::hull::{classify_exact, classify_unseen, HullStats, SimplexWeights, SolverConfig, Target, Verdict};
use crate::nnet::{evaluate, Predictor};
use crate::rng;

/// Smallest Monte-Carlo sample accepted by [`label_disagreement`].
pub const MIN_DISAGREEMENT_SAMPLES: usize = 100;

/// A map from features to `[0, 1]`.
#[derive(Debug, Clone)]
pub enum LabelingFunction {
    GroundTruth(GroundTruth),
    /// `x -> sum_i alpha_i h_i(x)`.
    Ensemble {
        members: Vec<GroundTruth>,
        alpha: SimplexWeights,
    },
}

impl LabelingFunction {
    pub fn ground_truth(env: &EnvSpec) -> Result<Self> {
        require_binary(env)?;
        Ok(LabelingFunction::GroundTruth(GroundTruth::new(env)?))
    }

    pub fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        match self {
            LabelingFunction::GroundTruth(g) => Ok(g.label(x)? as f64),
            LabelingFunction::Ensemble { members, alpha } => {
                let mut acc = 0.0;
                for (g, &a) in members.iter().zip(alpha.as_slice()) {
                    if a > 0.0 {
                        acc += a * g.label(x)? as f64;
                    }
                }
                Ok(acc.clamp(0.0, 1.0))
            }
        }
    }

    pub fn eval_batch(&self, features: &Array2<f64>) -> Result<Vec<f64>> {
        features.rows().into_iter().map(|r| self.eval(r)).collect()
    }
}

fn require_binary(env: &EnvSpec) -> Result<()> {
    if env.task.num_classes != 2 {
        return Err(Error::Unsupported(format!(
            "risk bounds need a binary task; '{}' has {} classes",
            env.env_id, env.task.num_classes
        )));
    }
    Ok(())
}

/// `x -> sum_i alpha_i h_{e_i}(x)` over the sources of `envs`.
pub fn ensemble_labeler(envs: &EnvironmentSet, alpha: &SimplexWeights) -> Result<LabelingFunction> {
    envs.validate()?;
    alpha.validate()?;
    if alpha.len() != envs.num_sources() {
        return Err(Error::Validation("one weight per source required".into()));
    }
    for e in &envs.sources {
        require_binary(e)?;
    }
    let members = envs.sources.iter().map(GroundTruth::new).collect::<Result<Vec<_>>>()?;
    Ok(LabelingFunction::Ensemble {
        members,
        alpha: alpha.clone(),
    })
}

/// Both expectations of `|h_a - h_b|` and their minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub on_mixture: f64,
    pub on_target: f64,
    pub stderr_mixture: f64,
    pub stderr_target: f64,
}

impl Disagreement {
    pub fn value(&self) -> f64 {
        self.on_mixture.min(self.on_target)
    }

    pub fn stderr(&self) -> f64 {
        if self.on_mixture <= self.on_target {
            self.stderr_mixture
        } else {
            self.stderr_target
        }
    }
}

fn mean_abs_gap(h_a: &LabelingFunction, h_b: &LabelingFunction, batch: &LabeledBatch) -> Result<(f64, f64)> {
    let a = h_a.eval_batch(&batch.features)?;
    let b = h_b.eval_batch(&batch.features)?;
    let gaps: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Monte-Carlo disagreement of `h_a` and `h_b` on the mixture
/// `sum_i alpha_i e_i` and on `target`.
pub fn label_disagreement(
    h_a: &LabelingFunction,
    h_b: &LabelingFunction,
    mixture: (&EnvironmentSet, &SimplexWeights),
    target: &EnvSpec,
    n: usize,
    seed: u64,
) -> Result<Disagreement> {
    if n < MIN_DISAGREEMENT_SAMPLES {
        return Err(Error::Validation(format!(
            "disagreement needs n >= {MIN_DISAGREEMENT_SAMPLES}, got {n}"
        )));
    }
    let (envs, alpha) = mixture;
    let hat = mixture_sample(envs, alpha, n, rng::derive(seed, &[0x6d6978]))?;
    let tgt = sample_environment(target, n, rng::derive(seed, &[0x746774]))?;
    let (on_mixture, stderr_mixture) = mean_abs_gap(h_a, h_b, &hat)?;
    let (on_target, stderr_target) = mean_abs_gap(h_a, h_b, &tgt)?;
    Ok(Disagreement {
        on_mixture,
        on_target,
        stderr_mixture,
        stderr_target,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub source_risks: Vec<f64>,
    pub alpha: SimplexWeights,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub disagreement: f64,
    pub disagreement_parts: Option<(f64, f64)>,
    pub bound_id: f64,
    pub bound_ood: Option<f64>,
    pub empirical_target_risk: f64,
    pub verdict: Verdict,
    /// First-order sum of ingredient standard errors.
    pub stderr: f64,
}

impl BoundReport {
    pub fn assemble(
        source_risks: Vec<f64>,
        alpha: SimplexWeights,
        epsilon: f64,
        delta: Option<f64>,
        disagreement: f64,
        empirical_target_risk: f64,
    ) -> Result<Self> {
        alpha.validate()?;
        if alpha.len() != source_risks.len() {
            return Err(Error::Validation("one source risk per weight required".into()));
        }
        let weighted = weighted_risk(&source_risks, &alpha);
        let verdict = match delta {
            Some(d) => Verdict::from_margin(d, epsilon),
            None => Verdict::Id,
        };
        Ok(BoundReport {
            bound_id: weighted + 2.0 * epsilon + disagreement,
            bound_ood: delta.map(|d| weighted + d + epsilon + disagreement),
            source_risks,
            alpha,
            epsilon,
            delta,
            disagreement,
            disagreement_parts: None,
            empirical_target_risk,
            verdict,
            stderr: 0.0,
        })
    }

    pub fn weighted_source_risk(&self) -> f64 {
        weighted_risk(&self.source_risks, &self.alpha)
    }

    /// The bound selected by the verdict.
    pub fn applicable_bound(&self) -> f64 {
        match (self.verdict, self.bound_ood) {
            (Verdict::Ood, Some(b)) => b,
            _ => self.bound_id,
        }
    }

    pub fn holds(&self) -> bool {
        self.empirical_target_risk <= self.applicable_bound()
    }

    /// Recompute both bounds from the logged ingredients.
    pub fn check_identity(&self) -> Result<()> {
        let w = self.weighted_source_risk();
        let id = w + 2.0 * self.epsilon + self.disagreement;
        if id != self.bound_id {
            return Err(Error::Validation(format!("bound_id {} != recomputed {id}", self.bound_id)));
        }
        let ood = self.delta.map(|d| w + d + self.epsilon + self.disagreement);
        if ood != self.bound_ood {
            return Err(Error::Validation(format!(
                "bound_ood {:?} != recomputed {ood:?}",
                self.bound_ood
            )));
        }
        if self.verdict == Verdict::Ood && self.bound_ood.is_none_or(|b| b <= self.bound_id) {
            return Err(Error::Validation("OOD verdict without bound_ood > bound_id".into()));
        }
        Ok(())
    }

    pub fn csv_header(num_sources: usize) -> Vec<String> {
        let mut h: Vec<String> = (0..num_sources).map(|i| format!("source_risk_{i}")).collect();
        h.extend((0..num_sources).map(|i| format!("alpha_{i}")));
        h.extend(
            [
                "epsilon",
                "delta",
                "disagreement",
                "bound_id",
                "bound_ood",
                "empirical_target_risk",
                "verdict",
                "stderr",
            ]
            .map(String::from),
        );
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row: Vec<String> = self.source_risks.iter().map(|r| r.to_string()).collect();
        row.extend(self.alpha.as_slice().iter().map(|a| a.to_string()));
        row.extend([
            self.epsilon.to_string(),
            opt(self.delta),
            self.disagreement.to_string(),
            self.bound_id.to_string(),
            opt(self.bound_ood),
            self.empirical_target_risk.to_string(),
            self.verdict.to_string(),
            self.stderr.to_string(),
        ]);
        row
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(Self::csv_header(self.source_risks.len()))
            .map_err(|e| Error::csv(path, e))?;
        w.write_record(self.csv_row()).map_err(|e| Error::csv(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Human-readable decomposition of both bounds.
    pub fn render(&self, out: &mut impl Write) -> std::io::Result<()> {
        let w = self.weighted_source_risk();
        writeln!(out, "verdict                 {}", self.verdict)?;
        for (i, (r, a)) in self.source_risks.iter().zip(self.alpha.as_slice()).enumerate() {
            writeln!(out, "  source {i}: risk {r:.4}  alpha {a:.4}")?;
        }
        writeln!(out, "sum alpha_i R_i         {w:.4}")?;
        writeln!(out, "epsilon                 {:.4}", self.epsilon)?;
        if let Some(d) = self.delta {
            writeln!(out, "delta                   {d:.4}")?;
        }
        writeln!(out, "disagreement (min)      {:.4}", self.disagreement)?;
        if let Some((m, t)) = self.disagreement_parts {
            writeln!(out, "  on mixture {m:.4}  on target {t:.4}")?;
        }
        writeln!(
            out,
            "ID bound   {w:.4} + 2*{:.4} + {:.4} = {:.4}",
            self.epsilon, self.disagreement, self.bound_id
        )?;
        if let (Some(d), Some(b)) = (self.delta, self.bound_ood) {
            writeln!(
                out,
                "OOD bound  {w:.4} + {d:.4} + {:.4} + {:.4} = {b:.4}",
                self.epsilon, self.disagreement
            )?;
        }
        writeln!(
            out,
            "target risk {:.4} <= applicable bound {:.4}: {}",
            self.empirical_target_risk,
            self.applicable_bound(),
            self.holds()
        )
    }
}

fn weighted_risk(risks: &[f64], alpha: &SimplexWeights) -> f64 {
    risks.iter().zip(alpha.as_slice()).map(|(r, a)| r * a).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    pub solver: SolverConfig,
    /// Fresh samples per risk and disagreement ingredient.
    pub n: usize,
    pub seed: u64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            solver: SolverConfig::default(),
            n: 2000,
            seed: 0,
        }
    }
}

fn binomial_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Estimate every ingredient for `f` and assemble both bounds.
///
/// `alpha` overrides the projection weights in the risk and disagreement
/// terms; the verdict always uses the minimized delta.
pub fn risk_bound(
    f: &Predictor,
    envs: &EnvironmentSet,
    alpha: Option<&SimplexWeights>,
    cfg: &BoundConfig,
) -> Result<(BoundReport, HullStats)> {
    envs.validate()?;
    let target = envs
        .target
        .as_ref()
        .ok_or_else(|| Error::Validation("risk bound needs a target environment".into()))?;
    require_binary(target)?;
    for e in &envs.sources {
        require_binary(e)?;
    }
    let risks = || -> Result<(Vec<f64>, f64)> {
        let src = envs
            .sources
            .iter()
            .enumerate()
            .map(|(i, e)| evaluate(f, &sample_environment(e, cfg.n, rng::derive(cfg.seed, &[0x7273, i as u64]))?))
            .collect::<Result<Vec<_>>>()?;
        let tgt = evaluate(f, &sample_environment(target, cfg.n, rng::derive(cfg.seed, &[0x7274]))?)?;
        Ok((src, tgt))
    };
    let hull = || {
        let solver = SolverConfig {
            estimate: cfg.solver.estimate.with_seed(rng::derive(cfg.seed, &[0x6875_6c6c])),
            ..cfg.solver.clone()
        };
        classify_unseen(&Target::Spec(target.clone()), envs, &solver)
    };
    let (risk_res, hull_res) = rayon::join(risks, hull);
    let (source_risks, target_risk) = risk_res?;
    let (_, stats) = hull_res?;
    let alpha = match alpha {
        Some(a) => a.clone(),
        None => stats.alpha_star.clone().expect("projection sets alpha"),
    };
    let dis = label_disagreement(
        &ensemble_labeler(envs, &alpha)?,
        &LabelingFunction::ground_truth(target)?,
        (envs, &alpha),
        target,
        cfg.n,
        rng::derive(cfg.seed, &[0x646973]),
    )?;
    let mut report = BoundReport::assemble(
        source_risks,
        alpha,
        stats.epsilon,
        stats.delta,
        dis.value(),
        target_risk,
    )?;
    report.verdict = stats.verdict.expect("projection sets the verdict");
    report.disagreement_parts = Some((dis.on_mixture, dis.on_target));
    let eps_se = argmax_stderr(&stats);
    report.stderr = report
        .source_risks
        .iter()
        .zip(report.alpha.as_slice())
        .map(|(r, a)| a * binomial_stderr(*r, cfg.n))
        .sum::<f64>()
        + dis.stderr()
        + eps_se;
    Ok((report, stats))
}

fn argmax_stderr(stats: &HullStats) -> f64 {
    let m = &stats.pairwise;
    let n = m.values.nrows();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j && m.values[[i, j]] > best.0 {
                best = (m.values[[i, j]], m.stderr[[i, j]]);
            }
        }
    }
    best.1
}

/// Largest 0-1 error of `f` over fresh samples of every source.
pub fn worst_env_risk(f: &Predictor, envs: &EnvironmentSet, n: usize, seed: u64) -> Result<f64> {
    envs.validate()?;
    let mut worst = 0.0f64;
    for (i, e) in envs.sources.iter().enumerate() {
        let batch = sample_environment(e, n, rng::derive(seed, &[0x776f_7273, i as u64]))?;
        worst = worst.max(evaluate(f, &batch)?);
    }
    Ok(worst)
}

/// A fully enumerable binary problem: finite sources and target with
/// their labelings, a predictor, and a hypothesis class containing all of
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteInstance {
    pub sources: Vec<FiniteDistribution>,
    pub source_labels: Vec<Vec<bool>>,
    pub target: FiniteDistribution,
    pub target_labels: Vec<bool>,
    pub predictor: Vec<bool>,
    pub class: Vec<Vec<bool>>,
}

fn random_distribution(support: usize, rng: &mut rng::Rng) -> FiniteDistribution {
    // sparse supports make both hull interiors and exteriors common
    let mut w: Vec<f64> = (0..support)
        .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.sample::<f64, _>(Exp1) })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..support)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    FiniteDistribution::on_range(w.iter().map(|x| x / total).collect()).expect("normalized weights")
}

fn random_labels(support: usize, rng: &mut rng::Rng) -> Vec<bool> {
    (0..support).map(|_| rng.random_bool(0.5)).collect()
}

fn mismatch(p: &FiniteDistribution, a: &[bool], b: &[bool]) -> f64 {
    p.probs.iter().zip(a.iter().zip(b)).filter(|(_, (x, y))| x != y).map(|(w, _)| w).sum()
}

impl FiniteInstance {
    /// Random instance; labelings are perturbations of a shared base so
    /// sources mostly agree.
    pub fn random(num_sources: usize, support: usize, extra_hypotheses: usize, seed: u64) -> Self {
        let mut rng = rng::rng_for(seed, &[0x66696e]);
        let sources: Vec<_> = (0..num_sources).map(|_| random_distribution(support, &mut rng)).collect();
        let target = random_distribution(support, &mut rng);
        let base = random_labels(support, &mut rng);
        let perturb = |rng: &mut rng::Rng| -> Vec<bool> { base.iter().map(|&b| b ^ rng.random_bool(0.2)).collect() };
        let source_labels: Vec<_> = (0..num_sources).map(|_| perturb(&mut rng)).collect();
        let target_labels = perturb(&mut rng);
        let predictor = perturb(&mut rng);
        let mut class = vec![predictor.clone(), target_labels.clone()];
        class.extend(source_labels.iter().cloned());
        class.extend((0..extra_hypotheses).map(|_| random_labels(support, &mut rng)));
        FiniteInstance {
            sources,
            source_labels,
            target,
            target_labels,
            predictor,
            class,
        }
    }

    pub fn source_risks(&self) -> Vec<f64> {
        self.sources
            .iter()
            .zip(&self.source_labels)
            .map(|(p, h)| mismatch(p, &self.predictor, h))
            .collect()
    }

    pub fn target_risk(&self) -> f64 {
        mismatch(&self.target, &self.predictor, &self.target_labels)
    }

    /// `min(E_mix |h_s' - h_t|, E_t |h_t - h_s'|)` with both parts.
    pub fn disagreement(&self, alpha: &SimplexWeights) -> Result<(f64, f64, f64)> {
        let mix = FiniteDistribution::mixture(&self.sources, alpha.as_slice())?;
        let ensemble: Vec<f64> = (0..self.target.len())
            .map(|x| {
                self.source_labels
                    .iter()
                    .zip(alpha.as_slice())
                    .map(|(h, a)| a * h[x] as u8 as f64)
                    .sum()
            })
            .collect();
        let gap = |p: &FiniteDistribution| -> f64 {
            p.probs
                .iter()
                .zip(&ensemble)
                .zip(&self.target_labels)
                .map(|((w, e), &t)| w * (e - t as u8 as f64).abs())
                .sum()
        };
        let (m, t) = (gap(&mix), gap(&self.target));
        Ok((m.min(t), m, t))
    }

    /// Exact bound report under the disagreement class of `self.class`.
    pub fn audit(&self, solver: &SolverConfig) -> Result<BoundReport> {
        let tilde = h_tilde_class(&self.class);
        let (verdict, stats) = classify_exact(&self.target, &self.sources, Some(&tilde), solver)?;
        let alpha = stats.alpha_star.clone().expect("projection sets alpha");
        let (dis, m, t) = self.disagreement(&alpha)?;
        let mut report = BoundReport::assemble(
            self.source_risks(),
            alpha,
            stats.epsilon,
            stats.delta,
            dis,
            self.target_risk(),
        )?;
        report.verdict = verdict;
        report.disagreement_parts = Some((m, t));
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envsim::TaskSpec;

    fn moons(deg: f64, id: &str) -> EnvSpec {
        EnvSpec::rotated(id, TaskSpec::two_moons(0.1), deg)
    }

    #[test]
    fn vertex_ensemble_is_ground_truth() {
        let envs = EnvironmentSet::new(vec![moons(0.0, "a"), moons(60.0, "b")], None);
        let h = ensemble_labeler(&envs, &SimplexWeights::vertex(2, 1)).unwrap();
        let g = LabelingFunction::ground_truth(&envs.sources[1]).unwrap();
        let batch = sample_environment(&envs.sources[0], 200, 3).unwrap();
        assert_eq!(h.eval_batch(&batch.features).unwrap(), g.eval_batch(&batch.features).unwrap());
    }

    #[test]
    fn split_ensemble_gives_half_on_disagreement() {
        let envs = EnvironmentSet::new(vec![moons(0.0, "a"), moons(180.0, "b")], None);
        let h = ensemble_labeler(&envs, &SimplexWeights::uniform(2)).unwrap();
        let batch = sample_environment(&envs.sources[0], 200, 3).unwrap();
        let a = LabelingFunction::ground_truth(&envs.sources[0]).unwrap().eval_batch(&batch.features).unwrap();
        let b = LabelingFunction::ground_truth(&envs.sources[1]).unwrap().eval_batch(&batch.features).unwrap();
        let e = h.eval_batch(&batch.features).unwrap();
        for ((x, y), z) in a.iter().zip(&b).zip(&e) {
            if x == y {
                assert_eq!(z, x);
            } else {
                assert_eq!(*z, 0.5);
            }
        }
    }

    #[test]
    fn multiclass_is_unsupported() {
        let env = EnvSpec::new("g", TaskSpec::glyphs(10, 0.05), crate::envsim::Transform::identity());
        let envs = EnvironmentSet::new(vec![env], None);
        assert!(matches!(
            ensemble_labeler(&envs, &SimplexWeights::vertex(1, 0)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn disagreement_needs_enough_samples() {
        let envs = EnvironmentSet::new(vec![moons(0.0, "a")], None);
        let h = LabelingFunction::ground_truth(&envs.sources[0]).unwrap();
        let w = SimplexWeights::vertex(1, 0);
        assert!(label_disagreement(&h, &h, (&envs, &w), &envs.sources[0], 50, 0).is_err());
        let d = label_disagreement(&h, &h, (&envs, &w), &envs.sources[0], 100, 0).unwrap();
        assert_eq!(d.value(), 0.0);
    }

    #[test]
    fn ood_report_dominates_algebraically() {
        let r = BoundReport::assemble(vec![0.1, 0.2], SimplexWeights::uniform(2), 0.3, Some(0.5), 0.05, 0.2).unwrap();
        assert_eq!(r.verdict, Verdict::Ood);
        assert!(r.bound_ood.unwrap() > r.bound_id);
        assert!(((r.bound_ood.unwrap() - r.bound_id) - (0.5 - 0.3)).abs() < 1e-12);
        r.check_identity().unwrap();
    }

    #[test]
    fn finite_audit_holds_on_a_few_instances() {
        for seed in 0..10 {
            let inst = FiniteInstance::random(2 + (seed % 2) as usize, 5, 3, seed);
            let r = inst.audit(&SolverConfig::exact()).unwrap();
            r.check_identity().unwrap();
            assert!(r.holds(), "seed {seed}: {r:?}");
        }
    }
}
