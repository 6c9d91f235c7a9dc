use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{Arm, ExperimentConfig, ExperimentKind};
use super::records::{sort_records, RunRecord, ERROR_PREFIX};
use crate::bounds::{risk_bound, BoundConfig, BoundReport};
use crate::envsim::{sample_environment, LabeledBatch};
use crate::error::{Error, Result};
use crate::hull::{classify_unseen, HullStats, SolverConfig, Target};
use crate::nnet::{checkpoint, evaluate, init_predictor, train, Predictor, TrainConfig, TrainMode};
use crate::rng;
use crate::select::{run_random_selection, run_rl_selection, EpisodeReward, SelectConfig};

const SRC: u64 = 0x737263;
const SRC_TEST: u64 = 0x7372_6374;
const TGT: u64 = 0x746774;
const INIT: u64 = 0x696e_6974;
const TRAIN: u64 = 0x74726e;
const HULL: u64 = 0x6875_6c6c;
const SELECT: u64 = 0x73656c;
const PRETRAIN: u64 = 0x707265;
const BOUND: u64 = 0x626e64;

/// Everything a sweep produces besides the records themselves.
#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub records: Vec<RunRecord>,
    /// `(seed, n_train, report)` for bound_audit runs.
    pub bound_reports: Vec<(u64, usize, BoundReport)>,
    /// `(seed, n_train, arm, curve)` for selection arms.
    pub reward_curves: Vec<(u64, usize, Arm, Vec<EpisodeReward>)>,
}

struct SeedContext {
    seed: u64,
    sources: Vec<LabeledBatch>,
    source_test: LabeledBatch,
    target_test: LabeledBatch,
    hull: Option<std::result::Result<HullStats, String>>,
    pretrained: Option<std::result::Result<(Predictor, PathBuf), String>>,
}

fn error_tag(e: &Error) -> String {
    format!("{ERROR_PREFIX}{}", e.kind())
}

fn checkpoint_dir(cfg: &ExperimentConfig) -> PathBuf {
    match &cfg.output_path {
        Some(p) => p.parent().map(|d| d.to_path_buf()).unwrap_or_default().join("checkpoints"),
        None => std::env::temp_dir().join(format!("oodhull-{}", std::process::id())),
    }
}

fn pretrain(cfg: &ExperimentConfig, seed: u64) -> Result<(Predictor, PathBuf)> {
    let spec = cfg.pretrain.as_ref().ok_or_else(|| Error::Config("missing [pretrain]".into()))?;
    let parts = spec
        .envs
        .iter()
        .enumerate()
        .map(|(i, e)| sample_environment(e, spec.n_per_env, rng::derive(seed, &[PRETRAIN, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    let pool = LabeledBatch::concat(&parts.iter().collect::<Vec<_>>())?;
    let init = init_predictor(&cfg.layer_sizes(), rng::derive(seed, &[PRETRAIN, INIT]))?;
    let tc = TrainConfig {
        seed: rng::derive(seed, &[PRETRAIN, TRAIN]),
        mode: TrainMode::Scratch,
        ..spec.train.clone()
    };
    let (p, _) = train(&init, &pool, &tc)?;
    let dir = checkpoint_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(format!("{}-seed{seed}.ckpt", cfg.experiment_id));
    checkpoint::save(&p, &path)?;
    Ok((p, path))
}

fn seed_context(cfg: &ExperimentConfig, seed: u64) -> Result<SeedContext> {
    let target = cfg.target()?;
    let classes = cfg.envs.task().num_classes;
    let max_n = match cfg.experiment_kind {
        ExperimentKind::MSweep => cfg.n_train.expect("validated"),
        _ => *cfg.n_grid.last().expect("validated"),
    };
    let counts = cfg.split(max_n);
    let sources = cfg
        .envs
        .sources
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (e, &c))| sample_environment(e, c.max(1), rng::derive(seed, &[SRC, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    let per_source = (cfg.m_target * classes).div_ceil(cfg.envs.num_sources());
    let tests = cfg
        .envs
        .sources
        .iter()
        .enumerate()
        .map(|(i, e)| sample_environment(e, per_source, rng::derive(seed, &[SRC_TEST, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    let source_test = LabeledBatch::concat(&tests.iter().collect::<Vec<_>>())?;
    let target_test = sample_environment(target, cfg.m_target * classes, rng::derive(seed, &[TGT]))?;
    let hull = match (&cfg.hull, cfg.experiment_kind) {
        (Some(solver), kind) if kind != ExperimentKind::BoundAudit => {
            let solver = SolverConfig {
                estimate: solver.estimate.with_seed(rng::derive(seed, &[HULL])),
                ..solver.clone()
            };
            Some(
                classify_unseen(&Target::Spec(target.clone()), &cfg.envs, &solver)
                    .map(|(_, s)| s)
                    .map_err(|e| error_tag(&e)),
            )
        }
        _ => None,
    };
    let pretrained = cfg
        .arms()
        .iter()
        .any(|a| matches!(a, Arm::Pretrain | Arm::Probe))
        .then(|| cfg.pretrain.as_ref().map(|_| pretrain(cfg, seed).map_err(|e| error_tag(&e))))
        .flatten();
    Ok(SeedContext {
        seed,
        sources,
        source_test,
        target_test,
        hull,
        pretrained,
    })
}

impl SeedContext {
    fn training_set(&self, cfg: &ExperimentConfig, n: usize) -> Result<LabeledBatch> {
        let parts: Vec<LabeledBatch> = self
            .sources
            .iter()
            .zip(cfg.split(n))
            .filter(|(_, c)| *c > 0)
            .map(|(s, c)| s.head(c))
            .collect();
        LabeledBatch::concat(&parts.iter().collect::<Vec<_>>())
    }

    fn record(&self, cfg: &ExperimentConfig, n: usize, m: usize, arm: Arm) -> RunRecord {
        let (epsilon, delta, verdict) = match &self.hull {
            Some(Ok(h)) => (
                Some(h.epsilon),
                h.delta,
                h.verdict.map(|v| v.to_string()).unwrap_or_default(),
            ),
            Some(Err(tag)) => (None, None, tag.clone()),
            None => (None, None, String::new()),
        };
        RunRecord {
            experiment_id: cfg.experiment_id.clone(),
            seed: self.seed,
            n_train: n,
            m_target: m,
            shift_param: cfg.envs.target.as_ref().map(|t| t.transform.shift_param()).unwrap_or_default(),
            arm: arm.as_str().to_string(),
            target_error: None,
            source_error: None,
            epsilon,
            delta,
            verdict,
            wall_time: 0.0,
        }
    }
}

struct ArmResult {
    predictor: Predictor,
    curve: Option<Vec<EpisodeReward>>,
}

fn train_config(cfg: &ExperimentConfig, seed: u64, n: usize, arm: Arm) -> TrainConfig {
    TrainConfig {
        seed: rng::derive(seed, &[TRAIN, n as u64, arm as u64]),
        ..cfg.train.clone()
    }
}

fn select_config(cfg: &ExperimentConfig, seed: u64, n: usize) -> SelectConfig {
    SelectConfig {
        seed: rng::derive(seed, &[SELECT, n as u64]),
        ..cfg.select_config()
    }
}

fn pretrained(ctx: &SeedContext) -> Result<&(Predictor, PathBuf)> {
    match &ctx.pretrained {
        Some(Ok(p)) => Ok(p),
        Some(Err(tag)) => Err(Error::Checkpoint(format!("pretraining failed ({tag})"))),
        None => Err(Error::Config("no pretrained checkpoint available".into())),
    }
}

fn run_arm(
    cfg: &ExperimentConfig,
    ctx: &SeedContext,
    data: &LabeledBatch,
    n: usize,
    arm: Arm,
    vanilla: &Result<Predictor>,
) -> Result<ArmResult> {
    let seed = ctx.seed;
    let init = || init_predictor(&cfg.layer_sizes(), rng::derive(seed, &[INIT, n as u64]));
    let base_vanilla = || -> Result<Predictor> {
        vanilla
            .as_ref()
            .cloned()
            .map_err(|e| Error::Validation(format!("vanilla arm failed: {e}")))
    };
    let plain = |p: Predictor| ArmResult {
        predictor: p,
        curve: None,
    };
    Ok(match arm {
        Arm::Vanilla => plain(base_vanilla()?),
        Arm::Random => {
            let (p, curve) = run_random_selection(data, &base_vanilla()?, &select_config(cfg, seed, n))?;
            ArmResult {
                predictor: p,
                curve: Some(curve),
            }
        }
        Arm::Rl => {
            let out = run_rl_selection(data, &base_vanilla()?, &select_config(cfg, seed, n))?;
            ArmResult {
                predictor: out.predictor,
                curve: Some(out.rewards),
            }
        }
        Arm::Aug => {
            let tc = TrainConfig {
                augment: Some(cfg.augment_policy()),
                ..train_config(cfg, seed, n, arm)
            };
            plain(train(&init()?, data, &tc)?.0)
        }
        Arm::Pretrain => {
            let (p, path) = pretrained(ctx)?;
            let tc = TrainConfig {
                mode: TrainMode::FinetuneFrom { checkpoint: path.clone() },
                ..train_config(cfg, seed, n, arm)
            };
            plain(train(p, data, &tc)?.0)
        }
        Arm::Probe => {
            let start = match &ctx.pretrained {
                Some(_) => pretrained(ctx)?.0.clone(),
                None => init()?,
            };
            let tc = TrainConfig {
                mode: TrainMode::LinearProbeThenFinetune,
                ..train_config(cfg, seed, n, arm)
            };
            plain(train(&start, data, &tc)?.0)
        }
    })
}

fn scored(ctx: &SeedContext, mut rec: RunRecord, p: &Predictor) -> RunRecord {
    match (evaluate(p, &ctx.target_test), evaluate(p, &ctx.source_test)) {
        (Ok(t), Ok(s)) => {
            rec.target_error = Some(t);
            rec.source_error = Some(s);
        }
        (Err(e), _) | (_, Err(e)) => rec.verdict = error_tag(&e),
    }
    rec
}

#[derive(Default)]
struct JobOutput {
    records: Vec<RunRecord>,
    bound_reports: Vec<(u64, usize, BoundReport)>,
    reward_curves: Vec<(u64, usize, Arm, Vec<EpisodeReward>)>,
}

fn grid_job(cfg: &ExperimentConfig, ctx: &SeedContext, n: usize) -> JobOutput {
    let mut out = JobOutput::default();
    let m = cfg.m_target;
    let data = match ctx.training_set(cfg, n) {
        Ok(d) => d,
        Err(e) => {
            for arm in cfg.arms() {
                let mut r = ctx.record(cfg, n, m, arm);
                r.verdict = error_tag(&e);
                out.records.push(r);
            }
            return out;
        }
    };
    let started = Instant::now();
    let vanilla = init_predictor(&cfg.layer_sizes(), rng::derive(ctx.seed, &[INIT, n as u64]))
        .and_then(|p| train(&p, &data, &train_config(cfg, ctx.seed, n, Arm::Vanilla)))
        .map(|(p, _)| p);
    let vanilla_time = started.elapsed().as_secs_f64();

    for arm in cfg.arms() {
        let started = Instant::now();
        let mut rec = ctx.record(cfg, n, m, arm);
        match run_arm(cfg, ctx, &data, n, arm, &vanilla) {
            Ok(res) => {
                if cfg.experiment_kind == ExperimentKind::BoundAudit && arm == Arm::Vanilla {
                    let bc = BoundConfig {
                        solver: cfg.hull.clone().unwrap_or_default(),
                        n: cfg.bound_samples.unwrap_or(2000),
                        seed: rng::derive(ctx.seed, &[BOUND, n as u64]),
                    };
                    match risk_bound(&res.predictor, &cfg.envs, None, &bc) {
                        Ok((report, _)) => {
                            rec.epsilon = Some(report.epsilon);
                            rec.delta = report.delta;
                            rec.verdict = report.verdict.to_string();
                            out.bound_reports.push((ctx.seed, n, report));
                        }
                        Err(e) => rec.verdict = error_tag(&e),
                    }
                }
                let verdict = rec.verdict.clone();
                rec = scored(ctx, rec, &res.predictor);
                if verdict.starts_with(ERROR_PREFIX) {
                    rec.verdict = verdict;
                }
                if let Some(curve) = res.curve {
                    out.reward_curves.push((ctx.seed, n, arm, curve));
                }
            }
            Err(e) => rec.verdict = error_tag(&e),
        }
        if cfg.record_wall_time {
            let own = started.elapsed().as_secs_f64();
            rec.wall_time = if arm == Arm::Vanilla { vanilla_time } else { vanilla_time + own };
        }
        out.records.push(rec);
    }
    out
}

fn m_sweep_job(cfg: &ExperimentConfig, ctx: &SeedContext) -> JobOutput {
    let n = cfg.n_train.expect("validated");
    let mut out = JobOutput::default();
    let classes = cfg.envs.task().num_classes;
    let target = cfg.target().expect("validated");
    let started = Instant::now();
    let trained = ctx.training_set(cfg, n).and_then(|data| {
        init_predictor(&cfg.layer_sizes(), rng::derive(ctx.seed, &[INIT, n as u64]))
            .and_then(|p| train(&p, &data, &train_config(cfg, ctx.seed, n, Arm::Vanilla)))
    });
    let elapsed = started.elapsed().as_secs_f64();
    for &m in &cfg.n_grid {
        let mut rec = ctx.record(cfg, n, m, Arm::Vanilla);
        let eval = match &trained {
            Ok((p, _)) => sample_environment(target, m * classes, rng::derive(ctx.seed, &[TGT, m as u64]))
                .and_then(|t| Ok((evaluate(p, &t)?, evaluate(p, &ctx.source_test)?)))
                .map_err(|e| error_tag(&e)),
            Err(e) => Err(error_tag(e)),
        };
        match eval {
            Ok((t, s)) => {
                rec.target_error = Some(t);
                rec.source_error = Some(s);
            }
            Err(tag) => rec.verdict = tag,
        }
        if cfg.record_wall_time {
            rec.wall_time = elapsed;
        }
        out.records.push(rec);
    }
    out
}

/// Run every `(seed, grid point, arm)` cell of `cfg`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    Ok(run_sweep_full(cfg)?.records)
}

pub fn run_sweep_full(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let contexts = cfg
        .seeds
        .par_iter()
        .map(|&s| seed_context(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Option<usize>)> = match cfg.experiment_kind {
        ExperimentKind::MSweep => (0..contexts.len()).map(|c| (c, None)).collect(),
        _ => (0..contexts.len())
            .flat_map(|c| cfg.n_grid.iter().map(move |&n| (c, Some(n))))
            .collect(),
    };
    let outputs: Vec<JobOutput> = jobs
        .par_iter()
        .map(|&(c, n)| match n {
            Some(n) => grid_job(cfg, &contexts[c], n),
            None => m_sweep_job(cfg, &contexts[c]),
        })
        .collect();
    let mut out = SweepOutput::default();
    for o in outputs {
        out.records.extend(o.records);
        out.bound_reports.extend(o.bound_reports);
        out.reward_curves.extend(o.reward_curves);
    }
    sort_records(&mut out.records);
    Ok(out)
}
