use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envsim::{EnvSpec, EnvironmentSet, FeatureLayout};
use crate::error::{Error, Result};
use crate::hull::SolverConfig;
use crate::nnet::{AugmentPolicy, TrainConfig};
use crate::select::SelectConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ScalingSweep,
    MSweep,
    SelectionCompare,
    TechniqueAblation,
    BoundAudit,
}

/// Training variant. The declaration order is the output row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Vanilla,
    Random,
    Rl,
    Aug,
    Pretrain,
    Probe,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Vanilla => "vanilla",
            Arm::Random => "random",
            Arm::Rl => "rl",
            Arm::Aug => "aug",
            Arm::Pretrain => "pretrain",
            Arm::Probe => "probe",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "vanilla" => Arm::Vanilla,
            "random" => Arm::Random,
            "rl" => Arm::Rl,
            "aug" => Arm::Aug,
            "pretrain" => Arm::Pretrain,
            "probe" => Arm::Probe,
            other => return Err(Error::Config(format!("unknown arm '{other}'"))),
        })
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pool the pretrain arm's checkpoint is trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainSpec {
    pub envs: Vec<EnvSpec>,
    /// Samples per pooled environment.
    pub n_per_env: usize,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_id() -> String {
    "experiment".into()
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

fn default_m_target() -> usize {
    400
}

/// One declarative experiment; the config file maps onto it field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub experiment_id: String,
    pub experiment_kind: ExperimentKind,
    pub envs: EnvironmentSet,
    /// Training sizes `N`, or OOD sample sizes `M` for an m_sweep.
    pub n_grid: Vec<usize>,
    /// Target samples per class.
    #[serde(default = "default_m_target")]
    pub m_target: usize,
    /// Fixed training size of an m_sweep.
    #[serde(default)]
    pub n_train: Option<usize>,
    pub seeds: Vec<u64>,
    /// Hidden widths of the task MLP.
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub select: Option<SelectConfig>,
    /// Arms to run; defaults depend on the experiment kind.
    #[serde(default)]
    pub arms: Option<Vec<Arm>>,
    /// Relative source shares of `N`; equal shares when absent.
    #[serde(default)]
    pub source_split: Option<Vec<f64>>,
    /// Hull estimation settings; ε/δ/verdict columns stay empty when absent.
    #[serde(default)]
    pub hull: Option<SolverConfig>,
    #[serde(default)]
    pub augment: Option<AugmentPolicy>,
    #[serde(default)]
    pub pretrain: Option<PretrainSpec>,
    /// Fresh samples per bound ingredient (bound_audit).
    #[serde(default)]
    pub bound_samples: Option<usize>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Write measured wall time instead of 0 (breaks byte-determinism).
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn arms(&self) -> Vec<Arm> {
        let mut arms = self.arms.clone().unwrap_or_else(|| match self.experiment_kind {
            ExperimentKind::SelectionCompare => vec![Arm::Vanilla, Arm::Random, Arm::Rl],
            ExperimentKind::TechniqueAblation => vec![Arm::Vanilla, Arm::Aug, Arm::Pretrain, Arm::Probe],
            _ => vec![Arm::Vanilla],
        });
        arms.sort();
        arms.dedup();
        arms
    }

    pub fn target(&self) -> Result<&EnvSpec> {
        self.envs
            .target
            .as_ref()
            .ok_or_else(|| Error::Config("experiment needs envs.target".into()))
    }

    /// Input width, hidden widths, class count.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let task = self.envs.task();
        let mut sizes = vec![task.dim()];
        sizes.extend_from_slice(&self.hidden);
        sizes.push(task.num_classes);
        sizes
    }

    pub fn select_config(&self) -> SelectConfig {
        self.select.clone().unwrap_or_default()
    }

    pub fn augment_policy(&self) -> AugmentPolicy {
        self.augment.clone().unwrap_or_else(|| match self.envs.task().family.layout() {
            FeatureLayout::Points2 => AugmentPolicy {
                jitter_std: 0.05,
                ..AugmentPolicy::default()
            },
            FeatureLayout::Grid8x8 => AugmentPolicy {
                random_crop_pad: 1,
                ..AugmentPolicy::default()
            },
        })
    }

    /// Per-source sample counts summing to `n`.
    pub fn split(&self, n: usize) -> Vec<usize> {
        let k = self.envs.num_sources();
        let shares = self.source_split.clone().unwrap_or_else(|| vec![1.0; k]);
        let total: f64 = shares.iter().sum();
        let mut counts: Vec<usize> = shares.iter().map(|s| (n as f64 * s / total).floor() as usize).collect();
        let mut left = n - counts.iter().sum::<usize>();
        // remainder to the largest fractional parts, ties to the lower index
        let mut order: Vec<usize> = (0..k).collect();
        let frac = |i: usize| n as f64 * shares[i] / total - counts[i] as f64;
        order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.envs.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.target()?;
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return bad("n_grid must be a non-empty list of positive integers".into());
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be strictly increasing".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must be non-empty".into());
        }
        if self.m_target == 0 {
            return bad("m_target must be >= 1".into());
        }
        if self.experiment_kind == ExperimentKind::MSweep && self.n_train.is_none_or(|n| n == 0) {
            return bad("m_sweep needs a positive n_train".into());
        }
        if let Some(s) = &self.source_split {
            if s.len() != self.envs.num_sources() || s.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return bad("source_split needs one positive share per source".into());
            }
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        self.train.validate()?;
        if let Some(s) = &self.select {
            s.validate()?;
        }
        if self.arms().contains(&Arm::Pretrain) && self.pretrain.is_none() {
            return bad("the pretrain arm needs a [pretrain] section".into());
        }
        if let Some(p) = &self.pretrain {
            if p.envs.is_empty() || p.n_per_env == 0 {
                return bad("pretrain needs at least one env and n_per_env >= 1".into());
            }
            for e in &p.envs {
                e.validate()?;
                if e.task.family.layout() != self.envs.task().family.layout()
                    || e.task.num_classes != self.envs.task().num_classes
                {
                    return bad(format!("pretrain env '{}' is incompatible with the sources", e.env_id));
                }
            }
        }
        if self.experiment_kind == ExperimentKind::BoundAudit && self.envs.task().num_classes != 2 {
            return Err(Error::Unsupported("bound_audit needs a binary task".into()));
        }
        Ok(())
    }
}
