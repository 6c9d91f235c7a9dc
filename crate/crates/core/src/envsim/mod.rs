//! Synthetic multi-environment classification data.
//!
//! Three task families are provided: `two_moons` and `gauss_blobs` (2-dim
//! points) and `glyphs8x8` (64-dim digit-like bitmaps). An environment is a
//! task plus one shift transform: a rotation or blur (correlation shift) or a
//! named style (diversity shift).

pub mod glyphs;

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::SimplexWeights;
use crate::rng;
use glyphs::{GlyphStyle, Latent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    TwoMoons,
    GaussBlobs,
    Glyphs8x8,
}

/// How features are laid out, which decides the transforms that apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLayout {
    Points2,
    Grid8x8,
}

impl FeatureLayout {
    pub fn dim(self) -> usize {
        match self {
            FeatureLayout::Points2 => 2,
            FeatureLayout::Grid8x8 => glyphs::PIXELS,
        }
    }

    pub fn of_dim(dim: usize) -> Option<Self> {
        match dim {
            2 => Some(FeatureLayout::Points2),
            glyphs::PIXELS => Some(FeatureLayout::Grid8x8),
            _ => None,
        }
    }
}

impl TaskFamily {
    pub fn layout(self) -> FeatureLayout {
        match self {
            TaskFamily::TwoMoons | TaskFamily::GaussBlobs => FeatureLayout::Points2,
            TaskFamily::Glyphs8x8 => FeatureLayout::Grid8x8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub family: TaskFamily,
    pub num_classes: usize,
    /// Feature noise standard deviation.
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_noise() -> f64 {
    0.1
}

impl TaskSpec {
    pub fn two_moons(noise: f64) -> Self {
        TaskSpec {
            task_id: "two_moons".into(),
            family: TaskFamily::TwoMoons,
            num_classes: 2,
            noise,
        }
    }

    pub fn gauss_blobs(num_classes: usize, noise: f64) -> Self {
        TaskSpec {
            task_id: "gauss_blobs".into(),
            family: TaskFamily::GaussBlobs,
            num_classes,
            noise,
        }
    }

    pub fn glyphs(num_classes: usize, noise: f64) -> Self {
        TaskSpec {
            task_id: "glyphs8x8".into(),
            family: TaskFamily::Glyphs8x8,
            num_classes,
            noise,
        }
    }

    pub fn dim(&self) -> usize {
        self.family.layout().dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Validation(format!(
                "task '{}': num_classes must be >= 2, got {}",
                self.task_id, self.num_classes
            )));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Validation(format!(
                "task '{}': noise must be finite and >= 0, got {}",
                self.task_id, self.noise
            )));
        }
        match self.family {
            TaskFamily::TwoMoons if self.num_classes != 2 => Err(Error::Validation(
                "two_moons is a binary task (num_classes = 2)".into(),
            )),
            TaskFamily::Glyphs8x8 if self.num_classes > glyphs::MAX_CLASSES => {
                Err(Error::Validation(format!(
                    "glyphs8x8 supports at most {} classes",
                    glyphs::MAX_CLASSES
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    Rotation { degrees: f64 },
    Blur { sigma: f64 },
    Style { style_id: String },
}

impl Transform {
    pub fn identity() -> Self {
        Transform::Rotation { degrees: 0.0 }
    }

    /// Scalar or label describing the shift, as recorded in experiment rows.
    pub fn shift_param(&self) -> String {
        match self {
            Transform::Rotation { degrees } => format!("rot{degrees}"),
            Transform::Blur { sigma } => format!("blur{sigma}"),
            Transform::Style { style_id } => format!("style:{style_id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub env_id: String,
    pub task: TaskSpec,
    pub transform: Transform,
}

impl EnvSpec {
    pub fn new(env_id: impl Into<String>, task: TaskSpec, transform: Transform) -> Self {
        EnvSpec {
            env_id: env_id.into(),
            task,
            transform,
        }
    }

    pub fn rotated(env_id: impl Into<String>, task: TaskSpec, degrees: f64) -> Self {
        Self::new(env_id, task, Transform::Rotation { degrees })
    }

    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        match &self.transform {
            Transform::Rotation { degrees } => {
                if !(degrees.is_finite() && (0.0..360.0).contains(degrees)) {
                    return Err(Error::Validation(format!(
                        "env '{}': rotation must lie in [0, 360), got {degrees}",
                        self.env_id
                    )));
                }
            }
            Transform::Blur { sigma } => {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(Error::Validation(format!(
                        "env '{}': blur sigma must be >= 0, got {sigma}",
                        self.env_id
                    )));
                }
                if self.task.family.layout() != FeatureLayout::Grid8x8 {
                    return Err(Error::Unsupported(format!(
                        "env '{}': blur applies to 8x8 grids only",
                        self.env_id
                    )));
                }
            }
            Transform::Style { style_id } => match self.task.family {
                TaskFamily::Glyphs8x8 => {
                    GlyphStyle::named(style_id)?;
                }
                TaskFamily::GaussBlobs => {
                    blob_offset(style_id)?;
                }
                TaskFamily::TwoMoons => {
                    return Err(Error::Config(format!(
                        "env '{}': two_moons has no styles",
                        self.env_id
                    )))
                }
            },
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSet {
    #[serde(alias = "envs")]
    pub sources: Vec<EnvSpec>,
    #[serde(default)]
    pub target: Option<EnvSpec>,
}

impl EnvironmentSet {
    pub fn new(sources: Vec<EnvSpec>, target: Option<EnvSpec>) -> Self {
        EnvironmentSet { sources, target }
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn task(&self) -> &TaskSpec {
        &self.sources[0].task
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::Validation("environment set needs at least one source".into()));
        }
        for (i, env) in self.sources.iter().enumerate() {
            env.validate()?;
            if self.sources[..i].iter().any(|e| e.env_id == env.env_id) {
                return Err(Error::Validation(format!("duplicate env_id '{}'", env.env_id)));
            }
        }
        let layout = self.sources[0].task.family.layout();
        let classes = self.sources[0].task.num_classes;
        let all = self.sources.iter().chain(self.target.iter());
        for env in all {
            if env.task.family.layout() != layout || env.task.num_classes != classes {
                return Err(Error::Validation(format!(
                    "env '{}' has a feature layout or class count incompatible with the sources",
                    env.env_id
                )));
            }
        }
        if let Some(t) = &self.target {
            t.validate()?;
            if self.sources.iter().any(|e| e.env_id == t.env_id) {
                return Err(Error::Validation(format!(
                    "target env_id '{}' collides with a source",
                    t.env_id
                )));
            }
        }
        Ok(())
    }
}

/// Features with labels and per-sample environment provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub env_ids: Vec<String>,
}

impl LabeledBatch {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, env_ids: Vec<String>) -> Result<Self> {
        let batch = LabeledBatch {
            features,
            labels,
            env_ids,
        };
        batch.validate()?;
        Ok(batch)
    }

    pub fn empty(dim: usize) -> Self {
        LabeledBatch {
            features: Array2::zeros((0, dim)),
            labels: Vec::new(),
            env_ids: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.nrows();
        if self.labels.len() != n || self.env_ids.len() != n {
            return Err(Error::Validation(format!(
                "row counts disagree: features {n}, labels {}, env_ids {}",
                self.labels.len(),
                self.env_ids.len()
            )));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("batch contains non-finite features".into()));
        }
        Ok(())
    }

    pub fn check_labels(&self, num_classes: usize) -> Result<()> {
        match self.labels.iter().find(|&&l| l >= num_classes) {
            Some(l) => Err(Error::Validation(format!(
                "label {l} out of range for {num_classes} classes"
            ))),
            None => Ok(()),
        }
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> LabeledBatch {
        LabeledBatch {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            env_ids: indices.iter().map(|&i| self.env_ids[i].clone()).collect(),
        }
    }

    pub fn head(&self, n: usize) -> LabeledBatch {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// `env_id,label,x0,..` with one row per sample.
    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut header = vec!["env_id".to_string(), "label".to_string()];
        header.extend((0..self.dim()).map(|j| format!("x{j}")));
        w.write_record(&header).map_err(|e| Error::csv(path, e))?;
        for (i, row) in self.features.outer_iter().enumerate() {
            let mut rec = vec![self.env_ids[i].clone(), self.labels[i].to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn concat(parts: &[&LabeledBatch]) -> Result<LabeledBatch> {
        let dim = parts.first().map(|b| b.dim()).unwrap_or(0);
        if parts.iter().any(|b| b.dim() != dim) {
            return Err(Error::Validation("cannot concatenate batches of different widths".into()));
        }
        let views: Vec<_> = parts.iter().map(|b| b.features.view()).collect();
        let features = if views.is_empty() {
            Array2::zeros((0, 0))
        } else {
            ndarray::concatenate(Axis(0), &views)
                .map_err(|e| Error::Validation(e.to_string()))?
        };
        Ok(LabeledBatch {
            features,
            labels: parts.iter().flat_map(|b| b.labels.iter().copied()).collect(),
            env_ids: parts.iter().flat_map(|b| b.env_ids.iter().cloned()).collect(),
        })
    }

    pub fn with_features(&self, features: Array2<f64>) -> LabeledBatch {
        LabeledBatch {
            features,
            labels: self.labels.clone(),
            env_ids: self.env_ids.clone(),
        }
    }
}

const SAMPLE_TAG: u64 = 0x7361_6d70;

/// Upper moon (label 0): unit half circle at the origin, y >= 0.
/// Lower moon (label 1): unit half circle at (1, 0.5), y <= 0.5.
fn moon_point(label: usize, t: f64) -> [f64; 2] {
    if label == 0 {
        [t.cos(), t.sin()]
    } else {
        [1.0 - t.cos(), 0.5 - t.sin()]
    }
}

fn half_circle_distance(p: [f64; 2], center: [f64; 2], upper: bool) -> f64 {
    let q = [p[0] - center[0], p[1] - center[1]];
    let on_side = if upper { q[1] >= 0.0 } else { q[1] <= 0.0 };
    if on_side {
        ((q[0] * q[0] + q[1] * q[1]).sqrt() - 1.0).abs()
    } else {
        let d1 = ((q[0] - 1.0).powi(2) + q[1] * q[1]).sqrt();
        let d2 = ((q[0] + 1.0).powi(2) + q[1] * q[1]).sqrt();
        d1.min(d2)
    }
}

fn moon_label(p: [f64; 2]) -> usize {
    let d0 = half_circle_distance(p, [0.0, 0.0], true);
    let d1 = half_circle_distance(p, [1.0, 0.5], false);
    usize::from(d1 < d0)
}

const BLOB_RADIUS: f64 = 2.0;
const BLOB_SHIFT: f64 = 1.0;

fn blob_offset(style_id: &str) -> Result<[f64; 2]> {
    let off = match style_id {
        "base" => [0.0, 0.0],
        "east" => [BLOB_SHIFT, 0.0],
        "north" => [0.0, BLOB_SHIFT],
        "west" => [-BLOB_SHIFT, 0.0],
        "south" => [0.0, -BLOB_SHIFT],
        other => {
            return Err(Error::Config(format!(
                "unknown gauss_blobs style '{other}' (known: base, east, north, west, south)"
            )))
        }
    };
    Ok(off)
}

fn blob_mean(class: usize, num_classes: usize, offset: [f64; 2]) -> [f64; 2] {
    let a = 2.0 * PI * class as f64 / num_classes as f64;
    [BLOB_RADIUS * a.cos() + offset[0], BLOB_RADIUS * a.sin() + offset[1]]
}

fn rotate_point(p: [f64; 2], degrees: f64) -> [f64; 2] {
    let (s, c) = degrees.to_radians().sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Class-balanced label sequence: each class appears floor(n/C) or
/// ceil(n/C) times, in shuffled order.
fn balanced_labels(n: usize, num_classes: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % num_classes).collect();
    labels.shuffle(rng);
    labels
}

fn glyph_style(env: &EnvSpec) -> Result<GlyphStyle> {
    match &env.transform {
        Transform::Style { style_id } => GlyphStyle::named(style_id),
        _ => GlyphStyle::named("plain"),
    }
}

fn glyph_post(env: &EnvSpec, img: Vec<f64>) -> Vec<f64> {
    match env.transform {
        Transform::Rotation { degrees } => glyphs::rotate(&img, degrees),
        Transform::Blur { sigma } => glyphs::blur(&img, sigma),
        Transform::Style { .. } => img,
    }
}

/// Draw `n` samples from `env`, deterministically in `(env, n, seed)`.
pub fn sample_environment(env: &EnvSpec, n: usize, seed: u64) -> Result<LabeledBatch> {
    env.validate()?;
    if n == 0 {
        return Err(Error::Validation("sample size must be >= 1".into()));
    }
    let mut rng = rng::rng_for(seed, &[SAMPLE_TAG]);
    let task = &env.task;
    let labels = balanced_labels(n, task.num_classes, &mut rng);
    let noise = Normal::new(0.0, task.noise.max(0.0)).expect("noise std is validated");
    let dim = task.dim();
    let mut features = Array2::zeros((n, dim));

    match task.family {
        TaskFamily::TwoMoons | TaskFamily::GaussBlobs => {
            let offset = match &env.transform {
                Transform::Style { style_id } => blob_offset(style_id)?,
                _ => [0.0, 0.0],
            };
            for (i, &label) in labels.iter().enumerate() {
                let base = match task.family {
                    TaskFamily::TwoMoons => moon_point(label, rng.random_range(0.0..PI)),
                    _ => blob_mean(label, task.num_classes, offset),
                };
                let p = [base[0] + noise.sample(&mut rng), base[1] + noise.sample(&mut rng)];
                features[[i, 0]] = p[0];
                features[[i, 1]] = p[1];
            }
            if let Transform::Rotation { .. } = env.transform {
                features = apply_transform_features(&features, &env.transform)?;
            }
        }
        TaskFamily::Glyphs8x8 => {
            let style = glyph_style(env)?;
            for (i, &label) in labels.iter().enumerate() {
                let latent = Latent::from_index(rng.random_range(0..Latent::count()));
                let img = glyph_post(env, glyphs::render(label, &style, latent));
                for (j, v) in img.into_iter().enumerate() {
                    let noisy = if task.noise > 0.0 { v + noise.sample(&mut rng) } else { v };
                    features[[i, j]] = noisy.clamp(0.0, 1.0);
                }
            }
        }
    }
    LabeledBatch::new(features, labels, vec![env.env_id.clone(); n])
}

fn apply_transform_features(features: &Array2<f64>, transform: &Transform) -> Result<Array2<f64>> {
    let layout = FeatureLayout::of_dim(features.ncols()).ok_or_else(|| {
        Error::Unsupported(format!("no transforms for {}-dim features", features.ncols()))
    })?;
    let mut out = features.clone();
    match (transform, layout) {
        (Transform::Rotation { degrees }, FeatureLayout::Points2) => {
            if degrees.rem_euclid(360.0) != 0.0 {
                for mut row in out.rows_mut() {
                    let p = rotate_point([row[0], row[1]], *degrees);
                    row[0] = p[0];
                    row[1] = p[1];
                }
            }
        }
        (Transform::Rotation { degrees }, FeatureLayout::Grid8x8) => {
            for mut row in out.rows_mut() {
                let img = glyphs::rotate(row.as_slice().expect("row-major batch"), *degrees);
                row.assign(&ndarray::Array1::from(img));
            }
        }
        (Transform::Blur { sigma }, FeatureLayout::Grid8x8) => {
            if !(sigma.is_finite() && *sigma >= 0.0) {
                return Err(Error::Validation(format!("blur sigma must be >= 0, got {sigma}")));
            }
            for mut row in out.rows_mut() {
                let img = glyphs::blur(row.as_slice().expect("row-major batch"), *sigma);
                row.assign(&ndarray::Array1::from(img));
            }
        }
        (Transform::Blur { .. }, FeatureLayout::Points2) => {
            return Err(Error::Unsupported("blur is defined on 8x8 grids only".into()))
        }
        (Transform::Style { .. }, _) => {
            return Err(Error::Unsupported(
                "styles are generation-time properties and cannot be applied to a batch".into(),
            ))
        }
    }
    Ok(out)
}

/// Apply a shift transform to an existing batch. Labels are never altered.
pub fn apply_transform(batch: &LabeledBatch, transform: &Transform) -> Result<LabeledBatch> {
    let features = apply_transform_features(&batch.features, transform)?;
    Ok(batch.with_features(features))
}

/// Sample from the mixture `sum_i alpha_i e_i`.
///
/// Component choices use one uniform per row and each source contributes
/// rows from its own seeded pool, so two calls with the same seed and
/// different `alpha` share their randomness (common random numbers).
pub fn mixture_sample(
    envs: &EnvironmentSet,
    alpha: &SimplexWeights,
    n: usize,
    seed: u64,
) -> Result<LabeledBatch> {
    if alpha.len() != envs.num_sources() {
        return Err(Error::Validation(format!(
            "mixture weights have length {} but there are {} sources",
            alpha.len(),
            envs.num_sources()
        )));
    }
    alpha.validate()?;
    if n == 0 {
        return Err(Error::Validation("sample size must be >= 1".into()));
    }
    let mut rng = rng::rng_for(seed, &[0x6d6978]);
    let cumulative: Vec<f64> = alpha
        .as_slice()
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a;
            Some(*acc)
        })
        .collect();
    let weights = alpha.as_slice();
    let last_positive = weights.iter().rposition(|&a| a > 0.0).unwrap_or(0);
    let components: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            (0..weights.len())
                .find(|&c| weights[c] > 0.0 && u < cumulative[c])
                .unwrap_or(last_positive)
        })
        .collect();

    let mut pools = Vec::with_capacity(envs.num_sources());
    for (i, env) in envs.sources.iter().enumerate() {
        let count = components.iter().filter(|&&c| c == i).count();
        pools.push(if count > 0 {
            Some(sample_environment(env, n, rng::derive(seed, &[0x706f_6f6c, i as u64]))?)
        } else {
            None
        });
    }
    let dim = envs.task().dim();
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    let mut env_ids = Vec::with_capacity(n);
    let mut cursor = vec![0usize; envs.num_sources()];
    for (row, &c) in components.iter().enumerate() {
        let pool = pools[c].as_ref().expect("pool drawn for every used component");
        let k = cursor[c];
        cursor[c] += 1;
        features.row_mut(row).assign(&pool.features.row(k));
        labels.push(pool.labels[k]);
        env_ids.push(pool.env_ids[k].clone());
    }
    LabeledBatch::new(features, labels, env_ids)
}

/// Ground-truth labeling function of one environment.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    env: EnvSpec,
    templates: Vec<(usize, Vec<f64>)>,
}

impl GroundTruth {
    pub fn new(env: &EnvSpec) -> Result<Self> {
        env.validate()?;
        let templates = match env.task.family {
            TaskFamily::Glyphs8x8 => {
                let style = glyph_style(env)?;
                (0..env.task.num_classes)
                    .flat_map(|class| Latent::all().map(move |l| (class, l)))
                    .map(|(class, l)| (class, glyph_post(env, glyphs::render(class, &style, l))))
                    .collect()
            }
            _ => Vec::new(),
        };
        Ok(GroundTruth {
            env: env.clone(),
            templates,
        })
    }

    pub fn env(&self) -> &EnvSpec {
        &self.env
    }

    pub fn label(&self, x: ArrayView1<f64>) -> Result<usize> {
        let dim = self.env.task.dim();
        if x.len() != dim {
            return Err(Error::Validation(format!(
                "feature vector has dim {} but env '{}' expects {dim}",
                x.len(),
                self.env.env_id
            )));
        }
        let task = &self.env.task;
        let label = match task.family {
            TaskFamily::TwoMoons | TaskFamily::GaussBlobs => {
                let degrees = match self.env.transform {
                    Transform::Rotation { degrees } => degrees,
                    _ => 0.0,
                };
                let p = rotate_point([x[0], x[1]], -degrees);
                if task.family == TaskFamily::TwoMoons {
                    moon_label(p)
                } else {
                    let offset = match &self.env.transform {
                        Transform::Style { style_id } => blob_offset(style_id)?,
                        _ => [0.0, 0.0],
                    };
                    (0..task.num_classes)
                        .map(|k| {
                            let m = blob_mean(k, task.num_classes, offset);
                            (k, (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2))
                        })
                        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
                        .0
                }
            }
            TaskFamily::Glyphs8x8 => {
                self.templates
                    .iter()
                    .map(|(class, t)| {
                        let d: f64 = t.iter().zip(x.iter()).map(|(a, b)| (a - b).powi(2)).sum();
                        (*class, d)
                    })
                    .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
                    .0
            }
        };
        Ok(label)
    }

    pub fn label_batch(&self, features: &Array2<f64>) -> Result<Vec<usize>> {
        features.rows().into_iter().map(|r| self.label(r)).collect()
    }
}

/// One-off ground-truth query; builds the labeler each call.
pub fn ground_truth_label(env: &EnvSpec, x: ArrayView1<f64>) -> Result<usize> {
    GroundTruth::new(env)?.label(x)
}
