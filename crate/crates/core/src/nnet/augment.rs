use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::envsim::{glyphs, FeatureLayout, LabeledBatch};
use crate::error::{Error, Result};
use crate::rng;

/// Random crop with zero padding and horizontal flips for 8x8 grids;
/// Gaussian jitter for 2-dim points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AugmentPolicy {
    pub random_crop_pad: usize,
    pub hflip_prob: f64,
    pub jitter_std: f64,
}

impl AugmentPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return Err(Error::Validation(format!(
                "hflip_prob must lie in [0, 1], got {}",
                self.hflip_prob
            )));
        }
        if !(self.jitter_std.is_finite() && self.jitter_std >= 0.0) {
            return Err(Error::Validation("jitter_std must be >= 0".into()));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.random_crop_pad == 0 && self.hflip_prob == 0.0 && self.jitter_std == 0.0
    }
}

pub fn augment(data: &LabeledBatch, policy: &AugmentPolicy, seed: u64) -> Result<LabeledBatch> {
    policy.validate()?;
    if policy.is_identity() {
        return Ok(data.clone());
    }
    let layout = FeatureLayout::of_dim(data.dim());
    let mut rng = rng::rng_for(seed, &[0x6175_676d]);
    let mut features = data.features.clone();
    match layout {
        Some(FeatureLayout::Points2) => {
            if policy.random_crop_pad > 0 || policy.hflip_prob > 0.0 {
                return Err(Error::Unsupported(
                    "crop and flip need 8x8 grids; 2-dim tasks support jitter only".into(),
                ));
            }
            let noise = Normal::new(0.0, policy.jitter_std).expect("validated std");
            features.mapv_inplace(|v| v + noise.sample(&mut rng));
        }
        Some(FeatureLayout::Grid8x8) => {
            if policy.jitter_std > 0.0 {
                return Err(Error::Unsupported("jitter applies to 2-dim tasks only".into()));
            }
            let pad = policy.random_crop_pad as i64;
            for mut row in features.rows_mut() {
                let mut img: Vec<f64> = row.to_vec();
                if pad > 0 {
                    let dx = rng.random_range(-pad..=pad);
                    let dy = rng.random_range(-pad..=pad);
                    img = glyphs::shift(&img, dx, dy);
                }
                if policy.hflip_prob > 0.0 && rng.random::<f64>() < policy.hflip_prob {
                    glyphs::hflip(&mut img);
                }
                for (dst, v) in row.iter_mut().zip(img) {
                    *dst = v.clamp(0.0, 1.0);
                }
            }
        }
        None => {
            return Err(Error::Unsupported(format!(
                "no augmentations defined for {}-dim features",
                data.dim()
            )))
        }
    }
    Ok(data.with_features(features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envsim::{sample_environment, EnvSpec, TaskSpec, Transform};

    fn glyph_batch() -> LabeledBatch {
        let env = EnvSpec::new("g", TaskSpec::glyphs(10, 0.1), Transform::Style { style_id: "plain".into() });
        sample_environment(&env, 40, 4).unwrap()
    }

    #[test]
    fn zero_policy_is_identity() {
        let b = glyph_batch();
        assert_eq!(augment(&b, &AugmentPolicy::default(), 1).unwrap(), b);
    }

    #[test]
    fn double_flip_is_identity() {
        let b = glyph_batch();
        let p = AugmentPolicy { hflip_prob: 1.0, ..Default::default() };
        let once = augment(&b, &p, 1).unwrap();
        assert_ne!(once, b);
        assert_eq!(augment(&once, &p, 2).unwrap(), b);
    }

    #[test]
    fn crop_keeps_range_and_labels() {
        let b = glyph_batch();
        let p = AugmentPolicy { random_crop_pad: 2, hflip_prob: 0.5, ..Default::default() };
        let out = augment(&b, &p, 3).unwrap();
        assert_eq!(out.labels, b.labels);
        assert!(out.features.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(out, augment(&b, &p, 3).unwrap());
    }

    #[test]
    fn crop_on_points_is_unsupported() {
        let env = EnvSpec::rotated("m", TaskSpec::two_moons(0.1), 0.0);
        let b = sample_environment(&env, 10, 0).unwrap();
        let p = AugmentPolicy { random_crop_pad: 1, ..Default::default() };
        assert!(matches!(augment(&b, &p, 0), Err(Error::Unsupported(_))));
        let f = AugmentPolicy { hflip_prob: 0.5, ..Default::default() };
        assert!(matches!(augment(&b, &f, 0), Err(Error::Unsupported(_))));
    }
}
