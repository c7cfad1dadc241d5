//! Bidirectional decoupled contrastive reward and its combination with the
//! discriminator score.
//!
//! For a candidate caption `x_c` of image `i_c` with similarity `s = f(x_c)·f(i_c)`:
//!
//! ```text
//! r_i2t = s − τ·LSE_{x ∈ T∖x_c}( f(x)·f(i_c) / τ )
//! r_t2i = s − τ·LSE_{i ∈ I∖i_c}( f(x_c)·f(i) / τ )
//! r     = α·(r_i2t + r_t2i) + (1 − α)·p_D(x_c)
//! ```
//!
//! The positive pair is excluded from both denominators, so each term is the
//! margin of the positive over a soft maximum of the negatives; as τ → 0 the
//! soft maximum becomes the hardest negative.

use crate::error::{LabError, Result};
use crate::retriever::EmbeddingVector;
use crate::synthworld::Provenance;

pub const DEFAULT_ALPHA: f64 = 0.94;
pub const DEFAULT_TAU: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardConfig {
    pub alpha: f64,
    pub tau: f64,
    pub unidirectional: bool,
    pub scst_greedy_only: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
            unidirectional: false,
            scst_greedy_only: false,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_tau(self.tau)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(LabError::OutOfRange(format!("temperature {tau} must be positive")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LabError::OutOfRange(format!("alpha {alpha} not in [0,1]")));
    }
    Ok(())
}

/// `τ·LSE(s/τ)`, computed as `max + τ·ln Σ exp((s − max)/τ)`.
pub fn soft_max(similarities: &[f64], tau: f64) -> f64 {
    let max = similarities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = similarities.iter().map(|s| ((s - max) / tau).exp()).sum();
    max + tau * sum.ln()
}

/// Decoupled margin `positive − τ·LSE(negatives/τ)`; returns `(reward, baseline)`.
pub fn contrastive_margin(positive: f64, negatives: &[f64], tau: f64) -> Result<(f64, f64)> {
    check_tau(tau)?;
    if negatives.is_empty() {
        return Err(LabError::Empty("contrastive reward needs at least one negative".into()));
    }
    let baseline = soft_max(negatives, tau);
    let reward = positive - baseline;
    if !reward.is_finite() {
        return Err(LabError::NonFinite(format!("contrastive reward {reward}")));
    }
    Ok((reward, baseline))
}

/// Coupled form with the positive kept in the denominator (always ≤ 0).
pub fn coupled_margin(positive: f64, negatives: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let mut all = negatives.to_vec();
    all.push(positive);
    Ok(positive - soft_max(&all, tau))
}

/// `τ·LSE(s/τ) − max(s)`; lies in `[0, τ·ln n]`.
pub fn lse_max_gap(similarities: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if similarities.is_empty() {
        return Err(LabError::Empty("lse_max_gap of an empty set".into()));
    }
    let max = similarities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((soft_max(similarities, tau) - max).max(0.0))
}

/// Image-to-text term: `text_pool[candidate]` is the positive caption and is
/// excluded from the denominator.
pub fn reward_i2t(
    candidate: usize,
    own_image: &EmbeddingVector,
    text_pool: &[EmbeddingVector],
    tau: f64,
) -> Result<(f64, f64)> {
    if candidate >= text_pool.len() {
        return Err(LabError::OutOfRange(format!("candidate {candidate} not in text pool")));
    }
    let positive = text_pool[candidate].dot(own_image);
    let negatives: Vec<f64> = text_pool
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != candidate)
        .map(|(_, x)| x.dot(own_image))
        .collect();
    contrastive_margin(positive, &negatives, tau)
}

/// Text-to-image term: `image_pool[own_image]` is the positive image and is
/// excluded from the denominator.
pub fn reward_t2i(
    candidate: &EmbeddingVector,
    own_image: usize,
    image_pool: &[EmbeddingVector],
    tau: f64,
) -> Result<(f64, f64)> {
    if own_image >= image_pool.len() {
        return Err(LabError::OutOfRange(format!("image {own_image} not in image pool")));
    }
    let positive = candidate.dot(&image_pool[own_image]);
    let negatives: Vec<f64> = image_pool
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != own_image)
        .map(|(_, x)| candidate.dot(x))
        .collect();
    contrastive_margin(positive, &negatives, tau)
}

/// `α·r_sim + (1 − α)·p_D`.
pub fn combined_reward(r_sim: f64, p_d: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(p_d > 0.0 && p_d < 1.0) {
        return Err(LabError::OutOfRange(format!("discriminator probability {p_d} not in (0,1)")));
    }
    Ok(alpha * r_sim + (1.0 - alpha) * p_d)
}

/// The three captions of one batch item, in pool order.
#[derive(Clone, Debug)]
pub struct PoolItem {
    pub scene_id: usize,
    pub beam: EmbeddingVector,
    pub greedy: EmbeddingVector,
    pub ground_truth: EmbeddingVector,
}

#[derive(Clone, Debug)]
pub struct PoolText {
    pub item: usize,
    pub provenance: Provenance,
    pub embedding: EmbeddingVector,
}

#[derive(Clone, Debug)]
pub struct PoolImage {
    pub scene_id: usize,
    pub embedding: EmbeddingVector,
}

/// Batch-level negative pools: three captions per item and the batch images
/// plus their mined neighbors, deduplicated by scene id.
#[derive(Clone, Debug)]
pub struct NegativePools {
    pub texts: Vec<PoolText>,
    pub images: Vec<PoolImage>,
    /// Index into `images` of each item's own scene.
    pub own_image: Vec<usize>,
}

const TEXT_ORDER: [Provenance; 3] = [Provenance::Beam, Provenance::Greedy, Provenance::GroundTruth];

impl NegativePools {
    /// `image_embeddings` is the precomputed cache indexed by scene id.
    pub fn assemble(items: &[PoolItem], neighbor_lists: &[Vec<usize>], image_embeddings: &[EmbeddingVector]) -> Result<Self> {
        if items.is_empty() {
            return Err(LabError::Empty("reward pools need at least one batch item".into()));
        }
        let mut texts = Vec::with_capacity(3 * items.len());
        for (i, item) in items.iter().enumerate() {
            for (provenance, embedding) in TEXT_ORDER.iter().zip([&item.beam, &item.greedy, &item.ground_truth]) {
                texts.push(PoolText {
                    item: i,
                    provenance: *provenance,
                    embedding: embedding.clone(),
                });
            }
        }
        let mut images: Vec<PoolImage> = Vec::new();
        let mut seen = std::collections::HashMap::new();
        let mut push = |id: usize, images: &mut Vec<PoolImage>| -> Result<usize> {
            if let Some(&idx) = seen.get(&id) {
                return Ok(idx);
            }
            let embedding = image_embeddings
                .get(id)
                .ok_or_else(|| LabError::Missing(format!("no cached embedding for scene {id}")))?
                .clone();
            images.push(PoolImage { scene_id: id, embedding });
            seen.insert(id, images.len() - 1);
            Ok(images.len() - 1)
        };
        let mut own_image = Vec::with_capacity(items.len());
        for item in items {
            own_image.push(push(item.scene_id, &mut images)?);
        }
        for item in items {
            let neighbors = neighbor_lists
                .get(item.scene_id)
                .ok_or_else(|| LabError::Missing(format!("no neighbor list for scene {}", item.scene_id)))?;
            for &n in neighbors {
                push(n, &mut images)?;
            }
        }
        Ok(Self {
            texts,
            images,
            own_image,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.own_image.len()
    }

    pub fn text_index(&self, item: usize, provenance: Provenance) -> usize {
        3 * item + TEXT_ORDER.iter().position(|p| *p == provenance).expect("known provenance")
    }

    pub fn text_embeddings(&self) -> Vec<EmbeddingVector> {
        self.texts.iter().map(|t| t.embedding.clone()).collect()
    }

    pub fn image_embeddings(&self) -> Vec<EmbeddingVector> {
        self.images.iter().map(|i| i.embedding.clone()).collect()
    }
}

/// Per-caption reward record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardBreakdown {
    pub r_i2t: f64,
    pub r_t2i: f64,
    pub r_bicont: f64,
    pub p_d: f64,
    pub combined: f64,
    /// Soft-max term of `r_i2t`.
    pub effective_text_baseline: f64,
    /// Soft-max term of `r_t2i`; 0 when the image direction is disabled.
    pub effective_image_baseline: f64,
}

impl RewardBreakdown {
    pub fn with_discriminator(mut self, p_d: f64, alpha: f64) -> Result<Self> {
        self.p_d = p_d;
        self.combined = combined_reward(self.r_bicont, p_d, alpha)?;
        Ok(self)
    }
}

/// Contrastive part of the reward for one candidate; `p_d` and `combined`
/// are left at NaN until [`RewardBreakdown::with_discriminator`].
pub fn bidirectional_reward(
    item: usize,
    provenance: Provenance,
    pools: &NegativePools,
    config: &RewardConfig,
) -> Result<RewardBreakdown> {
    config.validate()?;
    if item >= pools.batch_size() {
        return Err(LabError::OutOfRange(format!("item {item} not in batch")));
    }
    let candidate_index = pools.text_index(item, provenance);
    let candidate = &pools.texts[candidate_index].embedding;
    let own_index = pools.own_image[item];
    let own = &pools.images[own_index].embedding;

    let (r_i2t, text_baseline) = if config.scst_greedy_only {
        let greedy = &pools.texts[pools.text_index(item, Provenance::Greedy)].embedding;
        contrastive_margin(candidate.dot(own), &[greedy.dot(own)], config.tau)?
    } else {
        reward_i2t(candidate_index, own, &pools.text_embeddings(), config.tau)?
    };
    let (r_t2i, image_baseline) = if config.unidirectional {
        (0.0, 0.0)
    } else {
        reward_t2i(candidate, own_index, &pools.image_embeddings(), config.tau)?
    };
    Ok(RewardBreakdown {
        r_i2t,
        r_t2i,
        r_bicont: r_i2t + r_t2i,
        p_d: f64::NAN,
        combined: f64::NAN,
        effective_text_baseline: text_baseline,
        effective_image_baseline: image_baseline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_negative_gives_exact_zero() {
        for tau in [0.01, 0.05, 1.0, 7.0] {
            assert_eq!(contrastive_margin(0.37, &[0.37], tau).unwrap().0, 0.0);
        }
    }

    #[test]
    fn combined_reward_arithmetic() {
        assert_eq!(combined_reward(0.5, 0.8, 1.0).unwrap(), 0.5);
        assert_eq!(combined_reward(0.5, 0.8, 0.0).unwrap(), 0.8);
        assert!((combined_reward(0.5, 0.8, 0.94).unwrap() - 0.518).abs() < 1e-12);
        assert!(combined_reward(0.5, 0.8, 1.1).is_err());
        assert!(combined_reward(0.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn errors_on_bad_inputs() {
        assert!(contrastive_margin(0.1, &[], 0.1).is_err());
        assert!(contrastive_margin(0.1, &[0.0], 0.0).is_err());
        assert!(lse_max_gap(&[], 0.1).is_err());
        assert_eq!(lse_max_gap(&[0.3], 0.2).unwrap(), 0.0);
    }
}
