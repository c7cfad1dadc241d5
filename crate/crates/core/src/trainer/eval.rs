//! Test-split evaluation: retrieval, writing quality, diversity and the
//! detectability probe.

use rayon::prelude::*;

use crate::discriminator::{self, DiscriminatorParams, FitSchedule};
use crate::error::{LabError, Result};
use crate::policy::{self, PolicyParameters};
use crate::retriever::{self, EmbeddingVector, RetrieverParams};
use crate::synthworld::{Caption, Token, WorldDataset};
use crate::textmetrics::{self, CorpusStats};

/// Column names in report order. The first ten mirror the usual captioning
/// table; the last three are diagnostics of degenerate text.
pub const METRIC_NAMES: [&str; 13] = [
    "t2i_r1",
    "t2i_r5",
    "t2i_r10",
    "i2t_r1",
    "i2t_r5",
    "i2t_r10",
    "bleu4",
    "rouge_l",
    "cider",
    "self_bleu",
    "repeat_rate",
    "mean_len",
    "mean_p_d",
];

/// Percentages except `mean_len` (tokens) and `mean_p_d` (probability).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics(pub [f64; 13]);

impl Metrics {
    pub fn get(&self, name: &str) -> Option<f64> {
        METRIC_NAMES.iter().position(|n| *n == name).map(|i| self.0[i])
    }

    pub fn t2i_r1(&self) -> f64 {
        self.0[0]
    }

    pub fn cider(&self) -> f64 {
        self.0[8]
    }

    pub fn self_bleu(&self) -> f64 {
        self.0[9]
    }

    pub fn repeat_rate(&self) -> f64 {
        self.0[10]
    }
}

/// Fraction of caption words that repeat an earlier word of the same caption.
pub fn repeated_token_rate(captions: &[Vec<Token>]) -> f64 {
    let (mut repeats, mut total) = (0usize, 0usize);
    for c in captions {
        for (i, t) in c.iter().enumerate() {
            total += 1;
            if c[..i].contains(t) {
                repeats += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        repeats as f64 / total as f64
    }
}

/// Beam-decodes every scene in `ids`.
pub fn decode_scenes(
    ids: &[usize],
    dataset: &WorldDataset,
    policy: &PolicyParameters,
    beam_size: usize,
    max_len: usize,
) -> Result<Vec<Caption>> {
    ids.par_iter()
        .map(|&id| policy::beam_search(&dataset.scenes[id], policy, beam_size, max_len).map(|d| d.caption))
        .collect()
}

pub fn embed_captions(captions: &[Caption], retriever: &RetrieverParams) -> Result<Vec<EmbeddingVector>> {
    captions.par_iter().map(|c| retriever::embed_text(c, retriever)).collect()
}

/// All metrics of `captions[i]` as the caption of scene `ids[i]`.
pub fn evaluate_captions(
    ids: &[usize],
    captions: &[Caption],
    dataset: &WorldDataset,
    retriever: &RetrieverParams,
    disc: &DiscriminatorParams,
) -> Result<Metrics> {
    if ids.len() != captions.len() || ids.len() < 2 {
        return Err(LabError::InvalidConfig("evaluation needs one caption per scene and at least two scenes".into()));
    }
    let texts = embed_captions(captions, retriever)?;
    let images: Vec<EmbeddingVector> = ids
        .iter()
        .map(|&id| dataset.scenes[id].embedding().cloned())
        .collect::<Result<_>>()?;
    let pairing: Vec<usize> = (0..ids.len()).collect();
    let t2i = retriever::similarity_matrix(&texts, &images)?;
    let i2t = retriever::similarity_matrix(&images, &texts)?;
    let recall = |sims: &[Vec<f64>], k: usize| -> Result<f64> {
        Ok(100.0 * retriever::recall_at_k_from_matrix(sims, &pairing, k.min(ids.len()))?)
    };

    let cands: Vec<Vec<Token>> = captions.iter().map(Caption::content).collect();
    let refs: Vec<Vec<Token>> = ids.iter().map(|&id| dataset.gt_captions[id].content()).collect();
    let ref_sets: Vec<Vec<&[Token]>> = refs.iter().map(|r| vec![r.as_slice()]).collect();
    let cand_slices: Vec<&[Token]> = cands.iter().map(Vec::as_slice).collect();
    let corpus = CorpusStats::from_reference_sets(&ref_sets)?;

    let bleu = textmetrics::corpus_bleu4(&cand_slices, &ref_sets)?;
    let mut rouge = 0.0;
    let mut cider = 0.0;
    for (c, r) in cands.iter().zip(&refs) {
        rouge += textmetrics::rouge_l(c, r)?;
        cider += textmetrics::cider(c, &[r.as_slice()], &corpus)?;
    }
    let n = ids.len() as f64;
    let self_bleu = textmetrics::self_bleu(&cand_slices)?;
    let mean_len = cands.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mean_p_d = texts
        .iter()
        .map(|t| discriminator::discriminate(t, disc))
        .sum::<Result<f64>>()?
        / n;

    Ok(Metrics([
        recall(&t2i, 1)?,
        recall(&t2i, 5)?,
        recall(&t2i, 10)?,
        recall(&i2t, 1)?,
        recall(&i2t, 5)?,
        recall(&i2t, 10)?,
        100.0 * bleu,
        100.0 * rouge / n,
        100.0 * cider / n,
        100.0 * self_bleu,
        100.0 * repeated_token_rate(&cands),
        mean_len,
        mean_p_d,
    ]))
}

/// Decodes the test split with the training beam size and scores it.
pub fn evaluate(
    dataset: &WorldDataset,
    retriever: &RetrieverParams,
    policy: &PolicyParameters,
    disc: &DiscriminatorParams,
    beam_size: usize,
    max_len: usize,
) -> Result<Metrics> {
    let captions = decode_scenes(&dataset.test_ids, dataset, policy, beam_size, max_len)?;
    evaluate_captions(&dataset.test_ids, &captions, dataset, retriever, disc)
}

/// Held-out balanced accuracy of a freshly initialized discriminator trained
/// to separate ground truth from the policy's beam outputs. Trained on the
/// train split, measured on the test split.
#[allow(clippy::too_many_arguments)]
pub fn detectability(
    dataset: &WorldDataset,
    retriever: &RetrieverParams,
    policy: &PolicyParameters,
    width: usize,
    schedule: &FitSchedule,
    beam_size: usize,
    max_len: usize,
) -> Result<f64> {
    let embed_split = |ids: &[usize]| -> Result<(Vec<EmbeddingVector>, Vec<EmbeddingVector>)> {
        let gt: Vec<Caption> = ids.iter().map(|&id| dataset.gt_captions[id].clone()).collect();
        let generated = decode_scenes(ids, dataset, policy, beam_size, max_len)?;
        Ok((embed_captions(&gt, retriever)?, embed_captions(&generated, retriever)?))
    };
    let (train_real, train_fake) = embed_split(&dataset.train_ids)?;
    let (test_real, test_fake) = embed_split(&dataset.test_ids)?;
    let mut probe = DiscriminatorParams::init(retriever.dim(), width, schedule.seed)?;
    discriminator::fit(&mut probe, &train_real, &train_fake, schedule)?;
    discriminator::balanced_accuracy(&probe, &test_real, &test_fake)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeat_rate_counts_later_copies() {
        assert_eq!(repeated_token_rate(&[vec![1, 2, 3]]), 0.0);
        assert_eq!(repeated_token_rate(&[vec![1, 1, 1, 2]]), 0.5);
        assert_eq!(repeated_token_rate(&[]), 0.0);
    }
}
