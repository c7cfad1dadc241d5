//! Reference-based writing-quality metrics and Self-BLEU diversity.
//!
//! All metrics work on token slices of any hashable type, so they run on the
//! world's token ids as well as on plain words.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hash};

use crate::error::{LabError, Result};

pub const MAX_ORDER: usize = 4;
const SMOOTHING_EPSILON: f64 = 1e-9;
const ROUGE_BETA: f64 = 1.2;

/// Fixed-key hasher: float sums over these maps must not depend on the process.
pub type GramMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;

/// N-gram multisets of orders 1..=4 of one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct NgramProfile<T: Eq + Hash> {
    pub len: usize,
    pub counts: [GramMap<Vec<T>, usize>; MAX_ORDER],
}

impl<T: Eq + Hash + Clone> NgramProfile<T> {
    pub fn new(tokens: &[T]) -> Self {
        let counts = std::array::from_fn(|k| {
            let n = k + 1;
            let mut m = GramMap::default();
            if tokens.len() >= n {
                for w in tokens.windows(n) {
                    *m.entry(w.to_vec()).or_insert(0) += 1;
                }
            }
            m
        });
        Self {
            len: tokens.len(),
            counts,
        }
    }

    /// Number of n-grams of order `n`.
    pub fn total(&self, n: usize) -> usize {
        self.counts[n - 1].values().sum()
    }
}

/// Clipped n-gram matches and totals for orders 1..=4.
fn clipped_counts<T: Eq + Hash + Clone>(candidate: &NgramProfile<T>, references: &[NgramProfile<T>]) -> [(usize, usize); MAX_ORDER] {
    std::array::from_fn(|k| {
        let matched = candidate.counts[k]
            .iter()
            .map(|(g, &c)| {
                let max_ref = references.iter().map(|r| r.counts[k].get(g).copied().unwrap_or(0)).max().unwrap_or(0);
                c.min(max_ref)
            })
            .sum();
        (matched, candidate.total(k + 1))
    })
}

/// Length of the reference closest to `c`; ties go to the shorter one.
fn closest_ref_len(c: usize, ref_lens: impl Iterator<Item = usize>) -> usize {
    ref_lens
        .min_by_key(|&r| ((r as isize - c as isize).abs(), r))
        .unwrap_or(0)
}

fn bleu_from_counts(counts: &[(usize, usize); MAX_ORDER], cand_len: usize, ref_len: usize, smooth: bool) -> f64 {
    let mut log_sum = 0.0;
    for &(matched, total) in counts {
        let mut p = if total == 0 { 0.0 } else { matched as f64 / total as f64 };
        if smooth {
            p += SMOOTHING_EPSILON;
        }
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let bp = if cand_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).min(0.0).exp()
    };
    bp * (log_sum / MAX_ORDER as f64).exp()
}

/// Sentence BLEU-4: geometric mean of clipped precisions times the brevity
/// penalty against the closest reference length. Unsmoothed unless `smooth`.
pub fn bleu4_with<T: Eq + Hash + Clone>(candidate: &[T], references: &[&[T]], smooth: bool) -> Result<f64> {
    if candidate.is_empty() {
        return Err(LabError::Empty("BLEU candidate".into()));
    }
    if references.is_empty() {
        return Err(LabError::Empty("BLEU needs at least one reference".into()));
    }
    let cand = NgramProfile::new(candidate);
    let refs: Vec<_> = references.iter().map(|r| NgramProfile::new(r)).collect();
    let counts = clipped_counts(&cand, &refs);
    let r = closest_ref_len(candidate.len(), references.iter().map(|r| r.len()));
    Ok(bleu_from_counts(&counts, candidate.len(), r, smooth))
}

pub fn bleu4<T: Eq + Hash + Clone>(candidate: &[T], references: &[&[T]]) -> Result<f64> {
    bleu4_with(candidate, references, false)
}

/// Corpus BLEU-4: clipped counts and lengths summed over the corpus before
/// taking precisions and the brevity penalty.
pub fn corpus_bleu4<T: Eq + Hash + Clone>(candidates: &[&[T]], references: &[Vec<&[T]>]) -> Result<f64> {
    if candidates.is_empty() || candidates.len() != references.len() {
        return Err(LabError::InvalidConfig("corpus BLEU needs one reference set per candidate".into()));
    }
    let mut totals = [(0usize, 0usize); MAX_ORDER];
    let (mut c_len, mut r_len) = (0, 0);
    for (cand, refs) in candidates.iter().zip(references) {
        if refs.is_empty() {
            return Err(LabError::Empty("BLEU needs at least one reference".into()));
        }
        let cp = NgramProfile::new(cand);
        let rps: Vec<_> = refs.iter().map(|r| NgramProfile::new(r)).collect();
        for (t, c) in totals.iter_mut().zip(clipped_counts(&cp, &rps)) {
            t.0 += c.0;
            t.1 += c.1;
        }
        c_len += cand.len();
        r_len += closest_ref_len(cand.len(), refs.iter().map(|r| r.len()));
    }
    Ok(bleu_from_counts(&totals, c_len, r_len, false))
}

/// Longest common subsequence length by dynamic programming.
pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure with recall weighted by β = 1.2.
pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> Result<f64> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(LabError::Empty("ROUGE-L needs non-empty sequences".into()));
    }
    let lcs = lcs_len(candidate, reference) as f64;
    if lcs == 0.0 {
        return Ok(0.0);
    }
    let p = lcs / candidate.len() as f64;
    let r = lcs / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    Ok((1.0 + b2) * p * r / (r + b2 * p))
}

/// Document frequencies of every n-gram over a reference corpus.
#[derive(Clone, Debug)]
pub struct CorpusStats<T: Eq + Hash> {
    pub documents: usize,
    pub document_frequency: [GramMap<Vec<T>, usize>; MAX_ORDER],
}

impl<T: Eq + Hash + Clone> CorpusStats<T> {
    /// One document per reference set (an image's references count once).
    pub fn from_reference_sets(sets: &[Vec<&[T]>]) -> Result<Self> {
        if sets.is_empty() {
            return Err(LabError::Empty("CIDEr corpus".into()));
        }
        let mut document_frequency: [GramMap<Vec<T>, usize>; MAX_ORDER] = Default::default();
        for set in sets {
            for (k, df) in document_frequency.iter_mut().enumerate() {
                let mut seen = std::collections::HashSet::new();
                for r in set {
                    for g in NgramProfile::new(r).counts[k].keys() {
                        seen.insert(g.clone());
                    }
                }
                for g in seen {
                    *df.entry(g).or_insert(0) += 1;
                }
            }
        }
        Ok(Self {
            documents: sets.len(),
            document_frequency,
        })
    }

    /// `ln(N / max(1, df))`; unseen n-grams get the full `ln N`.
    pub fn idf(&self, n: usize, gram: &[T]) -> f64 {
        let df = self.document_frequency[n - 1].get(gram).copied().unwrap_or(0).max(1);
        (self.documents as f64 / df as f64).ln()
    }

    fn tfidf(&self, profile: &NgramProfile<T>, k: usize) -> GramMap<Vec<T>, f64> {
        profile.counts[k]
            .iter()
            .map(|(g, &c)| (g.clone(), c as f64 * self.idf(k + 1, g)))
            .collect()
    }
}

fn cosine<T: Eq + Hash>(a: &GramMap<Vec<T>, f64>, b: &GramMap<Vec<T>, f64>) -> f64 {
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().map(|(g, v)| v * b.get(g).copied().unwrap_or(0.0)).sum();
    dot / (na * nb)
}

/// CIDEr: mean over orders 1..=4 of `10 ×` the average tf-idf cosine between
/// the candidate and each reference.
pub fn cider<T: Eq + Hash + Clone>(candidate: &[T], references: &[&[T]], corpus: &CorpusStats<T>) -> Result<f64> {
    if references.is_empty() {
        return Err(LabError::Empty("CIDEr needs at least one reference".into()));
    }
    if corpus.documents == 0 {
        return Err(LabError::Empty("CIDEr corpus".into()));
    }
    let cand = NgramProfile::new(candidate);
    let refs: Vec<_> = references.iter().map(|r| NgramProfile::new(r)).collect();
    let mut score = 0.0;
    for k in 0..MAX_ORDER {
        let cv = corpus.tfidf(&cand, k);
        let mean_cos: f64 = refs.iter().map(|r| cosine(&cv, &corpus.tfidf(r, k))).sum::<f64>() / refs.len() as f64;
        score += 10.0 * mean_cos;
    }
    Ok(score / MAX_ORDER as f64)
}

/// Mean BLEU-4 of each caption against all the others.
pub fn self_bleu_with<T: Eq + Hash + Clone>(captions: &[&[T]], smooth: bool) -> Result<f64> {
    if captions.len() < 2 {
        return Err(LabError::Empty("Self-BLEU needs at least two captions".into()));
    }
    let mut total = 0.0;
    for (i, c) in captions.iter().enumerate() {
        let others: Vec<&[T]> = captions
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, o)| *o)
            .collect();
        total += bleu4_with(c, &others, smooth)?;
    }
    Ok(total / captions.len() as f64)
}

pub fn self_bleu<T: Eq + Hash + Clone>(captions: &[&[T]]) -> Result<f64> {
    self_bleu_with(captions, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn profile_totals() {
        let p = NgramProfile::new(&w("a b a b c"));
        assert_eq!(p.total(1), 5);
        assert_eq!(p.total(4), 2);
        assert_eq!(p.counts[0][&vec!["a"]], 2);
        assert_eq!(NgramProfile::new(&w("a b")).total(3), 0);
    }

    #[test]
    fn lcs_small_cases() {
        assert_eq!(lcs_len(&w("a b c d"), &w("a c b d")), 3);
        assert_eq!(lcs_len(&w("a b"), &w("c d")), 0);
    }

    #[test]
    fn empty_inputs_error() {
        let empty: Vec<&str> = vec![];
        assert!(bleu4(&empty, &[&w("a")[..]]).is_err());
        assert!(bleu4(&w("a"), &[]).is_err());
        assert!(rouge_l(&empty, &w("a")).is_err());
        assert!(self_bleu(&[&w("a")[..]]).is_err());
        assert!(CorpusStats::<&str>::from_reference_sets(&[]).is_err());
    }
}
