//! Frozen dual encoder standing in for a pretrained image-text retriever.
//!
//! Both towers are linear bag models: a caption embeds as the normalized sum
//! of its word rows counted with multiplicity, a scene as the normalized sum
//! of the rows of its six attribute values. Attribute words and attribute
//! values share an orthonormal base direction, perturbed independently per
//! tower, so naming more of a scene's attributes raises its similarity.
//! Word order is invisible to this encoder, and repeating a word pulls the
//! embedding toward that word.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::math;
use crate::synthworld::{
    self, Attribute, Caption, Scene, Token, NUM_ATTRIBUTES, NUM_ATTRIBUTE_VALUES, VALUES_PER_ATTRIBUTE, VOCAB_SIZE,
};

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_NOISE: f64 = 0.1;

const NORM_TOLERANCE: f64 = 1e-6;

/// Unit-norm vector of the shared retrieval space.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values`; fails on a zero or non-finite vector.
    pub fn normalized(mut values: Vec<f64>) -> Result<Self> {
        let norm = math::l2_norm(&values);
        if !norm.is_finite() {
            return Err(LabError::NonFinite("embedding norm".into()));
        }
        if norm < 1e-12 {
            return Err(LabError::Empty("cannot normalize a zero vector".into()));
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Self(values))
    }

    /// Wraps an already unit-norm vector.
    pub fn from_unit(values: Vec<f64>) -> Result<Self> {
        let norm = math::l2_norm(&values);
        if (norm - 1.0).abs() >= NORM_TOLERANCE {
            return Err(LabError::OutOfRange(format!("embedding norm {norm} is not 1")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        math::dot(&self.0, &other.0)
    }
}

impl std::ops::Neg for &EmbeddingVector {
    type Output = EmbeddingVector;

    fn neg(self) -> EmbeddingVector {
        EmbeddingVector(self.0.iter().map(|v| -v).collect())
    }
}

/// Exact dot product of two unit vectors.
pub fn similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(LabError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.dot(b))
}

/// Projection tables of both towers. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrieverParams {
    dim: usize,
    text_projection: Vec<f64>,
    image_projection: Vec<f64>,
}

impl RetrieverParams {
    /// Rebuilds params from stored tables (`|V|×d` and `A×d`, row-major).
    pub fn from_tables(dim: usize, text_projection: Vec<f64>, image_projection: Vec<f64>) -> Result<Self> {
        if text_projection.len() != VOCAB_SIZE * dim {
            return Err(LabError::DimensionMismatch {
                expected: VOCAB_SIZE * dim,
                got: text_projection.len(),
            });
        }
        if image_projection.len() != NUM_ATTRIBUTE_VALUES * dim {
            return Err(LabError::DimensionMismatch {
                expected: NUM_ATTRIBUTE_VALUES * dim,
                got: image_projection.len(),
            });
        }
        if text_projection.iter().chain(&image_projection).any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("retriever tables".into()));
        }
        Ok(Self {
            dim,
            text_projection,
            image_projection,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Always true: nothing can mutate the tables after construction.
    pub fn frozen(&self) -> bool {
        true
    }

    pub fn text_projection(&self) -> &[f64] {
        &self.text_projection
    }

    pub fn image_projection(&self) -> &[f64] {
        &self.image_projection
    }

    pub fn text_row(&self, token: Token) -> &[f64] {
        let t = token as usize;
        &self.text_projection[t * self.dim..(t + 1) * self.dim]
    }

    pub fn image_row(&self, attribute: Attribute, value: u8) -> &[f64] {
        let r = attribute.index() * VALUES_PER_ATTRIBUTE + value as usize;
        &self.image_projection[r * self.dim..(r + 1) * self.dim]
    }

    /// SHA-256 over the dimension and both tables' bit patterns.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for v in self.text_projection.iter().chain(&self.image_projection) {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Builds aligned projections: every content word gets a base direction
/// (orthonormal while `dim` allows), attribute words and the matching
/// attribute values share theirs, and each tower adds its own Gaussian noise
/// of expected norm `noise`.
pub fn build_retriever(seed: u64, dim: usize, noise: f64) -> Result<RetrieverParams> {
    if dim == 0 {
        return Err(LabError::InvalidConfig("retriever dimension must be positive".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(LabError::InvalidConfig(format!("noise amplitude {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaussian = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };

    let content_tokens: Vec<Token> = (0..VOCAB_SIZE as Token).filter(|t| synthworld::is_content_token(*t)).collect();
    let mut base: Vec<Vec<f64>> = Vec::with_capacity(content_tokens.len());
    for _ in &content_tokens {
        let mut v = gaussian(dim);
        // Gram-Schmidt against earlier directions while the space has room
        if base.len() < dim {
            for b in &base {
                let p = math::dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = math::l2_norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        base.push(v);
    }

    let scale = noise / (dim as f64).sqrt();
    let mut text_projection = vec![0.0; VOCAB_SIZE * dim];
    for (t, b) in content_tokens.iter().zip(&base) {
        let n = gaussian(dim);
        let row = &mut text_projection[*t as usize * dim..(*t as usize + 1) * dim];
        for ((r, bv), nv) in row.iter_mut().zip(b).zip(&n) {
            *r = bv + scale * nv;
        }
    }
    let mut image_projection = vec![0.0; NUM_ATTRIBUTE_VALUES * dim];
    for a in Attribute::ALL {
        for v in 0..VALUES_PER_ATTRIBUTE as u8 {
            let token = synthworld::attribute_token(a, v)?;
            let b = &base[content_tokens.iter().position(|t| *t == token).expect("attribute token is content")];
            let n = gaussian(dim);
            let r = a.index() * VALUES_PER_ATTRIBUTE + v as usize;
            for ((x, bv), nv) in image_projection[r * dim..(r + 1) * dim].iter_mut().zip(b).zip(&n) {
                *x = bv + scale * nv;
            }
        }
    }
    RetrieverParams::from_tables(dim, text_projection, image_projection)
}

/// Text tower on raw tokens: normalized sum of content-token rows, counted
/// with multiplicity. Tokens are summed in sorted order so that any
/// permutation gives a bit-identical vector.
pub fn embed_tokens(tokens: &[Token], params: &RetrieverParams) -> Result<EmbeddingVector> {
    let mut content: Vec<Token> = tokens.iter().copied().filter(|t| synthworld::is_content_token(*t)).collect();
    if let Some(t) = content.iter().find(|t| **t as usize >= VOCAB_SIZE) {
        return Err(LabError::OutOfRange(format!("token id {t} outside vocabulary")));
    }
    content.sort_unstable();
    if content.is_empty() {
        return Err(LabError::Empty("caption has no content tokens".into()));
    }
    let mut sum = vec![0.0; params.dim];
    for t in content {
        sum.iter_mut().zip(params.text_row(t)).for_each(|(s, r)| *s += r);
    }
    EmbeddingVector::normalized(sum)
}

pub fn embed_text(caption: &Caption, params: &RetrieverParams) -> Result<EmbeddingVector> {
    embed_tokens(&caption.tokens, params)
}

pub fn embed_image(scene: &Scene, params: &RetrieverParams) -> Result<EmbeddingVector> {
    let mut sum = vec![0.0; params.dim];
    for a in Attribute::ALL.iter().take(NUM_ATTRIBUTES) {
        let v = scene.value(*a);
        if v as usize >= VALUES_PER_ATTRIBUTE {
            return Err(LabError::OutOfRange(format!("scene {} {} value {v}", scene.id, a.name())));
        }
        sum.iter_mut().zip(params.image_row(*a, v)).for_each(|(s, r)| *s += r);
    }
    EmbeddingVector::normalized(sum)
}

/// `sims[q][g]` for every query/gallery pair.
pub fn similarity_matrix(queries: &[EmbeddingVector], gallery: &[EmbeddingVector]) -> Result<Vec<Vec<f64>>> {
    queries
        .iter()
        .map(|q| gallery.iter().map(|g| similarity(q, g)).collect())
        .collect()
}

/// Fraction of queries whose paired gallery item is among the top `k`;
/// ties rank the lower gallery index first.
pub fn recall_at_k_from_matrix(sims: &[Vec<f64>], pairing: &[usize], k: usize) -> Result<f64> {
    if sims.is_empty() {
        return Err(LabError::Empty("no queries".into()));
    }
    let gallery = sims[0].len();
    if k == 0 || k > gallery {
        return Err(LabError::OutOfRange(format!("k={k} for a gallery of {gallery}")));
    }
    if pairing.len() != sims.len() {
        return Err(LabError::DimensionMismatch {
            expected: sims.len(),
            got: pairing.len(),
        });
    }
    let mut seen = vec![false; gallery];
    for &p in pairing {
        if p >= gallery || std::mem::replace(&mut seen[p], true) {
            return Err(LabError::InvalidConfig("pairing must be injective into the gallery".into()));
        }
    }
    let hits = sims
        .iter()
        .zip(pairing)
        .filter(|(row, &target)| {
            let s = row[target];
            let rank = row
                .iter()
                .enumerate()
                .filter(|(j, &v)| v > s || (v == s && *j < target))
                .count();
            rank < k
        })
        .count();
    Ok(hits as f64 / sims.len() as f64)
}

pub fn recall_at_k(
    queries: &[EmbeddingVector],
    gallery: &[EmbeddingVector],
    pairing: &[usize],
    k: usize,
) -> Result<f64> {
    recall_at_k_from_matrix(&similarity_matrix(queries, gallery)?, pairing, k)
}
