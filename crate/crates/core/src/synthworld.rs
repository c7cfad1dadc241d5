//! Synthetic multimodal world.
//!
//! A scene is a tuple of six categorical attributes. Its ground-truth caption
//! always names the object and its color and mentions each remaining attribute
//! independently with a per-attribute salience probability, so with low
//! salience many scenes share the exact same caption. That is the genericity
//! the contrastive training is meant to fix.
//!
//! Token layout of the vocabulary:
//!
//! | ids      | tokens                                     |
//! |----------|--------------------------------------------|
//! | 0, 1     | `<bos>`, `<eos>`                           |
//! | 2..=6    | function words `there is a on at`          |
//! | 7..55    | attribute words, 8 per attribute, in order |

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::retriever::{self, EmbeddingVector, RetrieverParams};

pub type Token = u32;

pub const BOS: Token = 0;
pub const EOS: Token = 1;
pub const THERE: Token = 2;
pub const IS: Token = 3;
pub const A: Token = 4;
pub const ON: Token = 5;
pub const AT: Token = 6;

pub const NUM_ATTRIBUTES: usize = 6;
pub const VALUES_PER_ATTRIBUTE: usize = 8;
const FIRST_ATTRIBUTE_TOKEN: Token = 7;
pub const VOCAB_SIZE: usize = FIRST_ATTRIBUTE_TOKEN as usize + NUM_ATTRIBUTES * VALUES_PER_ATTRIBUTE;
/// Total number of attribute values across the schema.
pub const NUM_ATTRIBUTE_VALUES: usize = NUM_ATTRIBUTES * VALUES_PER_ATTRIBUTE;

const FUNCTION_WORDS: [&str; 5] = ["there", "is", "a", "on", "at"];

const ATTRIBUTE_WORDS: [[&str; VALUES_PER_ATTRIBUTE]; NUM_ATTRIBUTES] = [
    ["cube", "sphere", "cone", "cylinder", "pyramid", "torus", "ring", "star"],
    ["red", "green", "blue", "yellow", "purple", "orange", "white", "black"],
    ["tiny", "small", "medium", "large", "huge", "giant", "narrow", "wide"],
    ["grass", "sand", "snow", "water", "road", "wall", "sky", "carpet"],
    ["left", "right", "top", "bottom", "center", "corner", "edge", "front"],
    ["one", "two", "three", "four", "five", "six", "seven", "eight"],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Object = 0,
    Color = 1,
    Size = 2,
    Background = 3,
    Position = 4,
    Count = 5,
}

impl Attribute {
    pub const ALL: [Attribute; NUM_ATTRIBUTES] = [
        Attribute::Object,
        Attribute::Color,
        Attribute::Size,
        Attribute::Background,
        Attribute::Position,
        Attribute::Count,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_mandatory(self) -> bool {
        matches!(self, Attribute::Object | Attribute::Color)
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Object => "object",
            Attribute::Color => "color",
            Attribute::Size => "size",
            Attribute::Background => "background",
            Attribute::Position => "position",
            Attribute::Count => "count",
        }
    }
}

/// Token id of the word naming `value` of `attribute`.
pub fn attribute_token(attribute: Attribute, value: u8) -> Result<Token> {
    if value as usize >= VALUES_PER_ATTRIBUTE {
        return Err(LabError::OutOfRange(format!(
            "{} value {} outside vocabulary of {}",
            attribute.name(),
            value,
            VALUES_PER_ATTRIBUTE
        )));
    }
    Ok(FIRST_ATTRIBUTE_TOKEN + (attribute.index() * VALUES_PER_ATTRIBUTE) as Token + value as Token)
}

/// Inverse of [`attribute_token`]; `None` for special and function tokens.
pub fn token_attribute(token: Token) -> Option<(Attribute, u8)> {
    if token < FIRST_ATTRIBUTE_TOKEN || token as usize >= VOCAB_SIZE {
        return None;
    }
    let offset = (token - FIRST_ATTRIBUTE_TOKEN) as usize;
    Some((
        Attribute::ALL[offset / VALUES_PER_ATTRIBUTE],
        (offset % VALUES_PER_ATTRIBUTE) as u8,
    ))
}

pub fn is_content_token(token: Token) -> bool {
    token != BOS && token != EOS
}

pub fn token_word(token: Token) -> &'static str {
    match token {
        BOS => "<bos>",
        EOS => "<eos>",
        t if (t as usize) < FIRST_ATTRIBUTE_TOKEN as usize => FUNCTION_WORDS[(t - THERE) as usize],
        t => match token_attribute(t) {
            Some((attr, v)) => ATTRIBUTE_WORDS[attr.index()][v as usize],
            None => "<unk>",
        },
    }
}

/// Space-joined words of the content tokens.
pub fn detokenize(tokens: &[Token]) -> String {
    tokens
        .iter()
        .filter(|t| is_content_token(**t))
        .map(|t| token_word(*t))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    GroundTruth,
    Greedy,
    Beam,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Caption {
    pub tokens: Vec<Token>,
    pub provenance: Provenance,
    pub scene_id: usize,
}

impl Caption {
    /// Tokens with `<bos>`/`<eos>` removed.
    pub fn content(&self) -> Vec<Token> {
        self.tokens.iter().copied().filter(|t| is_content_token(*t)).collect()
    }

    pub fn text(&self) -> String {
        detokenize(&self.tokens)
    }

    /// Checks the BOS…EOS framing, the length bound and the token range.
    pub fn validate(&self, max_total_len: usize) -> Result<()> {
        let n = self.tokens.len();
        if n < 2 || self.tokens[0] != BOS || self.tokens[n - 1] != EOS {
            return Err(LabError::OutOfRange("caption must be framed by <bos> … <eos>".into()));
        }
        if n > max_total_len {
            return Err(LabError::OutOfRange(format!("caption length {n} exceeds {max_total_len}")));
        }
        if let Some(t) = self.tokens.iter().find(|t| **t as usize >= VOCAB_SIZE) {
            return Err(LabError::OutOfRange(format!("token id {t} outside vocabulary")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub id: usize,
    pub attributes: [u8; NUM_ATTRIBUTES],
    pub embedding: Option<EmbeddingVector>,
}

impl Scene {
    pub fn new(id: usize, attributes: [u8; NUM_ATTRIBUTES]) -> Self {
        Self {
            id,
            attributes,
            embedding: None,
        }
    }

    pub fn value(&self, attribute: Attribute) -> u8 {
        self.attributes[attribute.index()]
    }

    pub fn embedding(&self) -> Result<&EmbeddingVector> {
        self.embedding
            .as_ref()
            .ok_or_else(|| LabError::Missing(format!("scene {} has no embedding", self.id)))
    }
}

/// Set of attributes a caption mentions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct AttributeSet(u8);

impl AttributeSet {
    pub fn mandatory() -> Self {
        Self::default().with(Attribute::Object).with(Attribute::Color)
    }

    pub fn all() -> Self {
        Attribute::ALL.iter().fold(Self::default(), |s, a| s.with(*a))
    }

    pub fn with(self, attribute: Attribute) -> Self {
        Self(self.0 | (1 << attribute.index()))
    }

    pub fn contains(self, attribute: Attribute) -> bool {
        self.0 & (1 << attribute.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

/// Surface ordering of the optional phrases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TemplateVariant {
    /// `there is a [size] color object [on bg] [at pos]`
    BackgroundFirst,
    /// `there is a [size] color object [at pos] [on bg]`
    PositionFirst,
    /// `[at pos] there is a [size] color object [on bg]`
    PositionFronted,
}

impl TemplateVariant {
    pub const ALL: [TemplateVariant; 3] = [
        TemplateVariant::BackgroundFirst,
        TemplateVariant::PositionFirst,
        TemplateVariant::PositionFronted,
    ];
}

/// Realizes the caption template for `scene`.
pub fn render_caption(scene: &Scene, mentioned: AttributeSet, variant: TemplateVariant) -> Result<Caption> {
    if !mentioned.contains(Attribute::Object) || !mentioned.contains(Attribute::Color) {
        return Err(LabError::InvalidConfig("object and color must always be mentioned".into()));
    }
    let word = |a: Attribute| attribute_token(a, scene.value(a));
    // validate every attribute, mentioned or not
    for a in Attribute::ALL {
        word(a)?;
    }
    let background = if mentioned.contains(Attribute::Background) {
        vec![ON, word(Attribute::Background)?]
    } else {
        vec![]
    };
    let position = if mentioned.contains(Attribute::Position) {
        vec![AT, word(Attribute::Position)?]
    } else {
        vec![]
    };
    let mut core = vec![THERE, IS];
    core.push(if mentioned.contains(Attribute::Count) {
        word(Attribute::Count)?
    } else {
        A
    });
    if mentioned.contains(Attribute::Size) {
        core.push(word(Attribute::Size)?);
    }
    core.push(word(Attribute::Color)?);
    core.push(word(Attribute::Object)?);

    let mut tokens = vec![BOS];
    match variant {
        TemplateVariant::BackgroundFirst => {
            tokens.extend(core);
            tokens.extend(background);
            tokens.extend(position);
        }
        TemplateVariant::PositionFirst => {
            tokens.extend(core);
            tokens.extend(position);
            tokens.extend(background);
        }
        TemplateVariant::PositionFronted => {
            tokens.extend(position);
            tokens.extend(core);
            tokens.extend(background);
        }
    }
    tokens.push(EOS);
    Ok(Caption {
        tokens,
        provenance: Provenance::GroundTruth,
        scene_id: scene.id,
    })
}

/// Per-attribute probability that a ground-truth caption mentions it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SalienceProfile(pub [f64; NUM_ATTRIBUTES]);

impl SalienceProfile {
    /// Mandatory attributes at 1, every optional attribute at `p`.
    pub fn uniform_optional(p: f64) -> Self {
        let mut probs = [p; NUM_ATTRIBUTES];
        probs[Attribute::Object.index()] = 1.0;
        probs[Attribute::Color.index()] = 1.0;
        Self(probs)
    }

    pub fn probability(&self, attribute: Attribute) -> f64 {
        self.0[attribute.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for a in Attribute::ALL {
            let p = self.probability(a);
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(LabError::OutOfRange(format!("{} salience {p} not in [0,1]", a.name())));
            }
            if a.is_mandatory() && p != 1.0 {
                return Err(LabError::InvalidConfig(format!(
                    "{} is mandatory and must have salience 1",
                    a.name()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldDataset {
    pub seed: u64,
    pub salience: SalienceProfile,
    pub scenes: Vec<Scene>,
    pub gt_captions: Vec<Caption>,
    pub neighbor_lists: Vec<Vec<usize>>,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

impl WorldDataset {
    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn is_test(&self, id: usize) -> bool {
        self.test_ids.contains(&id)
    }

    /// Fills every scene's embedding from the frozen retriever.
    pub fn attach_embeddings(&mut self, params: &RetrieverParams) -> Result<()> {
        for scene in &mut self.scenes {
            scene.embedding = Some(retriever::embed_image(scene, params)?);
        }
        Ok(())
    }

    pub fn image_embeddings(&self) -> Result<Vec<EmbeddingVector>> {
        self.scenes.iter().map(|s| s.embedding().cloned()).collect()
    }

    /// Checks the structural invariants of a dataset.
    pub fn validate(&self) -> Result<()> {
        if self.gt_captions.len() != self.scenes.len() || self.neighbor_lists.len() != self.scenes.len() {
            return Err(LabError::InvalidConfig("one caption and one neighbor list per scene".into()));
        }
        for (i, scene) in self.scenes.iter().enumerate() {
            if scene.id != i {
                return Err(LabError::InvalidConfig(format!("scene at {i} has id {}", scene.id)));
            }
            if scene.attributes.iter().any(|v| *v as usize >= VALUES_PER_ATTRIBUTE) {
                return Err(LabError::OutOfRange(format!("scene {i} attribute out of range")));
            }
            if self.gt_captions[i].scene_id != i {
                return Err(LabError::InvalidConfig(format!("caption {i} belongs to another scene")));
            }
            if self.neighbor_lists[i].contains(&i) {
                return Err(LabError::InvalidConfig(format!("scene {i} lists itself as neighbor")));
            }
        }
        let train: HashSet<_> = self.train_ids.iter().collect();
        if self.test_ids.iter().any(|t| train.contains(t)) {
            return Err(LabError::InvalidConfig("train and test splits overlap".into()));
        }
        Ok(())
    }
}

/// Generates `n_scenes` distinct scenes; the last `n_test` ids form the test split.
pub fn generate_world(seed: u64, n_scenes: usize, n_test: usize, salience: &SalienceProfile) -> Result<WorldDataset> {
    salience.validate()?;
    if n_scenes < 2 {
        return Err(LabError::Empty(format!("world needs at least 2 scenes, got {n_scenes}")));
    }
    let capacity = VALUES_PER_ATTRIBUTE.pow(NUM_ATTRIBUTES as u32);
    if n_scenes > capacity {
        return Err(LabError::OutOfRange(format!("at most {capacity} distinct scenes")));
    }
    if n_test >= n_scenes {
        return Err(LabError::InvalidConfig("test split must leave at least one training scene".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::with_capacity(n_scenes);
    let mut scenes = Vec::with_capacity(n_scenes);
    let mut gt_captions = Vec::with_capacity(n_scenes);
    while scenes.len() < n_scenes {
        let mut attributes = [0u8; NUM_ATTRIBUTES];
        for v in attributes.iter_mut() {
            *v = rng.random_range(0..VALUES_PER_ATTRIBUTE as u8);
        }
        if !seen.insert(attributes) {
            continue;
        }
        let scene = Scene::new(scenes.len(), attributes);
        let mut mentioned = AttributeSet::mandatory();
        for a in Attribute::ALL.into_iter().filter(|a| !a.is_mandatory()) {
            if rng.random_bool(salience.probability(a)) {
                mentioned = mentioned.with(a);
            }
        }
        let variant = TemplateVariant::ALL[rng.random_range(0..TemplateVariant::ALL.len())];
        gt_captions.push(render_caption(&scene, mentioned, variant)?);
        scenes.push(scene);
    }

    let n_train = n_scenes - n_test;
    Ok(WorldDataset {
        seed,
        salience: *salience,
        scenes,
        gt_captions,
        neighbor_lists: vec![Vec::new(); n_scenes],
        train_ids: (0..n_train).collect(),
        test_ids: (n_train..n_scenes).collect(),
    })
}

/// For each scene, the `m` most cosine-similar scenes of the same split,
/// ties broken by lower id. Runs once, before any training.
pub fn mine_similar_images(dataset: &WorldDataset, m: usize) -> Result<Vec<Vec<usize>>> {
    let embeddings = dataset.image_embeddings()?;
    let mut lists = vec![Vec::new(); dataset.len()];
    if m == 0 {
        return Ok(lists);
    }
    for split in [&dataset.train_ids, &dataset.test_ids] {
        if split.len() <= m && !split.is_empty() {
            return Err(LabError::OutOfRange(format!(
                "cannot mine {m} neighbors in a split of {} scenes",
                split.len()
            )));
        }
        for &id in split.iter() {
            let mut ranked: Vec<(f64, usize)> = split
                .iter()
                .filter(|&&other| other != id)
                .map(|&other| (embeddings[id].dot(&embeddings[other]), other))
                .collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            lists[id] = ranked.into_iter().take(m).map(|(_, other)| other).collect();
        }
    }
    Ok(lists)
}

/// Fraction of scenes whose ground-truth caption is shared by at least one other scene.
pub fn shared_caption_fraction(dataset: &WorldDataset) -> f64 {
    let mut counts = std::collections::HashMap::new();
    for c in &dataset.gt_captions {
        *counts.entry(&c.tokens).or_insert(0usize) += 1;
    }
    let shared = dataset.gt_captions.iter().filter(|c| counts[&c.tokens] > 1).count();
    shared as f64 / dataset.gt_captions.len() as f64
}
