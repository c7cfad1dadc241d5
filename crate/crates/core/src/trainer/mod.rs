//! Training orchestration: batch pools, the per-iteration discriminator and
//! generator updates, single experiments and the ablation suite.

mod config;
pub mod eval;
pub mod report;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::discriminator::{self, DiscriminatorParams, FitSchedule};
use crate::error::{LabError, Result};
use crate::policy::{self, DecodeResult, PolicyConfig, PolicyParameters};
use crate::retriever::{self, EmbeddingVector, RetrieverParams};
use crate::rewards::{self, NegativePools, PoolItem, RewardBreakdown, RewardConfig};
use crate::synthworld::{self, Provenance, WorldDataset, VOCAB_SIZE};

pub use config::{ExperimentConfig, Preset};
pub use eval::{Metrics, METRIC_NAMES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Objective {
    Tf,
    Wtf,
    Rl,
    WtfRl,
    RlUnidirectional,
    ScstDiscriminator,
    RlNoRegularizer,
}

impl Objective {
    pub const ALL: [Objective; 7] = [
        Objective::Tf,
        Objective::Wtf,
        Objective::Rl,
        Objective::WtfRl,
        Objective::RlUnidirectional,
        Objective::ScstDiscriminator,
        Objective::RlNoRegularizer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Tf => "tf",
            Objective::Wtf => "wtf",
            Objective::Rl => "rl",
            Objective::WtfRl => "wtf_rl",
            Objective::RlUnidirectional => "rl_uni",
            Objective::ScstDiscriminator => "scst_disc",
            Objective::RlNoRegularizer => "rl_noreg",
        }
    }

    /// Reward settings this objective trains under.
    pub fn reward_config(self, base: &RewardConfig) -> RewardConfig {
        let mut r = *base;
        match self {
            Objective::RlUnidirectional => r.unidirectional = true,
            Objective::ScstDiscriminator => {
                r.unidirectional = true;
                r.scst_greedy_only = true;
            }
            Objective::RlNoRegularizer => r.alpha = 1.0,
            _ => {}
        }
        r
    }

    /// Whether the ground-truth trajectory is reward weighted.
    pub fn uses_gt_term(self) -> bool {
        matches!(self, Objective::Wtf | Objective::WtfRl)
    }

    /// Whether the beam trajectory receives a policy gradient.
    pub fn uses_beam_term(self) -> bool {
        !matches!(self, Objective::Tf | Objective::Wtf)
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Objective {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match norm.as_str() {
            "rl_unidirectional" => "rl_uni",
            "scst_discriminator" => "scst_disc",
            "rl_no_regularizer" => "rl_noreg",
            other => other,
        };
        Objective::ALL.into_iter().find(|o| o.name() == alias).ok_or_else(|| {
            let valid: Vec<&str> = Objective::ALL.iter().map(|o| o.name()).collect();
            LabError::InvalidConfig(format!("unknown objective {s:?} (valid: {})", valid.join(", ")))
        })
    }
}

fn sub_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const TAG_POLICY_INIT: u64 = 1;
const TAG_PRETRAIN_ORDER: u64 = 2;
const TAG_DISC_INIT: u64 = 3;
const TAG_DISC_FIT: u64 = 4;
const TAG_OBJECTIVE_ORDER: u64 = 5;
const TAG_PROBE: u64 = 6;

/// Dataset, frozen retriever and the image-embedding cache.
#[derive(Clone, Debug)]
pub struct World {
    pub dataset: WorldDataset,
    pub retriever: RetrieverParams,
    pub image_cache: Vec<EmbeddingVector>,
}

impl World {
    /// Generates the world, embeds every scene and mines neighbors once.
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let dataset = synthworld::generate_world(
            config.seed,
            config.n_train + config.n_test,
            config.n_test,
            &config.salience,
        )?;
        let retriever = retriever::build_retriever(config.retriever_seed(), config.retriever_dim, config.retriever_noise)?;
        Self::from_parts(dataset, retriever, config.mined_m)
    }

    /// Attaches embeddings and mines `mined_m` neighbors per scene.
    pub fn from_parts(mut dataset: WorldDataset, retriever: RetrieverParams, mined_m: usize) -> Result<Self> {
        dataset.attach_embeddings(&retriever)?;
        dataset.neighbor_lists = synthworld::mine_similar_images(&dataset, mined_m)?;
        Self::assemble(dataset, retriever)
    }

    /// Attaches embeddings and keeps the dataset's existing neighbor lists,
    /// e.g. for a world loaded from disk.
    pub fn assemble(mut dataset: WorldDataset, retriever: RetrieverParams) -> Result<Self> {
        dataset.attach_embeddings(&retriever)?;
        dataset.validate()?;
        let image_cache = dataset.image_embeddings()?;
        Ok(Self {
            dataset,
            retriever,
            image_cache,
        })
    }

    /// Digest of the image-embedding cache.
    pub fn image_cache_hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.image_cache {
            for v in e.as_slice() {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Decoded trajectories and negative pools of one batch.
#[derive(Clone, Debug)]
pub struct BatchPools {
    pub ids: Vec<usize>,
    pub beams: Vec<DecodeResult>,
    pub greedys: Vec<DecodeResult>,
    pub pools: NegativePools,
}

impl BatchPools {
    pub fn text_embedding(&self, item: usize, provenance: Provenance) -> &EmbeddingVector {
        &self.pools.texts[self.pools.text_index(item, provenance)].embedding
    }
}

/// Decodes greedy and beam captions for every batch item, embeds all three
/// captions per item and assembles the pools. Image embeddings come from the
/// world's cache.
pub fn build_batch_pools(
    batch: &[usize],
    policy: &PolicyParameters,
    world: &World,
    beam_size: usize,
    max_len: usize,
) -> Result<BatchPools> {
    if batch.is_empty() {
        return Err(LabError::Empty("training batch".into()));
    }
    let decoded: Vec<(DecodeResult, DecodeResult, PoolItem)> = batch
        .par_iter()
        .map(|&id| {
            let scene = &world.dataset.scenes[id];
            let greedy = policy::greedy_decode(scene, policy, max_len)?;
            let beam = policy::beam_search(scene, policy, beam_size, max_len)?;
            let item = PoolItem {
                scene_id: id,
                beam: retriever::embed_text(&beam.caption, &world.retriever)?,
                greedy: retriever::embed_text(&greedy.caption, &world.retriever)?,
                ground_truth: retriever::embed_text(&world.dataset.gt_captions[id], &world.retriever)?,
            };
            Ok((greedy, beam, item))
        })
        .collect::<Result<_>>()?;
    let mut greedys = Vec::with_capacity(batch.len());
    let mut beams = Vec::with_capacity(batch.len());
    let mut items = Vec::with_capacity(batch.len());
    for (g, b, i) in decoded {
        greedys.push(g);
        beams.push(b);
        items.push(i);
    }
    let pools = NegativePools::assemble(&items, &world.dataset.neighbor_lists, &world.image_cache)?;
    Ok(BatchPools {
        ids: batch.to_vec(),
        beams,
        greedys,
        pools,
    })
}

/// Rewards of the two trajectories that can receive gradients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ItemRewards {
    pub beam: RewardBreakdown,
    pub ground_truth: RewardBreakdown,
}

/// Bidirectional rewards combined with the discriminator's current output.
pub fn compute_rewards(
    pools: &BatchPools,
    disc: &DiscriminatorParams,
    reward: &RewardConfig,
) -> Result<Vec<ItemRewards>> {
    (0..pools.ids.len())
        .map(|i| {
            let one = |prov: Provenance| -> Result<RewardBreakdown> {
                let p_d = discriminator::discriminate(pools.text_embedding(i, prov), disc)?;
                rewards::bidirectional_reward(i, prov, &pools.pools, reward)?.with_discriminator(p_d, reward.alpha)
            };
            Ok(ItemRewards {
                beam: one(Provenance::Beam)?,
                ground_truth: one(Provenance::GroundTruth)?,
            })
        })
        .collect()
}

/// Accumulates the objective's policy gradient for one batch: the batch mean
/// of `-r(x^gt)·∇log p(x^gt)` and/or `-r(x^bs)·∇log p(x^bs)`. Teacher forcing
/// ignores `rewards`. Greedy captions never receive gradient.
pub fn accumulate_generator_gradient(
    objective: Objective,
    pools: &BatchPools,
    rewards: &[ItemRewards],
    dataset: &WorldDataset,
    policy: &mut PolicyParameters,
    clamp_negative_gt: bool,
) -> Result<()> {
    let b = pools.ids.len() as f64;
    if objective == Objective::Tf {
        let batch: Vec<_> = pools
            .ids
            .iter()
            .map(|&id| (&dataset.scenes[id], &dataset.gt_captions[id]))
            .collect();
        policy::teacher_forcing_loss(&batch, policy)?;
        return Ok(());
    }
    if rewards.len() != pools.ids.len() {
        return Err(LabError::DimensionMismatch {
            expected: pools.ids.len(),
            got: rewards.len(),
        });
    }
    for (i, (&id, r)) in pools.ids.iter().zip(rewards).enumerate() {
        let scene = &dataset.scenes[id];
        if objective.uses_gt_term() {
            let mut w = r.ground_truth.combined;
            if clamp_negative_gt {
                w = w.max(0.0);
            }
            policy::policy_gradient_accumulate(&dataset.gt_captions[id], scene, w / b, policy)?;
        }
        if objective.uses_beam_term() {
            policy::policy_gradient_accumulate(&pools.beams[i].caption, scene, r.beam.combined / b, policy)?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Discriminator,
    Generator,
}

/// What one training iteration did, in order.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub phases: Vec<Phase>,
    pub disc_loss: Option<f64>,
    pub rewards: Vec<ItemRewards>,
    pub pools: Option<BatchPools>,
    /// Mean `τ·LSE − max` over the beam candidates' text pools.
    pub mean_lse_gap: f64,
}

#[derive(Clone, Debug)]
pub struct Models {
    pub policy: PolicyParameters,
    pub disc: DiscriminatorParams,
}

/// One iteration: for reward objectives, a discriminator step on ground truth
/// (real) against beam captions (fake), then rewards under the updated
/// discriminator, then one generator update.
pub fn train_step(
    batch: &[usize],
    objective: Objective,
    models: &mut Models,
    world: &World,
    config: &ExperimentConfig,
) -> Result<StepReport> {
    let mut report = StepReport {
        phases: Vec::with_capacity(2),
        disc_loss: None,
        rewards: Vec::new(),
        pools: None,
        mean_lse_gap: 0.0,
    };
    models.policy.zero_grad();
    if objective == Objective::Tf {
        let batch: Vec<_> = batch
            .iter()
            .map(|&id| (&world.dataset.scenes[id], &world.dataset.gt_captions[id]))
            .collect();
        policy::teacher_forcing_loss(&batch, &mut models.policy)?;
        policy::apply_update(&mut models.policy, config.lr)?;
        report.phases.push(Phase::Generator);
        return Ok(report);
    }

    let pools = build_batch_pools(batch, &models.policy, world, config.beam_size, config.max_len)?;
    let real: Vec<EmbeddingVector> = (0..batch.len())
        .map(|i| pools.text_embedding(i, Provenance::GroundTruth).clone())
        .collect();
    let fake: Vec<EmbeddingVector> = (0..batch.len())
        .map(|i| pools.text_embedding(i, Provenance::Beam).clone())
        .collect();
    report.disc_loss = Some(discriminator::discriminator_train_step(&real, &fake, &mut models.disc, config.disc_lr)?);
    report.phases.push(Phase::Discriminator);

    let reward_config = objective.reward_config(&config.reward_config());
    let rewards = compute_rewards(&pools, &models.disc, &reward_config)
        .map_err(|e| with_batch_dump(e, &pools, &world.dataset))?;
    accumulate_generator_gradient(
        objective,
        &pools,
        &rewards,
        &world.dataset,
        &mut models.policy,
        config.clamp_negative_gt,
    )
    .and_then(|_| policy::apply_update(&mut models.policy, config.lr))
    .map_err(|e| with_batch_dump(e, &pools, &world.dataset))?;
    report.phases.push(Phase::Generator);

    let texts = pools.pools.text_embeddings();
    let mut gap = 0.0;
    for i in 0..batch.len() {
        let own = &pools.pools.images[pools.pools.own_image[i]].embedding;
        let sims: Vec<f64> = texts.iter().map(|t| t.dot(own)).collect();
        gap += rewards::lse_max_gap(&sims, reward_config.tau)?;
    }
    report.mean_lse_gap = gap / batch.len() as f64;
    report.rewards = rewards;
    report.pools = Some(pools);
    Ok(report)
}

fn with_batch_dump(e: LabError, pools: &BatchPools, dataset: &WorldDataset) -> LabError {
    match e {
        LabError::NonFinite(msg) => {
            let mut dump = String::new();
            for (i, &id) in pools.ids.iter().enumerate() {
                dump.push_str(&format!(
                    "\n  scene {id}: gt {:?} | beam {:?} | greedy {:?}",
                    dataset.gt_captions[id].text(),
                    pools.beams[i].caption.text(),
                    pools.greedys[i].caption.text()
                ));
            }
            LabError::NonFinite(format!("{msg}; batch dump:{dump}"))
        }
        other => other,
    }
}

/// Full batches of a seeded shuffle of the training ids.
fn epoch_batches(train_ids: &[usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order = train_ids.to_vec();
    order.shuffle(rng);
    let full = if order.len() >= batch_size { order.len() / batch_size } else { 1 };
    order.chunks(batch_size).take(full).map(<[usize]>::to_vec).collect()
}

/// The shared starting point of every objective.
#[derive(Clone, Debug)]
pub struct Pretrained {
    pub models: Models,
    pub policy_hash: String,
    pub disc_train_accuracy: f64,
    pub disc_heldout_accuracy: f64,
    pub metrics: Metrics,
}

pub fn policy_config(config: &ExperimentConfig) -> PolicyConfig {
    PolicyConfig {
        vocab_size: VOCAB_SIZE,
        hidden: config.hidden,
        input_dim: config.retriever_dim,
        context_every_step: config.context_every_step,
    }
}

/// Teacher-forcing pretraining followed by discriminator pretraining on
/// ground truth against the pretrained policy's beam outputs.
pub fn pretrain(config: &ExperimentConfig, world: &World) -> Result<Pretrained> {
    config.validate()?;
    let mut policy = PolicyParameters::init(policy_config(config), sub_seed(config.seed, TAG_POLICY_INIT))?;
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, TAG_PRETRAIN_ORDER));
    for _ in 0..config.pretrain_epochs {
        for batch in epoch_batches(&world.dataset.train_ids, config.batch_size, &mut rng) {
            let pairs: Vec<_> = batch
                .iter()
                .map(|&id| (&world.dataset.scenes[id], &world.dataset.gt_captions[id]))
                .collect();
            policy.zero_grad();
            policy::teacher_forcing_loss(&pairs, &mut policy)?;
            policy::apply_update(&mut policy, config.pretrain_lr)?;
        }
    }
    let (disc, disc_train_accuracy, disc_heldout_accuracy) = pretrain_discriminator(config, world, &policy)?;
    let metrics = eval::evaluate(&world.dataset, &world.retriever, &policy, &disc, config.beam_size, config.max_len)?;
    Ok(Pretrained {
        policy_hash: policy.hash(),
        models: Models { policy, disc },
        disc_train_accuracy,
        disc_heldout_accuracy,
        metrics,
    })
}

/// Returns the discriminator with its train and held-out balanced accuracy.
pub fn pretrain_discriminator(
    config: &ExperimentConfig,
    world: &World,
    policy: &PolicyParameters,
) -> Result<(DiscriminatorParams, f64, f64)> {
    let mut disc = DiscriminatorParams::init(config.retriever_dim, config.disc_width, sub_seed(config.seed, TAG_DISC_INIT))?;
    let split = |ids: &[usize]| -> Result<(Vec<EmbeddingVector>, Vec<EmbeddingVector>)> {
        let gt: Vec<_> = ids.iter().map(|&id| world.dataset.gt_captions[id].clone()).collect();
        let beams = eval::decode_scenes(ids, &world.dataset, policy, config.beam_size, config.max_len)?;
        Ok((
            eval::embed_captions(&gt, &world.retriever)?,
            eval::embed_captions(&beams, &world.retriever)?,
        ))
    };
    let (train_real, train_fake) = split(&world.dataset.train_ids)?;
    let (test_real, test_fake) = split(&world.dataset.test_ids)?;
    let schedule = FitSchedule {
        steps: config.disc_pretrain_steps,
        batch_size: config.disc_batch,
        lr: config.disc_lr,
        seed: sub_seed(config.seed, TAG_DISC_FIT),
    };
    discriminator::fit(&mut disc, &train_real, &train_fake, &schedule)?;
    let train_acc = discriminator::balanced_accuracy(&disc, &train_real, &train_fake)?;
    let test_acc = discriminator::balanced_accuracy(&disc, &test_real, &test_fake)?;
    Ok((disc, train_acc, test_acc))
}

/// One line of the reward log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardLogRecord {
    pub epoch: usize,
    pub step: usize,
    pub scene_id: usize,
    pub provenance: Provenance,
    pub reward: RewardBreakdown,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub objective: Objective,
    pub config_hash: String,
    pub pretrain_hash: String,
    pub retriever_hash_before: String,
    pub retriever_hash_after: String,
    pub image_cache_hash_before: String,
    pub image_cache_hash_after: String,
    /// `(epoch, metrics)`; epoch 0 is the shared pretrained checkpoint.
    pub curve: Vec<(usize, Metrics)>,
    pub detectability: Option<f64>,
    pub reward_log: Vec<RewardLogRecord>,
    pub mean_lse_gap: f64,
    pub models: Models,
}

impl ExperimentResult {
    pub fn final_metrics(&self) -> &Metrics {
        &self.curve.last().expect("curve always holds the pretrained point").1
    }

    pub fn retriever_unchanged(&self) -> bool {
        self.retriever_hash_before == self.retriever_hash_after && self.image_cache_hash_before == self.image_cache_hash_after
    }
}

/// Runs `objective` for `config.epochs` from a pretrained checkpoint.
pub fn run_from_pretrained(
    config: &ExperimentConfig,
    world: &World,
    pretrained: &Pretrained,
    objective: Objective,
) -> Result<ExperimentResult> {
    let retriever_hash_before = world.retriever.hash();
    let image_cache_hash_before = world.image_cache_hash();
    let mut models = pretrained.models.clone();
    let mut curve = vec![(0, pretrained.metrics)];
    let mut reward_log = Vec::new();
    let (mut gap_sum, mut gap_n) = (0.0, 0usize);
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(config.seed, TAG_OBJECTIVE_ORDER));
    for epoch in 1..=config.epochs {
        for (step, batch) in epoch_batches(&world.dataset.train_ids, config.batch_size, &mut rng)
            .into_iter()
            .enumerate()
        {
            let report = train_step(&batch, objective, &mut models, world, config)?;
            if report.pools.is_some() {
                gap_sum += report.mean_lse_gap;
                gap_n += 1;
            }
            for (&scene_id, r) in batch.iter().zip(&report.rewards) {
                for (provenance, reward) in [(Provenance::Beam, r.beam), (Provenance::GroundTruth, r.ground_truth)] {
                    reward_log.push(RewardLogRecord {
                        epoch,
                        step,
                        scene_id,
                        provenance,
                        reward,
                    });
                }
            }
        }
        if epoch % config.eval_every == 0 || epoch == config.epochs {
            let m = eval::evaluate(
                &world.dataset,
                &world.retriever,
                &models.policy,
                &models.disc,
                config.beam_size,
                config.max_len,
            )?;
            curve.push((epoch, m));
        }
    }
    let detectability = if config.probe_steps > 0 {
        let schedule = FitSchedule {
            steps: config.probe_steps,
            batch_size: config.disc_batch,
            lr: config.disc_lr,
            seed: sub_seed(config.seed, TAG_PROBE),
        };
        Some(eval::detectability(
            &world.dataset,
            &world.retriever,
            &models.policy,
            config.disc_width,
            &schedule,
            config.beam_size,
            config.max_len,
        )?)
    } else {
        None
    };
    let result = ExperimentResult {
        objective,
        config_hash: config.hash(),
        pretrain_hash: pretrained.policy_hash.clone(),
        retriever_hash_before,
        retriever_hash_after: world.retriever.hash(),
        image_cache_hash_before,
        image_cache_hash_after: world.image_cache_hash(),
        curve,
        detectability,
        reward_log,
        mean_lse_gap: if gap_n > 0 { gap_sum / gap_n as f64 } else { 0.0 },
        models,
    };
    if !result.retriever_unchanged() {
        return Err(LabError::InvalidConfig("retriever or image cache changed during training".into()));
    }
    Ok(result)
}

/// Builds the world, pretrains and runs one objective.
pub fn run_experiment(config: &ExperimentConfig, objective: Objective) -> Result<ExperimentResult> {
    let world = World::build(config)?;
    let pretrained = pretrain(config, &world)?;
    run_from_pretrained(config, &world, &pretrained, objective)
}

#[derive(Debug)]
pub struct SuiteRow {
    pub objective: Objective,
    pub outcome: std::result::Result<ExperimentResult, String>,
}

#[derive(Debug)]
pub struct AblationSuite {
    pub pretrain_hash: String,
    pub disc_heldout_accuracy: f64,
    pub rows: Vec<SuiteRow>,
}

impl AblationSuite {
    pub fn row(&self, objective: Objective) -> Option<&ExperimentResult> {
        self.rows
            .iter()
            .find(|r| r.objective == objective)
            .and_then(|r| r.outcome.as_ref().ok())
    }
}

/// Every objective from one shared pretrained checkpoint. A failing row is
/// recorded and the suite moves on.
pub fn run_ablation_suite(config: &ExperimentConfig) -> Result<AblationSuite> {
    run_objectives(config, &Objective::ALL)
}

pub fn run_objectives(config: &ExperimentConfig, objectives: &[Objective]) -> Result<AblationSuite> {
    let world = World::build(config)?;
    let pretrained = pretrain(config, &world)?;
    let rows = objectives
        .iter()
        .map(|&objective| SuiteRow {
            objective,
            outcome: run_from_pretrained(config, &world, &pretrained, objective).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(AblationSuite {
        pretrain_hash: pretrained.policy_hash.clone(),
        disc_heldout_accuracy: pretrained.disc_heldout_accuracy,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objective_names_round_trip() {
        for o in Objective::ALL {
            assert_eq!(o.name().parse::<Objective>().unwrap(), o);
        }
        assert_eq!("WTF-RL".parse::<Objective>().unwrap(), Objective::WtfRl);
        let err = "sgd".parse::<Objective>().unwrap_err().to_string();
        assert!(err.contains("wtf_rl") && err.contains("rl_noreg"));
    }

    #[test]
    fn objective_reward_flags() {
        let base = RewardConfig::default();
        assert!(Objective::RlUnidirectional.reward_config(&base).unidirectional);
        let scst = Objective::ScstDiscriminator.reward_config(&base);
        assert!(scst.unidirectional && scst.scst_greedy_only);
        assert_eq!(Objective::RlNoRegularizer.reward_config(&base).alpha, 1.0);
        assert_eq!(Objective::WtfRl.reward_config(&base), base);
    }

    #[test]
    fn sub_seeds_differ_by_tag() {
        assert_ne!(sub_seed(7, 1), sub_seed(7, 2));
        assert_ne!(sub_seed(7, 1), sub_seed(8, 1));
    }
}
