use captionlab::discriminator;
use captionlab::policy;
use captionlab::synthworld::Provenance;
use captionlab::trainer::*;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        n_train: 60,
        n_test: 20,
        hidden: 16,
        retriever_dim: 32,
        pretrain_epochs: 2,
        pretrain_lr: 0.1,
        epochs: 2,
        lr: 0.01,
        batch_size: 10,
        max_len: 12,
        mined_m: 3,
        disc_width: 16,
        disc_lr: 0.1,
        disc_pretrain_steps: 40,
        disc_batch: 10,
        probe_steps: 20,
        ..ExperimentConfig::default()
    }
}

fn setup() -> (ExperimentConfig, World, Pretrained) {
    let config = small();
    let world = World::build(&config).unwrap();
    let pre = pretrain(&config, &world).unwrap();
    (config, world, pre)
}

fn batch(world: &World) -> Vec<usize> {
    world.dataset.train_ids[..8].to_vec()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gradient(objective: Objective, pools: &BatchPools, rewards: &[ItemRewards], world: &World, pre: &Pretrained, clamp: bool) -> Vec<f64> {
    let mut p = pre.models.policy.clone();
    p.zero_grad();
    accumulate_generator_gradient(objective, pools, rewards, &world.dataset, &mut p, clamp).unwrap();
    p.grad().to_vec()
}

fn with_constant(rewards: &[ItemRewards], gt: f64, beam: f64) -> Vec<ItemRewards> {
    rewards
        .iter()
        .map(|r| {
            let mut r = *r;
            r.ground_truth.combined = gt;
            r.beam.combined = beam;
            r
        })
        .collect()
}

#[test]
fn batch_pools_are_deterministic() {
    let (config, world, pre) = setup();
    let b = batch(&world);
    let a = build_batch_pools(&b, &pre.models.policy, &world, config.beam_size, config.max_len).unwrap();
    let c = build_batch_pools(&b, &pre.models.policy, &world, config.beam_size, config.max_len).unwrap();
    assert_eq!(a.pools.texts.len(), 3 * b.len());
    for (x, y) in a.pools.texts.iter().zip(&c.pools.texts) {
        assert_eq!(x.embedding, y.embedding);
    }
    assert_eq!(a.beams, c.beams);
    assert_eq!(a.greedys, c.greedys);
    assert_eq!(a.pools.own_image, c.pools.own_image);
    for (i, &id) in b.iter().enumerate() {
        assert_eq!(a.pools.images[a.pools.own_image[i]].scene_id, id);
    }
}

#[test]
fn constant_weight_on_ground_truth_scales_teacher_forcing() {
    let (config, world, pre) = setup();
    let b = batch(&world);
    let pools = build_batch_pools(&b, &pre.models.policy, &world, config.beam_size, config.max_len).unwrap();
    let rewards = compute_rewards(&pools, &pre.models.disc, &config.reward_config()).unwrap();
    let tf = gradient(Objective::Tf, &pools, &rewards, &world, &pre, false);
    for c in [1.0, 0.37, -0.2] {
        let wtf = gradient(Objective::Wtf, &pools, &with_constant(&rewards, c, 99.0), &world, &pre, false);
        let scaled: Vec<f64> = tf.iter().map(|g| c * g).collect();
        assert!(max_abs_diff(&wtf, &scaled) < 1e-7, "c = {c}");
    }
    let clamped = gradient(Objective::Wtf, &pools, &with_constant(&rewards, -0.2, 0.0), &world, &pre, true);
    assert!(clamped.iter().all(|g| *g == 0.0));
}

#[test]
fn combined_objective_is_the_sum_of_its_terms() {
    let (config, world, pre) = setup();
    let b = batch(&world);
    let pools = build_batch_pools(&b, &pre.models.policy, &world, config.beam_size, config.max_len).unwrap();
    let rewards = compute_rewards(&pools, &pre.models.disc, &config.reward_config()).unwrap();
    let wtf = gradient(Objective::Wtf, &pools, &rewards, &world, &pre, false);
    let rl = gradient(Objective::Rl, &pools, &rewards, &world, &pre, false);
    let both = gradient(Objective::WtfRl, &pools, &rewards, &world, &pre, false);
    let sum: Vec<f64> = wtf.iter().zip(&rl).map(|(a, b)| a + b).collect();
    assert!(max_abs_diff(&both, &sum) < 1e-12);
}

#[test]
fn beam_gradient_matches_per_caption_oracle_and_ignores_greedy() {
    let (config, world, pre) = setup();
    let b = batch(&world);
    let mut pools = build_batch_pools(&b, &pre.models.policy, &world, config.beam_size, config.max_len).unwrap();
    let rewards = compute_rewards(&pools, &pre.models.disc, &config.reward_config()).unwrap();
    let rl = gradient(Objective::Rl, &pools, &rewards, &world, &pre, false);

    // −(1/B) Σ r_i ∇log p(beam_i), one caption at a time
    let mut oracle = vec![0.0; rl.len()];
    for (i, &id) in b.iter().enumerate() {
        let mut p = pre.models.policy.clone();
        p.zero_grad();
        policy::policy_gradient_accumulate(&pools.beams[i].caption, &world.dataset.scenes[id], 1.0, &mut p).unwrap();
        for (o, g) in oracle.iter_mut().zip(p.grad()) {
            *o += rewards[i].beam.combined / b.len() as f64 * g;
        }
    }
    assert!(max_abs_diff(&rl, &oracle) < 1e-12);

    pools.greedys = pools.beams.iter().rev().cloned().collect();
    assert_eq!(gradient(Objective::Rl, &pools, &rewards, &world, &pre, false), rl);
    for o in [Objective::RlUnidirectional, Objective::ScstDiscriminator, Objective::RlNoRegularizer] {
        assert_eq!(gradient(o, &pools, &rewards, &world, &pre, false), rl);
    }
}

#[test]
fn reward_step_runs_discriminator_then_generator() {
    let (config, world, pre) = setup();
    let b = batch(&world);
    let mut models = pre.models.clone();
    let report = train_step(&b, Objective::WtfRl, &mut models, &world, &config).unwrap();
    assert_eq!(report.phases, vec![Phase::Discriminator, Phase::Generator]);
    assert!(report.disc_loss.is_some());
    assert_eq!(report.rewards.len(), b.len());

    let mut tf_models = pre.models.clone();
    let tf = train_step(&b, Objective::Tf, &mut tf_models, &world, &config).unwrap();
    assert_eq!(tf.phases, vec![Phase::Generator]);
    assert!(tf.disc_loss.is_none() && tf.pools.is_none());
    assert_eq!(tf_models.disc, pre.models.disc);
}

#[test]
fn train_step_matches_composed_oracle() {
    let (config, world, pre) = setup();
    let b = batch(&world);
    for objective in [Objective::Wtf, Objective::Rl, Objective::WtfRl, Objective::ScstDiscriminator] {
        let mut models = pre.models.clone();
        let report = train_step(&b, objective, &mut models, &world, &config).unwrap();

        let mut policy = pre.models.policy.clone();
        let mut disc = pre.models.disc.clone();
        let pools = build_batch_pools(&b, &policy, &world, config.beam_size, config.max_len).unwrap();
        let real: Vec<_> = (0..b.len()).map(|i| pools.text_embedding(i, Provenance::GroundTruth).clone()).collect();
        let fake: Vec<_> = (0..b.len()).map(|i| pools.text_embedding(i, Provenance::Beam).clone()).collect();
        let loss = discriminator::discriminator_train_step(&real, &fake, &mut disc, config.disc_lr).unwrap();
        let rewards = compute_rewards(&pools, &disc, &objective.reward_config(&config.reward_config())).unwrap();
        policy.zero_grad();
        accumulate_generator_gradient(objective, &pools, &rewards, &world.dataset, &mut policy, false).unwrap();
        policy::apply_update(&mut policy, config.lr).unwrap();

        assert_eq!(report.disc_loss, Some(loss));
        assert_eq!(report.rewards, rewards);
        assert_eq!(models.disc, disc);
        assert_eq!(models.policy.values(), policy.values(), "{objective}");
    }
}

#[test]
fn suite_rows_share_the_pretrained_checkpoint() {
    let config = small();
    let suite = run_ablation_suite(&config).unwrap();
    assert_eq!(suite.rows.len(), 7);
    let first = suite.row(Objective::Tf).unwrap();
    for row in &suite.rows {
        let r = row.outcome.as_ref().unwrap();
        assert_eq!(r.pretrain_hash, suite.pretrain_hash);
        assert_eq!(r.curve[0], first.curve[0]);
        assert!(r.retriever_unchanged());
        assert_eq!(r.retriever_hash_before, first.retriever_hash_before);
        assert_eq!(r.curve.len(), config.epochs + 1);
        assert!(r.detectability.is_some());
        for (_, m) in &r.curve {
            assert!(m.0.iter().all(|v| v.is_finite()));
        }
    }
    assert!(first.reward_log.is_empty());
    let rl = suite.row(Objective::Rl).unwrap();
    let steps = config.epochs * (config.n_train / config.batch_size);
    assert_eq!(rl.reward_log.len(), 2 * config.batch_size * steps);
}

#[test]
fn zero_learning_rate_keeps_the_policy() {
    let (mut config, world, pre) = setup();
    config.lr = 0.0;
    config.epochs = 1;
    config.probe_steps = 0;
    for o in [Objective::Tf, Objective::WtfRl] {
        let r = run_from_pretrained(&config, &world, &pre, o).unwrap();
        assert_eq!(r.models.policy.hash(), pre.policy_hash);
        assert_eq!(r.final_metrics().0[..12], pre.metrics.0[..12]);
        assert!(r.detectability.is_none());
    }
}

#[test]
fn experiments_are_deterministic() {
    let mut config = small();
    config.epochs = 1;
    let a = run_experiment(&config, Objective::WtfRl).unwrap();
    let b = run_experiment(&config, Objective::WtfRl).unwrap();
    assert_eq!(a.models.policy.hash(), b.models.policy.hash());
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.detectability, b.detectability);
    assert_eq!(a.config_hash, config.hash());
}

#[test]
fn world_build_is_deterministic_and_split_local() {
    let config = small();
    let a = World::build(&config).unwrap();
    let b = World::build(&config).unwrap();
    assert_eq!(a.image_cache_hash(), b.image_cache_hash());
    assert_eq!(a.retriever.hash(), b.retriever.hash());
    for (i, list) in a.dataset.neighbor_lists.iter().enumerate() {
        assert_eq!(list.len(), config.mined_m);
        assert!(list.iter().all(|&j| a.dataset.is_test(j) == a.dataset.is_test(i)));
    }
}

#[test]
fn config_text_round_trips_and_presets() {
    let mut c = small();
    c.tau = 0.017;
    c.clamp_negative_gt = true;
    assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
    let paper = ExperimentConfig::preset(Preset::Paper);
    assert_eq!((paper.batch_size, paper.alpha, paper.epochs, paper.lr), (20, 0.94, 5, 1e-6));
    let over = ExperimentConfig::from_text("preset = paper\nepochs = 9\n").unwrap();
    assert_eq!(over.epochs, 9);
    assert_eq!(over.lr, 1e-6);
    assert!(ExperimentConfig::from_text("mined_m = 500").is_err());
    assert!(ExperimentConfig::from_text("batch_size = 0").is_err());
}

#[test]
fn objective_names_parse() {
    for o in Objective::ALL {
        assert_eq!(o.to_string().parse::<Objective>().unwrap(), o);
    }
    let msg = "adam".parse::<Objective>().unwrap_err().to_string();
    for o in Objective::ALL {
        assert!(msg.contains(o.name()));
    }
}
