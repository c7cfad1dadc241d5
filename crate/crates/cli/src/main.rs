//! `captionlab` command-line interface.
//!
//! Exit codes: 0 success, 1 user error (arguments, config, missing inputs),
//! 2 internal error during a run. `CAPLAB_WORKERS` caps the worker threads.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use captionlab::formats;
use captionlab::trainer::{self, report, ExperimentConfig, ExperimentResult, Objective, Preset, World};

#[derive(Parser, Debug)]
#[command(name = "captionlab", version, about = "Distinctive captioning lab on a synthetic world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the world, the retriever tables and the embedding cache.
    Generate(CommonArgs),
    /// Pretrain and run one objective.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// One of: tf, wtf, rl, wtf_rl, rl_uni, scst_disc, rl_noreg.
        #[arg(long)]
        objective: String,
        /// Directory written by `generate`; the world is rebuilt from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run every objective from one shared pretrained checkpoint.
    Ablation {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Merge the per-epoch curves found under a results directory.
    Report {
        results_dir: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Key-value config file.
    #[arg(long)]
    config: PathBuf,
    /// Base preset the config file is applied on top of (desk or paper).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

trait UserContext<T> {
    fn user(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UserContext<T> for Result<T, E> {
    fn user(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::User(e.into()))
    }
}

trait InternalContext<T> {
    fn internal(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> InternalContext<T> for Result<T, E> {
    fn internal(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_workers() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(e)) => {
            eprintln!("error: {e:#}");
            eprintln!("run `captionlab --help` for usage");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_workers() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("CAPLAB_WORKERS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| anyhow!("CAPLAB_WORKERS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate(common) => cmd_generate(&common),
        Command::Train { common, objective, data } => {
            let objective: Objective = objective.parse().user()?;
            cmd_train(&common, objective, data.as_deref())
        }
        Command::Ablation { common, data } => cmd_ablation(&common, data.as_deref()),
        Command::Report { results_dir, out } => cmd_report(&results_dir, out.as_deref()),
    }
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(&common.config)
        .with_context(|| format!("cannot read config {}", common.config.display()))
        .user()?;
    let mut kv = formats::parse_key_values(&text).user()?;
    if let Some(p) = &common.preset {
        p.parse::<Preset>().user()?;
        kv.insert("preset".into(), p.clone());
    }
    if let Some(seed) = common.seed {
        kv.insert("seed".into(), seed.to_string());
    }
    ExperimentConfig::from_key_values(&kv)
        .with_context(|| format!("invalid config {}", common.config.display()))
        .user()
}

const WORLD_FILE: &str = "world.tsv";
const RETRIEVER_FILE: &str = "retriever.txt";
const IMAGE_CACHE_FILE: &str = "image_embeddings.txt";
const CONFIG_FILE: &str = "config.txt";
const MANIFEST_FILE: &str = "manifest.txt";

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    formats::write_string(path, contents).internal()
}

fn image_cache_text(world: &World) -> Result<String, Failure> {
    let d = world.retriever.dim();
    let flat: Vec<f64> = world.image_cache.iter().flat_map(|e| e.as_slice().to_vec()).collect();
    formats::matrix_to_string(world.image_cache.len(), d, &flat).internal()
}

fn cmd_generate(common: &CommonArgs) -> Result<(), Failure> {
    let config = load_config(common)?;
    let world = World::build(&config).user()?;
    let out = &common.out;
    write(&out.join(WORLD_FILE), &formats::world_to_string(&world.dataset))?;
    write(&out.join(RETRIEVER_FILE), &formats::retriever_to_string(&world.retriever).internal()?)?;
    write(&out.join(IMAGE_CACHE_FILE), &image_cache_text(&world)?)?;
    write(&out.join(CONFIG_FILE), &config.to_text())?;
    println!(
        "wrote {} scenes ({} train, {} test) to {}; retriever {}",
        world.dataset.len(),
        world.dataset.train_ids.len(),
        world.dataset.test_ids.len(),
        out.display(),
        world.retriever.hash()
    );
    Ok(())
}

/// Loads a generated world and checks it against its embedding cache.
fn load_world(dir: &Path) -> Result<World, Failure> {
    let read = |name: &str| -> Result<String, Failure> {
        let p = dir.join(name);
        fs::read_to_string(&p).with_context(|| format!("cannot read {}", p.display())).user()
    };
    let dataset = formats::world_from_str(&read(WORLD_FILE)?).user()?;
    let retriever = formats::retriever_from_str(&read(RETRIEVER_FILE)?).user()?;
    let world = World::assemble(dataset, retriever).user()?;
    let (_, _, cached) = formats::matrix_from_str(&read(IMAGE_CACHE_FILE)?).user()?;
    let fresh: Vec<f64> = world.image_cache.iter().flat_map(|e| e.as_slice().to_vec()).collect();
    if cached != fresh {
        return Err(Failure::User(anyhow!(
            "{} does not match the retriever in {}",
            IMAGE_CACHE_FILE,
            dir.display()
        )));
    }
    Ok(world)
}

fn obtain_world(config: &ExperimentConfig, data: Option<&Path>) -> Result<World, Failure> {
    match data {
        Some(dir) => {
            let world = load_world(dir)?;
            if world.dataset.train_ids.len() != config.n_train
                || world.dataset.test_ids.len() != config.n_test
                || world.retriever.dim() != config.retriever_dim
            {
                return Err(Failure::User(anyhow!(
                    "world in {} does not match the config's n_train/n_test/retriever_dim",
                    dir.display()
                )));
            }
            Ok(world)
        }
        None => World::build(config).user(),
    }
}

/// Run manifest: written with `status = running` before training and
/// rewritten with `status = complete` afterwards.
struct Manifest {
    path: PathBuf,
    entries: Vec<(String, String)>,
    started: Instant,
}

impl Manifest {
    fn start(out: &Path, command: &str, config: &ExperimentConfig) -> Result<Self, Failure> {
        let mut m = Manifest {
            path: out.join(MANIFEST_FILE),
            entries: Vec::new(),
            started: Instant::now(),
        };
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("seed", &config.seed.to_string());
        m.set("config_hash", &config.hash());
        m.set("config_file", CONFIG_FILE);
        m.set("status", "running");
        write(&out.join(CONFIG_FILE), &config.to_text())?;
        m.flush()?;
        Ok(m)
    }

    fn set(&mut self, key: &str, value: &str) {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
    }

    fn flush(&self) -> Result<(), Failure> {
        let text: String = self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        write(&self.path, &text)
    }

    fn finish(mut self, status: &str) -> Result<(), Failure> {
        self.set("status", status);
        self.set("wall_clock_seconds", &format!("{:.3}", self.started.elapsed().as_secs_f64()));
        self.flush()
    }
}

fn with_manifest_ref(csv: String) -> String {
    format!("# manifest: {MANIFEST_FILE}\n{csv}")
}

fn write_run_outputs(dir: &Path, result: &ExperimentResult, config_hash: &str, manifest: &mut Manifest, prefix: &str) -> Result<(), Failure> {
    let policy_ck = formats::policy_checkpoint(&result.models.policy, config_hash);
    let disc_ck = formats::discriminator_checkpoint(&result.models.disc, config_hash);
    write(&dir.join("curve.csv"), &with_manifest_ref(report::curve_csv(&[result])))?;
    write(&dir.join("rewards.csv"), &with_manifest_ref(report::reward_log_csv(result)))?;
    write(&dir.join("policy.ckpt"), &policy_ck.to_text())?;
    write(&dir.join("discriminator.ckpt"), &disc_ck.to_text())?;
    manifest.set(&format!("{prefix}policy_hash"), &result.models.policy.hash());
    manifest.set(&format!("{prefix}discriminator_hash"), &result.models.disc.hash());
    manifest.set(&format!("{prefix}retriever_hash_before"), &result.retriever_hash_before);
    manifest.set(&format!("{prefix}retriever_hash_after"), &result.retriever_hash_after);
    if let Some(d) = result.detectability {
        manifest.set(&format!("{prefix}detectability"), &d.to_string());
    }
    Ok(())
}

fn cmd_train(common: &CommonArgs, objective: Objective, data: Option<&Path>) -> Result<(), Failure> {
    let config = load_config(common)?;
    let world = obtain_world(&config, data)?;
    let out = &common.out;
    let mut manifest = Manifest::start(out, &format!("train {objective}"), &config)?;
    manifest.set("retriever_hash", &world.retriever.hash());
    manifest.set("outputs", "curve.csv rewards.csv summary.csv policy.ckpt discriminator.ckpt pretrained_policy.ckpt");
    manifest.flush()?;

    let pretrained = trainer::pretrain(&config, &world).internal()?;
    write(
        &out.join("pretrained_policy.ckpt"),
        &formats::policy_checkpoint(&pretrained.models.policy, &config.hash()).to_text(),
    )?;
    manifest.set("pretrained_policy_hash", &pretrained.policy_hash);
    let result = match trainer::run_from_pretrained(&config, &world, &pretrained, objective) {
        Ok(r) => r,
        Err(e) => {
            manifest.finish("failed")?;
            return Err(Failure::Internal(e.into()));
        }
    };
    write_run_outputs(out, &result, &config.hash(), &mut manifest, "")?;
    let suite = trainer::AblationSuite {
        pretrain_hash: pretrained.policy_hash.clone(),
        disc_heldout_accuracy: pretrained.disc_heldout_accuracy,
        rows: vec![trainer::SuiteRow {
            objective,
            outcome: Ok(result),
        }],
    };
    write(&out.join("summary.csv"), &with_manifest_ref(report::summary_csv(&suite)))?;
    manifest.finish("complete")?;
    print!("{}", report::summary_table(&suite));
    Ok(())
}

fn cmd_ablation(common: &CommonArgs, data: Option<&Path>) -> Result<(), Failure> {
    let config = load_config(common)?;
    let world = obtain_world(&config, data)?;
    let out = &common.out;
    let mut manifest = Manifest::start(out, "ablation", &config)?;
    manifest.set("retriever_hash", &world.retriever.hash());
    manifest.set("outputs", "summary.csv table.txt curves.csv <objective>/");
    manifest.flush()?;

    let pretrained = trainer::pretrain(&config, &world).internal()?;
    manifest.set("pretrained_policy_hash", &pretrained.policy_hash);
    let rows: Vec<trainer::SuiteRow> = Objective::ALL
        .iter()
        .map(|&objective| {
            eprintln!("running {objective}");
            trainer::SuiteRow {
                objective,
                outcome: trainer::run_from_pretrained(&config, &world, &pretrained, objective).map_err(|e| e.to_string()),
            }
        })
        .collect();
    let suite = trainer::AblationSuite {
        pretrain_hash: pretrained.policy_hash.clone(),
        disc_heldout_accuracy: pretrained.disc_heldout_accuracy,
        rows,
    };
    for row in &suite.rows {
        match &row.outcome {
            Ok(result) => {
                let prefix = format!("{}.", row.objective);
                write_run_outputs(&out.join(row.objective.name()), result, &config.hash(), &mut manifest, &prefix)?;
            }
            Err(e) => manifest.set(&format!("{}.error", row.objective), e),
        }
    }
    let ok: Vec<&ExperimentResult> = suite.rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    write(&out.join("curves.csv"), &with_manifest_ref(report::curve_csv(&ok)))?;
    write(&out.join("summary.csv"), &with_manifest_ref(report::summary_csv(&suite)))?;
    let table = format!("{}\n{}", report::summary_table(&suite), report::orderings_footer(&suite));
    write(&out.join("table.txt"), &table)?;
    manifest.finish("complete")?;
    print!("{table}");
    Ok(())
}

fn find_curves(dir: &Path, found: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            find_curves(&p, found)?;
        } else if p.file_name().is_some_and(|n| n == "curve.csv") {
            found.push(p);
        }
    }
    Ok(())
}

fn cmd_report(results_dir: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let mut curves = Vec::new();
    find_curves(results_dir, &mut curves)
        .with_context(|| format!("cannot read results directory {}", results_dir.display()))
        .user()?;
    if curves.is_empty() {
        return Err(Failure::User(anyhow!("no curve.csv files under {}", results_dir.display())));
    }
    let mut merged = String::from("run,objective,epoch,metric,value\n");
    for path in &curves {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).user()?;
        let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
        let rows = report::parse_curve_csv(&body)
            .with_context(|| format!("malformed {}", path.display()))
            .user()?;
        let run = path
            .parent()
            .and_then(|p| p.strip_prefix(results_dir).ok())
            .map(|p| p.display().to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| ".".into());
        for (objective, epoch, metric, value) in rows {
            merged.push_str(&format!("{run},{objective},{epoch},{metric},{value}\n"));
        }
    }
    match out {
        Some(p) => write(p, &merged)?,
        None => print!("{merged}"),
    }
    Ok(())
}
