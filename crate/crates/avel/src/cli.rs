//! Command-line workflow: corpus generation, stage training, refinement,
//! retraining, evaluation, ablation, and parameter sweeps.
//!
//! All commands are driven by one TOML config (every field optional, with
//! the defaults below) plus a handful of flag overrides. Each command
//! reads and writes only versioned artifact files under the output
//! directory and drops a resolved-config copy next to them, so identical
//! inputs and seeds reproduce outputs byte for byte.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::datagen::{generate_corpus, load_corpus, save_corpus, Corpus, CorpusSpec, FeatureVideo};
use crate::error::{Error, Result};
use crate::evalkit::{
    evaluate_model, metrics_table, naive_baselines, sweep_tau, sweep_window, write_metrics_records,
};
use crate::model::{load_checkpoint, save_checkpoint, ModelConfig, ModelParams};
use crate::numkit::derive_seed;
use crate::pipeline::{
    run_ablation, train_stage1, train_stage3, window_label_quality, TrainConfig, TrainedModel,
};
use crate::refine::{load_refined, refine_corpus, save_refined};

/// Architecture knobs exposed in the config file; feature dimensions come
/// from the corpus.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: usize,
    pub context_radius: usize,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            hidden: 32,
            context_radius: 1,
            seed: 7,
        }
    }
}

/// Run-level options: output location, worker cap, and sweep grids.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub out_dir: PathBuf,
    /// Worker thread cap; 0 leaves the pool at its default. Results are
    /// independent of this value.
    pub threads: usize,
    /// Whether stage-1 training includes the auxiliary objective.
    pub with_aux: bool,
    /// Threshold grid for `sweep tau`.
    pub taus: Vec<f64>,
    /// `(N, s)` grid for `sweep window`.
    pub windows: Vec<(usize, usize)>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            out_dir: PathBuf::from("runs/default"),
            threads: 0,
            with_aux: true,
            taus: vec![0.01, 0.03, 0.05, 0.07, 0.10],
            windows: vec![(2, 2), (3, 1), (4, 2), (5, 5)],
        }
    }
}

/// The merged configuration all commands run from. Unknown keys in the
/// file are rejected.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub corpus: CorpusSpec,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.train.validate()?;
        if self.model.hidden == 0 {
            return Err(Error::Config("model hidden width must be positive".into()));
        }
        if self.run.taus.iter().any(|t| !(0.0 < *t && *t < 1.0)) {
            return Err(Error::Config("sweep taus must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Model config for a corpus with this spec's feature dimensions.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            audio_dim: self.corpus.audio_dim,
            visual_dim: self.corpus.visual_dim,
            hidden: self.model.hidden,
            num_classes: self.corpus.num_classes,
            context_radius: self.model.context_radius,
            seed: self.model.seed,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "avel",
    version,
    about = "Weakly-supervised audio-visual event localization on synthetic corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML config file; built-in defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; derives the corpus, model, and train seeds
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for all artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap (results do not depend on it)
    #[arg(long)]
    threads: Option<usize>,
    /// Event-detection threshold override
    #[arg(long)]
    tau: Option<f64>,
    /// Window size and stride override, as N,s
    #[arg(long, value_parser = parse_window)]
    window: Option<(usize, usize)>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Checkpoint to evaluate (default: <out>/stage3.ckpt)
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SweepKind {
    Tau,
    Window,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Which grid to sweep
    kind: SweepKind,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus and print its statistics
    Gen(CommonArgs),
    /// Train the stage-1 base model on video-level labels
    Train(CommonArgs),
    /// Estimate window labels with the trained base model
    Refine(CommonArgs),
    /// Re-train from scratch with the refined window labels
    Retrain(CommonArgs),
    /// Evaluate a checkpoint on the test split, with naive baselines
    Eval(EvalArgs),
    /// Run the five-variant ablation and print the summary table
    Ablate(CommonArgs),
    /// Sweep the threshold or window grid
    Sweep(SweepArgs),
}

fn parse_window(raw: &str) -> std::result::Result<(usize, usize), String> {
    let (n, s) = raw
        .split_once(',')
        .ok_or_else(|| format!("expected N,s — got {raw:?}"))?;
    let n = n.trim().parse().map_err(|_| format!("bad window size {n:?}"))?;
    let s = s.trim().parse().map_err(|_| format!("bad stride {s:?}"))?;
    Ok((n, s))
}

/// Parses arguments, runs the command, and maps errors to exit codes:
/// 0 success, 1 usage/config, 2 data or format, 3 numeric failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // Keep clap's rendering for --help/--version (exit 0).
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn init_logging() {
    use std::sync::Once;
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        let _ = env_logger::Builder::from_env(env_logger::Env::default()).try_init();
    });
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen(common) => {
            let config = resolve(&common)?;
            with_threads(config.run.threads, || cmd_gen(&config))
        }
        Command::Train(common) => {
            let config = resolve(&common)?;
            with_threads(config.run.threads, || cmd_train(&config))
        }
        Command::Refine(common) => {
            let config = resolve(&common)?;
            with_threads(config.run.threads, || cmd_refine(&config))
        }
        Command::Retrain(common) => {
            let config = resolve(&common)?;
            with_threads(config.run.threads, || cmd_retrain(&config))
        }
        Command::Eval(args) => {
            let config = resolve(&args.common)?;
            let checkpoint = args
                .checkpoint
                .unwrap_or_else(|| config.run.out_dir.join("stage3.ckpt"));
            with_threads(config.run.threads, || cmd_eval(&config, &checkpoint))
        }
        Command::Ablate(common) => {
            let config = resolve(&common)?;
            with_threads(config.run.threads, || cmd_ablate(&config))
        }
        Command::Sweep(args) => {
            let config = resolve(&args.common)?;
            with_threads(config.run.threads, || cmd_sweep(&config, args.kind))
        }
    }
}

/// Loads the config file (or defaults), applies flag overrides, and
/// validates the result.
fn resolve(common: &CommonArgs) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(root) = common.seed {
        config.corpus.seed = derive_seed(root, "corpus", 0);
        config.model.seed = derive_seed(root, "model", 0);
        config.train.seed = derive_seed(root, "train", 0);
    }
    if let Some(out) = &common.out {
        config.run.out_dir = out.clone();
    }
    if let Some(threads) = common.threads {
        config.run.threads = threads;
    }
    if let Some(tau) = common.tau {
        config.train.tau = tau;
    }
    if let Some((n, s)) = common.window {
        config.train.n = n;
        config.train.s = s;
    }
    config.validate()?;
    Ok(config)
}

/// Runs `f` under a dedicated pool of `threads` workers (0 = default
/// pool). Batch reductions are fixed-order, so outputs are identical
/// either way.
fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(f)
    }
}

/// Writes the fully resolved config next to the command's outputs.
fn write_resolved_config(config: &RunConfig, command: &str) -> Result<()> {
    std::fs::create_dir_all(&config.run.out_dir)?;
    let text = toml::to_string(config)
        .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
    std::fs::write(
        config.run.out_dir.join(format!("config-{command}.toml")),
        text,
    )?;
    Ok(())
}

fn corpus_path(config: &RunConfig) -> PathBuf {
    config.run.out_dir.join("corpus.txt")
}

fn load_corpus_artifact(config: &RunConfig) -> Result<Corpus> {
    load_corpus(&corpus_path(config))
}

fn save_curve(path: &Path, name: &str, curve: &[f64]) -> Result<()> {
    let mut out = String::from("avel-curve v1\n");
    write!(out, "curve {name}").unwrap();
    crate::textio::push_floats(&mut out, curve);
    out.push('\n');
    std::fs::write(path, out)?;
    Ok(())
}

fn cmd_gen(config: &RunConfig) -> Result<()> {
    write_resolved_config(config, "gen")?;
    let corpus = generate_corpus(&config.corpus)?;
    save_corpus(&corpus, &corpus_path(config))?;
    let all: Vec<FeatureVideo> = corpus.all_videos().cloned().collect();
    println!(
        "corpus: {} train / {} val / {} test videos -> {}",
        corpus.train.len(),
        corpus.val.len(),
        corpus.test.len(),
        corpus_path(config).display()
    );
    println!(
        "background segment fraction: {:.4}",
        Corpus::background_fraction(&all)
    );
    let hist = corpus.event_length_histogram();
    let mut line = String::from("event length histogram:");
    for (len, count) in hist.iter().enumerate().skip(1) {
        if *count > 0 {
            write!(line, " {len}s x{count}").unwrap();
        }
    }
    println!("{line}");
    Ok(())
}

fn cmd_train(config: &RunConfig) -> Result<()> {
    write_resolved_config(config, "train")?;
    let corpus = load_corpus_artifact(config)?;
    let model_cfg = config.model_config();
    let trained = train_stage1(&corpus, &model_cfg, &config.train, config.run.with_aux)?;
    let out = &config.run.out_dir;
    save_checkpoint(&trained.params, &out.join("stage1.ckpt"))?;
    save_curve(&out.join("stage1_loss.txt"), "stage1", &trained.loss_curve)?;
    println!(
        "stage 1 ({} epochs, aux={}): final loss {:.6} -> {}",
        config.train.stage1_epochs,
        config.run.with_aux,
        trained.loss_curve.last().unwrap(),
        out.join("stage1.ckpt").display()
    );
    Ok(())
}

fn cmd_refine(config: &RunConfig) -> Result<()> {
    write_resolved_config(config, "refine")?;
    let corpus = load_corpus_artifact(config)?;
    let params = load_checkpoint(&config.run.out_dir.join("stage1.ckpt"))?;
    let schedule = config.train.schedule(corpus.spec.segments)?;
    let refined = refine_corpus(
        &params,
        &corpus,
        &schedule,
        config.train.tau,
        config.train.seed,
    )?;
    let out = config.run.out_dir.join("refined.txt");
    save_refined(&refined, &out)?;
    let quality = window_label_quality(&corpus, &refined, &schedule);
    println!(
        "refined {} windows (tau={}, N={}, s={}) -> {}",
        refined.entries.len(),
        config.train.tau,
        schedule.n,
        schedule.s,
        out.display()
    );
    println!(
        "window label quality vs ground truth: precision {:.4} recall {:.4}",
        quality.precision(),
        quality.recall()
    );
    Ok(())
}

fn cmd_retrain(config: &RunConfig) -> Result<()> {
    write_resolved_config(config, "retrain")?;
    let corpus = load_corpus_artifact(config)?;
    let refined = load_refined(&config.run.out_dir.join("refined.txt"))?;
    let model_cfg = config.model_config();
    let trained: TrainedModel = train_stage3(&corpus, &model_cfg, &config.train, &refined)?;
    let out = &config.run.out_dir;
    save_checkpoint(&trained.params, &out.join("stage3.ckpt"))?;
    save_curve(&out.join("stage3_loss.txt"), "stage3", &trained.loss_curve)?;
    println!(
        "stage 3 ({} epochs): final loss {:.6} -> {}",
        config.train.stage3_epochs,
        trained.loss_curve.last().unwrap(),
        out.join("stage3.ckpt").display()
    );
    Ok(())
}

fn cmd_eval(config: &RunConfig, checkpoint: &Path) -> Result<()> {
    write_resolved_config(config, "eval")?;
    let corpus = load_corpus_artifact(config)?;
    let params: ModelParams = load_checkpoint(checkpoint)?;
    let metrics = evaluate_model(&params, &corpus.test, corpus.spec.num_classes)?;
    let (ave_repeat, gt_repeat) = naive_baselines(&corpus, &params)?;

    let mut records = String::from("avel-metrics v1\n");
    for (name, m) in [
        ("model", &metrics),
        ("AVE-repeat", &ave_repeat),
        ("GT-repeat", &gt_repeat),
    ] {
        records.push_str(&format!("method {name}\n"));
        write_metrics_records(&mut records, m);
        records.push_str("end\n");
    }
    std::fs::write(config.run.out_dir.join("metrics.txt"), &records)?;

    let table = metrics_table(&[
        ("model".to_string(), &metrics),
        ("AVE-repeat".to_string(), &ave_repeat),
        ("GT-repeat".to_string(), &gt_repeat),
    ]);
    std::fs::write(config.run.out_dir.join("metrics_table.txt"), &table)?;
    println!("evaluating {} on the test split", checkpoint.display());
    print!("{table}");
    Ok(())
}

fn cmd_ablate(config: &RunConfig) -> Result<()> {
    write_resolved_config(config, "ablate")?;
    let corpus = load_corpus_artifact(config)?;
    let model_cfg = config.model_config();
    let report = run_ablation(&corpus, &model_cfg, &config.train)?;
    let out = &config.run.out_dir;
    std::fs::write(out.join("ablation.txt"), report.to_records())?;

    let rows: Vec<(String, &crate::evalkit::MetricsReport)> = report
        .variants
        .iter()
        .map(|v| (v.variant.to_string(), &v.metrics))
        .collect();
    let mut table = metrics_table(&rows);
    for v in &report.variants {
        if let Some(q) = &v.refined_quality {
            table.push_str(&format!(
                "{:<14} refined windows: precision {:.4} recall {:.4}\n",
                v.variant.to_string(),
                q.precision(),
                q.recall()
            ));
        }
    }
    std::fs::write(out.join("ablation_table.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_sweep(config: &RunConfig, kind: SweepKind) -> Result<()> {
    let (name, result) = match kind {
        SweepKind::Tau => {
            write_resolved_config(config, "sweep-tau")?;
            let corpus = load_corpus_artifact(config)?;
            let result = sweep_tau(
                &corpus,
                &config.model_config(),
                &config.train,
                &config.run.taus,
            )?;
            ("sweep_tau", result)
        }
        SweepKind::Window => {
            write_resolved_config(config, "sweep-window")?;
            let corpus = load_corpus_artifact(config)?;
            let result = sweep_window(
                &corpus,
                &config.model_config(),
                &config.train,
                &config.run.windows,
            )?;
            ("sweep_window", result)
        }
    };
    let out = &config.run.out_dir;
    std::fs::write(out.join(format!("{name}.txt")), result.to_records())?;
    let table = result.to_table();
    std::fs::write(out.join(format!("{name}_table.txt")), &table)?;
    print!("{table}");
    Ok(())
}
