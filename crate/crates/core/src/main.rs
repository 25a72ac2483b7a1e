use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lds_core::data::{load_dataset, validate_split, ClassSplit, Dataset};
use lds_core::encoder::{load_checkpoint, save_checkpoint, PromptTemplate};
use lds_core::harness::ablate::run_seeds;
use lds_core::harness::export::{export_csv, Report};
use lds_core::harness::gradcheck::{encoder_gradchecks, loss_gradchecks, GradcheckSettings};
use lds_core::harness::synth::{gen_synthetic, gen_text_fixture, SynthConfig, TextFixtureConfig};
use lds_core::harness::{
    ablate, evaluate_runs, train, BackendConfig, Embedder, EvalOptions, RunConfig, RunSummary,
    StoreEmbedder, TextEncoder, TokenCache,
};
use lds_core::metalearners::{MetaLearner, DEFAULT_RIDGE_LAMBDA};
use lds_core::par::Parallelism;
use lds_core::rng::Stream;
use lds_core::{Error, Result};

/// Gradient checks fail above this relative error.
const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "lds", version, about = "Label-guided distance scaling for few-shot classification")]
struct Cli {
    /// Run episodes on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the token-embedding encoder and write its checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Also write the per-epoch log as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate on the test classes over the configured seeds.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scaler: Option<ScalerArg>,
        #[arg(long)]
        metalearner: Option<MetaArg>,
        /// Ridge lambda when the meta-learner is rrml.
        #[arg(long)]
        lambda: Option<f64>,
        /// Per-episode accuracies as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run the loss x scaler x meta-learner grid.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a synthetic fixture.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_prefix: PathBuf,
        /// Read the config as a keyword text corpus instead of vector clusters.
        #[arg(long)]
        text: bool,
    },
    /// Finite-difference checks of every loss and of the encoder gradient.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 5)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert a JSON report written by eval or ablate to CSV.
    ExportCsv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScalerArg {
    Em,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetaArg {
    Pn,
    Rrml,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let parallelism = if cli.sequential {
        Parallelism::Sequential
    } else {
        Parallelism::default()
    };
    match run(cli.command, parallelism) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command, parallelism: Parallelism) -> Result<()> {
    match command {
        Command::Train { config, log } => cmd_train(&config, log.as_deref(), parallelism),
        Command::Eval {
            config,
            scaler,
            metalearner,
            lambda,
            out,
            json,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = scaler {
                cfg.scaler.enabled = matches!(s, ScalerArg::Em);
            }
            let current = match cfg.metalearner {
                MetaLearner::Rrml { lambda } => lambda,
                MetaLearner::Pn => DEFAULT_RIDGE_LAMBDA,
            };
            match metalearner {
                Some(MetaArg::Pn) => cfg.metalearner = MetaLearner::Pn,
                Some(MetaArg::Rrml) => cfg.metalearner = MetaLearner::Rrml { lambda: current },
                None => {}
            }
            if let Some(l) = lambda {
                match &mut cfg.metalearner {
                    MetaLearner::Rrml { lambda } => *lambda = l,
                    MetaLearner::Pn => {
                        return Err(Error::Config("--lambda needs the rrml meta-learner".into()))
                    }
                }
            }
            cfg.validate()?;
            cmd_eval(&cfg, out.as_deref(), json.as_deref(), parallelism)
        }
        Command::Ablate { config, out, json } => {
            let cfg = RunConfig::load(&config)?;
            let (dataset, split) = load_data(&cfg)?;
            let report = Report::Ablation(ablate(&cfg, &dataset, &split, parallelism)?);
            if let Report::Ablation(r) = &report {
                println!("loss\tscaler\tmeta\tmean\tstd_runs");
                for row in &r.rows {
                    println!(
                        "{}\t{}\t{}\t{:.4}\t{:.4}",
                        row.loss.name(),
                        row.scaler,
                        row.metalearner.name(),
                        row.summary.mean,
                        row.summary.std_runs
                    );
                }
            }
            export_csv(&report, &out)?;
            if let Some(path) = json {
                report.save(path)?;
            }
            Ok(())
        }
        Command::Synth {
            config,
            out_prefix,
            text,
        } => cmd_synth(&config, &out_prefix, text),
        Command::Gradcheck {
            trials,
            instances,
            seed,
        } => cmd_gradcheck(trials, instances, seed),
        Command::ExportCsv { input, out } => export_csv(&Report::load(input)?, out),
    }
}

fn load_data(cfg: &RunConfig) -> Result<(Dataset, ClassSplit)> {
    let dataset = load_dataset(&cfg.dataset)?;
    let split = ClassSplit::load(&cfg.split)?;
    validate_split(&dataset, &split, cfg.n_way, cfg.k_shot, cfg.m_query).into_result()?;
    Ok((dataset, split))
}

fn checkpoint_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.checkpoint
        .as_deref()
        .ok_or_else(|| Error::Config("config has no checkpoint path".into()))
}

fn cmd_train(config: &Path, log: Option<&Path>, parallelism: Parallelism) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let path = checkpoint_path(&cfg)?;
    let (dataset, split) = load_data(&cfg)?;
    let out = train(&cfg, &dataset, &split, parallelism)?;
    for e in &out.log {
        let fmt = |x: Option<f64>| x.map_or("-".to_owned(), |a| format!("{a:.4}"));
        println!(
            "epoch {:>3}  loss {:.6}  valid {}  train {}",
            e.epoch,
            e.mean_loss,
            fmt(e.valid_accuracy),
            fmt(e.train_accuracy)
        );
    }
    if let Some(best) = out.best_epoch {
        println!("best epoch {best}");
    }
    save_checkpoint(&out.params, &out.vocab, path)?;
    if let Some(log_path) = log {
        let text = serde_json::to_string_pretty(&out.log).expect("log serializes");
        fs::write(log_path, text).map_err(|e| Error::io(log_path, e))?;
    }
    Ok(())
}

fn cmd_eval(
    cfg: &RunConfig,
    out: Option<&Path>,
    json: Option<&Path>,
    parallelism: Parallelism,
) -> Result<()> {
    let (dataset, split) = load_data(cfg)?;
    let opts = EvalOptions {
        episodes: cfg.test_episodes,
        scaler: cfg.scaler.active(),
        metalearner: cfg.metalearner,
        classify_temperature: cfg.classify_temperature,
        stream: Stream::Test,
        parallelism,
    };
    let run = |embedder: &dyn Embedder| -> Result<RunSummary> {
        let sampler = cfg.sampler(cfg.seed);
        evaluate_runs(embedder, &dataset, &split.test_classes, &sampler, &run_seeds(cfg), &opts)
    };
    let summary = match &cfg.backend {
        BackendConfig::Trainable { template, dim } => {
            let (params, vocab) = load_checkpoint(checkpoint_path(cfg)?)?;
            if params.dim() != *dim {
                return Err(Error::DimMismatch {
                    expected: *dim,
                    got: params.dim(),
                });
            }
            let template = PromptTemplate::new(template.clone())?;
            let tokens = TokenCache::new(&dataset, &vocab, &template)?;
            run(&TextEncoder {
                params: &params,
                tokens: &tokens,
            })?
        }
        BackendConfig::Precomputed { samples, labels } => {
            let embedder = StoreEmbedder::load(samples, labels)?;
            embedder.check_coverage(&dataset, &split.test_classes)?;
            run(&embedder)?
        }
    };
    for (seed, m) in summary.seeds.iter().zip(&summary.runs) {
        println!(
            "seed {seed}  mean {:.4}  std {:.4}  episodes {}  {:.2}s",
            m.mean, m.std, m.episodes, m.seconds
        );
    }
    println!(
        "accuracy {:.4} +/- {:.4} over {} runs (episode std {:.4})",
        summary.mean,
        summary.std_runs,
        summary.runs.len(),
        summary.std_episodes
    );
    let report = Report::Eval(summary);
    if let Some(path) = out {
        export_csv(&report, path)?;
    }
    if let Some(path) = json {
        report.save(path)?;
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_synth(config: &Path, prefix: &Path, text: bool) -> Result<()> {
    let raw = fs::read_to_string(config).map_err(|e| Error::io(config, e))?;
    let parse_err = |e: serde_json::Error| Error::Config(format!("{}: {e}", config.display()));
    let (dataset, split) = if text {
        let cfg: TextFixtureConfig = serde_json::from_str(&raw).map_err(parse_err)?;
        gen_text_fixture(&cfg)?
    } else {
        let cfg: SynthConfig = serde_json::from_str(&raw).map_err(parse_err)?;
        let data = gen_synthetic(&cfg)?;
        data.samples.save(with_suffix(prefix, ".samples.ldse"))?;
        data.labels.save(with_suffix(prefix, ".labels.ldse"))?;
        (data.dataset, data.split)
    };
    dataset.save(with_suffix(prefix, ".jsonl"))?;
    split.save(with_suffix(prefix, ".split.json"))?;
    println!(
        "{} samples, {} classes ({} train / {} valid / {} test)",
        dataset.len(),
        dataset.num_classes(),
        split.train_classes.len(),
        split.valid_classes.len(),
        split.test_classes.len()
    );
    Ok(())
}

fn cmd_gradcheck(trials: usize, instances: usize, seed: u64) -> Result<()> {
    let settings = GradcheckSettings {
        trials,
        seed,
        ..GradcheckSettings::default()
    };
    let mut rows = loss_gradchecks(&settings)?;
    rows.extend(encoder_gradchecks(&settings, instances)?);
    let mut worst = 0.0f64;
    for row in &rows {
        println!("{:<20} trials {:>3}  max rel err {:.3e}", row.target, row.trials, row.max_rel_err);
        worst = worst.max(row.max_rel_err);
    }
    if worst < GRADCHECK_TOLERANCE {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "gradient check failed: max relative error {worst:.3e} >= {GRADCHECK_TOLERANCE:e}"
        )))
    }
}
