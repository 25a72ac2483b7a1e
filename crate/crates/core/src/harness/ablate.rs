//! Loss x scaler x meta-learner ablation grid.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::backend::{Embedder, StoreEmbedder, TextEncoder, TokenCache};
use super::config::{BackendConfig, RunConfig};
use super::evaluate::{evaluate_runs, EvalOptions, RunSummary};
use super::train::{train, EpochLog};
use crate::data::{validate_split, ClassSplit, Dataset};
use crate::error::Result;
use crate::losses::LossKind;
use crate::metalearners::{MetaLearner, DEFAULT_RIDGE_LAMBDA};
use crate::par::Parallelism;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerChoice {
    None,
    Em,
}

impl ScalerChoice {
    pub const ALL: [ScalerChoice; 2] = [ScalerChoice::None, ScalerChoice::Em];

    pub fn name(self) -> &'static str {
        match self {
            ScalerChoice::None => "none",
            ScalerChoice::Em => "em",
        }
    }
}

impl fmt::Display for ScalerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub loss: LossKind,
    pub scaler: ScalerChoice,
    pub metalearner: MetaLearner,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// Training log per loss kind; empty for precomputed backends.
    pub train_logs: Vec<(LossKind, Vec<EpochLog>)>,
}

impl AblationReport {
    pub fn get(&self, loss: LossKind, scaler: ScalerChoice, metalearner: &str) -> Option<&AblationRow> {
        self.rows
            .iter()
            .find(|r| r.loss == loss && r.scaler == scaler && r.metalearner.name() == metalearner)
    }
}

pub fn run_seeds(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.runs as u64).map(|r| cfg.seed.wrapping_add(r)).collect()
}

/// Evaluates every scaler x meta-learner pair on the test classes.
fn grid<E: Embedder + ?Sized>(
    cfg: &RunConfig,
    embedder: &E,
    dataset: &Dataset,
    split: &ClassSplit,
    loss: LossKind,
    parallelism: Parallelism,
) -> Result<Vec<AblationRow>> {
    let lambda = match cfg.metalearner {
        MetaLearner::Rrml { lambda } => lambda,
        MetaLearner::Pn => DEFAULT_RIDGE_LAMBDA,
    };
    let seeds = run_seeds(cfg);
    let mut rows = Vec::with_capacity(4);
    for scaler in ScalerChoice::ALL {
        for metalearner in [MetaLearner::Pn, MetaLearner::Rrml { lambda }] {
            let opts = EvalOptions {
                episodes: cfg.test_episodes,
                scaler: (scaler == ScalerChoice::Em).then_some(cfg.scaler.config),
                metalearner,
                classify_temperature: cfg.classify_temperature,
                stream: Stream::Test,
                parallelism,
            };
            let sampler = cfg.sampler(cfg.seed);
            let summary = evaluate_runs(embedder, dataset, &split.test_classes, &sampler, &seeds, &opts)?;
            rows.push(AblationRow {
                loss,
                scaler,
                metalearner,
                summary,
            });
        }
    }
    Ok(rows)
}

/// Fills the 3 x 2 x 2 grid. A trainable backend is trained once per loss
/// kind (with `cfg.seed`) and every cell is evaluated over the run seeds. A
/// precomputed backend has nothing to train, so its three loss blocks repeat
/// the same evaluation.
pub fn ablate(
    cfg: &RunConfig,
    dataset: &Dataset,
    split: &ClassSplit,
    parallelism: Parallelism,
) -> Result<AblationReport> {
    cfg.validate()?;
    validate_split(dataset, split, cfg.n_way, cfg.k_shot, cfg.m_query).into_result()?;
    let mut rows = Vec::with_capacity(12);
    let mut train_logs = Vec::new();
    match &cfg.backend {
        BackendConfig::Trainable { .. } => {
            for kind in LossKind::ALL {
                let mut run = cfg.clone();
                run.loss.kind = kind;
                let out = train(&run, dataset, split, parallelism)?;
                let tokens = TokenCache::new(dataset, &out.vocab, &out.template)?;
                let encoder = TextEncoder {
                    params: &out.params,
                    tokens: &tokens,
                };
                rows.extend(grid(cfg, &encoder, dataset, split, kind, parallelism)?);
                train_logs.push((kind, out.log));
            }
        }
        BackendConfig::Precomputed { samples, labels } => {
            let embedder = StoreEmbedder::load(samples, labels)?;
            embedder.check_coverage(dataset, &split.test_classes)?;
            for kind in LossKind::ALL {
                rows.extend(grid(cfg, &embedder, dataset, split, kind, parallelism)?);
            }
        }
    }
    Ok(AblationReport { rows, train_logs })
}
