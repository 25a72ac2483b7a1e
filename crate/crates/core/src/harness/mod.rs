//! Training, evaluation, ablation and synthetic fixtures.

pub mod ablate;
pub mod backend;
pub mod config;
pub mod evaluate;
pub mod export;
pub mod gradcheck;
pub mod optimizer;
pub mod synth;
pub mod train;

pub use ablate::{ablate, AblationReport, AblationRow, ScalerChoice};
pub use backend::{Embedder, StoreEmbedder, TextEncoder, TokenCache};
pub use config::{BackendConfig, OptimizerConfig, RunConfig, ScalerSettings};
pub use evaluate::{evaluate, evaluate_runs, EvalOptions, Metrics, RunSummary};
pub use synth::{gen_synthetic, gen_text_fixture, KeywordLayout, SynthConfig, SynthData, TextFixtureConfig};
pub use train::{train, EpochLog, TrainOutput};
