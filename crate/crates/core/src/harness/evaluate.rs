//! Episodic evaluation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::backend::Embedder;
use crate::data::{Dataset, EmbeddedEpisode};
use crate::error::{Error, Result};
use crate::metalearners::{classify_pn, compute_prototypes, predict, rrml_fit, rrml_predict, MetaLearner};
use crate::par::{try_map_indexed, Parallelism};
use crate::rng::{stream_rng, Stream};
use crate::sampler::{sample_episode, SamplerConfig};
use crate::scaler::{scale_support_set, ScalerConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub episodes: usize,
    pub scaler: Option<ScalerConfig>,
    pub metalearner: MetaLearner,
    pub classify_temperature: f64,
    /// RNG stream the episodes are drawn from (test or validation).
    pub stream: Stream,
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over episodes (0 for fewer than two).
    pub std: f64,
    pub episodes: usize,
    pub seconds: f64,
}

impl Metrics {
    pub fn from_accuracies(accuracies: Vec<f64>, seconds: f64) -> Self {
        let (mean, std) = mean_std(&accuracies);
        Metrics {
            episodes: accuracies.len(),
            accuracies,
            mean,
            std,
            seconds,
        }
    }
}

/// Mean and sample standard deviation; `(0, 0)` for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Fraction of queries classified correctly, after optional support scaling.
pub fn episode_accuracy(
    episode: &EmbeddedEpisode,
    scaler: Option<&ScalerConfig>,
    metalearner: MetaLearner,
    tau: f64,
) -> Result<f64> {
    episode.check()?;
    let scaled;
    let episode = match scaler {
        Some(cfg) => {
            scaled = scale_support_set(episode, cfg)?;
            &scaled
        }
        None => episode,
    };
    let n_queries: usize = episode.query_reps.iter().map(Vec::len).sum();
    if n_queries == 0 {
        return Err(Error::ShapeMismatch("episode has no queries".into()));
    }
    let mut correct = 0usize;
    match metalearner {
        MetaLearner::Pn => {
            let protos = compute_prototypes(&episode.support_reps)?;
            for (class, queries) in episode.query_reps.iter().enumerate() {
                for q in queries {
                    if predict(&classify_pn(q, &protos, tau)?) == class {
                        correct += 1;
                    }
                }
            }
        }
        MetaLearner::Rrml { lambda } => {
            let mut rows = Vec::new();
            let mut targets = Vec::new();
            for (class, group) in episode.support_reps.iter().enumerate() {
                rows.extend(group.iter().cloned());
                targets.extend(std::iter::repeat_n(class, group.len()));
            }
            let model = rrml_fit(&rows, &targets, episode.n_way(), lambda)?;
            for (class, queries) in episode.query_reps.iter().enumerate() {
                for q in queries {
                    if predict(&rrml_predict(&model, q)?) == class {
                        correct += 1;
                    }
                }
            }
        }
    }
    Ok(correct as f64 / n_queries as f64)
}

/// Draws `opts.episodes` episodes from `classes` (episode `i` from its own
/// RNG stream under `sampler.seed`) and records per-episode accuracy. The
/// result does not depend on the parallelism setting.
pub fn evaluate<E: Embedder + ?Sized>(
    embedder: &E,
    dataset: &Dataset,
    classes: &[String],
    sampler: &SamplerConfig,
    opts: &EvalOptions,
) -> Result<Metrics> {
    sampler.validate()?;
    if let Some(cfg) = &opts.scaler {
        cfg.validate()?;
    }
    let start = Instant::now();
    let accuracies = try_map_indexed(opts.parallelism, opts.episodes, |i| {
        let mut rng = stream_rng(sampler.seed, opts.stream, i as u64);
        let episode = sample_episode(dataset, classes, sampler, &mut rng)?;
        let embedded = embedder.embed_episode(dataset, &episode)?;
        episode_accuracy(
            &embedded,
            opts.scaler.as_ref(),
            opts.metalearner,
            opts.classify_temperature,
        )
    })?;
    Ok(Metrics::from_accuracies(accuracies, start.elapsed().as_secs_f64()))
}

/// Metrics of several seeded runs plus their pooled summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seeds: Vec<u64>,
    pub runs: Vec<Metrics>,
    /// Mean of the per-run means.
    pub mean: f64,
    /// Standard deviation of the per-run means.
    pub std_runs: f64,
    /// Standard deviation over all episodes of all runs.
    pub std_episodes: f64,
}

impl RunSummary {
    pub fn new(seeds: Vec<u64>, runs: Vec<Metrics>) -> Self {
        let means: Vec<f64> = runs.iter().map(|m| m.mean).collect();
        let (mean, std_runs) = mean_std(&means);
        let all: Vec<f64> = runs.iter().flat_map(|m| m.accuracies.iter().copied()).collect();
        let (_, std_episodes) = mean_std(&all);
        RunSummary {
            seeds,
            runs,
            mean,
            std_runs,
            std_episodes,
        }
    }
}

/// Runs [`evaluate`] once per seed.
pub fn evaluate_runs<E: Embedder + ?Sized>(
    embedder: &E,
    dataset: &Dataset,
    classes: &[String],
    sampler: &SamplerConfig,
    seeds: &[u64],
    opts: &EvalOptions,
) -> Result<RunSummary> {
    let runs = seeds
        .iter()
        .map(|&seed| {
            let cfg = SamplerConfig { seed, ..*sampler };
            evaluate(embedder, dataset, classes, &cfg, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunSummary::new(seeds.to_vec(), runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::Vector;

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    fn separable() -> EmbeddedEpisode {
        EmbeddedEpisode {
            class_names: vec!["a".into(), "b".into()],
            support_reps: vec![vec![v(&[1.0, 0.1])], vec![v(&[0.1, 1.0])]],
            query_reps: vec![vec![v(&[2.0, 0.0]), v(&[1.0, 0.3])], vec![v(&[0.0, 1.0])]],
            label_reps: vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])],
        }
    }

    #[test]
    fn separable_episode_is_perfect_for_every_head() {
        let ep = separable();
        for ml in [MetaLearner::Pn, MetaLearner::Rrml { lambda: 0.1 }] {
            for scaler in [None, Some(ScalerConfig::default())] {
                assert_eq!(episode_accuracy(&ep, scaler.as_ref(), ml, 0.1).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn accuracy_counts_queries() {
        let mut ep = separable();
        ep.query_reps[1].push(v(&[1.0, 0.0]));
        let acc = episode_accuracy(&ep, None, MetaLearner::Pn, 0.1).unwrap();
        assert_eq!(acc, 0.75);
    }

    #[test]
    fn mean_std_matches_definition() {
        assert_eq!(mean_std(&[]), (0.0, 0.0));
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let metrics = Metrics::from_accuracies(vec![0.2, 0.4, 0.9], 0.0);
        assert_eq!(metrics.episodes, 3);
        assert!((metrics.mean - 0.5).abs() < 1e-12);
    }
}
