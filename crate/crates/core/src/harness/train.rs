//! Episodic training of the token-embedding encoder.

use serde::{Deserialize, Serialize};

use super::backend::{build_vocabulary, TextEncoder, TokenCache};
use super::config::{BackendConfig, RunConfig};
use super::evaluate::{episode_accuracy, evaluate, EvalOptions};
use super::optimizer::Adam;
use crate::data::{validate_split, ClassSplit, Dataset, Episode};
use crate::encoder::{EncoderParams, PromptTemplate, TableGrad, TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::losses::{loss_all, loss_ce, loss_lg, LossConfig, LossKind, LossResult};
use crate::par::Parallelism;
use crate::rng::{stream_rng, Stream};
use crate::sampler::sample_episode;
use crate::vector::Vector;

/// Token lists of one episode, grouped like [`Episode`].
#[derive(Debug, Clone)]
pub struct EpisodeTokens<'a> {
    pub support: Vec<Vec<&'a [TokenId]>>,
    pub query: Vec<Vec<&'a [TokenId]>>,
    pub labels: Vec<&'a [TokenId]>,
}

impl<'a> EpisodeTokens<'a> {
    pub fn from_episode(tokens: &'a TokenCache, episode: &Episode) -> Result<Self> {
        let group = |g: &Vec<usize>| g.iter().map(|&i| tokens.sample(i)).collect();
        Ok(EpisodeTokens {
            support: episode.support.iter().map(group).collect(),
            query: episode.query.iter().map(group).collect(),
            labels: episode
                .class_names
                .iter()
                .map(|name| tokens.label(name))
                .collect::<Result<_>>()?,
        })
    }
}

fn encode_all(params: &EncoderParams, lists: &[&[TokenId]]) -> Result<Vec<Vector>> {
    lists.iter().map(|ids| params.encode_text(ids)).collect()
}

fn to_vectors(grads: Vec<Vec<f64>>) -> Vec<Vector> {
    grads.into_iter().map(Vector::from_vec_unchecked).collect()
}

/// Forward and backward pass of the configured loss over one episode.
///
/// The label-guided losses see the combined support and query batch. The
/// cross-entropy baseline scores queries against support prototypes, so its
/// prototype gradient reaches each support sample divided by K.
pub fn episode_loss(
    params: &EncoderParams,
    episode: &EpisodeTokens<'_>,
    loss: &LossConfig,
) -> Result<(f64, TableGrad)> {
    let n = episode.labels.len();
    if episode.support.len() != n || episode.query.len() != n {
        return Err(Error::ShapeMismatch("episode groups and labels differ in length".into()));
    }
    let mut inputs: Vec<&[TokenId]> = Vec::new();
    let mut grads: Vec<Vector> = Vec::new();

    let value = match loss.kind {
        LossKind::Lg | LossKind::LgPlusLabel => {
            let mut batch_tokens = Vec::new();
            let mut classes = Vec::new();
            for groups in [&episode.support, &episode.query] {
                for (c, group) in groups.iter().enumerate() {
                    batch_tokens.extend(group.iter().copied());
                    classes.extend(std::iter::repeat_n(c, group.len()));
                }
            }
            let batch = encode_all(params, &batch_tokens)?;
            let labels = encode_all(params, &episode.labels)?;
            let LossResult { value, grad_v, grad_u } = if loss.kind == LossKind::Lg {
                loss_lg(&batch, &classes, &labels, loss.temperature)?
            } else {
                loss_all(&batch, &classes, &labels, loss.temperature)?
            };
            inputs.extend(batch_tokens);
            inputs.extend(episode.labels.iter().copied());
            grads.extend(to_vectors(grad_v));
            grads.extend(to_vectors(grad_u));
            value
        }
        LossKind::Ce => {
            let support = episode
                .support
                .iter()
                .map(|g| encode_all(params, g))
                .collect::<Result<Vec<_>>>()?;
            let prototypes = support
                .iter()
                .map(|g| Vector::mean(g))
                .collect::<Result<Vec<_>>>()?;
            let mut query_tokens = Vec::new();
            let mut classes = Vec::new();
            for (c, group) in episode.query.iter().enumerate() {
                query_tokens.extend(group.iter().copied());
                classes.extend(std::iter::repeat_n(c, group.len()));
            }
            let queries = encode_all(params, &query_tokens)?;
            let r = loss_ce(&queries, &classes, &prototypes, loss.temperature)?;
            inputs.extend(query_tokens);
            grads.extend(to_vectors(r.grad_v));
            for (group, g) in episode.support.iter().zip(&r.grad_u) {
                let share: Vec<f64> = g.iter().map(|x| x / group.len() as f64).collect();
                for &ids in group {
                    inputs.push(ids);
                    grads.push(Vector::from_vec_unchecked(share.clone()));
                }
            }
            r.value
        }
    };
    let table = params.backward(&inputs, &grads)?;
    Ok((value, table))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub valid_accuracy: Option<f64>,
    pub train_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Parameters of the best validation epoch (the last epoch when there is
    /// no validation split; the initial table when `epochs` is 0).
    pub params: EncoderParams,
    pub vocab: Vocabulary,
    pub template: PromptTemplate,
    pub log: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
}

/// Trains the encoder table with Adam, one step per training episode.
pub fn train(
    cfg: &RunConfig,
    dataset: &Dataset,
    split: &ClassSplit,
    parallelism: Parallelism,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let BackendConfig::Trainable { dim, template } = &cfg.backend else {
        return Err(Error::Config("training needs a trainable backend".into()));
    };
    validate_split(dataset, split, cfg.n_way, cfg.k_shot, cfg.m_query).into_result()?;
    if split.train_classes.is_empty() {
        return Err(Error::Data("split has no training classes".into()));
    }
    let template = PromptTemplate::new(template.clone())?;
    let vocab = build_vocabulary(dataset, split, &template);
    let tokens = TokenCache::new(dataset, &vocab, &template)?;
    let mut params = EncoderParams::init(vocab.len(), *dim, &mut stream_rng(cfg.seed, Stream::Init, 0));
    let mut adam = Adam::new(cfg.optimizer, params.table().len());

    let sampler = cfg.sampler(cfg.seed);
    let scaler = cfg.scaler.active();
    let valid_opts = EvalOptions {
        episodes: cfg.valid_episodes,
        scaler,
        metalearner: cfg.metalearner,
        classify_temperature: cfg.classify_temperature,
        stream: Stream::Valid,
        parallelism,
    };

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, EncoderParams)> = None;
    for epoch in 1..=cfg.epochs {
        let mut loss_sum = 0.0;
        let mut acc_sum = 0.0;
        for j in 0..cfg.train_episodes {
            let index = ((epoch - 1) * cfg.train_episodes + j) as u64;
            let mut rng = stream_rng(cfg.seed, Stream::Train, index);
            let episode = sample_episode(dataset, &split.train_classes, &sampler, &mut rng)?;
            let ep_tokens = EpisodeTokens::from_episode(&tokens, &episode)?;
            if cfg.log_train_accuracy {
                let encoder = TextEncoder {
                    params: &params,
                    tokens: &tokens,
                };
                let embedded = super::backend::Embedder::embed_episode(&encoder, dataset, &episode)?;
                acc_sum += episode_accuracy(
                    &embedded,
                    scaler.as_ref(),
                    cfg.metalearner,
                    cfg.classify_temperature,
                )?;
            }
            let (value, grad) = episode_loss(&params, &ep_tokens, &cfg.loss)?;
            if !value.is_finite() || grad.data.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite {} loss at epoch {epoch}, episode {j} (value {value})",
                    cfg.loss.kind.name()
                )));
            }
            loss_sum += value;
            adam.step(params.table_mut(), &grad.data);
        }
        if params.table().iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("embedding table diverged at epoch {epoch}")));
        }

        let valid_accuracy = if split.valid_classes.is_empty() {
            None
        } else {
            let encoder = TextEncoder {
                params: &params,
                tokens: &tokens,
            };
            Some(evaluate(&encoder, dataset, &split.valid_classes, &sampler, &valid_opts)?.mean)
        };
        let score = valid_accuracy.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _, _)| score > *b || valid_accuracy.is_none()) {
            best = Some((score, epoch, params.clone()));
        }
        log.push(EpochLog {
            epoch,
            mean_loss: loss_sum / cfg.train_episodes as f64,
            valid_accuracy,
            train_accuracy: cfg
                .log_train_accuracy
                .then(|| acc_sum / cfg.train_episodes as f64),
        });
    }

    let (params, best_epoch) = match best {
        Some((_, epoch, p)) => (p, Some(epoch)),
        None => (params, None),
    };
    Ok(TrainOutput {
        params,
        vocab,
        template,
        log,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use rand::Rng as _;

    fn random_episode(rng: &mut Rng, vocab: u32, n: usize, k: usize, m: usize) -> Vec<Vec<Vec<TokenId>>> {
        let mut list = |count: usize| -> Vec<Vec<TokenId>> {
            (0..count)
                .map(|_| {
                    let len = rng.random_range(1..5);
                    (0..len).map(|_| rng.random_range(0..vocab)).collect()
                })
                .collect()
        };
        let support = (0..n).flat_map(|_| list(k)).collect();
        let query = (0..n).flat_map(|_| list(m)).collect();
        let labels = list(n);
        vec![support, query, labels]
    }

    fn borrow<'a>(raw: &'a [Vec<Vec<TokenId>>], n: usize, k: usize, m: usize) -> EpisodeTokens<'a> {
        EpisodeTokens {
            support: raw[0].chunks(k).map(|c| c.iter().map(Vec::as_slice).collect()).collect(),
            query: raw[1].chunks(m).map(|c| c.iter().map(Vec::as_slice).collect()).collect(),
            labels: raw[2].iter().take(n).map(Vec::as_slice).collect(),
        }
    }

    #[test]
    fn one_adam_step_lowers_the_episode_loss() {
        for kind in LossKind::ALL {
            let mut rng = stream_rng(11, Stream::Trial, kind as u64);
            let mut params = EncoderParams::init(20, 8, &mut rng);
            for x in params.table_mut() {
                *x *= 40.0;
            }
            let raw = random_episode(&mut rng, 20, 3, 2, 2);
            let ep = borrow(&raw, 3, 2, 2);
            let loss = LossConfig { kind, temperature: 0.5 };
            let (before, grad) = episode_loss(&params, &ep, &loss).unwrap();
            let mut adam = Adam::new(Default::default(), params.table().len());
            adam.step(params.table_mut(), &grad.data);
            let (after, _) = episode_loss(&params, &ep, &loss).unwrap();
            assert!(after < before, "{kind:?}: {after} >= {before}");
        }
    }

    #[test]
    fn ce_ignores_label_tokens() {
        let mut rng = stream_rng(2, Stream::Trial, 0);
        let params = EncoderParams::init(10, 4, &mut rng);
        let raw = vec![
            vec![vec![2, 3], vec![4]],
            vec![vec![3], vec![5, 6]],
            vec![vec![9], vec![8]],
        ];
        let ep = borrow(&raw, 2, 1, 1);
        let loss = LossConfig {
            kind: LossKind::Ce,
            temperature: 0.1,
        };
        let (_, grad) = episode_loss(&params, &ep, &loss).unwrap();
        assert!(grad.row(8).iter().chain(grad.row(9)).all(|&g| g == 0.0));
        assert!(grad.row(2).iter().any(|&g| g != 0.0));
    }
}
