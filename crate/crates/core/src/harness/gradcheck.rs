//! Randomized finite-difference checks of the loss and encoder gradients.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::train::{episode_loss, EpisodeTokens};
use crate::encoder::{EncoderParams, TokenId};
use crate::error::Result;
use crate::losses::{check_loss_inputs, finite_diff_check};
use crate::losses::{loss_all, loss_ce, loss_label, loss_lg, LossConfig, LossKind};
use crate::rng::{stream_rng, Rng, Stream};
use crate::vector::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckSettings {
    pub trials: usize,
    pub n_way: usize,
    pub k_shot: usize,
    pub m_query: usize,
    pub dim: usize,
    /// Standard deviation of the random input coordinates.
    pub scale: f64,
    pub tau: f64,
    pub h: f64,
    pub seed: u64,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        GradcheckSettings {
            trials: 20,
            n_way: 5,
            k_shot: 2,
            m_query: 3,
            dim: 16,
            scale: 0.5,
            tau: 0.5,
            h: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckRow {
    pub target: String,
    pub trials: usize,
    pub max_rel_err: f64,
}

fn random_vectors(rng: &mut Rng, n: usize, dim: usize, scale: f64) -> Result<Vec<Vector>> {
    (0..n)
        .map(|_| Vector::new((0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()))
        .collect()
}

/// Checks `lg`, `label`, `all` and `ce` on `s.trials` random episodes and
/// reports the worst relative error of each.
pub fn loss_gradchecks(s: &GradcheckSettings) -> Result<Vec<GradcheckRow>> {
    let mut worst = [0.0f64; 4];
    for t in 0..s.trials {
        let mut rng = stream_rng(s.seed, Stream::Trial, t as u64);
        let per_class = s.k_shot + s.m_query;
        let labels = random_vectors(&mut rng, s.n_way, s.dim, s.scale)?;
        let samples = random_vectors(&mut rng, s.n_way * per_class, s.dim, s.scale)?;
        let classes: Vec<usize> = (0..s.n_way)
            .flat_map(|c| std::iter::repeat_n(c, per_class))
            .collect();
        let queries = random_vectors(&mut rng, s.n_way * s.m_query, s.dim, s.scale)?;
        let query_classes: Vec<usize> = (0..s.n_way)
            .flat_map(|c| std::iter::repeat_n(c, s.m_query))
            .collect();
        let prototypes = random_vectors(&mut rng, s.n_way, s.dim, s.scale)?;

        let errs = [
            check_loss_inputs(&samples, &labels, |a, b| loss_lg(a, &classes, b, s.tau), s.h)?,
            check_loss_inputs(&[], &labels, |_, b| loss_label(b, s.tau), s.h)?,
            check_loss_inputs(&samples, &labels, |a, b| loss_all(a, &classes, b, s.tau), s.h)?,
            check_loss_inputs(&queries, &prototypes, |a, b| loss_ce(a, &query_classes, b, s.tau), s.h)?,
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    Ok(["lg", "label", "all", "ce"]
        .iter()
        .zip(worst)
        .map(|(name, max_rel_err)| GradcheckRow {
            target: (*name).to_owned(),
            trials: s.trials,
            max_rel_err,
        })
        .collect())
}

const ENCODER_VOCAB: u32 = 24;
const ENCODER_DIM: usize = 8;

/// Token lists for one random episode: support, query, labels.
type RawEpisode = (Vec<Vec<Vec<TokenId>>>, Vec<Vec<Vec<TokenId>>>, Vec<Vec<TokenId>>);

fn random_tokens(rng: &mut Rng) -> Vec<TokenId> {
    let len = rng.random_range(1..=5);
    (0..len).map(|_| rng.random_range(0..ENCODER_VOCAB)).collect()
}

fn random_token_episode(rng: &mut Rng, s: &GradcheckSettings) -> RawEpisode {
    let mut groups = |per: usize| -> Vec<Vec<Vec<TokenId>>> {
        (0..s.n_way)
            .map(|_| (0..per).map(|_| random_tokens(rng)).collect())
            .collect()
    };
    let support = groups(s.k_shot);
    let query = groups(s.m_query);
    let labels = (0..s.n_way).map(|_| random_tokens(rng)).collect();
    (support, query, labels)
}

fn slices(groups: &[Vec<Vec<TokenId>>]) -> Vec<Vec<&[TokenId]>> {
    groups.iter().map(|c| c.iter().map(Vec::as_slice).collect()).collect()
}

/// End-to-end check of the embedding-table gradient for one random instance:
/// random table, random token lists, then every table entry is perturbed.
pub fn encoder_gradcheck(s: &GradcheckSettings, kind: LossKind, instance: u64) -> Result<f64> {
    let mut rng = stream_rng(s.seed, Stream::Trial, (1 << 32) | instance);
    let table: Vec<f64> = (0..ENCODER_VOCAB as usize * ENCODER_DIM)
        .map(|_| s.scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let params = EncoderParams::from_table(ENCODER_VOCAB as usize, ENCODER_DIM, table.clone())?;
    let (support, query, labels) = random_token_episode(&mut rng, s);
    let episode = EpisodeTokens {
        support: slices(&support),
        query: slices(&query),
        labels: labels.iter().map(Vec::as_slice).collect(),
    };
    let loss = LossConfig {
        kind,
        temperature: s.tau,
    };
    let (_, grad) = episode_loss(&params, &episode, &loss)?;
    let mut failure = None;
    let err = finite_diff_check(
        |flat| {
            let p = EncoderParams::from_table(ENCODER_VOCAB as usize, ENCODER_DIM, flat.to_vec())
                .and_then(|p| episode_loss(&p, &episode, &loss));
            match p {
                Ok((value, _)) => value,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        &table,
        &grad.data,
        s.h,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(err),
    }
}

/// [`encoder_gradcheck`] over `instances` instances for every loss kind.
pub fn encoder_gradchecks(s: &GradcheckSettings, instances: usize) -> Result<Vec<GradcheckRow>> {
    LossKind::ALL
        .iter()
        .map(|&kind| {
            let mut worst = 0.0f64;
            for i in 0..instances {
                worst = worst.max(encoder_gradcheck(s, kind, i as u64)?);
            }
            Ok(GradcheckRow {
                target: format!("encoder/{}", kind.name()),
                trials: instances,
                max_rel_err: worst,
            })
        })
        .collect()
}
