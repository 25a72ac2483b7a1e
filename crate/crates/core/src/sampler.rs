//! N-way K-shot episode sampling.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{Dataset, Episode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub n_way: usize,
    pub k_shot: usize,
    pub m_query: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_way < 2 || self.k_shot < 1 || self.m_query < 1 {
            return Err(Error::Config(format!(
                "need n_way >= 2, k_shot >= 1, m_query >= 1; got {}/{}/{}",
                self.n_way, self.k_shot, self.m_query
            )));
        }
        Ok(())
    }
}

/// Draws N classes uniformly without replacement from `class_pool`, then for
/// each class K support and M query samples without replacement. Both draws are
/// partial Fisher-Yates shuffles, so cost is linear in N and K + M.
pub fn sample_episode<R: Rng + ?Sized>(
    dataset: &Dataset,
    class_pool: &[String],
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Episode> {
    cfg.validate()?;
    if class_pool.len() < cfg.n_way {
        return Err(Error::Data(format!(
            "class pool has {} classes, episode needs {}",
            class_pool.len(),
            cfg.n_way
        )));
    }
    if class_pool.iter().collect::<HashSet<_>>().len() != class_pool.len() {
        return Err(Error::Data("class pool contains duplicate names".into()));
    }
    let mut pool: Vec<&String> = class_pool.iter().collect();
    let (chosen, _) = pool.partial_shuffle(rng, cfg.n_way);

    let per_class = cfg.k_shot + cfg.m_query;
    let mut class_names = Vec::with_capacity(cfg.n_way);
    let mut support = Vec::with_capacity(cfg.n_way);
    let mut query = Vec::with_capacity(cfg.n_way);
    for &name in chosen.iter() {
        let indices = dataset
            .class_indices(name)
            .ok_or_else(|| Error::Data(format!("class {name:?} not in dataset")))?;
        if indices.len() < per_class {
            return Err(Error::Data(format!(
                "class {name:?} has {} samples, episode needs {per_class}",
                indices.len()
            )));
        }
        let mut idx = indices.to_vec();
        let (picked, _) = idx.partial_shuffle(rng, per_class);
        support.push(picked[..cfg.k_shot].to_vec());
        query.push(picked[cfg.k_shot..].to_vec());
        class_names.push(name.clone());
    }
    Ok(Episode {
        n_way: cfg.n_way,
        k_shot: cfg.k_shot,
        m_query: cfg.m_query,
        class_names,
        support,
        query,
    })
}
