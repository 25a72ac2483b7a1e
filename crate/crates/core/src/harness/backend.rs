//! Sources of episode embeddings.

use std::collections::HashMap;
use std::path::Path;

use crate::data::{ClassSplit, Dataset, EmbeddedEpisode, Episode};
use crate::encoder::{EmbeddingStore, EncoderParams, PromptTemplate, TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::vector::Vector;

pub trait Embedder: Sync {
    fn dim(&self) -> usize;

    fn embed_episode(&self, dataset: &Dataset, episode: &Episode) -> Result<EmbeddedEpisode>;
}

/// Builds the training vocabulary: prompted training-split texts, every
/// label name in the dataset, and the template's own tokens.
pub fn build_vocabulary(dataset: &Dataset, split: &ClassSplit, template: &PromptTemplate) -> Vocabulary {
    let fixed = template.fixed_text();
    let mut texts: Vec<String> = vec![fixed];
    for class in &split.train_classes {
        if let Some(indices) = dataset.class_indices(class) {
            texts.extend(indices.iter().map(|&i| template.apply(&dataset.sample(i).text)));
        }
    }
    texts.extend(dataset.class_names().map(str::to_owned));
    Vocabulary::build(texts.iter().map(String::as_str))
}

/// Token ids of every prompted sample and every label name in a dataset.
#[derive(Debug, Clone)]
pub struct TokenCache {
    samples: Vec<Vec<TokenId>>,
    labels: HashMap<String, Vec<TokenId>>,
}

impl TokenCache {
    pub fn new(dataset: &Dataset, vocab: &Vocabulary, template: &PromptTemplate) -> Result<Self> {
        let samples = dataset
            .samples()
            .iter()
            .map(|s| vocab.tokenize(&template.apply(&s.text)))
            .collect();
        let labels = dataset
            .class_names()
            .map(|name| {
                let ids = vocab.tokenize(name);
                if ids.is_empty() {
                    return Err(Error::Data(format!("label {name:?} has no tokens")));
                }
                Ok((name.to_owned(), ids))
            })
            .collect::<Result<_>>()?;
        Ok(TokenCache { samples, labels })
    }

    pub fn sample(&self, i: usize) -> &[TokenId] {
        &self.samples[i]
    }

    pub fn label(&self, name: &str) -> Result<&[TokenId]> {
        self.labels
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Data(format!("no tokens for label {name:?}")))
    }
}

/// Trainable mean-pooled encoder bound to one dataset's token cache.
#[derive(Debug, Clone)]
pub struct TextEncoder<'a> {
    pub params: &'a EncoderParams,
    pub tokens: &'a TokenCache,
}

impl TextEncoder<'_> {
    pub fn encode_group(&self, indices: &[usize]) -> Result<Vec<Vector>> {
        indices
            .iter()
            .map(|&i| self.params.encode_text(self.tokens.sample(i)))
            .collect()
    }
}

impl Embedder for TextEncoder<'_> {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn embed_episode(&self, _dataset: &Dataset, episode: &Episode) -> Result<EmbeddedEpisode> {
        let support_reps = episode
            .support
            .iter()
            .map(|g| self.encode_group(g))
            .collect::<Result<_>>()?;
        let query_reps = episode
            .query
            .iter()
            .map(|g| self.encode_group(g))
            .collect::<Result<_>>()?;
        let label_reps = episode
            .class_names
            .iter()
            .map(|name| self.params.encode_text(self.tokens.label(name)?))
            .collect::<Result<_>>()?;
        Ok(EmbeddedEpisode {
            class_names: episode.class_names.clone(),
            support_reps,
            query_reps,
            label_reps,
        })
    }
}

/// Precomputed vectors: samples keyed by decimal dataset index, labels by name.
#[derive(Debug, Clone)]
pub struct StoreEmbedder {
    pub samples: EmbeddingStore,
    pub labels: EmbeddingStore,
}

impl StoreEmbedder {
    pub fn new(samples: EmbeddingStore, labels: EmbeddingStore) -> Result<Self> {
        if samples.dim() != labels.dim() {
            return Err(Error::DimMismatch {
                expected: samples.dim(),
                got: labels.dim(),
            });
        }
        Ok(StoreEmbedder { samples, labels })
    }

    pub fn load(samples: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Self> {
        StoreEmbedder::new(EmbeddingStore::load(samples)?, EmbeddingStore::load(labels)?)
    }

    fn sample(&self, i: usize) -> Result<Vector> {
        self.samples
            .get(&i.to_string())
            .cloned()
            .ok_or_else(|| Error::Data(format!("missing embedding for sample {i}")))
    }

    /// Fails if any sample or label of `classes` has no stored vector.
    pub fn check_coverage(&self, dataset: &Dataset, classes: &[String]) -> Result<()> {
        for class in classes {
            if self.labels.get(class).is_none() {
                return Err(Error::Data(format!("missing embedding for class {class:?}")));
            }
            for &i in dataset.class_indices(class).unwrap_or(&[]) {
                self.sample(i)?;
            }
        }
        Ok(())
    }
}

impl Embedder for StoreEmbedder {
    fn dim(&self) -> usize {
        self.samples.dim()
    }

    fn embed_episode(&self, _dataset: &Dataset, episode: &Episode) -> Result<EmbeddedEpisode> {
        let group = |g: &Vec<usize>| g.iter().map(|&i| self.sample(i)).collect::<Result<Vec<_>>>();
        Ok(EmbeddedEpisode {
            class_names: episode.class_names.clone(),
            support_reps: episode.support.iter().map(group).collect::<Result<_>>()?,
            query_reps: episode.query.iter().map(group).collect::<Result<_>>()?,
            label_reps: episode
                .class_names
                .iter()
                .map(|name| {
                    self.labels
                        .get(name)
                        .cloned()
                        .ok_or_else(|| Error::Data(format!("missing embedding for class {name:?}")))
                })
                .collect::<Result<_>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TextSample;

    fn dataset() -> (Dataset, ClassSplit) {
        let samples = vec![
            TextSample::new("goal scored", "sports").unwrap(),
            TextSample::new("match won", "sports").unwrap(),
            TextSample::new("rates rise", "business news").unwrap(),
            TextSample::new("hidden words", "science").unwrap(),
        ];
        let split = ClassSplit {
            train_classes: vec!["sports".into(), "business news".into()],
            valid_classes: vec![],
            test_classes: vec!["science".into()],
        };
        (Dataset::from_samples(samples).unwrap(), split)
    }

    #[test]
    fn vocabulary_covers_train_labels_and_template() {
        let (d, s) = dataset();
        let v = build_vocabulary(&d, &s, &PromptTemplate::default());
        for w in ["this", "is", "a", "news", "goal", "rates", "business", "science"] {
            assert!(v.id(w).is_some(), "{w}");
        }
        assert!(v.id("hidden").is_none());
        let t = PromptTemplate::default();
        let cache = TokenCache::new(&d, &v, &t).unwrap();
        let ids = cache.sample(3);
        assert_eq!(ids.iter().filter(|&&i| i == crate::encoder::UNK).count(), 2);
        assert_eq!(cache.label("business news").unwrap().len(), 2);
    }

    #[test]
    fn store_embedder_reports_missing_vectors() {
        let (d, s) = dataset();
        let mut samples = EmbeddingStore::new(2);
        let mut labels = EmbeddingStore::new(2);
        for i in 0..3 {
            samples.insert(i.to_string(), Vector::new(vec![i as f64, 1.0]).unwrap()).unwrap();
        }
        labels.insert("sports", Vector::new(vec![1.0, 0.0]).unwrap()).unwrap();
        labels.insert("business news", Vector::new(vec![0.0, 1.0]).unwrap()).unwrap();
        let e = StoreEmbedder::new(samples, labels).unwrap();
        e.check_coverage(&d, &s.train_classes).unwrap();
        assert!(e.check_coverage(&d, &s.test_classes).is_err());
        assert!(StoreEmbedder::new(EmbeddingStore::new(2), EmbeddingStore::new(3)).is_err());
    }
}
