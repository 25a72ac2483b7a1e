//! Synthetic fixtures: Gaussian class clusters with label vectors, and a small
//! keyword text corpus for end-to-end training.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ClassSplit, Dataset, TextSample};
use crate::encoder::EmbeddingStore;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Rng, Stream};
use crate::vector::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub dim: usize,
    /// Radius of the sphere the class means are drawn on.
    pub mean_scale: f64,
    pub within_sigma: f64,
    /// Standard deviation of each label vector around its class mean.
    pub label_sigma: f64,
    pub samples_per_class: usize,
    #[serde(default)]
    pub seed: u64,
    /// The first `train_classes` classes go to the training split, the next
    /// `valid_classes` to validation and the rest to test.
    #[serde(default)]
    pub train_classes: usize,
    #[serde(default)]
    pub valid_classes: usize,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_classes > 0
            && self.dim > 0
            && self.samples_per_class > 0
            && self.mean_scale > 0.0
            && self.mean_scale.is_finite()
            && self.within_sigma >= 0.0
            && self.within_sigma.is_finite()
            && self.label_sigma >= 0.0
            && self.label_sigma.is_finite()
            && self.train_classes + self.valid_classes <= self.n_classes;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid synthetic config {self:?}")))
        }
    }
}

/// Output of [`gen_synthetic`]. Sample keys are decimal dataset indices and
/// label keys are class names, the layout a precomputed backend expects.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub samples: EmbeddingStore,
    pub labels: EmbeddingStore,
    pub dataset: Dataset,
    pub split: ClassSplit,
    pub class_means: Vec<Vector>,
}

pub fn class_name(c: usize) -> String {
    format!("class_{c:03}")
}

fn gaussian(rng: &mut Rng, dim: usize, sigma: f64) -> Vec<f64> {
    (0..dim).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn offset(center: &Vector, noise: Vec<f64>) -> Result<Vector> {
    Vector::new(center.iter().zip(noise).map(|(c, e)| c + e).collect())
}

/// Class means uniform on a sphere of radius `mean_scale`, samples
/// `mean + N(0, within_sigma^2 I)`, labels `mean + N(0, label_sigma^2 I)`.
/// Samples are stored class by class.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Synth, 0);
    let mut class_means = Vec::with_capacity(cfg.n_classes);
    for _ in 0..cfg.n_classes {
        let mut dir = gaussian(&mut rng, cfg.dim, 1.0);
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Numerical("degenerate class direction".into()));
        }
        dir.iter_mut().for_each(|x| *x *= cfg.mean_scale / norm);
        class_means.push(Vector::new(dir)?);
    }

    let mut labels = EmbeddingStore::new(cfg.dim);
    let mut samples = EmbeddingStore::new(cfg.dim);
    let mut texts = Vec::with_capacity(cfg.n_classes * cfg.samples_per_class);
    for (c, mean) in class_means.iter().enumerate() {
        let name = class_name(c);
        let noise = gaussian(&mut rng, cfg.dim, cfg.label_sigma);
        labels.insert(name.clone(), offset(mean, noise)?)?;
        for _ in 0..cfg.samples_per_class {
            let key = texts.len().to_string();
            let noise = gaussian(&mut rng, cfg.dim, cfg.within_sigma);
            samples.insert(key, offset(mean, noise)?)?;
            texts.push(TextSample::new(format!("sample {}", texts.len()), name.clone())?);
        }
    }

    let names: Vec<String> = (0..cfg.n_classes).map(class_name).collect();
    let valid_end = cfg.train_classes + cfg.valid_classes;
    let split = ClassSplit {
        train_classes: names[..cfg.train_classes].to_vec(),
        valid_classes: names[cfg.train_classes..valid_end].to_vec(),
        test_classes: names[valid_end..].to_vec(),
    };
    Ok(SynthData {
        samples,
        labels,
        dataset: Dataset::from_samples(texts)?,
        split,
        class_means,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordLayout {
    /// Each keyword stands for a pair of training classes and occurs in both.
    /// Held-out class `i` takes the keywords of pairs `{i, i + s}` (test) or
    /// `{i, i - s}` (validation) for `s = 1..=(n - 1) / 2`, so every held-out
    /// class is a new combination of words whose rows training has shaped.
    /// Needs an odd number of training classes `n >= 3` and exactly `n` test
    /// classes; validation has `0` or `n`.
    Compositional,
    /// Every class gets `keywords_per_class` keywords of its own. Held-out
    /// keywords never occur in training texts.
    Disjoint,
}

/// Keyword corpus. Samples mix class keywords with shared filler words, and
/// every class is named by its keywords.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextFixtureConfig {
    pub train_classes: usize,
    pub valid_classes: usize,
    pub test_classes: usize,
    pub layout: KeywordLayout,
    /// Used by the disjoint layout only.
    pub keywords_per_class: usize,
    pub samples_per_class: usize,
    pub words_per_sample: usize,
    /// Probability that a word of a sample is one of its class keywords.
    pub keyword_rate: f64,
    pub filler_words: usize,
    pub seed: u64,
}

impl Default for TextFixtureConfig {
    fn default() -> Self {
        TextFixtureConfig {
            train_classes: 5,
            valid_classes: 5,
            test_classes: 5,
            layout: KeywordLayout::Compositional,
            keywords_per_class: 2,
            samples_per_class: 40,
            words_per_sample: 8,
            keyword_rate: 0.5,
            filler_words: 30,
            seed: 0,
        }
    }
}

const TOPIC_WORDS: [&str; 24] = [
    "market", "stock", "game", "team", "film", "music", "health", "doctor", "court", "police",
    "storm", "rain", "school", "exam", "rocket", "planet", "recipe", "chef", "flight", "hotel",
    "election", "senate", "phone", "software",
];

fn keyword(i: usize) -> String {
    match TOPIC_WORDS.get(i) {
        Some(w) => (*w).to_owned(),
        None => format!("topic{i}"),
    }
}

/// Keyword sets per split: train, valid, test.
type Layout = [Vec<Vec<String>>; 3];

fn compositional(cfg: &TextFixtureConfig, rng: &mut Rng) -> Result<Layout> {
    let n = cfg.train_classes;
    if n < 3 || n % 2 == 0 || cfg.test_classes != n || (cfg.valid_classes != 0 && cfg.valid_classes != n) {
        return Err(Error::Config(format!(
            "compositional layout needs an odd train count >= 3, test = train and valid in {{0, train}}; got {}/{}/{}",
            n, cfg.valid_classes, cfg.test_classes
        )));
    }
    let mut names: Vec<String> = (0..n * (n - 1) / 2).map(keyword).collect();
    names.shuffle(rng);
    // index of the unordered pair {a, b} in row-major upper-triangle order
    let pair = |a: usize, b: usize| -> &str {
        let (i, j) = (a.min(b), a.max(b));
        &names[i * n - i * (i + 1) / 2 + (j - i - 1)]
    };
    let half = (n - 1) / 2;
    let train = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| pair(i, j).to_owned()).collect())
        .collect();
    let held_out = |sign: isize| -> Vec<Vec<String>> {
        (0..n)
            .map(|i| {
                (1..=half)
                    .map(|s| {
                        let j = (i as isize + sign * s as isize).rem_euclid(n as isize) as usize;
                        pair(i, j).to_owned()
                    })
                    .collect()
            })
            .collect()
    };
    let valid = if cfg.valid_classes == 0 { Vec::new() } else { held_out(-1) };
    Ok([train, valid, held_out(1)])
}

fn disjoint(cfg: &TextFixtureConfig) -> Layout {
    let mut next = 0;
    let mut part = |count: usize| -> Vec<Vec<String>> {
        (0..count)
            .map(|_| {
                (0..cfg.keywords_per_class)
                    .map(|_| {
                        next += 1;
                        keyword(next - 1)
                    })
                    .collect()
            })
            .collect()
    };
    [part(cfg.train_classes), part(cfg.valid_classes), part(cfg.test_classes)]
}

pub fn gen_text_fixture(cfg: &TextFixtureConfig) -> Result<(Dataset, ClassSplit)> {
    if cfg.train_classes == 0
        || cfg.test_classes == 0
        || cfg.keywords_per_class == 0
        || cfg.samples_per_class == 0
        || cfg.words_per_sample == 0
        || cfg.filler_words == 0
        || !(0.0..=1.0).contains(&cfg.keyword_rate)
    {
        return Err(Error::Config(format!("invalid text fixture config {cfg:?}")));
    }
    let mut rng = stream_rng(cfg.seed, Stream::Synth, 1);
    let layout = match cfg.layout {
        KeywordLayout::Compositional => compositional(cfg, &mut rng)?,
        KeywordLayout::Disjoint => disjoint(cfg),
    };
    let fillers: Vec<String> = (0..cfg.filler_words).map(|i| format!("w{i}")).collect();

    let mut samples = Vec::new();
    let mut names: [Vec<String>; 3] = Default::default();
    for (part, classes) in layout.iter().enumerate() {
        for keywords in classes {
            let mut sorted = keywords.clone();
            sorted.sort();
            let label = sorted.join(" ");
            for _ in 0..cfg.samples_per_class {
                let words: Vec<&str> = (0..cfg.words_per_sample)
                    .map(|_| {
                        if rng.random::<f64>() < cfg.keyword_rate {
                            keywords[rng.random_range(0..keywords.len())].as_str()
                        } else {
                            fillers[rng.random_range(0..fillers.len())].as_str()
                        }
                    })
                    .collect();
                samples.push(TextSample::new(words.join(" "), label.clone())?);
            }
            names[part].push(label);
        }
    }
    let [train_classes, valid_classes, test_classes] = names;
    Ok((
        Dataset::from_samples(samples)?,
        ClassSplit {
            train_classes,
            valid_classes,
            test_classes,
        },
    ))
}
