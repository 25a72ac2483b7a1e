//! Datasets, class splits and episode containers.
//!
//! Dataset files are newline-delimited JSON with one `{"text": ..., "label": ...}`
//! object per line. Split files are a JSON object with `train`, `valid` and `test`
//! arrays of label names. Class identity is the exact label string.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSample {
    pub text: String,
    #[serde(rename = "label")]
    pub label_name: String,
}

impl TextSample {
    pub fn new(text: impl Into<String>, label_name: impl Into<String>) -> Result<Self> {
        let sample = TextSample {
            text: text.into(),
            label_name: label_name.into(),
        };
        sample.check()?;
        Ok(sample)
    }

    fn check(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::Data("sample text is empty".into()));
        }
        if self.label_name.is_empty() {
            return Err(Error::Data("label is empty".into()));
        }
        Ok(())
    }
}

/// Samples plus an insertion-ordered index from label name to sample positions.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    samples: Vec<TextSample>,
    index: IndexMap<String, Vec<usize>>,
}

impl Dataset {
    pub fn from_samples(samples: Vec<TextSample>) -> Result<Self> {
        let mut index: IndexMap<String, Vec<usize>> = IndexMap::new();
        for (i, s) in samples.iter().enumerate() {
            s.check()?;
            index.entry(s.label_name.clone()).or_default().push(i);
        }
        Ok(Dataset { samples, index })
    }

    pub fn samples(&self) -> &[TextSample] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &TextSample {
        &self.samples[i]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Label names in first-appearance order.
    pub fn class_names(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    pub fn class_indices(&self, label: &str) -> Option<&[usize]> {
        self.index.get(label).map(Vec::as_slice)
    }

    pub fn num_classes(&self) -> usize {
        self.index.len()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for s in &self.samples {
            let line = serde_json::to_string(s).expect("sample serializes");
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Deserialize)]
struct RawRecord {
    text: Option<String>,
    label: Option<String>,
}

/// Reads a newline-delimited JSON dataset. Blank lines are skipped; any other
/// malformed line fails with its 1-based line number.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(BufReader::new(file))
}

pub fn parse_dataset(reader: impl BufRead) -> Result<Dataset> {
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::MalformedLine {
            line: line_no,
            message,
        };
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let text = raw.text.ok_or_else(|| bad("missing field \"text\"".into()))?;
        let label = raw.label.ok_or_else(|| bad("missing field \"label\"".into()))?;
        let sample = TextSample::new(text, label).map_err(|e| bad(e.to_string()))?;
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::from_samples(samples)
}

/// Disjoint train/valid/test class lists, kept in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSplit {
    #[serde(rename = "train")]
    pub train_classes: Vec<String>,
    #[serde(rename = "valid")]
    pub valid_classes: Vec<String>,
    #[serde(rename = "test")]
    pub test_classes: Vec<String>,
}

impl ClassSplit {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("split file {}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("split serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn partition(&self, part: SplitPart) -> &[String] {
        match part {
            SplitPart::Train => &self.train_classes,
            SplitPart::Valid => &self.valid_classes,
            SplitPart::Test => &self.test_classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitPart {
    Train,
    Valid,
    Test,
}

impl fmt::Display for SplitPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitPart::Train => "train",
            SplitPart::Valid => "valid",
            SplitPart::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitViolation {
    Overlap {
        class: String,
        first: SplitPart,
        second: SplitPart,
    },
    Duplicate {
        class: String,
        part: SplitPart,
    },
    UnknownClass {
        class: String,
        part: SplitPart,
    },
    InsufficientSamples {
        class: String,
        part: SplitPart,
        have: usize,
        need: usize,
    },
    /// A non-empty partition cannot fill an N-way episode.
    TooFewClasses {
        part: SplitPart,
        have: usize,
        need: usize,
    },
}

impl fmt::Display for SplitViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitViolation::Overlap {
                class,
                first,
                second,
            } => write!(f, "split overlap: {class:?} is in both {first} and {second}"),
            SplitViolation::Duplicate { class, part } => {
                write!(f, "duplicate class: {class:?} listed twice in {part}")
            }
            SplitViolation::UnknownClass { class, part } => {
                write!(f, "unknown class: {class:?} in {part} is not in the dataset")
            }
            SplitViolation::InsufficientSamples {
                class,
                part,
                have,
                need,
            } => write!(
                f,
                "insufficient samples: {class:?} in {part} has {have}, needs {need}"
            ),
            SplitViolation::TooFewClasses { part, have, need } => {
                write!(f, "too few classes: {part} has {have}, episodes need {need}")
            }
        }
    }
}

/// Outcome of [`validate_split`]; empty means the split is usable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitReport {
    pub violations: Vec<SplitViolation>,
}

impl SplitReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let msg = self
            .violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::Data(msg))
    }
}

pub fn validate_split(
    dataset: &Dataset,
    split: &ClassSplit,
    n_way: usize,
    k_shot: usize,
    m_query: usize,
) -> SplitReport {
    let need = k_shot + m_query;
    let parts = [SplitPart::Train, SplitPart::Valid, SplitPart::Test];
    let mut violations = Vec::new();
    let mut seen: IndexMap<&str, SplitPart> = IndexMap::new();

    for part in parts {
        let classes = split.partition(part);
        if !classes.is_empty() && classes.len() < n_way {
            violations.push(SplitViolation::TooFewClasses {
                part,
                have: classes.len(),
                need: n_way,
            });
        }
        let mut in_part = HashSet::new();
        for class in classes {
            if !in_part.insert(class.as_str()) {
                violations.push(SplitViolation::Duplicate {
                    class: class.clone(),
                    part,
                });
                continue;
            }
            if let Some(&first) = seen.get(class.as_str()) {
                violations.push(SplitViolation::Overlap {
                    class: class.clone(),
                    first,
                    second: part,
                });
            } else {
                seen.insert(class, part);
            }
            match dataset.class_indices(class) {
                None => violations.push(SplitViolation::UnknownClass {
                    class: class.clone(),
                    part,
                }),
                Some(idx) if idx.len() < need => {
                    violations.push(SplitViolation::InsufficientSamples {
                        class: class.clone(),
                        part,
                        have: idx.len(),
                        need,
                    })
                }
                Some(_) => {}
            }
        }
    }
    SplitReport { violations }
}

/// One N-way K-shot task expressed as dataset sample indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub n_way: usize,
    pub k_shot: usize,
    pub m_query: usize,
    pub class_names: Vec<String>,
    /// `support[c]` holds the K sample indices of class slot `c`.
    pub support: Vec<Vec<usize>>,
    /// `query[c]` holds the M sample indices of class slot `c`.
    pub query: Vec<Vec<usize>>,
}

/// An episode after encoding: vectors grouped by class slot.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedEpisode {
    pub class_names: Vec<String>,
    pub support_reps: Vec<Vec<Vector>>,
    pub query_reps: Vec<Vec<Vector>>,
    pub label_reps: Vec<Vector>,
}

impl EmbeddedEpisode {
    pub fn n_way(&self) -> usize {
        self.class_names.len()
    }

    pub fn dim(&self) -> usize {
        self.label_reps.first().map(Vector::dim).unwrap_or(0)
    }

    /// Checks shapes and that every vector shares one dimension.
    pub fn check(&self) -> Result<()> {
        let n = self.class_names.len();
        if self.support_reps.len() != n || self.query_reps.len() != n || self.label_reps.len() != n
        {
            return Err(Error::ShapeMismatch(format!(
                "episode has {n} classes but {} support groups, {} query groups, {} labels",
                self.support_reps.len(),
                self.query_reps.len(),
                self.label_reps.len()
            )));
        }
        let dim = self.dim();
        let all = self
            .support_reps
            .iter()
            .chain(&self.query_reps)
            .flatten()
            .chain(&self.label_reps);
        for v in all {
            v.check_dim(dim)?;
        }
        Ok(())
    }
}
