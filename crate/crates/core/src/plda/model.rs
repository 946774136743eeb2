//! Frozen topic-term counts and the model file.
//!
//! The model file is a single JSON document:
//!
//! ```text
//! {
//!   "format": "langflow-plda-model",
//!   "version": 1,
//!   "provenance": {...},
//!   "config": {...},                       // training configuration echo
//!   "vocabulary": ["term", ...],           // index = position
//!   "labels": [{"name": "...", "topics": K}, ...],
//!   "background": "background" | null,
//!   "snapshots": S,
//!   "topic_totals": [n, ...],              // one per global topic
//!   "topic_terms": [[[term, n], ...], ...] // sparse rows, one per global topic
//! }
//! ```
//!
//! Global topics are numbered label by label in `labels` order. Counts are
//! sums over the `S` retained snapshots and are stored as exact integers;
//! the averaged count of a cell is `n / S`.

use std::io::{BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::Provenance;

use super::{LabelSpace, PldaConfig};

pub const MODEL_FORMAT: &str = "langflow-plda-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: PldaConfig,
    pub vocabulary: Vec<String>,
    pub space: LabelSpace,
    pub snapshots: u64,
    /// Summed snapshot counts, term-major: `word_topic[w * T + g]`.
    pub(crate) word_topic: Vec<u64>,
    pub(crate) topic_total: Vec<u64>,
    pub provenance: Option<Provenance>,
}

/// Ranked terms of one label: overall, and per latent topic.
#[derive(Debug, Clone, PartialEq)]
pub struct TopTerms {
    pub overall: Vec<(String, f64)>,
    pub by_topic: Vec<Vec<(String, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct LabelEntry {
    name: String,
    topics: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    provenance: Option<Provenance>,
    config: PldaConfig,
    vocabulary: Vec<String>,
    labels: Vec<LabelEntry>,
    background: Option<String>,
    snapshots: u64,
    topic_totals: Vec<u64>,
    topic_terms: Vec<Vec<(u32, u64)>>,
}

impl TrainedModel {
    /// Build from summed counts given topic-major (`topic_terms[g][w]`).
    pub fn from_counts(
        config: PldaConfig,
        vocabulary: Vec<String>,
        space: LabelSpace,
        snapshots: u64,
        topic_terms: &[Vec<u64>],
    ) -> Result<Self> {
        let t = space.total_topics();
        let v = vocabulary.len();
        if topic_terms.len() != t || topic_terms.iter().any(|row| row.len() != v) {
            return Err(Error::Data(format!("count matrix must be {t} topics x {v} terms")));
        }
        if snapshots == 0 {
            return Err(Error::Data("snapshot count must be positive".into()));
        }
        let mut word_topic = vec![0u64; v * t];
        let mut topic_total = vec![0u64; t];
        for (g, row) in topic_terms.iter().enumerate() {
            for (w, &n) in row.iter().enumerate() {
                word_topic[w * t + g] = n;
                topic_total[g] += n;
            }
        }
        Ok(TrainedModel {
            config,
            vocabulary,
            space,
            snapshots,
            word_topic,
            topic_total,
            provenance: None,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn total_topics(&self) -> usize {
        self.space.total_topics()
    }

    /// Averaged count of term `w` in global topic `g`.
    pub fn n_term(&self, g: usize, w: usize) -> f64 {
        self.word_topic[w * self.total_topics() + g] as f64 / self.snapshots as f64
    }

    /// Averaged token total of global topic `g`.
    pub fn n_topic(&self, g: usize) -> f64 {
        self.topic_total[g] as f64 / self.snapshots as f64
    }

    /// `(n_term + eta) / (n_topic + V * eta)`.
    pub fn beta(&self, g: usize, w: usize) -> f64 {
        let eta = self.config.eta;
        (self.n_term(g, w) + eta) / (self.n_topic(g) + self.vocab_size() as f64 * eta)
    }

    pub fn beta_row(&self, g: usize) -> Vec<f64> {
        (0..self.vocab_size()).map(|w| self.beta(g, w)).collect()
    }

    /// Top `n` terms of a label overall (by summed topic-term mass) and per
    /// latent topic (by `beta`). Ties go to the lower term index.
    pub fn top_terms(&self, label: &str, n: usize) -> Result<TopTerms> {
        let l = self.space.index_of(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        let v = self.vocab_size();
        let n = n.min(v);
        let rank = |scores: Vec<f64>| -> Vec<(String, f64)> {
            let mut idx: Vec<usize> = (0..v).collect();
            idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            idx.into_iter()
                .take(n)
                .map(|w| (self.vocabulary[w].clone(), scores[w]))
                .collect()
        };
        let topics = self.space.topics(l);
        let overall: Vec<f64> = (0..v)
            .map(|w| topics.clone().map(|g| self.n_term(g, w)).sum())
            .collect();
        Ok(TopTerms {
            overall: rank(overall),
            by_topic: topics.map(|g| rank(self.beta_row(g))).collect(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let t = self.total_topics();
        let v = self.vocab_size();
        let mut topic_terms: Vec<Vec<(u32, u64)>> = vec![Vec::new(); t];
        for w in 0..v {
            for (g, row) in topic_terms.iter_mut().enumerate() {
                let n = self.word_topic[w * t + g];
                if n > 0 {
                    row.push((w as u32, n));
                }
            }
        }
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            provenance: self.provenance.clone(),
            config: self.config.clone(),
            vocabulary: self.vocabulary.clone(),
            labels: (0..self.space.len())
                .map(|l| LabelEntry {
                    name: self.space.name(l).to_string(),
                    topics: self.space.topic_count(l),
                })
                .collect(),
            background: self.space.background().map(|b| self.space.name(b).to_string()),
            snapshots: self.snapshots,
            topic_totals: self.topic_total.clone(),
            topic_terms,
        };
        let mut out = crate::tsv::create(path)?;
        serde_json::to_writer(&mut out, &file).map_err(|e| Error::io(path, e.into()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Data(format!(
                "{}: unsupported model format {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        let space = LabelSpace::new(
            file.labels.into_iter().map(|e| (e.name, e.topics)).collect(),
            file.background.as_deref(),
        )?;
        let t = space.total_topics();
        let v = file.vocabulary.len();
        if file.topic_terms.len() != t || file.topic_totals.len() != t {
            return Err(Error::Data(format!("{}: expected {t} topic rows", path.display())));
        }
        let mut word_topic = vec![0u64; v * t];
        for (g, row) in file.topic_terms.iter().enumerate() {
            let mut sum = 0u64;
            for &(w, n) in row {
                if w as usize >= v {
                    return Err(Error::Data(format!("{}: term {w} out of range", path.display())));
                }
                word_topic[w as usize * t + g] = n;
                sum += n;
            }
            if sum != file.topic_totals[g] {
                return Err(Error::Data(format!(
                    "{}: topic {g} term counts sum to {sum}, total says {}",
                    path.display(),
                    file.topic_totals[g]
                )));
            }
        }
        if file.snapshots == 0 {
            return Err(Error::Data(format!("{}: zero snapshots", path.display())));
        }
        Ok(TrainedModel {
            config: file.config,
            vocabulary: file.vocabulary,
            space,
            snapshots: file.snapshots,
            word_topic,
            topic_total: file.topic_totals,
            provenance: file.provenance,
        })
    }
}
