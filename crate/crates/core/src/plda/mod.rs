//! Partially labeled Dirichlet allocation.
//!
//! Every label owns a block of latent topics. During training a token may
//! only be assigned to a topic owned by one of its document's observed
//! labels; during inference the restriction is lifted and the trained
//! topic-term counts are held fixed, so the per-document label mixture
//! measures how much of a document's language each label explains.

mod infer;
mod model;
mod state;
mod train;

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{LabelTaxonomy, Tier};

pub use infer::{infer, read_attributions, write_attributions, AttributionResult, DocAttribution, InferOptions, PSI_FLOOR};
pub use model::{TopTerms, TrainedModel, MODEL_FORMAT, MODEL_VERSION};
pub use state::{conditional_weight, init_state, ModelState};
pub use train::{train, train_with_state};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PldaConfig {
    /// Topics owned by each non-background label.
    pub topics_per_label: usize,
    pub background_topics: usize,
    /// Per-label topic counts overriding `topics_per_label`.
    pub topic_overrides: BTreeMap<String, usize>,
    /// Document-topic smoothing.
    pub alpha: f64,
    /// Topic-term smoothing.
    pub eta: f64,
    pub sweeps: usize,
    pub burn_in: usize,
    /// Sweeps between retained count snapshots.
    pub lag: usize,
    pub infer_sweeps: usize,
    pub infer_burn_in: usize,
    pub seed: u64,
    /// Training workers; 1 is exact sequential Gibbs.
    pub threads: usize,
}

impl Default for PldaConfig {
    fn default() -> Self {
        PldaConfig {
            topics_per_label: 12,
            background_topics: 1,
            topic_overrides: BTreeMap::new(),
            alpha: 0.1,
            eta: 0.01,
            sweeps: 1000,
            burn_in: 500,
            lag: 10,
            infer_sweeps: 200,
            infer_burn_in: 100,
            seed: 0,
            threads: 1,
        }
    }
}

impl PldaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if self.sweeps <= self.burn_in {
            return bad("sweeps must exceed burn-in");
        }
        if self.lag < 1 {
            return bad("lag must be at least 1");
        }
        if self.infer_sweeps <= self.infer_burn_in {
            return bad("inference sweeps must exceed inference burn-in");
        }
        if self.topics_per_label < 1 || self.background_topics < 1 {
            return bad("every label needs at least one topic");
        }
        if self.topic_overrides.values().any(|&k| k < 1) {
            return bad("topic overrides must be at least 1");
        }
        if self.threads < 1 {
            return bad("threads must be at least 1");
        }
        Ok(())
    }

    /// Number of retained snapshots for this schedule.
    pub fn snapshot_count(&self) -> usize {
        (self.sweeps - self.burn_in - 1) / self.lag + 1
    }

    /// Whether the snapshot is taken after sweep `s` (1-based). Snapshots
    /// are aligned to the final sweep.
    pub fn is_snapshot_sweep(&self, s: usize) -> bool {
        s > self.burn_in && (self.sweeps - s).is_multiple_of(self.lag)
    }
}

/// The full label set `L` with each label's topic block. Global topic ids
/// are contiguous per label, in label order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    names: Vec<String>,
    offsets: Vec<usize>,
    topic_label: Vec<u32>,
    background: Option<usize>,
    index: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn new(labels: Vec<(String, usize)>, background: Option<&str>) -> Result<Self> {
        let mut names = Vec::with_capacity(labels.len());
        let mut offsets = vec![0];
        let mut topic_label = Vec::new();
        let mut index = HashMap::new();
        for (i, (name, k)) in labels.into_iter().enumerate() {
            if k < 1 {
                return Err(Error::Config(format!("label {name} has no topics")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate label {name}")));
            }
            names.push(name);
            topic_label.extend(std::iter::repeat_n(i as u32, k));
            offsets.push(topic_label.len());
        }
        let background = match background {
            Some(b) => Some(*index.get(b).ok_or_else(|| Error::UnknownLabel(b.to_string()))?),
            None => None,
        };
        Ok(LabelSpace {
            names,
            offsets,
            topic_label,
            background,
            index,
        })
    }

    /// Tier labels with `topics_per_label` topics each (subject to
    /// overrides), followed by the background label.
    pub fn from_taxonomy(taxonomy: &LabelTaxonomy, tier: Tier, config: &PldaConfig) -> Result<Self> {
        let mut labels: Vec<(String, usize)> = taxonomy
            .labels(tier)
            .iter()
            .map(|l| {
                let k = config.topic_overrides.get(l).copied().unwrap_or(config.topics_per_label);
                (l.clone(), k)
            })
            .collect();
        let bg = taxonomy.background();
        let k = config.topic_overrides.get(bg).copied().unwrap_or(config.background_topics);
        labels.push((bg.to_string(), k));
        LabelSpace::new(labels, Some(bg))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, label: usize) -> &str {
        &self.names[label]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn background(&self) -> Option<usize> {
        self.background
    }

    pub fn total_topics(&self) -> usize {
        self.topic_label.len()
    }

    pub fn topics(&self, label: usize) -> Range<usize> {
        self.offsets[label]..self.offsets[label + 1]
    }

    pub fn topic_count(&self, label: usize) -> usize {
        self.offsets[label + 1] - self.offsets[label]
    }

    /// Global topic id of `(label, k)`, `k` zero-based.
    pub fn topic(&self, label: usize, k: usize) -> usize {
        debug_assert!(k < self.topic_count(label));
        self.offsets[label] + k
    }

    pub fn label_of(&self, topic: usize) -> usize {
        self.topic_label[topic] as usize
    }

    /// `(label, k)` of a global topic id.
    pub fn split(&self, topic: usize) -> (usize, usize) {
        let l = self.label_of(topic);
        (l, topic - self.offsets[l])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_space(labels: usize, k: usize) -> LabelSpace {
        let mut v: Vec<(String, usize)> = (0..labels).map(|i| (format!("l{i}"), k)).collect();
        v.push(("background".into(), 1));
        LabelSpace::new(v, Some("background")).unwrap()
    }

    #[test]
    fn topic_totals_for_paper_scale_families() {
        assert_eq!(uniform_space(69, 12).total_topics(), 829);
        assert_eq!(uniform_space(268, 16).total_topics(), 4289);
    }

    #[test]
    fn topic_ids_round_trip() {
        let s = LabelSpace::new(vec![("a".into(), 2), ("b".into(), 3), ("bg".into(), 1)], Some("bg")).unwrap();
        assert_eq!(s.topics(1), 2..5);
        assert_eq!(s.split(4), (1, 2));
        assert_eq!(s.topic(2, 0), 5);
        assert_eq!(s.background(), Some(2));
    }

    #[test]
    fn config_validation() {
        assert!(PldaConfig::default().validate().is_ok());
        let bad = [
            PldaConfig { alpha: 0.0, ..Default::default() },
            PldaConfig { eta: -1.0, ..Default::default() },
            PldaConfig { sweeps: 10, burn_in: 10, ..Default::default() },
            PldaConfig { lag: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn snapshot_schedule_is_end_aligned() {
        let c = PldaConfig { sweeps: 1000, burn_in: 500, lag: 10, ..Default::default() };
        let taken: Vec<usize> = (1..=1000).filter(|&s| c.is_snapshot_sweep(s)).collect();
        assert_eq!(taken.len(), c.snapshot_count());
        assert_eq!(taken.len(), 50);
        assert_eq!(*taken.last().unwrap(), 1000);
        let c = PldaConfig { sweeps: 5, burn_in: 4, lag: 10, ..Default::default() };
        assert_eq!((1..=5).filter(|&s| c.is_snapshot_sweep(s)).count(), 1);
    }
}
