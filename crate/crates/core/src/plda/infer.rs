//! Fold-in inference: every document is resampled against the frozen
//! topic-term counts with all labels allowed, and the per-label share of
//! its token assignments is averaged over the retained sweeps.
//!
//! Attribution file (JSON lines): the first line is `{"provenance": ...}`,
//! then one record per document:
//!
//! ```text
//! {"id":"d1","year":1999,"tokens":120,"psi":{"A":0.71,"B":0.2},"background":0.09}
//! {"id":"d2","year":2001,"tokens":0,"skipped":"no tokens in the model vocabulary"}
//! ```
//!
//! `psi` lists non-background labels whose share is at least [`PSI_FLOOR`];
//! readers renormalize so each document's shares sum to one.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::provenance::Provenance;
use crate::rng;

use super::{PldaConfig, TrainedModel};

/// Smallest label share written to an attribution file.
pub const PSI_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct InferOptions {
    pub sweeps: usize,
    pub burn_in: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Keep each token's posterior-mean label distribution.
    pub token_posteriors: bool,
}

impl InferOptions {
    pub fn from_config(config: &PldaConfig) -> Self {
        InferOptions {
            sweeps: config.infer_sweeps,
            burn_in: config.infer_burn_in,
            alpha: config.alpha,
            seed: config.seed,
            token_posteriors: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sweeps <= self.burn_in {
            return Err(Error::Config("inference sweeps must exceed inference burn-in".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        Ok(())
    }
}

/// Attribution of one document. Label and topic vectors are sparse,
/// sorted by index, and omit exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct DocAttribution {
    pub id: String,
    pub year: i32,
    pub tokens: usize,
    /// `(label, share)`; shares sum to one.
    pub psi: Vec<(u32, f64)>,
    /// `(global topic, share)`; empty when read back from a file.
    pub theta: Vec<(u32, f64)>,
    /// Per token, `(label, posterior probability)`.
    pub token_labels: Option<Vec<Vec<(u32, f64)>>>,
}

impl DocAttribution {
    pub fn psi_of(&self, label: usize) -> f64 {
        match self.psi.binary_search_by_key(&(label as u32), |&(l, _)| l) {
            Ok(i) => self.psi[i].1,
            Err(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributionResult {
    pub labels: Vec<String>,
    pub background: Option<usize>,
    pub documents: Vec<DocAttribution>,
    /// `(id, year, reason)` of documents with no attribution.
    pub skipped: Vec<(String, i32, String)>,
}

impl AttributionResult {
    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    pub fn by_id(&self) -> BTreeMap<&str, &DocAttribution> {
        self.documents.iter().map(|d| (d.id.as_str(), d)).collect()
    }
}

const NO_TOKENS: &str = "no tokens in the model vocabulary";

/// Attribute `docs` (already indexed against the model vocabulary).
pub fn infer(model: &TrainedModel, docs: &[Document], options: &InferOptions) -> Result<AttributionResult> {
    options.validate()?;
    let v = model.vocab_size();
    if let Some(d) = docs.iter().find(|d| d.tokens.iter().any(|&w| w as usize >= v)) {
        return Err(Error::Data(format!("document {} has a token outside the model vocabulary", d.id)));
    }
    let t = model.total_topics();
    let eta = model.config.eta;
    let s = model.snapshots as f64;
    let inv_den: Vec<f64> = (0..t).map(|g| 1.0 / (model.n_topic(g) + v as f64 * eta)).collect();

    let results: Vec<Option<DocAttribution>> = docs
        .par_iter()
        .map(|doc| {
            if doc.tokens.is_empty() {
                return None;
            }
            let beta = |w: u32| -> Vec<f64> {
                let row = &model.word_topic[w as usize * t..(w as usize + 1) * t];
                row.iter().zip(&inv_den).map(|(&n, &inv)| (n as f64 / s + eta) * inv).collect()
            };
            Some(fold_in(model, doc, options, &beta))
        })
        .collect();

    let mut documents = Vec::with_capacity(docs.len());
    let mut skipped = Vec::new();
    for (doc, r) in docs.iter().zip(results) {
        match r {
            Some(a) => documents.push(a),
            None => {
                log::warn!("document {}: {NO_TOKENS}; excluded from attribution", doc.id);
                skipped.push((doc.id.clone(), doc.year, NO_TOKENS.to_string()));
            }
        }
    }
    Ok(AttributionResult {
        labels: model.space.names().to_vec(),
        background: model.space.background(),
        documents,
        skipped,
    })
}

fn fold_in(model: &TrainedModel, doc: &Document, options: &InferOptions, beta: &dyn Fn(u32) -> Vec<f64>) -> DocAttribution {
    let t = model.total_topics();
    let space = &model.space;
    let alpha = options.alpha;
    let mut rng = rng::derived(options.seed, &["infer", &doc.id]);

    // β rows for the distinct terms of this document.
    let mut distinct: Vec<u32> = doc.tokens.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let rows: Vec<Vec<f64>> = distinct.iter().map(|&w| beta(w)).collect();
    let row_of: Vec<usize> = doc.tokens.iter().map(|w| distinct.binary_search(w).unwrap()).collect();

    let n = doc.tokens.len();
    let mut counts = vec![0u32; t];
    let mut assign = vec![0usize; n];
    let mut weights = vec![0.0; t];
    let draw = |row: &[f64], counts: &[u32], weights: &mut [f64], rng: &mut rng::Rng| -> usize {
        let mut total = 0.0;
        for g in 0..t {
            let p = row[g] * (counts[g] as f64 + alpha);
            weights[g] = p;
            total += p;
        }
        let u = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        for (g, &p) in weights.iter().enumerate() {
            acc += p;
            if u < acc {
                return g;
            }
        }
        weights.iter().rposition(|&p| p > 0.0).unwrap_or(t - 1)
    };

    // Sequential initialization: each token drawn given those before it.
    for i in 0..n {
        let g = draw(&rows[row_of[i]], &counts, &mut weights, &mut rng);
        assign[i] = g;
        counts[g] += 1;
    }

    let mut topic_acc = vec![0u64; t];
    let mut token_acc: Option<Vec<BTreeMap<u32, u32>>> = options.token_posteriors.then(|| vec![BTreeMap::new(); n]);
    for sweep in 1..=options.sweeps {
        for i in 0..n {
            counts[assign[i]] -= 1;
            let g = draw(&rows[row_of[i]], &counts, &mut weights, &mut rng);
            assign[i] = g;
            counts[g] += 1;
        }
        if sweep > options.burn_in {
            for (acc, &c) in topic_acc.iter_mut().zip(&counts) {
                *acc += c as u64;
            }
            if let Some(tok) = token_acc.as_mut() {
                for (i, &g) in assign.iter().enumerate() {
                    *tok[i].entry(space.label_of(g) as u32).or_insert(0) += 1;
                }
            }
        }
    }

    let samples = (options.sweeps - options.burn_in) as f64;
    let denom = samples * n as f64;
    let theta: Vec<(u32, f64)> = topic_acc
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .map(|(g, &a)| (g as u32, a as f64 / denom))
        .collect();
    let mut label_acc = vec![0u64; space.len()];
    for (g, &a) in topic_acc.iter().enumerate() {
        label_acc[space.label_of(g)] += a;
    }
    let total: u64 = label_acc.iter().sum();
    let psi: Vec<(u32, f64)> = label_acc
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .map(|(l, &a)| (l as u32, a as f64 / total as f64))
        .collect();
    let token_labels = token_acc.map(|tok| {
        tok.into_iter()
            .map(|m| m.into_iter().map(|(l, c)| (l, c as f64 / samples)).collect())
            .collect()
    });
    DocAttribution {
        id: doc.id.clone(),
        year: doc.year,
        tokens: n,
        psi,
        theta,
        token_labels,
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    year: i32,
    tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    psi: Option<BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    background: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    provenance: Provenance,
    labels: Vec<String>,
    background: Option<String>,
}

pub fn write_attributions(path: &Path, result: &AttributionResult, provenance: &Provenance) -> Result<()> {
    let mut out = crate::tsv::create(path)?;
    let io = |e: std::io::Error| Error::io(path, e);
    let header = Header {
        provenance: provenance.clone(),
        labels: result.labels.clone(),
        background: result.background.map(|b| result.labels[b].clone()),
    };
    writeln!(out, "{}", json(&header)).map_err(io)?;
    for d in &result.documents {
        let mut psi = BTreeMap::new();
        let mut bg = None;
        for &(l, p) in &d.psi {
            if Some(l as usize) == result.background {
                bg = Some(p);
            } else if p >= PSI_FLOOR {
                psi.insert(result.labels[l as usize].clone(), p);
            }
        }
        let rec = Record {
            id: d.id.clone(),
            year: d.year,
            tokens: d.tokens,
            psi: Some(psi),
            background: Some(bg.unwrap_or(0.0)),
            skipped: None,
        };
        writeln!(out, "{}", json(&rec)).map_err(io)?;
    }
    for (id, year, reason) in &result.skipped {
        let rec = Record {
            id: id.clone(),
            year: *year,
            tokens: 0,
            psi: None,
            background: None,
            skipped: Some(reason.clone()),
        };
        writeln!(out, "{}", json(&rec)).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Read an attribution file and its provenance. Shares are renormalized per
/// document to undo the floor.
pub fn read_attributions(path: &Path) -> Result<(AttributionResult, Provenance)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines().enumerate();
    let parse_err = |line: usize, e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    };
    let header: Header = match lines.next() {
        Some((_, l)) => serde_json::from_str(&l.map_err(|e| Error::io(path, e))?).map_err(|e| parse_err(1, e))?,
        None => return Err(Error::Data(format!("{}: empty attribution file", path.display()))),
    };
    let index: BTreeMap<&str, u32> = header.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
    let background = match &header.background {
        Some(b) => Some(*index.get(b.as_str()).ok_or_else(|| Error::UnknownLabel(b.clone()))? as usize),
        None => None,
    };
    let mut documents = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e))?;
        if let Some(reason) = rec.skipped {
            skipped.push((rec.id, rec.year, reason));
            continue;
        }
        let mut psi: Vec<(u32, f64)> = Vec::new();
        for (name, p) in rec.psi.unwrap_or_default() {
            let l = *index.get(name.as_str()).ok_or_else(|| Error::UnknownLabel(name.clone()))?;
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::Data(format!("{} line {}: invalid share {p}", path.display(), i + 1)));
            }
            psi.push((l, p));
        }
        if let (Some(b), Some(p)) = (background, rec.background) {
            if p > 0.0 {
                psi.push((b as u32, p));
            }
        }
        psi.sort_by_key(|&(l, _)| l);
        let total: f64 = psi.iter().map(|&(_, p)| p).sum();
        if total <= 0.0 {
            return Err(Error::Data(format!("{} line {}: document {} has no attribution mass", path.display(), i + 1, rec.id)));
        }
        for entry in &mut psi {
            entry.1 /= total;
        }
        documents.push(DocAttribution {
            id: rec.id,
            year: rec.year,
            tokens: rec.tokens,
            psi,
            theta: Vec::new(),
            token_labels: None,
        });
    }
    Ok((
        AttributionResult {
            labels: header.labels,
            background,
            documents,
            skipped,
        },
        header.provenance,
    ))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("attribution records serialize")
}
