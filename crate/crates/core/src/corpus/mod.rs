//! Raw records to a tokenized, stemmed, pruned corpus over a fixed vocabulary.

mod bundle;
pub mod porter;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::ops::RangeInclusive;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bundle::{read_bundle, write_bundle, DOCS_FILE, VOCAB_FILE};

/// One abstract record as it arrives on the input stream. Unknown fields
/// (author, advisor, keywords) are accepted and ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub year: i32,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    pub subjects: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub school: Option<String>,
}

/// A skipped record or dropped document, kept so callers can report it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Record id when known, otherwise `line N`.
    pub record: String,
    pub reason: String,
}

impl Diagnostic {
    fn new(record: impl Into<String>, reason: impl Into<String>) -> Self {
        let d = Diagnostic {
            record: record.into(),
            reason: reason.into(),
        };
        warn!("skipping {}: {}", d.record, d.reason);
        d
    }
}

/// Term to index bijection with per-term document frequency. Indices are
/// dense and assigned in lexicographic term order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_terms(terms: Vec<(String, u32)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(terms.len());
        let mut names = Vec::with_capacity(terms.len());
        let mut doc_freq = Vec::with_capacity(terms.len());
        for (i, (term, df)) in terms.into_iter().enumerate() {
            if index.insert(term.clone(), i as u32).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary term {term:?}")));
            }
            names.push(term);
            doc_freq.push(df);
        }
        Ok(Vocabulary {
            terms: names,
            doc_freq,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, index: u32) -> &str {
        &self.terms[index as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, index: u32) -> u32 {
        self.doc_freq[index as usize]
    }
}

/// A preprocessed document. `labels` holds label names at whatever tier the
/// corpus currently carries: subject codes straight out of preprocessing,
/// areas plus the background label after relabeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub year: i32,
    pub tokens: Vec<u32>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub vocabulary: Vocabulary,
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub min_df: u32,
    pub include_title: bool,
    pub years: RangeInclusive<i32>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_df: 5,
            include_title: true,
            years: 1980..=2010,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessReport {
    /// Records rejected before tokenization.
    pub skipped: Vec<Diagnostic>,
    /// Ids of documents with no tokens left after filtering.
    pub dropped: Vec<String>,
}

/// Maximal runs of alphabetic characters, lowercased. Everything else
/// separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|run| !run.is_empty())
        .map(|run| run.to_lowercase())
        .collect()
}

/// Stopword set, matched against lowercase tokens before stemming.
#[derive(Debug, Clone, Default)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    /// One term per line; `#` starts a comment line.
    pub fn from_reader<R: BufRead>(reader: R) -> std::io::Result<Self> {
        let mut set = HashSet::new();
        for line in reader.lines() {
            let line = line?;
            let term = line.trim();
            if term.is_empty() || term.starts_with('#') {
                continue;
            }
            set.insert(term.to_lowercase());
        }
        Ok(StopWords(set))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        StopWords::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::io(path, e))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for StopWords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        StopWords(iter.into_iter().map(|s| s.into().to_lowercase()).collect())
    }
}

/// Parse line-delimited JSON records. Malformed lines are skipped with a
/// diagnostic; an I/O failure on the underlying reader is an error. A
/// leading `{"provenance": ...}` line is ignored.
pub fn read_records<R: BufRead>(reader: R) -> std::io::Result<(Vec<RawRecord>, Vec<Diagnostic>)> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || (i == 0 && line.starts_with("{\"provenance\"")) {
            continue;
        }
        match serde_json::from_str::<RawRecord>(&line) {
            Ok(r) => records.push(r),
            Err(e) => skipped.push(Diagnostic::new(format!("line {}", i + 1), e.to_string())),
        }
    }
    Ok((records, skipped))
}

/// Lowercase, stopword-filtered, stemmed terms of a piece of text.
pub fn analyze_text(text: &str, stopwords: &StopWords) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .map(|t| porter::stem(&t))
        .collect()
}

fn validate(record: &RawRecord, config: &PreprocessConfig, seen: &mut HashSet<String>) -> std::result::Result<(), String> {
    if record.id.is_empty() {
        return Err("empty id".into());
    }
    crate::tsv::check_field(&record.id, "id")?;
    if !config.years.contains(&record.year) {
        return Err(format!(
            "year {} outside {}..={}",
            record.year,
            config.years.start(),
            config.years.end()
        ));
    }
    if record.subjects.is_empty() {
        return Err("no subject codes".into());
    }
    for s in &record.subjects {
        if s.is_empty() || s.contains('|') {
            return Err(format!("subject code {s:?} is empty or contains '|'"));
        }
        crate::tsv::check_field(s, "subject code")?;
    }
    if !seen.insert(record.id.clone()) {
        return Err("duplicate id".into());
    }
    Ok(())
}

/// Build the corpus: tokenize title and abstract, drop stopwords, stem,
/// prune terms whose document frequency is below `min_df`, and drop
/// documents left with no tokens.
///
/// Records are analyzed in parallel but the vocabulary and the document
/// order depend only on the input order, never on the worker count.
pub fn preprocess(
    records: &[RawRecord],
    stopwords: &StopWords,
    config: &PreprocessConfig,
) -> Result<(Corpus, PreprocessReport)> {
    if config.min_df < 1 {
        return Err(Error::Config("min_df must be at least 1".into()));
    }
    let mut report = PreprocessReport::default();
    let mut seen = HashSet::new();
    let mut accepted = Vec::with_capacity(records.len());
    for record in records {
        match validate(record, config, &mut seen) {
            Ok(()) => accepted.push(record),
            Err(reason) => report.skipped.push(Diagnostic::new(record.id.clone(), reason)),
        }
    }

    // Count pass.
    let analyzed: Vec<Vec<String>> = accepted
        .par_iter()
        .map(|r| {
            if config.include_title {
                analyze_text(&format!("{} {}", r.title, r.abstract_text), stopwords)
            } else {
                analyze_text(&r.abstract_text, stopwords)
            }
        })
        .collect();
    let mut doc_freq: BTreeMap<&str, u32> = BTreeMap::new();
    for terms in &analyzed {
        let distinct: HashSet<&str> = terms.iter().map(String::as_str).collect();
        for t in distinct {
            *doc_freq.entry(t).or_insert(0) += 1;
        }
    }
    let vocabulary = Vocabulary::from_terms(
        doc_freq
            .into_iter()
            .filter(|&(_, df)| df >= config.min_df)
            .map(|(t, df)| (t.to_string(), df))
            .collect(),
    )?;

    // Emit pass.
    let mut documents = Vec::with_capacity(accepted.len());
    for (record, terms) in accepted.iter().zip(&analyzed) {
        let tokens: Vec<u32> = terms.iter().filter_map(|t| vocabulary.index_of(t)).collect();
        if tokens.is_empty() {
            warn!("dropping {}: no tokens survive preprocessing", record.id);
            report.dropped.push(record.id.clone());
            continue;
        }
        let mut labels: Vec<String> = Vec::with_capacity(record.subjects.len());
        for s in &record.subjects {
            if !labels.contains(s) {
                labels.push(s.clone());
            }
        }
        documents.push(Document {
            id: record.id.clone(),
            year: record.year,
            tokens,
            labels,
        });
    }
    Ok((
        Corpus {
            documents,
            vocabulary,
        },
        report,
    ))
}

/// Map documents onto another vocabulary by term, dropping unknown terms.
pub fn reindex(documents: &[Document], from: &Vocabulary, to: &Vocabulary) -> Vec<Document> {
    documents
        .iter()
        .map(|d| Document {
            id: d.id.clone(),
            year: d.year,
            tokens: d
                .tokens
                .iter()
                .filter_map(|&t| to.index_of(from.term(t)))
                .collect(),
            labels: d.labels.clone(),
        })
        .collect()
}
