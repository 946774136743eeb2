//! On-disk corpus bundle: a directory holding `vocab.tsv` and `docs.tsv`.
//!
//! ```text
//! vocab.tsv   term <TAB> index <TAB> doc_freq
//! docs.tsv    id <TAB> year <TAB> label|label|... <TAB> space-separated token indices
//! ```
//!
//! Both files start with a provenance header of `# ` lines.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::provenance::Provenance;
use crate::tsv;

use super::{Corpus, Document, Vocabulary};

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const DOCS_FILE: &str = "docs.tsv";

pub fn write_bundle(dir: &Path, corpus: &Corpus, provenance: &Provenance) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut vocab = provenance.header();
    for (i, term) in corpus.vocabulary.terms().iter().enumerate() {
        writeln!(vocab, "{term}\t{i}\t{}", corpus.vocabulary.doc_freq(i as u32)).unwrap();
    }
    tsv::write_string(&dir.join(VOCAB_FILE), &vocab)?;

    let mut docs = provenance.header();
    for d in &corpus.documents {
        write!(docs, "{}\t{}\t{}\t", d.id, d.year, d.labels.join("|")).unwrap();
        for (i, t) in d.tokens.iter().enumerate() {
            if i > 0 {
                docs.push(' ');
            }
            write!(docs, "{t}").unwrap();
        }
        docs.push('\n');
    }
    tsv::write_string(&dir.join(DOCS_FILE), &docs)
}

pub fn read_bundle(dir: &Path) -> Result<Corpus> {
    let vocab_path = dir.join(VOCAB_FILE);
    let mut terms = Vec::new();
    for (line_no, line) in tsv::data_lines(&vocab_path)? {
        let parse_err = |message: &str| Error::Parse {
            path: vocab_path.clone(),
            line: line_no,
            message: message.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err("expected term, index, doc_freq"));
        }
        let index: usize = fields[1].parse().map_err(|_| parse_err("bad index"))?;
        if index != terms.len() {
            return Err(parse_err("indices must be dense and in order"));
        }
        let df: u32 = fields[2].parse().map_err(|_| parse_err("bad doc_freq"))?;
        terms.push((fields[0].to_string(), df));
    }
    let vocabulary = Vocabulary::from_terms(terms)?;

    let docs_path = dir.join(DOCS_FILE);
    let mut documents = Vec::new();
    for (line_no, line) in tsv::data_lines(&docs_path)? {
        let parse_err = |message: &str| Error::Parse {
            path: docs_path.clone(),
            line: line_no,
            message: message.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err("expected id, year, labels, tokens"));
        }
        let year = fields[1].parse().map_err(|_| parse_err("bad year"))?;
        let labels = fields[2]
            .split('|')
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        let tokens = fields[3]
            .split_ascii_whitespace()
            .map(|t| {
                t.parse::<u32>()
                    .ok()
                    .filter(|&t| (t as usize) < vocabulary.len())
                    .ok_or_else(|| parse_err("token index out of range"))
            })
            .collect::<Result<Vec<_>>>()?;
        documents.push(Document {
            id: fields[0].to_string(),
            year,
            tokens,
            labels,
        });
    }
    Ok(Corpus {
        documents,
        vocabulary,
    })
}
