//! Planted corpora: every area owns a disjoint block of pseudo-words drawn
//! with Zipf weights, documents may borrow another area's block at a known
//! (optionally year-dependent) rate, and a shared background block plus
//! uniform noise round out the mix. Used for end-to-end checks where the
//! right answer is known by construction.
//!
//! Pseudo-words are consonant-vowel syllables ending in `x`, so they are
//! alphabetic, never stopwords, and pass through the stemmer unchanged.

use std::ops::Range;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use crate::corpus::{Corpus, Document, RawRecord, Vocabulary};
use crate::error::Result;
use crate::rng;
use crate::taxonomy::{relabel_documents, LabelTaxonomy, Tier, DEFAULT_BACKGROUND};

const CONSONANTS: &[u8] = b"bdfghjklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const SYLLABLES: usize = 16 * 5;

fn syllable(i: usize, out: &mut String) {
    out.push(CONSONANTS[i / VOWELS.len()] as char);
    out.push(VOWELS[i % VOWELS.len()] as char);
}

/// The `k`-th pseudo-word of block `group`.
pub fn pseudo_word(group: usize, k: usize) -> String {
    assert!(group < SYLLABLES * SYLLABLES && k < SYLLABLES * SYLLABLES);
    let mut w = String::with_capacity(9);
    syllable(group / SYLLABLES, &mut w);
    syllable(group % SYLLABLES, &mut w);
    syllable(k / SYLLABLES, &mut w);
    syllable(k % SYLLABLES, &mut w);
    w.push('x');
    w
}

/// Area names: `A`..`Z` for up to 26 areas, `A00`.. beyond.
pub fn area_name(i: usize, areas: usize) -> String {
    if areas <= 26 {
        ((b'A' + i as u8) as char).to_string()
    } else {
        format!("A{i:02}")
    }
}

/// `source`'s vocabulary appears in `target`'s documents at a rate moving
/// linearly from `rate.0` in the first year to `rate.1` in the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub source: usize,
    pub target: usize,
    pub rate: (f64, f64),
}

impl Injection {
    pub fn constant(source: usize, target: usize, rate: f64) -> Self {
        Injection {
            source,
            target,
            rate: (rate, rate),
        }
    }

    fn rate_at(&self, year: i32, years: (i32, i32)) -> f64 {
        if years.1 == years.0 {
            return self.rate.0;
        }
        let f = (year - years.0) as f64 / (years.1 - years.0) as f64;
        self.rate.0 + f * (self.rate.1 - self.rate.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub areas: usize,
    pub terms_per_area: usize,
    pub background_terms: usize,
    pub docs_per_area: usize,
    pub tokens_per_doc: usize,
    /// Share of tokens drawn uniformly from the whole vocabulary.
    pub noise: f64,
    /// Share of tokens drawn from the background block.
    pub background_rate: f64,
    pub zipf_exponent: f64,
    pub years: (i32, i32),
    pub injections: Vec<Injection>,
    /// Areas are dealt round-robin into this many broad areas.
    pub broad_areas: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            areas: 4,
            terms_per_area: 50,
            background_terms: 0,
            docs_per_area: 200,
            tokens_per_doc: 100,
            noise: 0.0,
            background_rate: 0.0,
            zipf_exponent: 1.0,
            years: (1980, 2009),
            injections: Vec::new(),
            broad_areas: 1,
            seed: 0,
        }
    }
}

impl PlantedSpec {
    /// Every ordered pair of distinct areas borrows at `rate`.
    pub fn with_mutual_injection(mut self, rate: f64) -> Self {
        for s in 0..self.areas {
            for t in 0..self.areas {
                if s != t {
                    self.injections.push(Injection::constant(s, t, rate));
                }
            }
        }
        self
    }
}

#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub spec: PlantedSpec,
    /// Documents labeled with subject codes, one subject per area.
    pub corpus: Corpus,
    pub taxonomy: LabelTaxonomy,
    pub areas: Vec<String>,
    /// Term range of each area's block.
    pub planted: Vec<Range<u32>>,
    pub background_block: Range<u32>,
}

pub fn subject_code(area: &str) -> String {
    format!("{}.1", area.to_lowercase())
}

/// Vocabulary, taxonomy, area names, planted blocks and the background block.
type Layout = (Vocabulary, LabelTaxonomy, Vec<String>, Vec<Range<u32>>, Range<u32>);

/// Vocabulary and taxonomy shared by every corpus with the same block sizes.
fn layout(spec: &PlantedSpec) -> Result<Layout> {
    let areas: Vec<String> = (0..spec.areas).map(|i| area_name(i, spec.areas)).collect();
    let mut terms = Vec::new();
    let mut planted = Vec::new();
    for a in 0..spec.areas {
        let start = terms.len() as u32;
        terms.extend((0..spec.terms_per_area).map(|k| (pseudo_word(a, k), 0)));
        planted.push(start..terms.len() as u32);
    }
    let start = terms.len() as u32;
    terms.extend((0..spec.background_terms).map(|k| (pseudo_word(spec.areas, k), 0)));
    let background_block = start..terms.len() as u32;
    let broad = spec.broad_areas.max(1);
    let taxonomy = LabelTaxonomy::from_rows(
        areas
            .iter()
            .enumerate()
            .map(|(i, a)| (subject_code(a), a.clone(), format!("broad-{}", i % broad + 1))),
    )?;
    Ok((Vocabulary::from_terms(terms)?, taxonomy, areas, planted, background_block))
}

fn zipf(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|k| (k as f64).powf(-s))).expect("non-empty block")
}

impl PlantedCorpus {
    pub fn generate(spec: &PlantedSpec) -> Result<Self> {
        let (vocabulary, taxonomy, areas, planted, background_block) = layout(spec)?;
        let v = vocabulary.len() as u32;
        let own = zipf(spec.terms_per_area, spec.zipf_exponent);
        let bg = (spec.background_terms > 0).then(|| zipf(spec.background_terms, spec.zipf_exponent));
        let mut rng = rng::derived(spec.seed, &["synth", "corpus"]);
        let mut documents = Vec::with_capacity(spec.areas * spec.docs_per_area);
        let mut doc_freq = vec![0u32; v as usize];
        for (a, area) in areas.iter().enumerate() {
            let incoming: Vec<&Injection> = spec.injections.iter().filter(|i| i.target == a).collect();
            for n in 0..spec.docs_per_area {
                let year = rng.gen_range(spec.years.0..=spec.years.1);
                let rates: Vec<f64> = incoming.iter().map(|i| i.rate_at(year, spec.years)).collect();
                let mut tokens = Vec::with_capacity(spec.tokens_per_doc);
                for _ in 0..spec.tokens_per_doc {
                    let mut u: f64 = rng.gen();
                    let w = 'pick: {
                        for (inj, &r) in incoming.iter().zip(&rates) {
                            if u < r {
                                break 'pick planted[inj.source].start + own.sample(&mut rng) as u32;
                            }
                            u -= r;
                        }
                        if u < spec.noise {
                            break 'pick rng.gen_range(0..v);
                        }
                        u -= spec.noise;
                        if let Some(bg) = &bg {
                            if u < spec.background_rate {
                                break 'pick background_block.start + bg.sample(&mut rng) as u32;
                            }
                        }
                        planted[a].start + own.sample(&mut rng) as u32
                    };
                    tokens.push(w);
                }
                let mut seen = tokens.clone();
                seen.sort_unstable();
                seen.dedup();
                for w in seen {
                    doc_freq[w as usize] += 1;
                }
                documents.push(Document {
                    id: format!("{}-{n:05}", area.to_lowercase()),
                    year,
                    tokens,
                    labels: vec![subject_code(area)],
                });
            }
        }
        let vocabulary = Vocabulary::from_terms(
            vocabulary.terms().iter().cloned().zip(doc_freq).collect(),
        )?;
        Ok(PlantedCorpus {
            spec: spec.clone(),
            corpus: Corpus { documents, vocabulary },
            taxonomy,
            areas,
            planted,
            background_block,
        })
    }

    /// Documents relabeled to areas plus background, ready for training.
    pub fn area_documents(&self) -> Result<Vec<Document>> {
        relabel_documents(&self.corpus.documents, &self.taxonomy, Tier::Area)
    }

    /// Noise-free documents drawn only from `area`'s block.
    pub fn pure_documents(&self, area: usize, count: usize, tokens: usize, seed: u64) -> Vec<Document> {
        let own = zipf(self.spec.terms_per_area, self.spec.zipf_exponent);
        let mut rng = rng::derived(seed, &["synth", "pure", &area.to_string()]);
        let name = &self.areas[area];
        (0..count)
            .map(|n| Document {
                id: format!("pure-{}-{n:04}", name.to_lowercase()),
                year: self.spec.years.0,
                tokens: (0..tokens).map(|_| self.planted[area].start + own.sample(&mut rng) as u32).collect(),
                labels: vec![name.clone(), DEFAULT_BACKGROUND.to_string()],
            })
            .collect()
    }

    /// Whether term `w` belongs to `area`'s planted block.
    pub fn is_planted(&self, area: usize, w: u32) -> bool {
        self.planted[area].contains(&w)
    }

    /// The corpus as raw input records: the abstract is the token sequence
    /// spelled out, the title empty.
    pub fn raw_records(&self) -> Vec<RawRecord> {
        let vocab = &self.corpus.vocabulary;
        self.corpus
            .documents
            .iter()
            .map(|d| RawRecord {
                id: d.id.clone(),
                year: d.year,
                title: String::new(),
                abstract_text: d.tokens.iter().map(|&w| vocab.term(w)).collect::<Vec<_>>().join(" "),
                subjects: d.labels.clone(),
                school: None,
            })
            .collect()
    }
}
