//! Three-tier label scheme: subject codes, areas and broad areas, plus the
//! background label that every document carries into the topic model.

mod cut;
mod hac;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tsv;

pub use cut::{cut_to_areas, Curation, CurationRow, UNASSIGNED_BROAD_AREA};
pub use hac::{cosine, single_link_hac, subject_vectors, Dendrogram, Merge, SubjectVector};

pub const DEFAULT_BACKGROUND: &str = "background";

/// Which tier documents are labeled with when training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tier {
    Subject,
    Area,
}

impl std::str::FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subject" | "0" => Ok(Tier::Subject),
            "area" | "1" => Ok(Tier::Area),
            other => Err(Error::Config(format!("unknown tier {other:?} (expected subject or area)"))),
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tier::Subject => "subject",
            Tier::Area => "area",
        })
    }
}

/// Total maps subject -> area -> broad area. Names within a tier are kept in
/// first-seen order, which is also the label order used by models.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTaxonomy {
    subjects: Vec<String>,
    areas: Vec<String>,
    broad_areas: Vec<String>,
    subject_area: Vec<usize>,
    area_broad: Vec<usize>,
    background: String,
}

impl LabelTaxonomy {
    /// Build from `(subject, area, broad_area)` rows. A subject may appear
    /// only once; an area must always map to the same broad area.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let mut subjects = Vec::new();
        let mut areas: Vec<String> = Vec::new();
        let mut broad_areas: Vec<String> = Vec::new();
        let mut subject_area = Vec::new();
        let mut area_broad = Vec::new();
        let mut subject_ix: HashMap<String, usize> = HashMap::new();
        let mut area_ix: HashMap<String, usize> = HashMap::new();
        let mut broad_ix: HashMap<String, usize> = HashMap::new();
        for (s, a, b) in rows {
            let (s, a, b) = (s.into(), a.into(), b.into());
            for (value, what) in [(&s, "subject"), (&a, "area"), (&b, "broad area")] {
                if value.is_empty() || value.contains('|') {
                    return Err(Error::Data(format!("{what} name {value:?} is empty or contains '|'")));
                }
            }
            if subject_ix.contains_key(&s) {
                return Err(Error::Data(format!("subject {s:?} listed twice")));
            }
            let bi = *broad_ix.entry(b.clone()).or_insert_with(|| {
                broad_areas.push(b.clone());
                broad_areas.len() - 1
            });
            let ai = match area_ix.get(&a) {
                Some(&ai) => {
                    if area_broad[ai] != bi {
                        return Err(Error::Data(format!(
                            "area {a:?} assigned to both {:?} and {b:?}",
                            broad_areas[area_broad[ai]]
                        )));
                    }
                    ai
                }
                None => {
                    areas.push(a.clone());
                    area_broad.push(bi);
                    area_ix.insert(a, areas.len() - 1);
                    areas.len() - 1
                }
            };
            subject_ix.insert(s.clone(), subjects.len());
            subjects.push(s);
            subject_area.push(ai);
        }
        Ok(LabelTaxonomy {
            subjects,
            areas,
            broad_areas,
            subject_area,
            area_broad,
            background: DEFAULT_BACKGROUND.to_string(),
        })
    }

    pub fn with_background(mut self, name: impl Into<String>) -> Self {
        self.background = name.into();
        self
    }

    /// Tab-separated `subject_code, area, broad_area` rows, `#` comments.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let lines = tsv::read_data_lines(text.as_bytes()).map_err(|e| Error::io(origin, e))?;
        let mut rows = Vec::with_capacity(lines.len());
        for (line, content) in lines {
            let fields: Vec<&str> = content.split('\t').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line,
                    message: "expected subject_code, area, broad_area".into(),
                });
            }
            rows.push((fields[0].to_string(), fields[1].to_string(), fields[2].to_string()));
        }
        LabelTaxonomy::from_rows(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LabelTaxonomy::parse(&text, path)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# subject_code\tarea\tbroad_area\n");
        for (i, s) in self.subjects.iter().enumerate() {
            let a = self.subject_area[i];
            writeln!(out, "{s}\t{}\t{}", self.areas[a], self.broad_areas[self.area_broad[a]]).unwrap();
        }
        out
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn areas(&self) -> &[String] {
        &self.areas
    }

    pub fn broad_areas(&self) -> &[String] {
        &self.broad_areas
    }

    pub fn background(&self) -> &str {
        &self.background
    }

    /// Label names of a tier, background excluded.
    pub fn labels(&self, tier: Tier) -> &[String] {
        match tier {
            Tier::Subject => &self.subjects,
            Tier::Area => &self.areas,
        }
    }

    pub fn area_of(&self, subject: &str) -> Option<&str> {
        let i = self.subjects.iter().position(|s| s == subject)?;
        Some(&self.areas[self.subject_area[i]])
    }

    pub fn broad_area_of(&self, area: &str) -> Option<&str> {
        let i = self.areas.iter().position(|a| a == area)?;
        Some(&self.broad_areas[self.area_broad[i]])
    }

    /// Subject -> area lookup table.
    pub fn subject_map(&self) -> HashMap<&str, &str> {
        self.subjects
            .iter()
            .zip(&self.subject_area)
            .map(|(s, &a)| (s.as_str(), self.areas[a].as_str()))
            .collect()
    }

    /// Map a model label at `tier` to its area (identity for areas and the
    /// background label).
    pub fn area_grouping(&self, tier: Tier) -> BTreeMap<String, String> {
        let mut map: BTreeMap<String, String> = match tier {
            Tier::Subject => self
                .subject_map()
                .into_iter()
                .map(|(s, a)| (s.to_string(), a.to_string()))
                .collect(),
            Tier::Area => self.areas.iter().map(|a| (a.clone(), a.clone())).collect(),
        };
        map.insert(self.background.clone(), self.background.clone());
        map
    }

    /// Areas whose broad area is not in `excluded`.
    pub fn areas_excluding(&self, excluded: &[String]) -> Vec<String> {
        self.areas
            .iter()
            .enumerate()
            .filter(|&(i, _)| !excluded.contains(&self.broad_areas[self.area_broad[i]]))
            .map(|(_, a)| a.clone())
            .collect()
    }
}

/// Replace each document's label set by the image of its subjects under the
/// chosen tier map, deduplicated, with the background label appended.
///
/// Labels that already belong to the target tier, and the background label,
/// map to themselves, so relabeling is idempotent.
pub fn relabel_documents(docs: &[Document], taxonomy: &LabelTaxonomy, tier: Tier) -> Result<Vec<Document>> {
    let subject_map = taxonomy.subject_map();
    let tier_labels: std::collections::HashSet<&str> = taxonomy.labels(tier).iter().map(String::as_str).collect();
    let mut unmapped = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(docs.len());
    for doc in docs {
        let mut labels: Vec<String> = Vec::with_capacity(doc.labels.len() + 1);
        for label in &doc.labels {
            let mapped = if label == taxonomy.background() {
                continue;
            } else if let Some(&area) = subject_map.get(label.as_str()) {
                match tier {
                    Tier::Subject => label.as_str(),
                    Tier::Area => area,
                }
            } else if tier_labels.contains(label.as_str()) {
                label.as_str()
            } else {
                unmapped.insert(label.clone());
                continue;
            };
            if !labels.iter().any(|l| l == mapped) {
                labels.push(mapped.to_string());
            }
        }
        labels.push(taxonomy.background().to_string());
        out.push(Document {
            id: doc.id.clone(),
            year: doc.year,
            tokens: doc.tokens.clone(),
            labels,
        });
    }
    if !unmapped.is_empty() {
        return Err(Error::UnmappedSubjects(unmapped.into_iter().collect()));
    }
    Ok(out)
}

/// Fraction of documents carrying at least `min` non-background labels.
pub fn multi_label_fraction(docs: &[Document], background: &str, min: usize) -> f64 {
    if docs.is_empty() {
        return 0.0;
    }
    let n = docs
        .iter()
        .filter(|d| d.labels.iter().filter(|l| *l != background).count() >= min)
        .count();
    n as f64 / docs.len() as f64
}
