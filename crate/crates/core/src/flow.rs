//! Language-incorporation aggregates: who borrows whose words, per time
//! bucket, measured over documents that bear the borrowing area's label.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::plda::AttributionResult;
use crate::provenance::Provenance;
use crate::rng;
use crate::stats::{bootstrap_stat, fmt_num, Estimate};
use crate::taxonomy::{relabel_documents, LabelTaxonomy, Tier};

/// An inclusive year range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeBucket {
    pub label: String,
    pub start: i32,
    pub end: i32,
}

impl TimeBucket {
    pub fn new(label: impl Into<String>, start: i32, end: i32) -> Self {
        TimeBucket {
            label: label.into(),
            start,
            end,
        }
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bucketing {
    /// One bucket spanning every year.
    Whole,
    Annual,
    FiveYear,
    Decade,
    Custom(Vec<TimeBucket>),
}

impl FromStr for Bucketing {
    type Err = Error;

    /// `all`, `annual`, `5y`, `decade`, or `custom:1980-1994,1995-2010`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "whole" => return Ok(Bucketing::Whole),
            "annual" => return Ok(Bucketing::Annual),
            "5y" => return Ok(Bucketing::FiveYear),
            "decade" => return Ok(Bucketing::Decade),
            _ => {}
        }
        let spec = s
            .strip_prefix("custom:")
            .ok_or_else(|| Error::Config(format!("unknown bucketing '{s}' (annual, 5y, decade, all, custom:Y1-Y2,...)")))?;
        let mut buckets: Vec<TimeBucket> = Vec::new();
        for part in spec.split(',') {
            let (a, b) = part.split_once('-').unwrap_or((part, part));
            let (start, end): (i32, i32) = match (a.trim().parse(), b.trim().parse()) {
                (Ok(x), Ok(y)) if x <= y => (x, y),
                _ => return Err(Error::Config(format!("bad custom bucket '{part}'"))),
            };
            if buckets.iter().any(|o| start <= o.end && o.start <= end) {
                return Err(Error::Config(format!("custom bucket '{part}' overlaps another")));
            }
            buckets.push(TimeBucket::new(part.trim(), start, end));
        }
        buckets.sort_by_key(|b| b.start);
        Ok(Bucketing::Custom(buckets))
    }
}

impl fmt::Display for Bucketing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bucketing::Whole => f.write_str("all"),
            Bucketing::Annual => f.write_str("annual"),
            Bucketing::FiveYear => f.write_str("5y"),
            Bucketing::Decade => f.write_str("decade"),
            Bucketing::Custom(b) => {
                let parts: Vec<String> = b.iter().map(|b| format!("{}-{}", b.start, b.end)).collect();
                write!(f, "custom:{}", parts.join(","))
            }
        }
    }
}

impl Bucketing {
    /// Buckets covering `first..=last`, aligned to calendar multiples.
    pub fn buckets(&self, first: i32, last: i32) -> Vec<TimeBucket> {
        let aligned = |width: i32, label: &dyn Fn(i32) -> String| -> Vec<TimeBucket> {
            let mut out = Vec::new();
            let mut s = first.div_euclid(width) * width;
            while s <= last {
                out.push(TimeBucket::new(label(s), s, s + width - 1));
                s += width;
            }
            out
        };
        match self {
            Bucketing::Whole => vec![TimeBucket::new("all", first, last)],
            Bucketing::Annual => aligned(1, &|s| s.to_string()),
            Bucketing::FiveYear => aligned(5, &|s| format!("{s}-{}", s + 4)),
            Bucketing::Decade => aligned(10, &|s| format!("{s}s")),
            Bucketing::Custom(b) => b.clone(),
        }
    }
}

/// How documents are weighted when averaging attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// By token count: a fraction of words.
    #[default]
    Tokens,
    /// Every document counts once.
    Documents,
}

impl Weighting {
    pub fn weight(&self, doc: &FlowDoc) -> f64 {
        match self {
            Weighting::Tokens => doc.tokens as f64,
            Weighting::Documents => 1.0,
        }
    }
}

impl FromStr for Weighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tokens" => Ok(Weighting::Tokens),
            "documents" => Ok(Weighting::Documents),
            _ => Err(Error::Config(format!("unknown weighting '{s}' (tokens, documents)"))),
        }
    }
}

/// One attributed document: its observed columns and its attribution
/// summed into rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowDoc {
    pub id: String,
    pub year: i32,
    pub tokens: usize,
    /// Column indices of the areas the document is labeled with.
    pub columns: Vec<u32>,
    /// Dense share per row; sums to one.
    pub shares: Vec<f64>,
}

/// Attribution joined to observed labels. Rows are attribution sources
/// (areas plus background); columns are the analyzed areas.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowData {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub docs: Vec<FlowDoc>,
    /// Row of each column's area.
    column_row: Vec<usize>,
}

impl FlowData {
    /// Join `attribution` to `docs` by id. `grouping` maps every model label
    /// to a row name; a document belongs to each column whose name is among
    /// its labels. Documents without attribution are left out.
    pub fn build(
        attribution: &AttributionResult,
        docs: &[Document],
        grouping: &BTreeMap<String, String>,
        rows: Vec<String>,
        columns: Vec<String>,
    ) -> Result<Self> {
        let row_index: HashMap<&str, usize> = rows.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let label_row: Vec<usize> = attribution
            .labels
            .iter()
            .map(|l| {
                let r = grouping.get(l).ok_or_else(|| Error::UnknownLabel(l.clone()))?;
                row_index.get(r.as_str()).copied().ok_or_else(|| Error::UnknownLabel(r.clone()))
            })
            .collect::<Result<_>>()?;
        let column_row: Vec<usize> = columns
            .iter()
            .map(|c| row_index.get(c.as_str()).copied().ok_or_else(|| Error::UnknownLabel(c.clone())))
            .collect::<Result<_>>()?;
        let col_index: HashMap<&str, u32> = columns.iter().enumerate().map(|(i, c)| (c.as_str(), i as u32)).collect();
        let by_id = attribution.by_id();
        let mut missing = 0usize;
        let mut out = Vec::with_capacity(docs.len());
        for doc in docs {
            let Some(a) = by_id.get(doc.id.as_str()) else {
                missing += 1;
                continue;
            };
            let mut shares = vec![0.0; rows.len()];
            for &(l, p) in &a.psi {
                shares[label_row[l as usize]] += p;
            }
            let mut cols: Vec<u32> = doc.labels.iter().filter_map(|l| col_index.get(l.as_str()).copied()).collect();
            cols.sort_unstable();
            cols.dedup();
            out.push(FlowDoc {
                id: doc.id.clone(),
                year: doc.year,
                tokens: a.tokens,
                columns: cols,
                shares,
            });
        }
        if missing > 0 {
            log::warn!("{missing} documents have no attribution and are left out of every aggregate");
        }
        Ok(FlowData {
            rows,
            columns,
            docs: out,
            column_row,
        })
    }

    /// Rows are the taxonomy's areas plus background, columns the `scope`
    /// areas; model labels at `tier` are summed into their areas and
    /// document labels are mapped to the area tier.
    pub fn from_taxonomy(
        attribution: &AttributionResult,
        docs: &[Document],
        taxonomy: &LabelTaxonomy,
        tier: Tier,
        scope: &[String],
    ) -> Result<Self> {
        let docs = relabel_documents(docs, taxonomy, Tier::Area)?;
        let mut rows = taxonomy.areas().to_vec();
        rows.push(taxonomy.background().to_string());
        FlowData::build(attribution, &docs, &taxonomy.area_grouping(tier), rows, scope.to_vec())
    }

    /// `(row, column)` of an analyzed area.
    pub fn area_indices(&self, area: &str) -> Result<(usize, usize)> {
        let c = self
            .columns
            .iter()
            .position(|c| c == area)
            .ok_or_else(|| Error::UnknownLabel(area.to_string()))?;
        Ok((self.column_row[c], c))
    }

    /// Indices of the documents of column `column` in `bucket`.
    pub fn members(&self, column: usize, bucket: &TimeBucket) -> Vec<usize> {
        self.docs
            .iter()
            .enumerate()
            .filter(|(_, d)| bucket.contains(d.year) && d.columns.binary_search(&(column as u32)).is_ok())
            .map(|(i, _)| i)
            .collect()
    }

    /// Documents whose observed labels include `area`, within `bucket`.
    pub fn membership(&self, area: &str, bucket: &TimeBucket) -> Result<Vec<&FlowDoc>> {
        let (_, c) = self.area_indices(area)?;
        Ok(self.members(c, bucket).into_iter().map(|i| &self.docs[i]).collect())
    }

    /// First and last year present, if any documents.
    pub fn year_range(&self) -> Option<(i32, i32)> {
        let first = self.docs.iter().map(|d| d.year).min()?;
        let last = self.docs.iter().map(|d| d.year).max()?;
        Some((first, last))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncorporationMatrix {
    pub bucket: TimeBucket,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// `cells[i][j]`: share of column `j`'s words attributed to row `i`;
    /// `None` for columns without documents.
    pub cells: Vec<Vec<Option<f64>>>,
    /// Total weight (tokens, or documents) of each column.
    pub column_mass: Vec<f64>,
    pub column_docs: Vec<usize>,
}

/// Weighted mean attribution of each row over each column's documents.
pub fn incorporation_matrix(data: &FlowData, bucket: &TimeBucket, weighting: Weighting) -> IncorporationMatrix {
    let (nr, nc) = (data.rows.len(), data.columns.len());
    let mut num = vec![vec![0.0; nc]; nr];
    let mut mass = vec![0.0; nc];
    let mut count = vec![0usize; nc];
    for d in data.docs.iter().filter(|d| bucket.contains(d.year)) {
        let w = weighting.weight(d);
        for &c in &d.columns {
            let c = c as usize;
            mass[c] += w;
            count[c] += 1;
            for (r, &p) in d.shares.iter().enumerate() {
                num[r][c] += w * p;
            }
        }
    }
    let cells = num
        .iter()
        .map(|row| {
            row.iter()
                .zip(&mass)
                .map(|(&x, &m)| (m > 0.0).then(|| x / m))
                .collect()
        })
        .collect();
    IncorporationMatrix {
        bucket: bucket.clone(),
        rows: data.rows.clone(),
        columns: data.columns.clone(),
        cells,
        column_mass: mass,
        column_docs: count,
    }
}

impl IncorporationMatrix {
    pub fn cell(&self, row: &str, column: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.columns.iter().position(|x| x == column)?;
        self.cells[r][c]
    }

    /// A copy with self-attribution cells blanked, for cross-field views.
    pub fn cross_only(&self) -> IncorporationMatrix {
        let mut m = self.clone();
        for (c, col) in self.columns.iter().enumerate() {
            if let Some(r) = self.rows.iter().position(|x| x == col) {
                m.cells[r][c] = None;
            }
        }
        m
    }

    /// TSV with a `source` header column; missing cells are `NA`.
    pub fn to_tsv(&self, provenance: &Provenance) -> String {
        let mut text = provenance.header();
        text.push_str(&format!("# bucket: {} ({}-{})\n", self.bucket.label, self.bucket.start, self.bucket.end));
        text.push_str("source");
        for c in &self.columns {
            text.push('\t');
            text.push_str(c);
        }
        text.push('\n');
        for (r, row) in self.rows.iter().zip(&self.cells) {
            text.push_str(r);
            for cell in row {
                text.push('\t');
                text.push_str(&cell.map(fmt_num).unwrap_or_else(|| "NA".into()));
            }
            text.push('\n');
        }
        text
    }

    pub fn write(&self, path: &Path, provenance: &Provenance) -> Result<()> {
        crate::tsv::write_string(path, &self.to_tsv(provenance))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub bucket: TimeBucket,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSeries {
    pub source: String,
    pub target: String,
    pub points: Vec<SeriesPoint>,
}

/// Per bucket, the share of `target`'s words attributed to `source`, with
/// bootstrap quantiles from `resamples` document resamples.
pub fn flow_series(
    data: &FlowData,
    source: &str,
    target: &str,
    buckets: &[TimeBucket],
    weighting: Weighting,
    resamples: usize,
    seed: u64,
) -> Result<FlowSeries> {
    let (r, _) = data.area_indices(source)?;
    let (_, c) = data.area_indices(target)?;
    let points = buckets
        .par_iter()
        .map(|b| {
            let members = data.members(c, b);
            let values: Vec<f64> = members.iter().map(|&d| data.docs[d].shares[r]).collect();
            let weights: Vec<f64> = members.iter().map(|&d| weighting.weight(&data.docs[d])).collect();
            let mut rng = rng::derived(seed, &["bootstrap", &b.label, source, target]);
            SeriesPoint {
                bucket: b.clone(),
                estimate: bootstrap_stat(&values, &weights, resamples, &mut rng),
            }
        })
        .collect();
    Ok(FlowSeries {
        source: source.to_string(),
        target: target.to_string(),
        points,
    })
}

impl FlowSeries {
    pub fn to_tsv(&self, provenance: &Provenance) -> String {
        let mut text = provenance.header();
        text.push_str(&format!("# source: {}\n# target: {}\n", self.source, self.target));
        text.push_str("bucket\tvalue\tq05\tq25\tq75\tq95\tdocs\n");
        let na = || "NA".to_string();
        for p in &self.points {
            let e = &p.estimate;
            let q = e.quantiles;
            text.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                p.bucket.label,
                e.center.map(fmt_num).unwrap_or_else(na),
                q.map(|q| fmt_num(q.q05)).unwrap_or_else(na),
                q.map(|q| fmt_num(q.q25)).unwrap_or_else(na),
                q.map(|q| fmt_num(q.q75)).unwrap_or_else(na),
                q.map(|q| fmt_num(q.q95)).unwrap_or_else(na),
                e.docs
            ));
        }
        text
    }

    pub fn write(&self, path: &Path, provenance: &Provenance) -> Result<()> {
        crate::tsv::write_string(path, &self.to_tsv(provenance))
    }
}

/// Several series in one long-format table, led by `source` and `target`.
pub fn write_series(path: &Path, series: &[FlowSeries], provenance: &Provenance) -> Result<()> {
    let mut text = provenance.header();
    text.push_str("source\ttarget\tbucket\tvalue\tq05\tq25\tq75\tq95\tdocs\n");
    for s in series {
        let body = s.to_tsv(&Provenance::new(""));
        for line in body.lines().filter(|l| !l.starts_with('#')).skip(1) {
            text.push_str(&format!("{}\t{}\t{line}\n", s.source, s.target));
        }
    }
    crate::tsv::write_string(path, &text)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChordEdge {
    pub source: String,
    pub target: String,
    /// Words borrowed in both directions, in token units.
    pub weight: f64,
    /// The area that sends more; `None` on a tie.
    pub dominant: Option<String>,
    pub tie: bool,
    pub broad_areas: (String, String),
}

/// Undirected edges between analyzed areas, in column order. Pairs whose
/// weight does not exceed `floor`, or with an undefined cell, are omitted.
pub fn chord_export(matrix: &IncorporationMatrix, taxonomy: &LabelTaxonomy, floor: f64) -> Vec<ChordEdge> {
    let row_of = |area: &str| matrix.rows.iter().position(|r| r == area);
    let n = matrix.columns.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&matrix.columns[i], &matrix.columns[j]);
            let (Some(ra), Some(rb)) = (row_of(a), row_of(b)) else { continue };
            let (Some(ab), Some(ba)) = (matrix.cells[ra][j], matrix.cells[rb][i]) else { continue };
            let sent_a = ab * matrix.column_mass[j];
            let sent_b = ba * matrix.column_mass[i];
            let weight = sent_a + sent_b;
            if weight <= floor {
                continue;
            }
            let tie = (sent_a - sent_b).abs() <= 1e-12 * weight.max(1.0);
            let dominant = (!tie).then(|| if sent_a > sent_b { a.clone() } else { b.clone() });
            let broad = |x: &str| taxonomy.broad_area_of(x).unwrap_or("").to_string();
            edges.push(ChordEdge {
                source: a.clone(),
                target: b.clone(),
                weight,
                dominant,
                tie,
                broad_areas: (broad(a), broad(b)),
            });
        }
    }
    edges
}

pub fn write_chord(path: &Path, edges: &[ChordEdge], provenance: &Provenance) -> Result<()> {
    let mut out = crate::tsv::create(path)?;
    let io = |e: std::io::Error| Error::io(path, e);
    out.write_all(provenance.json_line().as_bytes()).map_err(io)?;
    for e in edges {
        let line = serde_json::to_string(e).expect("chord edges serialize");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plda::DocAttribution;

    fn attribution() -> AttributionResult {
        let d = |id: &str, year, tokens, psi: Vec<(u32, f64)>| DocAttribution {
            id: id.into(),
            year,
            tokens,
            psi,
            theta: vec![],
            token_labels: None,
        };
        AttributionResult {
            labels: vec!["A".into(), "B".into(), "bg".into()],
            background: Some(2),
            documents: vec![
                d("1", 1985, 100, vec![(0, 0.8), (2, 0.2)]),
                d("2", 1985, 300, vec![(0, 0.3), (1, 0.6), (2, 0.1)]),
                d("3", 1995, 100, vec![(1, 1.0)]),
                d("4", 1985, 100, vec![(0, 0.5), (1, 0.5)]),
            ],
            skipped: vec![],
        }
    }

    fn docs() -> Vec<Document> {
        let d = |id: &str, year, labels: &[&str]| Document {
            id: id.into(),
            year,
            tokens: vec![],
            labels: labels.iter().map(|s| s.to_string()).collect(),
        };
        vec![d("1", 1985, &["A", "bg"]), d("2", 1985, &["B", "bg"]), d("3", 1995, &["B", "bg"]), d("4", 1985, &["A", "B", "bg"])]
    }

    fn data() -> FlowData {
        let grouping: BTreeMap<String, String> = ["A", "B", "bg"].iter().map(|s| (s.to_string(), s.to_string())).collect();
        let rows = vec!["A".into(), "B".into(), "bg".into()];
        FlowData::build(&attribution(), &docs(), &grouping, rows, vec!["A".into(), "B".into()]).unwrap()
    }

    #[test]
    fn bucketing_schemes() {
        let d = Bucketing::Decade.buckets(1983, 2001);
        assert_eq!(d.iter().map(|b| b.label.as_str()).collect::<Vec<_>>(), ["1980s", "1990s", "2000s"]);
        assert_eq!(Bucketing::FiveYear.buckets(1980, 1989).len(), 2);
        assert_eq!(Bucketing::Annual.buckets(1980, 1982).len(), 3);
        let c: Bucketing = "custom:1990-1999,1980-1989".parse().unwrap();
        assert_eq!(c.buckets(0, 0)[0].start, 1980);
        assert!("custom:1980-1990,1990-1999".parse::<Bucketing>().is_err());
        assert!("weekly".parse::<Bucketing>().is_err());
        assert_eq!(c.to_string(), "custom:1980-1989,1990-1999");
    }

    #[test]
    fn membership_is_multi_label() {
        let data = data();
        let all = TimeBucket::new("all", 1980, 2000);
        let ids = |area| data.membership(area, &all).unwrap().iter().map(|d| d.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids("A"), ["1", "4"]);
        assert_eq!(ids("B"), ["2", "3", "4"]);
        assert!(data.membership("Z", &all).is_err());
    }

    #[test]
    fn token_weighted_matrix_matches_hand_values() {
        let m = incorporation_matrix(&data(), &TimeBucket::new("1980s", 1980, 1989), Weighting::Tokens);
        // Column B in the 1980s: docs 2 (300 tokens) and 4 (100 tokens).
        assert!((m.cell("A", "B").unwrap() - (0.3 * 300.0 + 0.5 * 100.0) / 400.0).abs() < 1e-12);
        for c in 0..2 {
            let s: f64 = (0..3).map(|r| m.cells[r][c].unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let empty = incorporation_matrix(&data(), &TimeBucket::new("2000s", 2000, 2009), Weighting::Tokens);
        assert!(empty.cells.iter().flatten().all(Option::is_none));
        let per_doc = incorporation_matrix(&data(), &TimeBucket::new("1980s", 1980, 1989), Weighting::Documents);
        assert!((per_doc.cell("A", "B").unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(m.cross_only().cell("A", "A"), None);
    }

    #[test]
    fn series_points_and_small_buckets() {
        let buckets = Bucketing::Decade.buckets(1980, 1999);
        let s = flow_series(&data(), "A", "B", &buckets, Weighting::Tokens, 200, 1).unwrap();
        assert_eq!(s.points.len(), 2);
        assert!(s.points[0].estimate.is_defined());
        // A single 1990s document in B: point value only.
        assert_eq!(s.points[1].estimate.center, Some(0.0));
        assert!(!s.points[1].estimate.is_defined());
        let tsv = s.to_tsv(&Provenance::new("analyze"));
        assert!(tsv.contains("1990s\t0.000000\tNA\tNA\tNA\tNA\t1\n"));
    }

    fn chord_matrix(ab: f64, ba: f64, mass_a: f64, mass_b: f64) -> IncorporationMatrix {
        IncorporationMatrix {
            bucket: TimeBucket::new("all", 0, 0),
            rows: vec!["a".into(), "b".into(), "bg".into()],
            columns: vec!["a".into(), "b".into()],
            cells: vec![
                vec![Some(1.0 - ba), Some(ab)],
                vec![Some(ba), Some(1.0 - ab)],
                vec![Some(0.0), Some(0.0)],
            ],
            column_mass: vec![mass_a, mass_b],
            column_docs: vec![10, 10],
        }
    }

    #[test]
    fn chord_weights_and_dominance() {
        let tax = LabelTaxonomy::from_rows([("s1", "a", "X"), ("s2", "b", "Y")]).unwrap();
        let e = chord_export(&chord_matrix(0.2, 0.05, 1000.0, 1000.0), &tax, 0.0);
        assert_eq!(e.len(), 1);
        assert!((e[0].weight - 250.0).abs() < 1e-9);
        assert_eq!(e[0].dominant.as_deref(), Some("a"));
        assert_eq!(e[0].broad_areas, ("X".to_string(), "Y".to_string()));
        let tie = chord_export(&chord_matrix(0.1, 0.1, 500.0, 500.0), &tax, 0.0);
        assert!(tie[0].tie && tie[0].dominant.is_none());
        assert!(chord_export(&chord_matrix(0.0, 0.0, 500.0, 500.0), &tax, 0.0).is_empty());
    }
}
