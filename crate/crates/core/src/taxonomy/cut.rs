use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tsv;

use super::{Dendrogram, LabelTaxonomy};

/// Broad area given to cut clusters that the curation never places.
pub const UNASSIGNED_BROAD_AREA: &str = "unassigned";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CurationRow {
    /// Put a subject in a named area (created if new) under a broad area.
    MoveSubject {
        subject: String,
        area: String,
        broad_area: String,
    },
    /// Place an existing area under a broad area; written with `*` in the
    /// subject column.
    PlaceArea { area: String, broad_area: String },
}

/// Manual overrides applied after the automatic cut. Same three-column
/// layout as a taxonomy file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Curation {
    pub rows: Vec<CurationRow>,
}

impl Curation {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (line, content) in tsv::read_data_lines(text.as_bytes()).map_err(|e| Error::io(origin, e))? {
            let f: Vec<&str> = content.split('\t').map(str::trim).collect();
            if f.len() != 3 || f.iter().any(|s| s.is_empty()) {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line,
                    message: "expected subject_code (or *), area, broad_area".into(),
                });
            }
            rows.push(if f[0] == "*" {
                CurationRow::PlaceArea {
                    area: f[1].into(),
                    broad_area: f[2].into(),
                }
            } else {
                CurationRow::MoveSubject {
                    subject: f[0].into(),
                    area: f[1].into(),
                    broad_area: f[2].into(),
                }
            });
        }
        Ok(Curation { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Curation::parse(&text, path)
    }
}

/// Leaf groups after applying the first `merges` merges, each group sorted,
/// groups ordered by their smallest leaf.
pub(crate) fn clusters_after(dendrogram: &Dendrogram, merges: usize) -> Vec<Vec<usize>> {
    let n = dendrogram.leaves.len();
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    for m in &dendrogram.merges[..merges] {
        let mut a = members[m.left].take().expect("cluster merged twice");
        let b = members[m.right].take().expect("cluster merged twice");
        a.extend(b);
        a.sort_unstable();
        members.push(Some(a));
    }
    let mut groups: Vec<Vec<usize>> = members.into_iter().flatten().collect();
    groups.sort();
    groups
}

/// Cut the dendrogram where exactly `target` clusters remain, name the
/// clusters `area-N` in order of their first leaf, then apply the curation
/// verbatim. Every offending curation row is reported at once.
pub fn cut_to_areas(dendrogram: &Dendrogram, curation: &Curation, target: usize) -> Result<LabelTaxonomy> {
    let n = dendrogram.leaves.len();
    if target == 0 || target > n {
        return Err(Error::Config(format!("target area count {target} must be in 1..={n}")));
    }
    if dendrogram.merges.len() < n - target {
        return Err(Error::Data(format!(
            "dendrogram has {} merges, cannot reach {target} clusters from {n} leaves",
            dendrogram.merges.len()
        )));
    }
    let groups = clusters_after(dendrogram, n - target);
    let width = target.to_string().len();
    let mut subject_area: Vec<String> = vec![String::new(); n];
    for (gi, group) in groups.iter().enumerate() {
        for &leaf in group {
            subject_area[leaf] = format!("area-{:0width$}", gi + 1);
        }
    }

    let mut known_areas: BTreeSet<String> = subject_area.iter().cloned().collect();
    let mut offenders = Vec::new();
    for row in &curation.rows {
        if let CurationRow::MoveSubject { subject, area, .. } = row {
            if dendrogram.leaves.contains(subject) {
                known_areas.insert(area.clone());
            } else {
                offenders.push(format!("subject {subject}"));
            }
        }
    }
    for row in &curation.rows {
        if let CurationRow::PlaceArea { area, .. } = row {
            if !known_areas.contains(area) {
                offenders.push(format!("area {area}"));
            }
        }
    }
    if !offenders.is_empty() {
        return Err(Error::UnknownCuration(offenders));
    }

    let mut broad: BTreeMap<String, String> = BTreeMap::new();
    for row in &curation.rows {
        match row {
            CurationRow::MoveSubject {
                subject,
                area,
                broad_area,
            } => {
                let leaf = dendrogram.leaves.iter().position(|l| l == subject).unwrap();
                subject_area[leaf] = area.clone();
                broad.insert(area.clone(), broad_area.clone());
            }
            CurationRow::PlaceArea { area, broad_area } => {
                broad.insert(area.clone(), broad_area.clone());
            }
        }
    }
    LabelTaxonomy::from_rows(dendrogram.leaves.iter().zip(&subject_area).map(|(s, a)| {
        let b = broad.get(a).cloned().unwrap_or_else(|| UNASSIGNED_BROAD_AREA.to_string());
        (s.clone(), a.clone(), b)
    }))
}

#[cfg(test)]
mod tests {
    use super::super::Merge;
    use super::*;

    /// a-b at 0.9, c-d at 0.8, {a,b}-e at 0.5, then everything at 0.2.
    fn fixture() -> Dendrogram {
        Dendrogram {
            leaves: ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect(),
            merges: vec![
                Merge { left: 0, right: 1, similarity: 0.9 },
                Merge { left: 2, right: 3, similarity: 0.8 },
                Merge { left: 4, right: 5, similarity: 0.5 },
                Merge { left: 6, right: 7, similarity: 0.2 },
            ],
        }
    }

    fn areas(t: &LabelTaxonomy) -> Vec<(String, String, String)> {
        t.subjects()
            .iter()
            .map(|s| {
                let a = t.area_of(s).unwrap();
                (s.clone(), a.to_string(), t.broad_area_of(a).unwrap().to_string())
            })
            .collect()
    }

    #[test]
    fn degenerate_cuts() {
        let d = fixture();
        let all = cut_to_areas(&d, &Curation::default(), 5).unwrap();
        assert_eq!(all.areas().len(), 5);
        let one = cut_to_areas(&d, &Curation::default(), 1).unwrap();
        assert_eq!(one.areas(), ["area-1"]);
        assert!(cut_to_areas(&d, &Curation::default(), 0).is_err());
        assert!(cut_to_areas(&d, &Curation::default(), 6).is_err());
    }

    #[test]
    fn cut_with_override_matches_hand_map() {
        let curation = Curation::parse(
            "# move d into the a/b cluster\nd\tarea-1\tSciences\n*\tarea-2\tHumanities\n",
            Path::new("c.tsv"),
        )
        .unwrap();
        let t = cut_to_areas(&fixture(), &curation, 3).unwrap();
        let expected: Vec<(String, String, String)> = [
            ("a", "area-1", "Sciences"),
            ("b", "area-1", "Sciences"),
            ("c", "area-2", "Humanities"),
            ("d", "area-1", "Sciences"),
            ("e", "area-3", UNASSIGNED_BROAD_AREA),
        ]
        .iter()
        .map(|(s, a, b)| (s.to_string(), a.to_string(), b.to_string()))
        .collect();
        assert_eq!(areas(&t), expected);
    }

    #[test]
    fn unknown_curation_entries_are_all_listed() {
        let curation = Curation::parse("zz\tX\tY\n*\tnope\tY\nyy\tX\tY\n", Path::new("c.tsv")).unwrap();
        match cut_to_areas(&fixture(), &curation, 3).unwrap_err() {
            Error::UnknownCuration(v) => assert_eq!(v, ["subject zz", "subject yy", "area nope"]),
            other => panic!("{other:?}"),
        }
    }
}
