use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::tsv;

/// Sparse tf-idf vector of one subject code, unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectVector {
    pub subject: String,
    /// `(term index, weight)` sorted by term index, zero weights omitted.
    pub weights: Vec<(u32, f64)>,
}

impl SubjectVector {
    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }
}

/// tf-idf vectors for `subjects`, where tf is the raw count of a term over
/// all documents carrying the subject and idf is `ln(N / df)`.
///
/// Subjects without documents are omitted and returned in the second list.
pub fn subject_vectors(corpus: &Corpus, subjects: &[String]) -> (Vec<SubjectVector>, Vec<String>) {
    let n_docs = corpus.documents.len() as f64;
    let mut docs_by_subject: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, d) in corpus.documents.iter().enumerate() {
        for l in &d.labels {
            docs_by_subject.entry(l.as_str()).or_default().push(i);
        }
    }
    let results: Vec<Option<SubjectVector>> = subjects
        .par_iter()
        .map(|subject| {
            let docs = docs_by_subject.get(subject.as_str())?;
            let mut tf: BTreeMap<u32, u64> = BTreeMap::new();
            for &i in docs {
                for &t in &corpus.documents[i].tokens {
                    *tf.entry(t).or_insert(0) += 1;
                }
            }
            let mut weights: Vec<(u32, f64)> = tf
                .into_iter()
                .map(|(t, count)| {
                    let df = corpus.vocabulary.doc_freq(t) as f64;
                    (t, count as f64 * (n_docs / df).ln())
                })
                .filter(|&(_, w)| w > 0.0)
                .collect();
            let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, w) in &mut weights {
                    *w /= norm;
                }
            } else {
                warn!("subject {subject} has an all-zero tf-idf vector");
            }
            Some(SubjectVector {
                subject: subject.clone(),
                weights,
            })
        })
        .collect();
    let mut vectors = Vec::new();
    let mut omitted = Vec::new();
    for (subject, r) in subjects.iter().zip(results) {
        match r {
            Some(v) => vectors.push(v),
            None => {
                warn!("subject {subject} has no documents; omitted from clustering");
                omitted.push(subject.clone());
            }
        }
    }
    (vectors, omitted)
}

/// Cosine similarity of two sparse vectors; zero if either is all-zero.
pub fn cosine(a: &SubjectVector, b: &SubjectVector) -> f64 {
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.weights.len() && j < b.weights.len() {
        let (ta, wa) = a.weights[i];
        let (tb, wb) = b.weights[j];
        match ta.cmp(&tb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += wa * wb;
                i += 1;
                j += 1;
            }
        }
    }
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

/// One agglomeration step. Leaves are clusters `0..n`; the cluster created
/// by merge `s` gets id `n + s`. `left < right` always.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Cluster id to display name: leaf names, `#<id>` for internal nodes.
    fn node_name(&self, id: usize) -> String {
        if id < self.leaves.len() {
            self.leaves[id].clone()
        } else {
            format!("#{id}")
        }
    }

    /// `step, left, right, similarity` rows; internal nodes are written as
    /// `#<cluster id>`.
    pub fn to_tsv(&self, header: &str) -> String {
        let mut out = header.to_string();
        out.push_str("# step\tleft\tright\tsimilarity\n");
        for (step, m) in self.merges.iter().enumerate() {
            writeln!(
                out,
                "{step}\t{}\t{}\t{}",
                self.node_name(m.left),
                self.node_name(m.right),
                m.similarity
            )
            .unwrap();
        }
        out
    }

    /// Read a dendrogram back. Leaves are listed in first-appearance order,
    /// so leaf ids are renumbered accordingly.
    pub fn load(path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (line, content) in tsv::data_lines(path)? {
            let f: Vec<&str> = content.split('\t').collect();
            let sim = f.get(3).and_then(|s| s.parse::<f64>().ok());
            match (f.len(), sim) {
                (4, Some(sim)) => rows.push((f[1].to_string(), f[2].to_string(), sim)),
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        message: "expected step, left, right, similarity".into(),
                    })
                }
            }
        }
        let mut leaves: Vec<String> = Vec::new();
        for (l, r, _) in &rows {
            for name in [l, r] {
                if !name.starts_with('#') && !leaves.contains(name) {
                    leaves.push(name.clone());
                }
            }
        }
        let n = leaves.len();
        let resolve = |name: &str| -> Result<usize> {
            if let Some(id) = name.strip_prefix('#') {
                id.parse().map_err(|_| Error::Data(format!("bad cluster reference {name}")))
            } else {
                Ok(leaves.iter().position(|l| l == name).unwrap())
            }
        };
        if n != rows.len() + 1 {
            return Err(Error::Data(format!(
                "{}: {} merges over {n} leaves is not a complete dendrogram",
                path.display(),
                rows.len()
            )));
        }
        let mut merges = Vec::with_capacity(rows.len());
        for (step, (l, r, sim)) in rows.iter().enumerate() {
            let (a, b) = (resolve(l)?, resolve(r)?);
            if a >= n + step || b >= n + step {
                return Err(Error::Data(format!("merge {step} references a cluster not yet formed")));
            }
            merges.push(Merge {
                left: a.min(b),
                right: a.max(b),
                similarity: *sim,
            });
        }
        Ok(Dendrogram { leaves, merges })
    }
}

/// Single-link agglomerative clustering under cosine similarity.
///
/// At each step the pair of clusters with the largest best cross-pair
/// similarity merges; ties go to the lexicographically lowest
/// `(left id, right id)` pair. Cluster-to-cluster similarities are kept in a
/// matrix updated with `max` after every merge, and each row caches its best
/// partner, so a run is O(n^2) in the common case.
pub fn single_link_hac(vectors: &[SubjectVector]) -> Result<Dendrogram> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::NothingToCluster(n));
    }
    let mut sim = vec![0.0f64; n * n];
    sim.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, cell) in row.iter_mut().enumerate() {
            if i != j {
                *cell = cosine(&vectors[i], &vectors[j]);
            }
        }
    });

    // Slot i holds cluster id `ids[i]`; inactive slots are skipped.
    let mut ids: Vec<usize> = (0..n).collect();
    let mut active = vec![true; n];
    let better = |s: f64, id: usize, best: Option<(f64, usize)>, ids: &[usize]| match best {
        None => true,
        Some((bs, bj)) => s > bs || (s == bs && id < ids[bj]),
    };
    let row_best = |i: usize, sim: &[f64], active: &[bool], ids: &[usize]| -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            if j != i && active[j] && better(sim[i * n + j], ids[j], best, ids) {
                best = Some((sim[i * n + j], j));
            }
        }
        best
    };
    let mut best: Vec<Option<(f64, usize)>> = (0..n).map(|i| row_best(i, &sim, &active, &ids)).collect();

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        // Global pick: highest similarity, then lowest (min id, max id).
        let mut pick: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            let Some((s, j)) = best[i] else { continue };
            let key = (ids[i].min(ids[j]), ids[i].max(ids[j]));
            let replace = match pick {
                None => true,
                Some((ps, pkey, _, _)) => s > ps || (s == ps && key < pkey),
            };
            if replace {
                pick = Some((s, key, i, j));
            }
        }
        let (s, (left, right), a, b) = pick.expect("at least two active clusters");
        merges.push(Merge {
            left,
            right,
            similarity: s,
        });

        // Merge b into a's slot, which now holds the new cluster.
        active[b] = false;
        ids[a] = n + step;
        for k in 0..n {
            if active[k] && k != a {
                let v = sim[a * n + k].max(sim[b * n + k]);
                sim[a * n + k] = v;
                sim[k * n + a] = v;
            }
        }
        best[b] = None;
        best[a] = row_best(a, &sim, &active, &ids);
        for k in 0..n {
            if !active[k] || k == a {
                continue;
            }
            match best[k] {
                Some((_, j)) if j == a || j == b => best[k] = row_best(k, &sim, &active, &ids),
                current => {
                    // The new cluster has the highest id, so it only wins on
                    // a strictly larger similarity.
                    if better(sim[k * n + a], ids[a], current, &ids) {
                        best[k] = Some((sim[k * n + a], a));
                    }
                }
            }
        }
    }
    Ok(Dendrogram {
        leaves: vectors.iter().map(|v| v.subject.clone()).collect(),
        merges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};

    fn v(name: &str, w: &[(u32, f64)]) -> SubjectVector {
        SubjectVector {
            subject: name.into(),
            weights: w.to_vec(),
        }
    }

    #[test]
    fn tf_idf_hand_example() {
        let vocabulary = Vocabulary::from_terms(vec![("cell".into(), 2), ("gene".into(), 1)]).unwrap();
        let documents = vec![
            Document {
                id: "d1".into(),
                year: 1990,
                tokens: vec![1, 1, 0],
                labels: vec!["s".into()],
            },
            Document {
                id: "d2".into(),
                year: 1990,
                tokens: vec![0],
                labels: vec!["t".into()],
            },
        ];
        let corpus = Corpus { documents, vocabulary };
        let (vectors, omitted) = subject_vectors(&corpus, &["s".into(), "t".into(), "u".into()]);
        assert_eq!(omitted, ["u"]);
        // weights (2 ln 2, 1 ln 1) -> normalized (1, 0); the zero is dropped.
        assert_eq!(vectors[0].weights, [(1, 1.0)]);
        assert!(vectors[1].weights.is_empty());
    }

    #[test]
    fn cosine_symmetry_and_orthogonality() {
        let a = v("a", &[(0, 0.6), (1, 0.8)]);
        let b = v("b", &[(0, 0.6), (1, 0.8)]);
        let c = v("c", &[(2, 1.0)]);
        assert!((cosine(&a, &b) - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&a, &c), 0.0);
    }

    #[test]
    fn two_vectors_merge_once() {
        let d = single_link_hac(&[v("a", &[(0, 1.0)]), v("b", &[(0, 0.6), (1, 0.8)])]).unwrap();
        assert_eq!(d.merges.len(), 1);
        assert_eq!((d.merges[0].left, d.merges[0].right), (0, 1));
        assert!((d.merges[0].similarity - 0.6).abs() < 1e-12);
    }

    #[test]
    fn duplicate_merges_first() {
        let vs = vec![
            v("a", &[(0, 1.0)]),
            v("b", &[(0, 0.6), (1, 0.8)]),
            v("c", &[(2, 1.0)]),
            v("b2", &[(0, 0.6), (1, 0.8)]),
        ];
        let d = single_link_hac(&vs).unwrap();
        assert_eq!((d.merges[0].left, d.merges[0].right), (1, 3));
        assert!((d.merges[0].similarity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fewer_than_two_is_an_error() {
        assert!(matches!(single_link_hac(&[v("a", &[(0, 1.0)])]), Err(Error::NothingToCluster(1))));
    }

    #[test]
    fn tsv_round_trip() {
        let vs = vec![
            v("a", &[(0, 1.0)]),
            v("b", &[(0, 0.6), (1, 0.8)]),
            v("c", &[(2, 1.0)]),
        ];
        let d = single_link_hac(&vs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.tsv");
        std::fs::write(&path, d.to_tsv("")).unwrap();
        let back = Dendrogram::load(&path).unwrap();
        assert_eq!(back.merges.len(), 2);
        let named = |d: &Dendrogram, k: usize| -> Vec<Vec<String>> {
            let mut g: Vec<Vec<String>> = super::super::cut::clusters_after(d, k)
                .into_iter()
                .map(|c| {
                    let mut names: Vec<String> = c.into_iter().map(|i| d.leaves[i].clone()).collect();
                    names.sort();
                    names
                })
                .collect();
            g.sort();
            g
        };
        for k in 0..=2 {
            assert_eq!(named(&d, k), named(&back, k));
        }
        for (x, y) in d.merges.iter().zip(&back.merges) {
            assert_eq!(x.similarity, y.similarity);
        }
    }
}
