use rand::Rng as _;
use rayon::prelude::*;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::LabelSpace;

const UNASSIGNED: u32 = u32::MAX;

/// Unnormalized probability of assigning a token to one topic:
/// `(n_term + eta) / (n_topic + V * eta) * (n_doc + alpha)`, every count
/// taken with the token itself removed.
#[inline(always)]
pub fn conditional_weight(n_term: f64, n_topic: f64, n_doc: f64, vocab_size: usize, alpha: f64, eta: f64) -> f64 {
    (n_term + eta) / (n_topic + vocab_size as f64 * eta) * (n_doc + alpha)
}

/// Per-document sampling state. `allowed` lists the global topics the
/// document may use, sorted; counts and assignments index into it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct DocState {
    pub(crate) tokens: Vec<u32>,
    pub(crate) allowed: Vec<u32>,
    pub(crate) counts: Vec<u32>,
    pub(crate) assign: Vec<u32>,
}

/// Token assignments plus the three count tensors the sampler reads:
/// topic-term counts (stored term-major), topic totals, and per-document
/// topic counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelState {
    pub(crate) space: LabelSpace,
    pub(crate) vocab_size: usize,
    pub(crate) docs: Vec<DocState>,
    pub(crate) word_topic: Vec<u32>,
    pub(crate) topic_total: Vec<u32>,
}

/// Build the sampling state with every token drawn uniformly from the
/// `(label, topic)` pairs its document allows.
///
/// `restrict` gives each document's allowed label set by name; when `None`
/// the documents' own labels are used.
pub fn init_state(
    docs: &[Document],
    restrict: Option<&[Vec<String>]>,
    space: &LabelSpace,
    vocab_size: usize,
    rng: &mut Rng,
) -> Result<ModelState> {
    let t = space.total_topics();
    let cells = (vocab_size as u128) * (t as u128);
    let mut word_topic: Vec<u32> = Vec::new();
    word_topic.try_reserve_exact(cells as usize).map_err(|_| Error::Resource {
        what: "topic-term count tensor".into(),
        dims: format!("{vocab_size} terms x {t} topics"),
        bytes: cells * 4,
    })?;
    word_topic.resize(cells as usize, 0);
    let mut topic_total = vec![0u32; t];

    let mut states = Vec::with_capacity(docs.len());
    for (di, doc) in docs.iter().enumerate() {
        let names = match restrict {
            Some(r) => &r[di],
            None => &doc.labels,
        };
        let mut allowed = Vec::new();
        for name in names {
            let l = space.index_of(name).ok_or_else(|| Error::UnknownLabel(name.clone()))?;
            allowed.extend(space.topics(l).map(|g| g as u32));
        }
        allowed.sort_unstable();
        allowed.dedup();
        if allowed.is_empty() {
            return Err(Error::EmptyLabelSet(doc.id.clone()));
        }
        let mut counts = vec![0u32; allowed.len()];
        let mut assign = Vec::with_capacity(doc.tokens.len());
        for &w in &doc.tokens {
            if w as usize >= vocab_size {
                return Err(Error::Data(format!("document {} has token {w} >= vocabulary size {vocab_size}", doc.id)));
            }
            let slot = rng.gen_range(0..allowed.len());
            let g = allowed[slot] as usize;
            counts[slot] += 1;
            word_topic[w as usize * t + g] += 1;
            topic_total[g] += 1;
            assign.push(slot as u32);
        }
        states.push(DocState {
            tokens: doc.tokens.clone(),
            allowed,
            counts,
            assign,
        });
    }
    Ok(ModelState {
        space: space.clone(),
        vocab_size,
        docs: states,
        word_topic,
        topic_total,
    })
}

/// Draw an index with probability proportional to `weights`.
#[inline]
pub(crate) fn sample_index(weights: &[f64], total: f64, rng: &mut Rng) -> usize {
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave u at the very top of the range; take the last
    // index with positive weight.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// One sequential Gibbs pass over `docs` against the given count tensors.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_docs(
    docs: &mut [DocState],
    word_topic: &mut [u32],
    topic_total: &mut [u32],
    vocab_size: usize,
    alpha: f64,
    eta: f64,
    rng: &mut Rng,
    weights: &mut Vec<f64>,
) {
    let t = topic_total.len();
    for doc in docs.iter_mut() {
        for i in 0..doc.tokens.len() {
            let w = doc.tokens[i] as usize;
            let row = &mut word_topic[w * t..(w + 1) * t];
            let old = doc.assign[i] as usize;
            let g_old = doc.allowed[old] as usize;
            doc.counts[old] -= 1;
            row[g_old] -= 1;
            topic_total[g_old] -= 1;

            weights.clear();
            let mut total = 0.0;
            for (slot, &g) in doc.allowed.iter().enumerate() {
                let g = g as usize;
                let p = conditional_weight(
                    row[g] as f64,
                    topic_total[g] as f64,
                    doc.counts[slot] as f64,
                    vocab_size,
                    alpha,
                    eta,
                );
                total += p;
                weights.push(p);
            }
            let new = sample_index(weights, total, rng);
            let g_new = doc.allowed[new] as usize;
            doc.counts[new] += 1;
            row[g_new] += 1;
            topic_total[g_new] += 1;
            doc.assign[i] = new as u32;
        }
    }
}

impl ModelState {
    pub fn space(&self) -> &LabelSpace {
        &self.space
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn doc_len(&self, d: usize) -> usize {
        self.docs[d].tokens.len()
    }

    pub fn token(&self, d: usize, i: usize) -> u32 {
        self.docs[d].tokens[i]
    }

    /// Labels a document may draw from.
    pub fn allowed_labels(&self, d: usize) -> Vec<usize> {
        let mut labels: Vec<usize> = self.docs[d].allowed.iter().map(|&g| self.space.label_of(g as usize)).collect();
        labels.dedup();
        labels
    }

    /// `(label, k)` of token `i` of document `d`, or `None` while removed.
    pub fn assignment(&self, d: usize, i: usize) -> Option<(usize, usize)> {
        let slot = self.docs[d].assign[i];
        (slot != UNASSIGNED).then(|| self.space.split(self.docs[d].allowed[slot as usize] as usize))
    }

    pub fn n_term(&self, label: usize, k: usize, term: u32) -> u32 {
        let t = self.space.total_topics();
        self.word_topic[term as usize * t + self.space.topic(label, k)]
    }

    pub fn n_topic(&self, label: usize, k: usize) -> u32 {
        self.topic_total[self.space.topic(label, k)]
    }

    pub fn n_doc(&self, d: usize, label: usize, k: usize) -> u32 {
        let g = self.space.topic(label, k) as u32;
        let doc = &self.docs[d];
        match doc.allowed.binary_search(&g) {
            Ok(slot) => doc.counts[slot],
            Err(_) => 0,
        }
    }

    /// Take token `(d, i)` out of every count, leaving it unassigned.
    pub fn remove_token(&mut self, d: usize, i: usize) {
        let t = self.space.total_topics();
        let doc = &mut self.docs[d];
        let slot = doc.assign[i];
        assert!(slot != UNASSIGNED, "token already removed");
        let g = doc.allowed[slot as usize] as usize;
        doc.counts[slot as usize] -= 1;
        self.word_topic[doc.tokens[i] as usize * t + g] -= 1;
        self.topic_total[g] -= 1;
        doc.assign[i] = UNASSIGNED;
    }

    /// Assign a removed token to `(label, k)`; the label must be allowed.
    pub fn assign_token(&mut self, d: usize, i: usize, label: usize, k: usize) -> Result<()> {
        let t = self.space.total_topics();
        let g = self.space.topic(label, k);
        let doc = &mut self.docs[d];
        assert!(doc.assign[i] == UNASSIGNED, "token still assigned");
        let slot = doc
            .allowed
            .binary_search(&(g as u32))
            .map_err(|_| Error::UnknownLabel(self.space.name(label).to_string()))?;
        doc.counts[slot] += 1;
        self.word_topic[doc.tokens[i] as usize * t + g] += 1;
        self.topic_total[g] += 1;
        doc.assign[i] = slot as u32;
        Ok(())
    }

    /// Unnormalized weight of every global topic for token `(d, i)`, which
    /// must already be removed. Topics outside the document's allowed
    /// labels get weight zero.
    pub fn conditional(&self, d: usize, i: usize, alpha: f64, eta: f64) -> Vec<f64> {
        let t = self.space.total_topics();
        let doc = &self.docs[d];
        assert!(doc.assign[i] == UNASSIGNED, "conditional needs the token removed first");
        let w = doc.tokens[i] as usize;
        let mut out = vec![0.0; t];
        for (slot, &g) in doc.allowed.iter().enumerate() {
            let g = g as usize;
            out[g] = conditional_weight(
                self.word_topic[w * t + g] as f64,
                self.topic_total[g] as f64,
                doc.counts[slot] as f64,
                self.vocab_size,
                alpha,
                eta,
            );
        }
        out
    }

    /// Resample token `(d, i)` from its conditional.
    pub fn resample_token(&mut self, d: usize, i: usize, alpha: f64, eta: f64, rng: &mut Rng) {
        self.remove_token(d, i);
        let weights = self.conditional(d, i, alpha, eta);
        let total: f64 = weights.iter().sum();
        let g = sample_index(&weights, total, rng);
        let (label, k) = self.space.split(g);
        self.assign_token(d, i, label, k).expect("sampled topic is allowed");
    }

    /// One sequential pass over every token in document order.
    pub fn gibbs_sweep(&mut self, alpha: f64, eta: f64, rng: &mut Rng) {
        let mut weights = Vec::new();
        sweep_docs(
            &mut self.docs,
            &mut self.word_topic,
            &mut self.topic_total,
            self.vocab_size,
            alpha,
            eta,
            rng,
            &mut weights,
        );
    }

    /// Approximate concurrent pass: each shard sweeps its documents against
    /// a private copy of the global counts, then the per-shard deltas are
    /// summed back in shard order. `rngs` holds one generator per shard.
    pub fn parallel_sweep(&mut self, alpha: f64, eta: f64, rngs: &mut [Rng], pool: &rayon::ThreadPool) {
        let shards = rngs.len();
        if shards <= 1 {
            return self.gibbs_sweep(alpha, eta, &mut rngs[0]);
        }
        let bounds = shard_bounds(&self.docs, shards);
        let vocab_size = self.vocab_size;
        let global_wt = &self.word_topic;
        let global_tt = &self.topic_total;
        let mut slices: Vec<&mut [DocState]> = Vec::with_capacity(shards);
        let mut rest: &mut [DocState] = &mut self.docs;
        let mut start = 0;
        for &end in &bounds {
            let (head, tail) = rest.split_at_mut(end - start);
            slices.push(head);
            rest = tail;
            start = end;
        }
        let locals: Vec<(Vec<u32>, Vec<u32>)> = pool.install(|| {
            slices
                .into_par_iter()
                .zip(rngs.par_iter_mut())
                .map(|(docs, rng)| {
                    let mut wt = global_wt.clone();
                    let mut tt = global_tt.clone();
                    let mut weights = Vec::new();
                    sweep_docs(docs, &mut wt, &mut tt, vocab_size, alpha, eta, rng, &mut weights);
                    (wt, tt)
                })
                .collect()
        });
        let wt_locals: Vec<&[u32]> = locals.iter().map(|l| l.0.as_slice()).collect();
        let tt_locals: Vec<&[u32]> = locals.iter().map(|l| l.1.as_slice()).collect();
        pool.install(|| {
            merge_deltas(&mut self.word_topic, &wt_locals);
            merge_deltas(&mut self.topic_total, &tt_locals);
        });
    }

    /// Recount every tensor from the assignment arrays and compare.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let t = self.space.total_topics();
        let mut wt = vec![0u32; self.word_topic.len()];
        let mut tt = vec![0u32; t];
        for (d, doc) in self.docs.iter().enumerate() {
            let mut counts = vec![0u32; doc.allowed.len()];
            let mut assigned = 0;
            for (i, &slot) in doc.assign.iter().enumerate() {
                if slot == UNASSIGNED {
                    continue;
                }
                assigned += 1;
                let g = doc.allowed[slot as usize] as usize;
                counts[slot as usize] += 1;
                wt[doc.tokens[i] as usize * t + g] += 1;
                tt[g] += 1;
            }
            if counts != doc.counts {
                return Err(format!("document {d}: topic counts disagree with assignments"));
            }
            if doc.counts.iter().sum::<u32>() != assigned {
                return Err(format!("document {d}: token conservation violated"));
            }
        }
        if wt != self.word_topic {
            return Err("topic-term counts disagree with assignments".into());
        }
        if tt != self.topic_total {
            return Err("topic totals disagree with assignments".into());
        }
        for g in 0..t {
            let sum: u64 = (0..self.vocab_size).map(|w| self.word_topic[w * t + g] as u64).sum();
            if sum != self.topic_total[g] as u64 {
                return Err(format!("topic {g}: term counts do not sum to the total"));
            }
        }
        Ok(())
    }
}

/// `global += sum(local - global)` cell by cell.
fn merge_deltas(global: &mut [u32], locals: &[&[u32]]) {
    const CHUNK: usize = 1 << 14;
    global.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * CHUNK;
        for (j, cell) in chunk.iter_mut().enumerate() {
            let old = *cell as i64;
            let mut v = old;
            for local in locals {
                v += local[base + j] as i64 - old;
            }
            debug_assert!(v >= 0);
            *cell = v as u32;
        }
    });
}

/// Contiguous document ranges of roughly equal token mass; returns the
/// exclusive end of each shard.
fn shard_bounds(docs: &[DocState], shards: usize) -> Vec<usize> {
    let total: usize = docs.iter().map(|d| d.tokens.len()).sum();
    let mut bounds = Vec::with_capacity(shards);
    let mut acc = 0;
    let mut next = 1;
    for (i, d) in docs.iter().enumerate() {
        acc += d.tokens.len();
        while next < shards && acc * shards >= total * next {
            bounds.push(i + 1);
            next += 1;
        }
    }
    while bounds.len() < shards {
        bounds.push(docs.len());
    }
    bounds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn space(ks: &[(&str, usize)]) -> LabelSpace {
        LabelSpace::new(ks.iter().map(|(n, k)| (n.to_string(), *k)).collect(), None).unwrap()
    }

    fn doc(id: &str, tokens: &[u32], labels: &[&str]) -> Document {
        Document {
            id: id.into(),
            year: 2000,
            tokens: tokens.to_vec(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn forced_assignment_with_single_topic() {
        let s = space(&[("A", 1), ("B", 2)]);
        let state = init_state(&[doc("d", &[0, 1, 2, 1], &["A"])], None, &s, 3, &mut seeded(3)).unwrap();
        for i in 0..4 {
            assert_eq!(state.assignment(0, i), Some((0, 0)));
        }
    }

    #[test]
    fn init_is_deterministic_and_consistent() {
        let s = space(&[("A", 2), ("B", 3)]);
        let docs = vec![doc("d1", &[0, 1, 2, 3, 3], &["A", "B"]), doc("d2", &[4, 4, 1], &["B"])];
        let a = init_state(&docs, None, &s, 5, &mut seeded(7)).unwrap();
        let b = init_state(&docs, None, &s, 5, &mut seeded(7)).unwrap();
        assert_eq!(a, b);
        a.check_consistency().unwrap();
        // Recount oracle: tallies of assignments equal the stored counts.
        for d in 0..2 {
            for l in 0..2 {
                for k in 0..s.topic_count(l) {
                    let tally = (0..a.doc_len(d)).filter(|&i| a.assignment(d, i) == Some((l, k))).count();
                    assert_eq!(a.n_doc(d, l, k) as usize, tally);
                }
            }
        }
    }

    #[test]
    fn empty_label_set_and_unknown_label_are_errors() {
        let s = space(&[("A", 1)]);
        assert!(matches!(
            init_state(&[doc("d", &[0], &[])], None, &s, 1, &mut seeded(0)),
            Err(Error::EmptyLabelSet(_))
        ));
        assert!(matches!(
            init_state(&[doc("d", &[0], &["Z"])], None, &s, 1, &mut seeded(0)),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn forced_conditional_is_certain() {
        let s = space(&[("A", 1), ("B", 1)]);
        let mut st = init_state(&[doc("d", &[0, 1, 1], &["A"])], None, &s, 2, &mut seeded(1)).unwrap();
        st.remove_token(0, 1);
        let w = st.conditional(0, 1, 0.1, 0.01);
        assert!(w[0] > 0.0);
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn empty_counts_give_uniform_weights() {
        let s = space(&[("A", 1), ("B", 1)]);
        let mut st = init_state(&[doc("d", &[2], &["A", "B"])], None, &s, 4, &mut seeded(1)).unwrap();
        st.remove_token(0, 0);
        let (alpha, eta) = (0.1, 0.01);
        let w = st.conditional(0, 0, alpha, eta);
        assert!((w[0] - alpha / 4.0).abs() < 1e-15);
        assert_eq!(w[0], w[1]);
    }

    #[test]
    fn hand_computed_weight() {
        let w = conditional_weight(3.0, 5.0, 2.0, 10, 0.1, 0.01);
        assert!((w - 3.01 / 5.1 * 2.1).abs() < 1e-15);
        // 3.01 / 5.1 * 2.1 = 1.2394118, quoted elsewhere to four places.
        assert!((w - 1.2394118).abs() < 1e-7);
        assert!((w - 1.23935).abs() < 1e-4);
    }

    #[test]
    fn single_label_single_topic_sweep_is_a_no_op() {
        let s = space(&[("A", 1), ("B", 1)]);
        let docs = vec![doc("d1", &[0, 1, 2], &["A"]), doc("d2", &[2, 3], &["B"])];
        let mut st = init_state(&docs, None, &s, 4, &mut seeded(5)).unwrap();
        let before = st.clone();
        st.gibbs_sweep(0.1, 0.01, &mut seeded(9));
        assert_eq!(st, before);
    }

    #[test]
    fn shards_cover_all_documents() {
        let s = space(&[("A", 1)]);
        let docs: Vec<_> = (0..10).map(|i| doc(&format!("d{i}"), &vec![0; i + 1], &["A"])).collect();
        let st = init_state(&docs, None, &s, 1, &mut seeded(0)).unwrap();
        for shards in 1..=12 {
            let b = shard_bounds(&st.docs, shards);
            assert_eq!(b.len(), shards);
            assert_eq!(*b.last().unwrap(), 10);
            assert!(b.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
