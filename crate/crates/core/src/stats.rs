//! Bootstrap intervals, directional pair verdicts, net source scores and the
//! cross-model consistency check.

use std::fmt;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{FlowData, TimeBucket, Weighting};
use crate::provenance::Provenance;
use crate::rng::{self, Rng};

/// Empirical quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub q025: f64,
    pub q05: f64,
    pub q25: f64,
    pub q75: f64,
    pub q95: f64,
    pub q975: f64,
}

impl Quantiles {
    fn from_sorted(s: &[f64]) -> Self {
        Quantiles {
            q025: quantile(s, 0.025),
            q05: quantile(s, 0.05),
            q25: quantile(s, 0.25),
            q75: quantile(s, 0.75),
            q95: quantile(s, 0.95),
            q975: quantile(s, 0.975),
        }
    }
}

/// A weighted-mean statistic and its percentile-bootstrap distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Statistic on the original sample; `None` with no documents.
    pub center: Option<f64>,
    /// `None` when fewer than two documents make an interval meaningless.
    pub quantiles: Option<Quantiles>,
    pub docs: usize,
}

impl Estimate {
    pub fn is_defined(&self) -> bool {
        self.quantiles.is_some()
    }
}

fn weighted_mean(values: &[f64], weights: &[f64], picks: impl Iterator<Item = usize>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in picks {
        num += weights[i] * values[i];
        den += weights[i];
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Percentile bootstrap of `Σ w·v / Σ w` over documents, resampling the
/// document multiset with replacement `resamples` times.
pub fn bootstrap_stat(values: &[f64], weights: &[f64], resamples: usize, rng: &mut Rng) -> Estimate {
    assert_eq!(values.len(), weights.len());
    let n = values.len();
    if n == 0 {
        return Estimate { center: None, quantiles: None, docs: 0 };
    }
    let center = weighted_mean(values, weights, 0..n);
    if n < 2 || resamples == 0 {
        return Estimate { center: Some(center), quantiles: None, docs: n };
    }
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            let (mut num, mut den) = (0.0, 0.0);
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                num += weights[i] * values[i];
                den += weights[i];
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    Estimate {
        center: Some(center),
        quantiles: Some(Quantiles::from_sorted(&stats)),
        docs: n,
    }
}

/// Bootstrap of incorporation from `source` (row) into the documents of
/// `target` (column) within `bucket`.
pub fn bootstrap_cell(
    data: &FlowData,
    source: usize,
    target: usize,
    bucket: &TimeBucket,
    weighting: Weighting,
    resamples: usize,
    rng: &mut Rng,
) -> Estimate {
    let members = data.members(target, bucket);
    let values: Vec<f64> = members.iter().map(|&d| data.docs[d].shares[source]).collect();
    let weights: Vec<f64> = members.iter().map(|&d| weighting.weight(&data.docs[d])).collect();
    bootstrap_stat(&values, &weights, resamples, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    AExports,
    BExports,
    Indistinguishable,
}

impl Direction {
    fn flipped(self) -> Self {
        match self {
            Direction::AExports => Direction::BExports,
            Direction::BExports => Direction::AExports,
            Direction::Indistinguishable => Direction::Indistinguishable,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::AExports => "a_exports",
            Direction::BExports => "b_exports",
            Direction::Indistinguishable => "indistinguishable",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairVerdict {
    pub a: String,
    pub b: String,
    pub direction: Direction,
    /// Incorporation of a's language, measured in b's documents.
    pub a_to_b: Estimate,
    /// Incorporation of b's language, measured in a's documents.
    pub b_to_a: Estimate,
    pub note: Option<String>,
}

impl PairVerdict {
    /// The same verdict seen from `b`'s side.
    pub fn swapped(&self) -> PairVerdict {
        PairVerdict {
            a: self.b.clone(),
            b: self.a.clone(),
            direction: self.direction.flipped(),
            a_to_b: self.b_to_a.clone(),
            b_to_a: self.a_to_b.clone(),
            note: self.note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictOptions {
    pub resamples: usize,
    pub seed: u64,
    pub weighting: Weighting,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        VerdictOptions {
            resamples: 500,
            seed: 0,
            weighting: Weighting::Tokens,
        }
    }
}

fn flow_rng(seed: u64, bucket: &TimeBucket, source: &str, target: &str) -> Rng {
    rng::derived(seed, &["bootstrap", &bucket.label, source, target])
}

/// Compare `a → b` against `b → a` in `bucket` by non-overlap of their 95%
/// percentile intervals. Streams are keyed by the directed pair, so the
/// verdict for `(b, a)` is exactly the mirror of `(a, b)`.
pub fn pair_verdict(data: &FlowData, a: &str, b: &str, bucket: &TimeBucket, options: &VerdictOptions) -> Result<PairVerdict> {
    let (ra, ca) = data.area_indices(a)?;
    let (rb, cb) = data.area_indices(b)?;
    let a_to_b = bootstrap_cell(data, ra, cb, bucket, options.weighting, options.resamples, &mut flow_rng(options.seed, bucket, a, b));
    let b_to_a = bootstrap_cell(data, rb, ca, bucket, options.weighting, options.resamples, &mut flow_rng(options.seed, bucket, b, a));
    let (direction, note) = match (a_to_b.quantiles, b_to_a.quantiles) {
        (Some(x), Some(y)) => {
            let d = if x.q025 > y.q975 {
                Direction::AExports
            } else if y.q025 > x.q975 {
                Direction::BExports
            } else {
                Direction::Indistinguishable
            };
            (d, None)
        }
        _ => {
            // Named in sorted order so both orientations carry the same note.
            let mut sides = [(a, b_to_a.docs), (b, a_to_b.docs)];
            sides.sort();
            let [(x, nx), (y, ny)] = sides;
            let note = format!("{x}/{y} in {}: interval undefined ({nx} and {ny} member documents)", bucket.label);
            log::warn!("{note}");
            (Direction::Indistinguishable, Some(note))
        }
    };
    Ok(PairVerdict {
        a: a.to_string(),
        b: b.to_string(),
        direction,
        a_to_b,
        b_to_a,
        note,
    })
}

/// Verdicts for every unordered pair of `areas`, `(areas[i], areas[j])`
/// with `i < j`, computed in parallel.
pub fn all_pair_verdicts(data: &FlowData, areas: &[String], bucket: &TimeBucket, options: &VerdictOptions) -> Result<Vec<PairVerdict>> {
    let pairs: Vec<(usize, usize)> = (0..areas.len())
        .flat_map(|i| (i + 1..areas.len()).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map(|&(i, j)| pair_verdict(data, &areas[i], &areas[j], bucket, options))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetSourceScore {
    pub area: String,
    pub bucket: String,
    pub score: i64,
    pub exports: usize,
    pub imports: usize,
    pub ties: usize,
}

/// `S_a` = pairs where `a` exports minus pairs where `a` imports, over the
/// given verdicts. Output follows the order of `areas`.
pub fn net_source_scores(areas: &[String], verdicts: &[PairVerdict], bucket: &str) -> Vec<NetSourceScore> {
    let mut scores: Vec<NetSourceScore> = areas
        .iter()
        .map(|a| NetSourceScore {
            area: a.clone(),
            bucket: bucket.to_string(),
            score: 0,
            exports: 0,
            imports: 0,
            ties: 0,
        })
        .collect();
    let pos = |name: &str| areas.iter().position(|a| a == name);
    for v in verdicts {
        let (Some(i), Some(j)) = (pos(&v.a), pos(&v.b)) else { continue };
        match v.direction {
            Direction::AExports => {
                scores[i].exports += 1;
                scores[j].imports += 1;
            }
            Direction::BExports => {
                scores[j].exports += 1;
                scores[i].imports += 1;
            }
            Direction::Indistinguishable => {
                scores[i].ties += 1;
                scores[j].ties += 1;
            }
        }
    }
    for s in &mut scores {
        s.score = s.exports as i64 - s.imports as i64;
    }
    scores
}

pub fn write_scores(path: &Path, scores: &[NetSourceScore], provenance: &Provenance) -> Result<()> {
    let mut text = provenance.header();
    text.push_str("area\tbucket\tS\texports\timports\tties\n");
    for s in scores {
        text.push_str(&format!("{}\t{}\t{}\t{}\t{}\t{}\n", s.area, s.bucket, s.score, s.exports, s.imports, s.ties));
    }
    crate::tsv::write_string(path, &text)
}

pub fn write_verdicts(path: &Path, verdicts: &[PairVerdict], provenance: &Provenance) -> Result<()> {
    let fmt_est = |e: &Estimate| -> String {
        let c = e.center.map(fmt_num).unwrap_or_else(|| "NA".into());
        match e.quantiles {
            Some(q) => format!("{c}\t{}\t{}", fmt_num(q.q025), fmt_num(q.q975)),
            None => format!("{c}\tNA\tNA"),
        }
    };
    let mut text = provenance.header();
    text.push_str("a\tb\tdirection\ta_to_b\ta_to_b_lo\ta_to_b_hi\tb_to_a\tb_to_a_lo\tb_to_a_hi\n");
    for v in verdicts {
        text.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", v.a, v.b, v.direction, fmt_est(&v.a_to_b), fmt_est(&v.b_to_a)));
    }
    crate::tsv::write_string(path, &text)
}

/// Fixed-precision rendering shared by every numeric TSV column.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.6}")
}

/// Pearson correlation; `None` if either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// One model's inter-area borrowing percentages, flattened over
/// (bucket, source, target) with source ≠ target. `NaN` marks cells with no
/// target documents.
#[derive(Debug, Clone, PartialEq)]
pub struct BorrowingVector {
    pub descriptor: String,
    pub areas: Vec<String>,
    pub values: Vec<f64>,
}

impl BorrowingVector {
    pub fn from_flow(descriptor: &str, data: &FlowData, areas: &[String], buckets: &[TimeBucket], weighting: Weighting) -> Result<Self> {
        let idx: Vec<(usize, usize)> = areas.iter().map(|a| data.area_indices(a)).collect::<Result<_>>()?;
        let mut values = Vec::new();
        for bucket in buckets {
            let m = crate::flow::incorporation_matrix(data, bucket, weighting);
            for &(ri, _) in &idx {
                for &(rj, cj) in &idx {
                    if ri != rj {
                        values.push(m.cells[ri][cj].unwrap_or(f64::NAN));
                    }
                }
            }
        }
        Ok(BorrowingVector {
            descriptor: descriptor.to_string(),
            areas: areas.to_vec(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub descriptors: Vec<String>,
    /// Symmetric with unit diagonal; `NaN` where undefined.
    pub correlations: Vec<Vec<f64>>,
}

impl ConsistencyReport {
    pub fn min_off_diagonal(&self) -> Option<f64> {
        let n = self.descriptors.len();
        let mut min: Option<f64> = None;
        for i in 0..n {
            for j in i + 1..n {
                let c = self.correlations[i][j];
                min = Some(min.map_or(c, |m: f64| m.min(c)));
            }
        }
        min
    }

    pub fn write(&self, path: &Path, provenance: &Provenance) -> Result<()> {
        let mut text = provenance.header();
        text.push_str("model");
        for d in &self.descriptors {
            text.push('\t');
            text.push_str(d);
        }
        text.push('\n');
        for (d, row) in self.descriptors.iter().zip(&self.correlations) {
            text.push_str(d);
            for &c in row {
                text.push('\t');
                text.push_str(&if c.is_nan() { "NA".to_string() } else { fmt_num(c) });
            }
            text.push('\n');
        }
        crate::tsv::write_string(path, &text)
    }
}

/// Pairwise Pearson correlations between models' borrowing vectors, using
/// the positions defined in both vectors of each pair.
pub fn consistency_report(models: &[BorrowingVector]) -> Result<ConsistencyReport> {
    if models.len() < 2 {
        return Err(Error::Config("consistency needs at least two models".into()));
    }
    let first = &models[0];
    for m in &models[1..] {
        if m.areas != first.areas || m.values.len() != first.values.len() {
            return Err(Error::MismatchedAreas(format!(
                "{} covers [{}] but {} covers [{}]",
                first.descriptor,
                first.areas.join(", "),
                m.descriptor,
                m.areas.join(", ")
            )));
        }
    }
    let n = models.len();
    let mut correlations = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (x, y): (Vec<f64>, Vec<f64>) = models[i]
                .values
                .iter()
                .zip(&models[j].values)
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(a, b)| (*a, *b))
                .unzip();
            let c = pearson(&x, &y).unwrap_or(f64::NAN);
            correlations[i][j] = c;
            correlations[j][i] = c;
        }
    }
    Ok(ConsistencyReport {
        descriptors: models.iter().map(|m| m.descriptor.clone()).collect(),
        correlations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 1.0), 4.0);
        assert!((quantile(&s, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile(&s, 0.25) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn identical_documents_give_zero_width_interval() {
        let v = vec![0.3; 20];
        let w = vec![50.0; 20];
        let e = bootstrap_stat(&v, &w, 500, &mut rng::seeded(1));
        let q = e.quantiles.unwrap();
        assert!((q.q025 - 0.3).abs() < 1e-12 && (q.q975 - 0.3).abs() < 1e-12);
        assert_eq!(e.center, Some(0.3));
    }

    #[test]
    fn small_samples_are_flagged() {
        assert_eq!(bootstrap_stat(&[], &[], 10, &mut rng::seeded(1)).center, None);
        let one = bootstrap_stat(&[0.5], &[3.0], 10, &mut rng::seeded(1));
        assert_eq!(one.center, Some(0.5));
        assert!(!one.is_defined());
    }

    #[test]
    fn bootstrap_is_deterministic_and_ordered() {
        let v: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let w: Vec<f64> = (0..40).map(|i| 10.0 + i as f64).collect();
        let a = bootstrap_stat(&v, &w, 500, &mut rng::seeded(9));
        let b = bootstrap_stat(&v, &w, 500, &mut rng::seeded(9));
        assert_eq!(a, b);
        let q = a.quantiles.unwrap();
        let c = a.center.unwrap();
        assert!(q.q025 <= q.q05 && q.q05 <= q.q25 && q.q25 <= c && c <= q.q75 && q.q75 <= q.q95 && q.q95 <= q.q975);
    }

    #[test]
    fn scores_are_conserved() {
        let areas: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let e = Estimate { center: None, quantiles: None, docs: 0 };
        let v = |a: &str, b: &str, d| PairVerdict {
            a: a.into(),
            b: b.into(),
            direction: d,
            a_to_b: e.clone(),
            b_to_a: e.clone(),
            note: None,
        };
        let verdicts = [
            v("A", "B", Direction::AExports),
            v("A", "C", Direction::AExports),
            v("B", "C", Direction::Indistinguishable),
        ];
        let s = net_source_scores(&areas, &verdicts, "all");
        assert_eq!(s.iter().map(|x| x.score).collect::<Vec<_>>(), [2, -1, -1]);
        assert_eq!(s.iter().map(|x| x.score).sum::<i64>(), 0);
        assert_eq!(s[1].ties, 1);
        let swapped = verdicts[0].swapped();
        assert_eq!(swapped.direction, Direction::BExports);
        assert_eq!(swapped.swapped(), verdicts[0]);
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let y = [4.0, 3.0, 2.0, 1.0];
        assert!((pearson(&x, &y).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &[1.0; 4]), None);
    }

    #[test]
    fn consistency_rejects_mismatched_areas() {
        let a = BorrowingVector { descriptor: "m1".into(), areas: vec!["A".into(), "B".into()], values: vec![0.1, 0.2] };
        let b = BorrowingVector { descriptor: "m2".into(), areas: vec!["A".into(), "C".into()], values: vec![0.1, 0.2] };
        assert!(matches!(consistency_report(&[a.clone(), b]), Err(Error::MismatchedAreas(_))));
        let r = consistency_report(&[a.clone(), a]).unwrap();
        assert!((r.correlations[0][1] - 1.0).abs() < 1e-12);
    }
}
