//! Identities, instances, thresholded comparisons and their identity-level means.
//!
//! Scores are dissimilarities: a pair is declared "same identity" when its
//! score is strictly below the threshold. A genuine comparison is therefore an
//! error (false rejection) when `s >= t`, an impostor comparison is an error
//! (false acceptance) when `s < t`.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IdentityId(pub String);

impl fmt::Display for IdentityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<T: Into<String>> From<T> for IdentityId {
    fn from(s: T) -> Self {
        IdentityId(s.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Frr,
    Far,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Frr => "frr",
            Metric::Far => "far",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Balanced,
    Unbalanced,
}

/// One sample of an identity. `index` is 1-based and unique within the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub identity: IdentityId,
    pub index: usize,
    pub embedding: Option<Vec<f64>>,
}

/// Position of an instance inside a dataset: dense identity and instance indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceRef {
    pub identity: usize,
    pub instance: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dissimilarity {
    /// Euclidean distance between the raw embeddings.
    Euclidean,
    /// Euclidean distance after scaling both embeddings to unit norm.
    NormalizedEuclidean,
}

impl Dissimilarity {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Dissimilarity::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Dissimilarity::NormalizedEuclidean => {
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                let na = if na > 0.0 { na } else { 1.0 };
                let nb = if nb > 0.0 { nb } else { 1.0 };
                a.iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let d = x / na - y / nb;
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Scores {
    Embeddings {
        dim: usize,
        data: Vec<f64>,
        dissimilarity: Dissimilarity,
    },
    /// Condensed upper-triangular table over global instance indices; NaN = missing.
    Table { condensed: Vec<f64> },
}

/// Identity-grouped instances together with a way to score any pair of them.
#[derive(Debug, Clone)]
pub struct MatchDataset {
    identities: Vec<IdentityId>,
    instance_labels: Vec<Vec<String>>,
    offsets: Vec<usize>,
    scores: Scores,
}

fn offsets_from(counts: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(counts.len() + 1);
    offsets.push(0);
    for c in counts {
        offsets.push(offsets.last().unwrap() + c);
    }
    offsets
}

#[inline]
fn condensed_index(n: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// One row of a pairwise score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id_a: String,
    pub instance_a: String,
    pub id_b: String,
    pub instance_b: String,
    pub score: f64,
}

impl MatchDataset {
    /// Builds a dataset from embeddings laid out identity-major: the first
    /// `counts[0]` rows of `data` (each `dim` wide) belong to identity 0, etc.
    pub fn from_embedding_matrix(
        identities: Vec<IdentityId>,
        counts: Vec<usize>,
        dim: usize,
        data: Vec<f64>,
        dissimilarity: Dissimilarity,
    ) -> Result<Self> {
        if identities.len() != counts.len() {
            return Err(invalid("identity labels and instance counts differ in length"));
        }
        if dim == 0 {
            return Err(invalid("embedding dimension must be at least 1"));
        }
        let total: usize = counts.iter().sum();
        if data.len() != total * dim {
            return Err(invalid(format!(
                "expected {} embedding values ({} instances x {}), got {}",
                total * dim,
                total,
                dim,
                data.len()
            )));
        }
        check_unique(&identities)?;
        let instance_labels = counts
            .iter()
            .map(|&c| (1..=c).map(|k| k.to_string()).collect())
            .collect();
        Ok(MatchDataset {
            identities,
            instance_labels,
            offsets: offsets_from(&counts),
            scores: Scores::Embeddings {
                dim,
                data,
                dissimilarity,
            },
        })
    }

    /// Groups loose instances by identity (first-seen order) and sorts them by index.
    pub fn from_instances(instances: Vec<Instance>, dissimilarity: Dissimilarity) -> Result<Self> {
        let mut order: Vec<IdentityId> = Vec::new();
        let mut groups: HashMap<IdentityId, Vec<Instance>> = HashMap::new();
        let mut dim = None;
        for inst in instances {
            let emb = inst.embedding.as_ref().ok_or_else(|| {
                invalid(format!(
                    "instance {}/{} has no embedding",
                    inst.identity, inst.index
                ))
            })?;
            match dim {
                None => dim = Some(emb.len()),
                Some(d) if d != emb.len() => {
                    return Err(invalid(format!(
                        "instance {}/{} has dimension {}, expected {}",
                        inst.identity,
                        inst.index,
                        emb.len(),
                        d
                    )))
                }
                _ => {}
            }
            if !groups.contains_key(&inst.identity) {
                order.push(inst.identity.clone());
            }
            groups.entry(inst.identity.clone()).or_default().push(inst);
        }
        let dim = dim.ok_or_else(|| invalid("no instances"))?;
        let mut counts = Vec::with_capacity(order.len());
        let mut labels = Vec::with_capacity(order.len());
        let mut data = Vec::new();
        for id in &order {
            let mut group = groups.remove(id).unwrap();
            group.sort_by_key(|i| i.index);
            if group.windows(2).any(|w| w[0].index == w[1].index) {
                return Err(Error::Data(format!("duplicate instance index in identity {id}")));
            }
            counts.push(group.len());
            labels.push(group.iter().map(|i| i.index.to_string()).collect::<Vec<_>>());
            for inst in group {
                data.extend(inst.embedding.unwrap());
            }
        }
        let mut ds = Self::from_embedding_matrix(order, counts, dim, data, dissimilarity)?;
        ds.instance_labels = labels;
        Ok(ds)
    }

    /// Builds a dataset from pairwise score records. Identities and instances are
    /// numbered in first-seen order. Self-pairs and repeated pairs (in either
    /// orientation) are rejected.
    pub fn from_score_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = ScoreRecord>,
    {
        let mut id_index: HashMap<String, usize> = HashMap::new();
        let mut identities: Vec<IdentityId> = Vec::new();
        let mut inst_index: Vec<HashMap<String, usize>> = Vec::new();
        let mut labels: Vec<Vec<String>> = Vec::new();
        let mut rows: Vec<(usize, usize, usize, usize, f64, usize)> = Vec::new();

        let mut lookup = |id: &str, inst: &str| -> (usize, usize) {
            let i = *id_index.entry(id.to_string()).or_insert_with(|| {
                identities.push(IdentityId(id.to_string()));
                inst_index.push(HashMap::new());
                labels.push(Vec::new());
                identities.len() - 1
            });
            let next = inst_index[i].len();
            let k = *inst_index[i].entry(inst.to_string()).or_insert_with(|| {
                labels[i].push(inst.to_string());
                next
            });
            (i, k)
        };

        for (row, rec) in records.into_iter().enumerate() {
            if !rec.score.is_finite() {
                return Err(Error::Data(format!(
                    "record {}: non-finite score for ({}/{}, {}/{})",
                    row + 1,
                    rec.id_a,
                    rec.instance_a,
                    rec.id_b,
                    rec.instance_b
                )));
            }
            let (i, k) = lookup(&rec.id_a, &rec.instance_a);
            let (j, l) = lookup(&rec.id_b, &rec.instance_b);
            if (i, k) == (j, l) {
                return Err(Error::Data(format!(
                    "record {}: self-comparison of {}/{}",
                    row + 1,
                    rec.id_a,
                    rec.instance_a
                )));
            }
            rows.push((i, k, j, l, rec.score, row + 1));
        }
        if identities.is_empty() {
            return Err(invalid("no score records"));
        }
        let counts: Vec<usize> = labels.iter().map(Vec::len).collect();
        let offsets = offsets_from(&counts);
        let n = *offsets.last().unwrap();
        let mut condensed = vec![f64::NAN; n * (n - 1) / 2];
        for (i, k, j, l, s, row) in rows {
            let a = offsets[i] + k;
            let b = offsets[j] + l;
            let idx = condensed_index(n, a, b);
            if !condensed[idx].is_nan() {
                return Err(Error::Data(format!(
                    "record {}: duplicate comparison ({}/{}, {}/{})",
                    row, identities[i], labels[i][k], identities[j], labels[j][l]
                )));
            }
            condensed[idx] = s;
        }
        Ok(MatchDataset {
            identities,
            instance_labels: labels,
            offsets,
            scores: Scores::Table { condensed },
        })
    }

    pub fn g(&self) -> usize {
        self.identities.len()
    }

    pub fn identities(&self) -> &[IdentityId] {
        &self.identities
    }

    pub fn instance_counts(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn instances_of(&self, identity: usize) -> usize {
        self.offsets[identity + 1] - self.offsets[identity]
    }

    pub fn instance_label(&self, r: InstanceRef) -> &str {
        &self.instance_labels[r.identity][r.instance]
    }

    pub fn total_instances(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_balanced(&self) -> bool {
        let counts = self.instance_counts();
        counts.windows(2).all(|w| w[0] == w[1])
    }

    pub fn has_score_table(&self) -> bool {
        matches!(self.scores, Scores::Table { .. })
    }

    /// Score of a pair, `None` when the pair is missing from a score table.
    pub fn score(&self, a: InstanceRef, b: InstanceRef) -> Option<f64> {
        let ga = self.offsets[a.identity] + a.instance;
        let gb = self.offsets[b.identity] + b.instance;
        self.score_global(ga, gb)
    }

    fn score_global(&self, ga: usize, gb: usize) -> Option<f64> {
        if ga == gb {
            return None;
        }
        match &self.scores {
            Scores::Embeddings {
                dim,
                data,
                dissimilarity,
            } => Some(dissimilarity.eval(
                &data[ga * dim..(ga + 1) * dim],
                &data[gb * dim..(gb + 1) * dim],
            )),
            Scores::Table { condensed } => {
                let s = condensed[condensed_index(self.total_instances(), ga, gb)];
                (!s.is_nan()).then_some(s)
            }
        }
    }

    fn instance_ref(&self, global: usize) -> InstanceRef {
        let identity = self.offsets.partition_point(|&o| o <= global) - 1;
        InstanceRef {
            identity,
            instance: global - self.offsets[identity],
        }
    }

    fn missing(&self, ga: usize, gb: usize) -> Error {
        let a = self.instance_ref(ga);
        let b = self.instance_ref(gb);
        Error::Data(format!(
            "missing score for pair ({}/{}, {}/{})",
            self.identities[a.identity],
            self.instance_label(a),
            self.identities[b.identity],
            self.instance_label(b)
        ))
    }

    /// Every score split into genuine and impostor lists, tagged with the
    /// identities involved. Fails on the first missing pair.
    pub fn collect_scores(&self) -> Result<(Vec<(f64, u32)>, Vec<(f64, u32, u32)>)> {
        let g = self.g();
        let parts: Vec<Result<(Vec<(f64, u32)>, Vec<(f64, u32, u32)>)>> = (0..g)
            .into_par_iter()
            .map(|i| {
                let mut gen = Vec::new();
                let mut imp = Vec::new();
                for ga in self.offsets[i]..self.offsets[i + 1] {
                    for gb in ga + 1..self.total_instances() {
                        let j = if gb < self.offsets[i + 1] {
                            i
                        } else {
                            self.instance_ref(gb).identity
                        };
                        let s = self.score_global(ga, gb).ok_or_else(|| self.missing(ga, gb))?;
                        if i == j {
                            gen.push((s, i as u32));
                        } else {
                            imp.push((s, i as u32, j as u32));
                        }
                    }
                }
                Ok((gen, imp))
            })
            .collect();
        let mut gen = Vec::new();
        let mut imp = Vec::new();
        for p in parts {
            let (a, b) = p?;
            gen.extend(a);
            imp.extend(b);
        }
        Ok((gen, imp))
    }
}

fn check_unique(ids: &[IdentityId]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Data(format!("duplicate identity {id}")));
        }
    }
    Ok(())
}

/// Binary outcome of one thresholded comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparisonOutcome {
    pub a: InstanceRef,
    pub b: InstanceRef,
    /// `true` when the comparison is an error at the threshold.
    pub value: bool,
}

impl ComparisonOutcome {
    pub fn is_genuine(&self) -> bool {
        self.a.identity == self.b.identity
    }
}

/// Error indicator of a single comparison: `s >= t` for genuine pairs and
/// `s < t` for impostor pairs.
#[inline]
pub fn outcome_value(genuine: bool, score: f64, threshold: f64) -> bool {
    if genuine {
        score >= threshold
    } else {
        score < threshold
    }
}

/// Streams every unordered comparison of the dataset at threshold `t`.
/// Self-pairs are skipped.
pub fn threshold_outcomes(
    ds: &MatchDataset,
    t: f64,
) -> impl Iterator<Item = Result<ComparisonOutcome>> + '_ {
    let n = ds.total_instances();
    (0..n).flat_map(move |ga| {
        (ga + 1..n).map(move |gb| {
            let s = ds.score_global(ga, gb).ok_or_else(|| ds.missing(ga, gb))?;
            let a = ds.instance_ref(ga);
            let b = ds.instance_ref(gb);
            Ok(ComparisonOutcome {
                a,
                b,
                value: outcome_value(a.identity == b.identity, s, t),
            })
        })
    })
}

/// Integer tallies of errors per identity cell. The diagonal counts unordered
/// within-identity comparisons.
#[derive(Debug, Clone)]
pub struct CellCounts {
    instances: Vec<usize>,
    ones: Vec<u64>,
}

impl CellCounts {
    /// Tallies a stream of outcomes; the stream must contain every unordered
    /// comparison of the dataset exactly once, in any order.
    pub fn from_outcomes<I>(outcomes: I, ds: &MatchDataset) -> Result<Self>
    where
        I: IntoIterator<Item = Result<ComparisonOutcome>>,
    {
        let g = ds.g();
        let instances = ds.instance_counts();
        let mut ones = vec![0u64; g * g];
        let mut seen = vec![0u64; g * g];
        for o in outcomes {
            let o = o?;
            let (i, j) = (o.a.identity, o.b.identity);
            if i >= g || j >= g || o.a.instance >= instances[i] || o.b.instance >= instances[j] {
                return Err(Error::Data(format!("outcome references unknown instance {o:?}")));
            }
            if o.a == o.b {
                return Err(Error::Data(format!("self-comparison in outcome stream {o:?}")));
            }
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            seen[lo * g + hi] += 1;
            if o.value {
                ones[lo * g + hi] += 1;
            }
        }
        for i in 0..g {
            for j in i..g {
                let expected = if i == j {
                    (instances[i] * instances[i].saturating_sub(1) / 2) as u64
                } else {
                    (instances[i] * instances[j]) as u64
                };
                if seen[i * g + j] != expected {
                    return Err(Error::Data(format!(
                        "cell ({}, {}) has {} comparisons, expected {}",
                        ds.identities[i], ds.identities[j], seen[i * g + j], expected
                    )));
                }
            }
        }
        Ok(Self::mirrored(instances, ones))
    }

    /// Direct tally at threshold `t`, parallel over identities.
    pub fn at_threshold(ds: &MatchDataset, t: f64) -> Result<Self> {
        let g = ds.g();
        let n = ds.total_instances();
        let rows: Vec<Result<Vec<u64>>> = (0..g)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0u64; g];
                for ga in ds.offsets[i]..ds.offsets[i + 1] {
                    let mut j = i;
                    for gb in ga + 1..n {
                        while gb >= ds.offsets[j + 1] {
                            j += 1;
                        }
                        let s = ds.score_global(ga, gb).ok_or_else(|| ds.missing(ga, gb))?;
                        if outcome_value(i == j, s, t) {
                            row[j] += 1;
                        }
                    }
                }
                Ok(row)
            })
            .collect();
        let mut ones = vec![0u64; g * g];
        for (i, row) in rows.into_iter().enumerate() {
            let row = row?;
            ones[i * g..(i + 1) * g].copy_from_slice(&row);
        }
        Ok(Self::mirrored(ds.instance_counts(), ones))
    }

    /// Builds tallies from an upper-triangular `ones` matrix (row-major, `g x g`).
    pub(crate) fn mirrored(instances: Vec<usize>, mut ones: Vec<u64>) -> Self {
        let g = instances.len();
        for i in 0..g {
            for j in i + 1..g {
                ones[j * g + i] = ones[i * g + j];
            }
        }
        CellCounts { instances, ones }
    }

    pub fn g(&self) -> usize {
        self.instances.len()
    }

    /// Errors in cell `(i, j)`; unordered pairs on the diagonal.
    pub fn ones(&self, i: usize, j: usize) -> u64 {
        self.ones[i * self.g() + j]
    }

    pub fn aggregates(&self) -> PairAggregates {
        let g = self.g();
        let mut y_bar = vec![0.0; g * g];
        for i in 0..g {
            for j in 0..g {
                let (num, den) = if i == j {
                    let m = self.instances[i];
                    (2 * self.ones(i, i), (m * m.saturating_sub(1)) as u64)
                } else {
                    (self.ones(i, j), (self.instances[i] * self.instances[j]) as u64)
                };
                y_bar[i * g + j] = if den > 0 { num as f64 / den as f64 } else { 0.0 };
            }
        }
        PairAggregates {
            instances: self.instances.clone(),
            y_bar,
        }
    }

    pub fn outcome_store(&self) -> OutcomeStore {
        let g = self.g();
        let m = &self.instances;
        let total_m: usize = m.iter().sum();
        let within = (0..g)
            .map(|i| (self.ones(i, i), (m[i] * m[i].saturating_sub(1) / 2) as u64))
            .collect();
        let row = (0..g)
            .map(|i| {
                let ones = (0..g).filter(|&j| j != i).map(|j| self.ones(i, j)).sum();
                (ones, (m[i] * (total_m - m[i])) as u64)
            })
            .collect();
        OutcomeStore { within, row }
    }
}

/// Identity-level means of the comparison outcomes (`G x G`, symmetric) plus
/// the instance counts they were computed from.
///
/// Diagonal cells hold within-identity means over the `M_i (M_i - 1)` ordered
/// pairs, off-diagonal cells cross-identity means over `M_i M_j` pairs. An
/// identity with a single instance has no genuine comparisons; its diagonal
/// cell is stored as 0 and carries zero weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAggregates {
    instances: Vec<usize>,
    y_bar: Vec<f64>,
}

/// Aggregates a complete outcome stream into identity-level means.
pub fn aggregate_pairs<I>(outcomes: I, ds: &MatchDataset) -> Result<PairAggregates>
where
    I: IntoIterator<Item = Result<ComparisonOutcome>>,
{
    Ok(CellCounts::from_outcomes(outcomes, ds)?.aggregates())
}

impl PairAggregates {
    /// Aggregates of `ds` at threshold `t`.
    pub fn at_threshold(ds: &MatchDataset, t: f64) -> Result<Self> {
        Ok(CellCounts::at_threshold(ds, t)?.aggregates())
    }

    /// Builds aggregates from a precomputed mean matrix. The matrix must be
    /// square, symmetric and valued in `[0, 1]`.
    pub fn from_means(instances: Vec<usize>, y_bar: Vec<Vec<f64>>) -> Result<Self> {
        let g = instances.len();
        if y_bar.len() != g || y_bar.iter().any(|r| r.len() != g) {
            return Err(invalid(format!("mean matrix must be {g} x {g}")));
        }
        if instances.iter().any(|&m| m == 0) {
            return Err(invalid("every identity needs at least one instance"));
        }
        for i in 0..g {
            for j in 0..g {
                let v = y_bar[i][j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(invalid(format!("mean ({i}, {j}) = {v} outside [0, 1]")));
                }
                if y_bar[j][i] != v {
                    return Err(invalid(format!("mean matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        let flat = y_bar.into_iter().flatten().collect();
        Ok(PairAggregates {
            instances,
            y_bar: flat,
        })
    }

    pub fn g(&self) -> usize {
        self.instances.len()
    }

    #[inline]
    pub fn y(&self, i: usize, j: usize) -> f64 {
        self.y_bar[i * self.instances.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let g = self.g();
        &self.y_bar[i * g..(i + 1) * g]
    }

    pub fn instances(&self) -> &[usize] {
        &self.instances
    }

    pub fn m(&self, i: usize) -> usize {
        self.instances[i]
    }

    /// `M_i (M_i - 1)`, the number of ordered genuine pairs of identity `i`.
    pub fn m_tilde(&self, i: usize) -> f64 {
        let m = self.instances[i] as f64;
        m * (m - 1.0)
    }

    /// Number of ordered comparisons behind cell `(i, j)`.
    pub fn count(&self, i: usize, j: usize) -> u64 {
        if i == j {
            (self.instances[i] * self.instances[i].saturating_sub(1)) as u64
        } else {
            (self.instances[i] * self.instances[j]) as u64
        }
    }

    pub fn is_balanced(&self) -> bool {
        self.instances.windows(2).all(|w| w[0] == w[1])
    }

    pub fn setting(&self) -> Setting {
        if self.is_balanced() {
            Setting::Balanced
        } else {
            Setting::Unbalanced
        }
    }

    /// Distinct genuine comparisons, `sum_i M_i (M_i - 1) / 2`.
    pub fn genuine_pairs(&self) -> f64 {
        (0..self.g()).map(|i| self.m_tilde(i)).sum::<f64>() / 2.0
    }

    /// Distinct impostor comparisons, `sum_{i<j} M_i M_j`.
    pub fn impostor_pairs(&self) -> f64 {
        let total: f64 = self.instances.iter().map(|&m| m as f64).sum();
        let sq: f64 = self.instances.iter().map(|&m| (m * m) as f64).sum();
        (total * total - sq) / 2.0
    }
}

/// Per-identity error tallies needed by the two-level bootstrap: unordered
/// within-identity comparisons, and every cross-identity comparison touching
/// the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeStore {
    /// `(errors, comparisons)` among the identity's own instances.
    pub within: Vec<(u64, u64)>,
    /// `(errors, comparisons)` between the identity and all others.
    pub row: Vec<(u64, u64)>,
}

impl OutcomeStore {
    pub fn g(&self) -> usize {
        self.within.len()
    }
}
