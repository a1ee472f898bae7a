//! Empirical ROC curves and pointwise intervals for FRR at a fixed FAR.
//!
//! Scores are dissimilarities: at threshold `t` an impostor comparison is a
//! false accept when `s < t` and a genuine comparison a false reject when
//! `s >= t`. FAR therefore grows with `t` and FRR shrinks.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bootstrap::{draw_weights, percentile_interval, BootstrapDistribution, Scheme, MAX_REDRAWS};
use crate::data_model::{MatchDataset, Metric, PairAggregates};
use crate::error::{invalid, Error, Result};
use crate::rng::stream_rng;
use crate::wilson::{check_alpha, wilson_interval, IntervalResult, WilsonMode, WilsonOptions};

/// Genuine and impostor scores of a dataset, sorted ascending, with the
/// identities behind each comparison.
#[derive(Debug, Clone)]
pub struct ScoreIndex {
    instances: Vec<usize>,
    genuine: Vec<(f64, u32)>,
    impostor: Vec<(f64, u32, u32)>,
}

impl ScoreIndex {
    pub fn new(ds: &MatchDataset) -> Result<Self> {
        let (mut genuine, mut impostor) = ds.collect_scores()?;
        if genuine.is_empty() && impostor.is_empty() {
            return Err(invalid("dataset has no comparisons"));
        }
        genuine.par_sort_by(|a, b| a.0.total_cmp(&b.0));
        impostor.par_sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(ScoreIndex {
            instances: ds.instance_counts(),
            genuine,
            impostor,
        })
    }

    pub fn g(&self) -> usize {
        self.instances.len()
    }

    /// Pooled FAR at `t`: fraction of impostor scores below `t`.
    pub fn far_at(&self, t: f64) -> f64 {
        if self.impostor.is_empty() {
            return f64::NAN;
        }
        self.impostor.partition_point(|s| s.0 < t) as f64 / self.impostor.len() as f64
    }

    /// Pooled FRR at `t`: fraction of genuine scores at or above `t`.
    pub fn frr_at(&self, t: f64) -> f64 {
        if self.genuine.is_empty() {
            return f64::NAN;
        }
        let below = self.genuine.partition_point(|s| s.0 < t);
        (self.genuine.len() - below) as f64 / self.genuine.len() as f64
    }

    /// Largest `t` with `FAR(t) <= target`: the `(k+1)`-th smallest impostor
    /// score, `k = floor(target N)`, or `+inf` when every score may be accepted.
    pub fn threshold_for_far(&self, target: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&target) {
            return Err(invalid(format!("target FAR {target} outside [0, 1]")));
        }
        let n = self.impostor.len();
        if n == 0 {
            return Err(invalid("no impostor comparisons"));
        }
        let k = snap_floor(target * n as f64);
        Ok(if k >= n { f64::INFINITY } else { self.impostor[k].0 })
    }

    /// Aggregates at `t` built from the sorted lists.
    pub fn aggregates_at(&self, t: f64) -> Result<PairAggregates> {
        let g = self.g();
        let mut ones = vec![0u64; g * g];
        for &(s, i) in &self.genuine {
            if s >= t {
                ones[i as usize * g + i as usize] += 2;
            }
        }
        for &(_, i, j) in &self.impostor[..self.impostor.partition_point(|x| x.0 < t)] {
            ones[i as usize * g + j as usize] += 1;
            ones[j as usize * g + i as usize] += 1;
        }
        let m = &self.instances;
        let y = (0..g)
            .map(|i| {
                (0..g)
                    .map(|j| {
                        let den = if i == j { m[i] * m[i].saturating_sub(1) } else { m[i] * m[j] };
                        if den == 0 {
                            0.0
                        } else {
                            ones[i * g + j] as f64 / den as f64
                        }
                    })
                    .collect()
            })
            .collect();
        PairAggregates::from_means(m.clone(), y)
    }
}

fn snap_floor(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRoc {
    /// Ascending; starts at `-inf` and ends at `+inf`.
    pub thresholds: Vec<f64>,
    pub frr_at: Vec<f64>,
    pub far_at: Vec<f64>,
}

impl EmpiricalRoc {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Largest listed threshold with `FAR <= target`.
    pub fn threshold_for_far(&self, target: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&target) {
            return Err(invalid(format!("target FAR {target} outside [0, 1]")));
        }
        let k = self.far_at.partition_point(|&f| f <= target);
        Ok(self.thresholds[k.max(1) - 1])
    }

    /// Writes `threshold,frr,far` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["threshold", "frr", "far"]).map_err(csv_err)?;
        for k in 0..self.len() {
            w.write_record([
                self.thresholds[k].to_string(),
                self.frr_at[k].to_string(),
                self.far_at[k].to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// FRR and FAR at every distinct observed score plus the `-inf` and `+inf`
/// sentinels, in one pass over the sorted score lists.
pub fn empirical_roc(ds: &MatchDataset) -> Result<EmpiricalRoc> {
    empirical_roc_from_index(&ScoreIndex::new(ds)?)
}

pub fn empirical_roc_from_index(idx: &ScoreIndex) -> Result<EmpiricalRoc> {
    if idx.genuine.is_empty() || idx.impostor.is_empty() {
        return Err(invalid("ROC needs both genuine and impostor comparisons"));
    }
    let ng = idx.genuine.len() as f64;
    let ni = idx.impostor.len() as f64;
    let mut thresholds = vec![f64::NEG_INFINITY];
    let mut frr_at = vec![1.0];
    let mut far_at = vec![0.0];
    let (mut gi, mut ii) = (0usize, 0usize);
    loop {
        let next_g = idx.genuine.get(gi).map(|x| x.0);
        let next_i = idx.impostor.get(ii).map(|x| x.0);
        let t = match (next_g, next_i) {
            (None, None) => break,
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (Some(a), Some(b)) => a.min(b),
        };
        // at t, comparisons strictly below t have been passed
        thresholds.push(t);
        frr_at.push((ng - gi as f64) / ng);
        far_at.push(ii as f64 / ni);
        while gi < idx.genuine.len() && idx.genuine[gi].0 == t {
            gi += 1;
        }
        while ii < idx.impostor.len() && idx.impostor[ii].0 == t {
            ii += 1;
        }
    }
    thresholds.push(f64::INFINITY);
    frr_at.push(0.0);
    far_at.push(1.0);
    Ok(EmpiricalRoc {
        thresholds,
        frr_at,
        far_at,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocMethod {
    ParametricNested,
    BootstrapVertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPointInterval {
    pub target_far: f64,
    #[serde(with = "crate::serde_float")]
    pub threshold_used: f64,
    pub interval: IntervalResult,
    pub method: RocMethod,
    pub alpha_far: Option<f64>,
}

/// Nested interval for FRR at `target_far`.
///
/// A `1 - alpha_far` Wilson interval `[FAR_lb, FAR_ub]` for FAR at the
/// operating threshold maps to thresholds `t_lb <= t_ub`. The result spans
/// every `1 - alpha` Wilson FRR interval for thresholds in `[t_lb, t_ub]`;
/// FRR only changes at genuine scores, so those and the two ends suffice.
pub fn roc_interval_parametric(
    ds: &MatchDataset,
    target_far: f64,
    alpha: f64,
    alpha_far: f64,
    opts: WilsonOptions,
) -> Result<RocPointInterval> {
    roc_interval_parametric_from_index(&ScoreIndex::new(ds)?, target_far, alpha, alpha_far, opts)
}

pub fn roc_interval_parametric_from_index(
    idx: &ScoreIndex,
    target_far: f64,
    alpha: f64,
    alpha_far: f64,
    opts: WilsonOptions,
) -> Result<RocPointInterval> {
    check_alpha(alpha)?;
    check_alpha(alpha_far)?;
    if idx.genuine.is_empty() {
        return Err(invalid("no genuine comparisons"));
    }
    let t0 = idx.threshold_for_far(target_far)?;
    let far_ci = wilson_interval(Metric::Far, &idx.aggregates_at(t0)?, WilsonMode::Adjusted, alpha_far, opts)?;
    let t_lb = idx.threshold_for_far(far_ci.lower)?;
    let t_ub = idx.threshold_for_far(far_ci.upper)?;

    let mut candidates = vec![t_lb, t0, t_ub];
    let from = idx.genuine.partition_point(|s| s.0 <= t_lb);
    let to = idx.genuine.partition_point(|s| s.0 <= t_ub);
    candidates.extend(idx.genuine[from..to].iter().map(|s| s.0));
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let frr_cis = candidates
        .par_iter()
        .map(|&t| wilson_interval(Metric::Frr, &idx.aggregates_at(t)?, WilsonMode::Adjusted, alpha, opts))
        .collect::<Result<Vec<_>>>()?;
    let at = |t: f64| frr_cis[candidates.iter().position(|&c| c == t).unwrap()].clone();
    let point_ci = at(t0);
    let lower = frr_cis.iter().map(|c| c.lower).fold(f64::INFINITY, f64::min);
    let upper = frr_cis.iter().map(|c| c.upper).fold(f64::NEG_INFINITY, f64::max);

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("far_at_threshold".into(), json!(far_ci.point));
    diagnostics.insert("far_lower".into(), json!(far_ci.lower));
    diagnostics.insert("far_upper".into(), json!(far_ci.upper));
    diagnostics.insert("threshold_lower".into(), json!(t_lb));
    diagnostics.insert("threshold_upper".into(), json!(t_ub));
    diagnostics.insert("frr_interval_at_threshold_lower".into(), json!([at(t_lb).lower, at(t_lb).upper]));
    diagnostics.insert("frr_interval_at_threshold_upper".into(), json!([at(t_ub).lower, at(t_ub).upper]));
    diagnostics.insert("frr_interval_at_threshold".into(), json!([point_ci.lower, point_ci.upper]));
    diagnostics.insert("thresholds_evaluated".into(), json!(candidates.len()));
    Ok(RocPointInterval {
        target_far,
        threshold_used: t0,
        interval: IntervalResult {
            metric: Metric::Frr,
            method: "parametric_nested".into(),
            lower,
            upper,
            point: point_ci.point,
            alpha,
            diagnostics,
        },
        method: RocMethod::ParametricNested,
        alpha_far: Some(alpha_far),
    })
}

/// FRR* at the replicate's own FAR* threshold for one identity weighting.
/// Genuine comparisons of identity `i` carry weight `w_i`; impostor
/// comparisons carry the scheme's pair weight. For the vertex scheme, pairs
/// of copies of one identity contribute the original FAR curve.
fn weighted_frr_at_far(idx: &ScoreIndex, scheme: Scheme, w: &[u32], target: f64) -> Option<f64> {
    let pair_w = |i: u32, j: u32| -> f64 {
        let (a, b) = (w[i as usize] as f64, w[j as usize] as f64);
        match scheme {
            Scheme::Subsets | Scheme::TwoLevel => a + b,
            Scheme::Vertex | Scheme::DoubleOrNothing => a * b,
        }
    };
    let k_diag = if scheme == Scheme::Vertex {
        w.iter()
            .zip(&idx.instances)
            .map(|(&wi, &m)| {
                let (wi, m) = (wi as f64, m as f64);
                // halved: impostor pairs are stored once, weights a * b count them once
                wi * (wi - 1.0).max(0.0) * m * m / 2.0
            })
            .sum::<f64>()
    } else {
        0.0
    };
    let total: f64 = idx.impostor.iter().map(|&(_, i, j)| pair_w(i, j)).sum::<f64>() + k_diag;
    if total <= 0.0 {
        return None;
    }
    let n_imp = idx.impostor.len() as f64;
    let mut acc = 0.0;
    let mut k = 0;
    let mut t_star = f64::INFINITY;
    while k < idx.impostor.len() {
        let s = idx.impostor[k].0;
        let mut end = k;
        let mut add = 0.0;
        while end < idx.impostor.len() && idx.impostor[end].0 == s {
            add += pair_w(idx.impostor[end].1, idx.impostor[end].2);
            end += 1;
        }
        let diag = k_diag * end as f64 / n_imp;
        if (acc + add + diag) / total > target * (1.0 + 1e-12) {
            t_star = s;
            break;
        }
        acc += add;
        k = end;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(s, i) in &idx.genuine {
        let wi = w[i as usize] as f64;
        den += wi;
        if s >= t_star {
            num += wi;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Vertical averaging: each replicate reweights identities, finds its own
/// threshold for `target_far` and records FRR there; the interval is the
/// percentile interval of those values.
pub fn roc_interval_bootstrap(
    ds: &MatchDataset,
    target_far: f64,
    alpha: f64,
    scheme: Scheme,
    b: usize,
    seed: u64,
) -> Result<RocPointInterval> {
    roc_interval_bootstrap_from_index(&ScoreIndex::new(ds)?, target_far, alpha, scheme, b, seed)
}

pub fn roc_interval_bootstrap_from_index(
    idx: &ScoreIndex,
    target_far: f64,
    alpha: f64,
    scheme: Scheme,
    b: usize,
    seed: u64,
) -> Result<RocPointInterval> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&target_far) {
        return Err(invalid(format!("target FAR {target_far} outside [0, 1]")));
    }
    if scheme == Scheme::TwoLevel {
        return Err(invalid("ROC bootstrap supports subsets, vertex and double_or_nothing"));
    }
    if b < 2 {
        return Err(invalid("need at least two bootstrap replicates"));
    }
    if idx.genuine.is_empty() || idx.impostor.is_empty() {
        return Err(invalid("ROC needs both genuine and impostor comparisons"));
    }
    let g = idx.g();
    let results: Vec<(f64, u64)> = (0..b as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k);
            let mut rejected = 0u64;
            loop {
                let w = draw_weights(scheme.weight_scheme(), g, &mut rng)?;
                if let Some(v) = weighted_frr_at_far(idx, scheme, &w.w, target_far) {
                    return Ok((v, rejected));
                }
                rejected += 1;
                if rejected >= MAX_REDRAWS as u64 {
                    return Err(Error::Resampling(format!("degenerate weights after {MAX_REDRAWS} draws")));
                }
            }
        })
        .collect::<Result<_>>()?;
    let dist = BootstrapDistribution {
        rejected_draws: results.iter().map(|r| r.1).sum(),
        replicates: results.into_iter().map(|r| r.0).collect(),
        scheme,
        metric: Metric::Frr,
        b,
        seed,
    };
    let t0 = idx.threshold_for_far(target_far)?;
    let mut interval = percentile_interval(&dist, alpha)?;
    interval.point = idx.frr_at(t0);
    interval.method = format!("bootstrap_vertical_{}", scheme.name());
    Ok(RocPointInterval {
        target_far,
        threshold_used: t0,
        interval,
        method: RocMethod::BootstrapVertical,
        alpha_far: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::ScoreRecord;

    fn rec(a: &str, ka: &str, b: &str, kb: &str, s: f64) -> ScoreRecord {
        ScoreRecord {
            id_a: a.into(),
            instance_a: ka.into(),
            id_b: b.into(),
            instance_b: kb.into(),
            score: s,
        }
    }

    /// Four identities with one instance each: impostor scores only.
    fn four_impostors() -> MatchDataset {
        // six pairs; two share the largest score so the list is 0.1..0.4
        let recs = vec![
            rec("a", "1", "b", "1", 0.1),
            rec("a", "1", "c", "1", 0.2),
            rec("a", "1", "d", "1", 0.3),
            rec("b", "1", "c", "1", 0.4),
            rec("b", "1", "d", "1", 0.4),
            rec("c", "1", "d", "1", 0.4),
        ];
        MatchDataset::from_score_records(recs).unwrap()
    }

    fn impostor_only(scores: &[f64]) -> ScoreIndex {
        ScoreIndex {
            instances: vec![1, 1],
            genuine: vec![],
            impostor: scores.iter().map(|&s| (s, 0, 1)).collect(),
        }
    }

    #[test]
    fn far_counts_scores_below_threshold() {
        let idx = impostor_only(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(idx.far_at(0.25), 0.5);
        assert_eq!(idx.threshold_for_far(0.5).unwrap(), 0.3);
        assert_eq!(idx.threshold_for_far(0.0).unwrap(), 0.1);
        assert_eq!(idx.far_at(0.1), 0.0);
        assert_eq!(idx.threshold_for_far(1.0).unwrap(), f64::INFINITY);
        assert!(idx.threshold_for_far(1.5).is_err());
    }

    fn small_ds() -> MatchDataset {
        let mut recs = vec![];
        let ids = ["a", "b", "c"];
        for (x, ia) in ids.iter().enumerate() {
            recs.push(rec(ia, "1", ia, "2", 0.1 + 0.2 * x as f64));
            for ib in &ids[x + 1..] {
                for ka in ["1", "2"] {
                    for kb in ["1", "2"] {
                        let s = 0.3 + 0.05 * (ka.len() + kb.len() + x) as f64;
                        recs.push(rec(ia, ka, ib, kb, s + if ka == kb { 0.12 } else { 0.0 }));
                    }
                }
            }
        }
        MatchDataset::from_score_records(recs).unwrap()
    }

    #[test]
    fn roc_sentinels_and_monotonicity() {
        let roc = empirical_roc(&small_ds()).unwrap();
        assert_eq!(roc.thresholds[0], f64::NEG_INFINITY);
        assert_eq!((roc.far_at[0], roc.frr_at[0]), (0.0, 1.0));
        let n = roc.len();
        assert_eq!(roc.thresholds[n - 1], f64::INFINITY);
        assert_eq!((roc.far_at[n - 1], roc.frr_at[n - 1]), (1.0, 0.0));
        for k in 1..n {
            assert!(roc.thresholds[k] > roc.thresholds[k - 1]);
            assert!(roc.far_at[k] >= roc.far_at[k - 1]);
            assert!(roc.frr_at[k] <= roc.frr_at[k - 1]);
        }
    }

    #[test]
    fn roc_matches_point_estimators() {
        let ds = small_ds();
        let roc = empirical_roc(&ds).unwrap();
        for k in 1..roc.len() - 1 {
            let agg = PairAggregates::at_threshold(&ds, roc.thresholds[k]).unwrap();
            let frr = crate::estimators::estimate(&agg, Metric::Frr).unwrap().value;
            let far = crate::estimators::estimate(&agg, Metric::Far).unwrap().value;
            assert!((frr - roc.frr_at[k]).abs() < 1e-12);
            assert!((far - roc.far_at[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn index_aggregates_match_dataset_aggregates() {
        let ds = small_ds();
        let idx = ScoreIndex::new(&ds).unwrap();
        for t in [0.0, 0.2, 0.42, 0.5, 0.61, 2.0] {
            assert_eq!(idx.aggregates_at(t).unwrap(), PairAggregates::at_threshold(&ds, t).unwrap());
        }
    }

    #[test]
    fn roc_threshold_lookup() {
        let ds = four_impostors();
        let idx = ScoreIndex::new(&ds).unwrap();
        assert!(empirical_roc(&ds).is_err());
        assert_eq!(idx.threshold_for_far(0.5).unwrap(), 0.4);
        let roc = empirical_roc(&small_ds()).unwrap();
        let idx = ScoreIndex::new(&small_ds()).unwrap();
        for target in [0.0, 0.1, 0.25, 0.5, 0.9, 1.0] {
            assert_eq!(roc.threshold_for_far(target).unwrap(), idx.threshold_for_far(target).unwrap());
        }
    }

    #[test]
    fn parametric_contains_point_interval_and_shrinks() {
        let ds = small_ds();
        let opts = WilsonOptions::default();
        let mut prev = f64::INFINITY;
        for af in [0.01, 0.05, 0.2, 0.5, 0.9] {
            let r = roc_interval_parametric(&ds, 0.25, 0.05, af, opts).unwrap();
            let agg = PairAggregates::at_threshold(&ds, r.threshold_used).unwrap();
            let single = wilson_interval(Metric::Frr, &agg, WilsonMode::Adjusted, 0.05, opts).unwrap();
            assert!(r.interval.lower <= single.lower && single.upper <= r.interval.upper);
            assert!(r.interval.width() <= prev + 1e-15);
            prev = r.interval.width();
        }
    }

    #[test]
    fn bootstrap_roc_is_reproducible() {
        let ds = small_ds();
        let a = roc_interval_bootstrap(&ds, 0.25, 0.1, Scheme::Vertex, 200, 4).unwrap();
        let b = roc_interval_bootstrap(&ds, 0.25, 0.1, Scheme::Vertex, 200, 4).unwrap();
        assert_eq!(a, b);
        assert!(0.0 <= a.interval.lower && a.interval.upper <= 1.0);
        assert!(roc_interval_bootstrap(&ds, 0.25, 0.1, Scheme::TwoLevel, 200, 4).is_err());
    }

    #[test]
    fn identity_weights_reproduce_empirical_point() {
        let idx = ScoreIndex::new(&small_ds()).unwrap();
        for scheme in [Scheme::Subsets, Scheme::Vertex, Scheme::DoubleOrNothing] {
            let w = vec![if scheme == Scheme::DoubleOrNothing { 2 } else { 1 }; 3];
            for target in [0.0, 0.1, 0.25, 0.6, 1.0] {
                let t0 = idx.threshold_for_far(target).unwrap();
                let v = weighted_frr_at_far(&idx, scheme, &w, target).unwrap();
                assert!((v - idx.frr_at(t0)).abs() < 1e-12, "{scheme:?} {target}");
            }
        }
    }

    #[test]
    fn constant_scores_give_zero_width() {
        let mut recs = vec![];
        for a in 0..6 {
            for b in a..6 {
                for (ka, kb) in [("1", "2"), ("1", "1"), ("2", "2"), ("2", "1")] {
                    if a == b && ka >= kb {
                        continue;
                    }
                    recs.push(rec(&format!("i{a}"), ka, &format!("i{b}"), kb, 0.5));
                }
            }
        }
        let ds = MatchDataset::from_score_records(recs).unwrap();
        let r = roc_interval_bootstrap(&ds, 0.5, 0.05, Scheme::DoubleOrNothing, 100, 1).unwrap();
        assert_eq!(r.interval.lower, r.interval.upper);
    }

    #[test]
    fn csv_export() {
        let roc = empirical_roc(&small_ds()).unwrap();
        let mut buf = Vec::new();
        roc.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("threshold,frr,far\n-inf,1,0\n"));
        assert_eq!(text.lines().count(), roc.len() + 1);
    }
}
