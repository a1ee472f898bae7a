//! Identity-level bootstrap schemes and percentile intervals.
//!
//! All schemes are written as weighted ratios over identity-level means, with
//! comparison counts as weights, so unbalanced data is handled by the same
//! code. With equal instance counts they reduce to the plain formulas.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data_model::{Metric, OutcomeStore, PairAggregates};
use crate::error::{invalid, Error, Result};
use crate::estimators::estimate;
use crate::rng::stream_rng;
use crate::wilson::{check_alpha, IntervalResult};

/// Redraw cap for degenerate double-or-nothing weights.
pub const MAX_REDRAWS: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Multinomial,
    DoubleOrNothing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: Vec<u32>,
    pub scheme: WeightScheme,
}

impl WeightVector {
    pub fn ones(g: usize) -> Self {
        WeightVector {
            w: vec![1; g],
            scheme: WeightScheme::Multinomial,
        }
    }
}

pub fn draw_weights(scheme: WeightScheme, g: usize, rng: &mut ChaCha8Rng) -> Result<WeightVector> {
    if g == 0 {
        return Err(invalid("weights need at least one identity"));
    }
    let w = match scheme {
        WeightScheme::Multinomial => {
            let mut w = vec![0u32; g];
            for _ in 0..g {
                w[rng.random_range(0..g)] += 1;
            }
            w
        }
        WeightScheme::DoubleOrNothing => (0..g).map(|_| if rng.random::<bool>() { 2 } else { 0 }).collect(),
    };
    Ok(WeightVector { w, scheme })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Subsets,
    TwoLevel,
    Vertex,
    DoubleOrNothing,
}

impl Scheme {
    pub fn weight_scheme(self) -> WeightScheme {
        match self {
            Scheme::DoubleOrNothing => WeightScheme::DoubleOrNothing,
            _ => WeightScheme::Multinomial,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Subsets => "subsets",
            Scheme::TwoLevel => "two_level",
            Scheme::Vertex => "vertex",
            Scheme::DoubleOrNothing => "double_or_nothing",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "subsets" => Ok(Scheme::Subsets),
            "two_level" | "twolevel" => Ok(Scheme::TwoLevel),
            "vertex" => Ok(Scheme::Vertex),
            "double_or_nothing" | "don" => Ok(Scheme::DoubleOrNothing),
            _ => Err(invalid(format!("unknown bootstrap scheme '{s}'"))),
        }
    }
}

fn check_weights(agg: &PairAggregates, w: &WeightVector, expected: WeightScheme) -> Result<()> {
    if w.w.len() != agg.g() {
        return Err(invalid(format!("weight vector has {} entries for {} identities", w.w.len(), agg.g())));
    }
    if w.scheme != expected {
        return Err(invalid(format!("expected {expected:?} weights, got {:?}", w.scheme)));
    }
    Ok(())
}

/// `sum_i w_i M~_i Y_ii / sum_i w_i M~_i`; `None` when no selected identity
/// has genuine comparisons.
fn weighted_frr(agg: &PairAggregates, w: &[u32]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0 {
            let mt = agg.m_tilde(i);
            num += wi as f64 * mt * agg.y(i, i);
            den += wi as f64 * mt;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Cross-identity sums `sum_j M_i M_j Y_ij` and `sum_j M_i M_j` per row.
fn weighted_rows(agg: &PairAggregates) -> (Vec<f64>, Vec<f64>) {
    let g = agg.g();
    let total: f64 = agg.instances().iter().map(|&m| m as f64).sum();
    let mut num = vec![0.0; g];
    let mut den = vec![0.0; g];
    for i in 0..g {
        let mi = agg.m(i) as f64;
        let row = agg.row(i);
        let mut s = 0.0;
        for (j, &y) in row.iter().enumerate() {
            if j != i {
                s += agg.m(j) as f64 * y;
            }
        }
        num[i] = mi * s;
        den[i] = mi * (total - mi);
    }
    (num, den)
}

/// Subsets bootstrap replicate: each selected identity brings its genuine
/// comparisons and every comparison it takes part in.
///
/// Balanced: `FRR* = sum_i w_i Y_ii / G`, `FAR* = sum_i w_i sum_{j != i} Y_ij / (G (G - 1))`.
pub fn subsets_replicate(agg: &PairAggregates, w: &WeightVector) -> Result<(f64, f64)> {
    check_weights(agg, w, WeightScheme::Multinomial)?;
    let frr = weighted_frr(agg, &w.w).unwrap_or(f64::NAN);
    let (num, den) = weighted_rows(agg);
    let mut n = 0.0;
    let mut d = 0.0;
    for (i, &wi) in w.w.iter().enumerate() {
        n += wi as f64 * num[i];
        d += wi as f64 * den[i];
    }
    let far = if d > 0.0 { n / d } else { f64::NAN };
    Ok((frr, far))
}

fn weighted_far_pairs(agg: &PairAggregates, w: &[u32]) -> (f64, f64) {
    let g = agg.g();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..g {
        if w[i] == 0 {
            continue;
        }
        let mut rn = 0.0;
        let mut rd = 0.0;
        let row = agg.row(i);
        for j in 0..g {
            if j != i && w[j] > 0 {
                let c = w[j] as f64 * agg.m(j) as f64;
                rn += c * row[j];
                rd += c;
            }
        }
        let a = w[i] as f64 * agg.m(i) as f64;
        num += a * rn;
        den += a * rd;
    }
    (num, den)
}

/// Vertex bootstrap replicate: identity pairs are formed from the resampled
/// identities; a pair of two copies of the same identity has no impostor
/// comparison and contributes `far_hat` instead.
///
/// Balanced: `FAR* = sum_{i,j} w_i [(w_i - 1) FAR 1{i=j} + w_j Y_ij 1{i!=j}] / (G (G - 1))`.
pub fn vertex_replicate(agg: &PairAggregates, w: &WeightVector, far_hat: f64) -> Result<f64> {
    check_weights(agg, w, WeightScheme::Multinomial)?;
    if agg.g() < 2 {
        return Err(invalid("vertex bootstrap needs at least two identities"));
    }
    let (mut num, mut den) = weighted_far_pairs(agg, &w.w);
    let k: f64 = w
        .w
        .iter()
        .enumerate()
        .map(|(i, &wi)| {
            let m = agg.m(i) as f64;
            wi as f64 * (wi as f64 - 1.0).max(0.0) * m * m
        })
        .sum();
    num += k * far_hat;
    den += k;
    Ok(num / den)
}

/// Double-or-nothing replicate, `None` for a component whose weights are
/// degenerate (no genuine comparisons, or fewer than two identities kept).
pub fn don_replicate_checked(agg: &PairAggregates, w: &WeightVector) -> Result<(Option<f64>, Option<f64>)> {
    check_weights(agg, w, WeightScheme::DoubleOrNothing)?;
    let frr = weighted_frr(agg, &w.w);
    let (num, den) = weighted_far_pairs(agg, &w.w);
    let far = (den > 0.0).then(|| num / den);
    Ok((frr, far))
}

/// Balanced: `FRR* = sum w_i Y_ii / sum w_i`, `FAR* = sum_{i!=j} w_i w_j Y_ij / sum_{i!=j} w_i w_j`.
pub fn don_replicate(agg: &PairAggregates, w: &WeightVector) -> Result<(f64, f64)> {
    let (frr, far) = don_replicate_checked(agg, w)?;
    match (frr, far) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Resampling("degenerate double-or-nothing weights".into())),
    }
}

/// Second-stage behaviour of the two-level bootstrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecondStage {
    #[default]
    Resample,
    /// Keeps the selected identities' comparisons as they are.
    NoOp,
}

/// Two-level replicate. Every selected copy of identity `i` resamples its
/// unordered within-identity comparisons and its cross-identity comparisons
/// with replacement. Only the error counts of such a resample matter, and
/// `w_i` independent copies of a resample of `n` binary outcomes with `k`
/// errors have `Binomial(w_i n, k / n)` errors in total.
pub fn two_level_replicate(
    store: &OutcomeStore,
    w: &WeightVector,
    rng: &mut ChaCha8Rng,
    stage: SecondStage,
) -> Result<(f64, f64)> {
    if w.w.len() != store.g() {
        return Err(invalid(format!("weight vector has {} entries for {} identities", w.w.len(), store.g())));
    }
    if w.scheme != WeightScheme::Multinomial {
        return Err(invalid("two-level bootstrap uses multinomial weights"));
    }
    let mut draw = |wi: u32, (ones, total): (u64, u64)| -> Result<(f64, f64)> {
        if wi == 0 || total == 0 {
            return Ok((0.0, 0.0));
        }
        let n = wi as u64 * total;
        let errors = match stage {
            SecondStage::NoOp => (wi as u64 * ones) as f64,
            SecondStage::Resample => {
                let p = ones as f64 / total as f64;
                Binomial::new(n, p)
                    .map_err(|e| Error::Resampling(e.to_string()))?
                    .sample(rng) as f64
            }
        };
        Ok((errors, n as f64))
    };
    let (mut fn_, mut fd, mut an, mut ad) = (0.0, 0.0, 0.0, 0.0);
    for (i, &wi) in w.w.iter().enumerate() {
        let (e, n) = draw(wi, store.within[i])?;
        fn_ += e;
        fd += n;
        let (e, n) = draw(wi, store.row[i])?;
        an += e;
        ad += n;
    }
    let frr = if fd > 0.0 { fn_ / fd } else { f64::NAN };
    let far = if ad > 0.0 { an / ad } else { f64::NAN };
    Ok((frr, far))
}

/// Input for [`bootstrap_distribution`]; the two-level scheme needs the
/// outcome store.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapInput<'a> {
    pub agg: &'a PairAggregates,
    pub store: Option<&'a OutcomeStore>,
}

impl<'a> BootstrapInput<'a> {
    pub fn new(agg: &'a PairAggregates) -> Self {
        BootstrapInput { agg, store: None }
    }

    pub fn with_store(agg: &'a PairAggregates, store: &'a OutcomeStore) -> Self {
        BootstrapInput { agg, store: Some(store) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    pub replicates: Vec<f64>,
    pub scheme: Scheme,
    pub metric: Metric,
    pub b: usize,
    pub seed: u64,
    pub rejected_draws: u64,
}

impl BootstrapDistribution {
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.replicates.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn mean(&self) -> f64 {
        self.replicates.iter().sum::<f64>() / self.replicates.len() as f64
    }

    /// Sample variance with divisor `B - 1`.
    pub fn variance(&self) -> f64 {
        let b = self.replicates.len();
        if b < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.replicates.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (b - 1) as f64
    }

    /// Replicates as CSV with a `#`-prefixed JSON header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header = json!({
            "scheme": self.scheme,
            "metric": self.metric,
            "b": self.b,
            "seed": self.seed,
            "rejected_draws": self.rejected_draws,
        });
        writeln!(out, "#{header}")?;
        writeln!(out, "replicate")?;
        for r in &self.replicates {
            writeln!(out, "{r}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let parse_err = |line: u64, message: String| Error::Parse {
            line: Some(line),
            message,
        };
        let first = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))??;
        let header: serde_json::Value = serde_json::from_str(first.strip_prefix('#').unwrap_or(&first))
            .map_err(|e| parse_err(1, format!("bad header: {e}")))?;
        let field = |k: &str| header.get(k).cloned().ok_or_else(|| parse_err(1, format!("header lacks '{k}'")));
        let scheme: Scheme = serde_json::from_value(field("scheme")?)?;
        let metric: Metric = serde_json::from_value(field("metric")?)?;
        let b: usize = serde_json::from_value(field("b")?)?;
        let seed: u64 = serde_json::from_value(field("seed")?)?;
        let rejected_draws: u64 = serde_json::from_value(field("rejected_draws")?)?;
        let mut replicates = Vec::with_capacity(b);
        for (k, line) in lines.enumerate() {
            let line = line?;
            let lineno = k as u64 + 2;
            if lineno == 2 && line.trim() == "replicate" {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            replicates.push(
                line.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(lineno, format!("bad replicate '{line}': {e}")))?,
            );
        }
        if replicates.len() != b {
            return Err(parse_err(1, format!("header says {b} replicates, found {}", replicates.len())));
        }
        Ok(BootstrapDistribution {
            replicates,
            scheme,
            metric,
            b,
            seed,
            rejected_draws,
        })
    }
}

/// One replicate of `metric` under `scheme`, drawn from stream `(seed, index)`.
/// Returns the value and the number of rejected weight draws.
pub fn single_replicate(
    input: BootstrapInput<'_>,
    scheme: Scheme,
    metric: Metric,
    far_hat: f64,
    seed: u64,
    index: u64,
    stage: SecondStage,
) -> Result<(f64, u64)> {
    let agg = input.agg;
    let g = agg.g();
    let mut rng = stream_rng(seed, index);
    let pick = |(frr, far): (f64, f64)| match metric {
        Metric::Frr => frr,
        Metric::Far => far,
    };
    let value = match scheme {
        Scheme::Subsets => pick(subsets_replicate(agg, &draw_weights(WeightScheme::Multinomial, g, &mut rng)?)?),
        Scheme::Vertex => {
            let w = draw_weights(WeightScheme::Multinomial, g, &mut rng)?;
            match metric {
                Metric::Frr => subsets_replicate(agg, &w)?.0,
                Metric::Far => vertex_replicate(agg, &w, far_hat)?,
            }
        }
        Scheme::TwoLevel => {
            let store = input
                .store
                .ok_or_else(|| invalid("two-level bootstrap needs the comparison outcomes"))?;
            let w = draw_weights(WeightScheme::Multinomial, g, &mut rng)?;
            pick(two_level_replicate(store, &w, &mut rng, stage)?)
        }
        Scheme::DoubleOrNothing => {
            let mut rejected = 0u64;
            loop {
                let w = draw_weights(WeightScheme::DoubleOrNothing, g, &mut rng)?;
                let (frr, far) = don_replicate_checked(agg, &w)?;
                let v = match metric {
                    Metric::Frr => frr,
                    Metric::Far => far,
                };
                if let Some(v) = v {
                    return Ok((v, rejected));
                }
                rejected += 1;
                if rejected >= MAX_REDRAWS as u64 {
                    return Err(Error::Resampling(format!(
                        "double-or-nothing weights degenerate after {MAX_REDRAWS} draws"
                    )));
                }
            }
        }
    };
    if value.is_nan() {
        return Err(Error::Resampling(format!("{} replicate undefined for {metric}", scheme.name())));
    }
    Ok((value, 0))
}

/// `b` replicates of `metric`. Replicate `k` uses random stream `(seed, k)`,
/// so the result does not depend on how work is spread over threads.
pub fn bootstrap_distribution(
    input: BootstrapInput<'_>,
    scheme: Scheme,
    metric: Metric,
    b: usize,
    seed: u64,
) -> Result<BootstrapDistribution> {
    bootstrap_distribution_with(input, scheme, metric, b, seed, SecondStage::Resample)
}

pub fn bootstrap_distribution_with(
    input: BootstrapInput<'_>,
    scheme: Scheme,
    metric: Metric,
    b: usize,
    seed: u64,
    stage: SecondStage,
) -> Result<BootstrapDistribution> {
    if b == 0 {
        return Err(invalid("need at least one bootstrap replicate"));
    }
    let agg = input.agg;
    match metric {
        Metric::Far if agg.g() < 2 => return Err(invalid("FAR bootstrap needs at least two identities")),
        Metric::Frr if agg.g() < 1 => return Err(invalid("no identities")),
        _ => {}
    }
    if scheme == Scheme::TwoLevel && input.store.is_none() {
        return Err(invalid("two-level bootstrap needs the comparison outcomes"));
    }
    let far_hat = if scheme == Scheme::Vertex && metric == Metric::Far {
        estimate(agg, Metric::Far)?.value
    } else {
        f64::NAN
    };
    let results: Vec<(f64, u64)> = (0..b as u64)
        .into_par_iter()
        .map(|k| single_replicate(input, scheme, metric, far_hat, seed, k, stage))
        .collect::<Result<_>>()?;
    let rejected_draws = results.iter().map(|r| r.1).sum();
    Ok(BootstrapDistribution {
        replicates: results.into_iter().map(|r| r.0).collect(),
        scheme,
        metric,
        b,
        seed,
        rejected_draws,
    })
}

/// 1-based order-statistic indices `(max(floor(B a/2), 1), min(ceil(B (1 - a/2)), B))`
/// and whether the lower index was clamped.
pub fn percentile_indices(b: usize, alpha: f64) -> (usize, usize, bool) {
    let bf = b as f64;
    // products such as 1000 * 0.025 are not exact in binary
    let snap = |x: f64| {
        let r = x.round();
        if (x - r).abs() < 1e-9 * bf.max(1.0) {
            r
        } else {
            x
        }
    };
    let lo_raw = snap(bf * alpha / 2.0).floor() as usize;
    let hi_raw = snap(bf * (1.0 - alpha / 2.0)).ceil() as usize;
    let lo = lo_raw.max(1);
    let hi = hi_raw.min(b).max(1);
    (lo, hi, lo_raw < 1)
}

pub fn percentile_interval(dist: &BootstrapDistribution, alpha: f64) -> Result<IntervalResult> {
    check_alpha(alpha)?;
    let b = dist.replicates.len();
    if b < 2 {
        return Err(invalid("percentile interval needs at least two replicates"));
    }
    let sorted = dist.sorted();
    let (lo, hi, clamped) = percentile_indices(b, alpha);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("b".into(), json!(b));
    diagnostics.insert("seed".into(), json!(dist.seed));
    diagnostics.insert("lower_index".into(), json!(lo));
    diagnostics.insert("upper_index".into(), json!(hi));
    diagnostics.insert("lower_index_clamped".into(), json!(clamped));
    diagnostics.insert("rejected_draws".into(), json!(dist.rejected_draws));
    diagnostics.insert("bootstrap_mean".into(), json!(dist.mean()));
    diagnostics.insert("bootstrap_variance".into(), json!(dist.variance()));
    Ok(IntervalResult {
        metric: dist.metric,
        method: dist.scheme.name().into(),
        lower: sorted[lo - 1],
        upper: sorted[hi - 1],
        point: f64::NAN,
        alpha,
        diagnostics,
    })
}
