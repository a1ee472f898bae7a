//! Synthetic embeddings with an identity effect, threshold calibration and a
//! Monte Carlo engine for interval coverage.
//!
//! Instance `k` of identity `i` is `X_ik = beta_i + eps_ik` with `beta_i`
//! exponential and `eps_ik` Gaussian, componentwise; embeddings are scaled to
//! unit norm and compared by Euclidean distance.

use std::io::Write;

use log::warn;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_distribution, percentile_interval, BootstrapInput, Scheme};
use crate::data_model::{CellCounts, Dissimilarity, IdentityId, MatchDataset, Metric, OutcomeStore, PairAggregates};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::wilson::{check_alpha, wilson_core, wilson_interval, WilsonMode, WilsonOptions};

const TAG_COUNTS: u64 = 1;
const TAG_DATA: u64 = 2;
const TAG_RESAMPLE: u64 = 3;
const TAG_CALIBRATION: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseScale {
    /// The noise parameter is the variance.
    #[default]
    Variance,
    /// The noise parameter is the standard deviation.
    Stddev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub g: usize,
    /// Instances per identity when `m_range` is unset.
    pub m: usize,
    /// Draw each identity's instance count uniformly from `lo..=hi`.
    pub m_range: Option<(usize, usize)>,
    pub dim: usize,
    /// Rate of the exponential identity effect.
    pub beta_rate: f64,
    pub noise_param: f64,
    pub noise_scale: NoiseScale,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            g: 50,
            m: 5,
            m_range: None,
            dim: 128,
            beta_rate: 1.0,
            noise_param: 5.0,
            noise_scale: NoiseScale::Variance,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.g < 2 {
            return Err(invalid("synthetic data needs at least two identities"));
        }
        match self.m_range {
            Some((lo, hi)) if lo < 1 || hi < lo || hi < 2 => {
                return Err(invalid(format!("bad instance range {lo}..={hi}")));
            }
            None if self.m < 2 => return Err(invalid("synthetic data needs at least two instances per identity")),
            _ => {}
        }
        if self.dim == 0 {
            return Err(invalid("embedding dimension must be at least 1"));
        }
        if !(self.beta_rate > 0.0 && self.beta_rate.is_finite()) {
            return Err(invalid("identity effect rate must be positive"));
        }
        if !(self.noise_param >= 0.0 && self.noise_param.is_finite()) {
            return Err(invalid("noise parameter must be non-negative"));
        }
        Ok(())
    }

    pub fn noise_stddev(&self) -> f64 {
        match self.noise_scale {
            NoiseScale::Variance => self.noise_param.sqrt(),
            NoiseScale::Stddev => self.noise_param,
        }
    }

    /// Same model with a different seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        SyntheticConfig { seed, ..self.clone() }
    }

    pub fn instance_counts(&self) -> Vec<usize> {
        match self.m_range {
            None => vec![self.m; self.g],
            Some((lo, hi)) => {
                let mut rng = stream_rng(derive_seed(self.seed, TAG_COUNTS, 0), 0);
                (0..self.g).map(|_| rng.random_range(lo..=hi)).collect()
            }
        }
    }
}

/// Draws a dataset; identity `i` uses its own random stream.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<MatchDataset> {
    config.validate()?;
    let counts = config.instance_counts();
    let dim = config.dim;
    let beta = Exp::new(config.beta_rate).map_err(|e| invalid(e.to_string()))?;
    let noise = Normal::new(0.0, config.noise_stddev()).map_err(|e| invalid(e.to_string()))?;
    let data_seed = derive_seed(config.seed, TAG_DATA, 0);
    let blocks: Vec<Vec<f64>> = counts
        .par_iter()
        .enumerate()
        .map(|(i, &m)| {
            let mut rng = stream_rng(data_seed, i as u64);
            let b: Vec<f64> = (0..dim).map(|_| beta.sample(&mut rng)).collect();
            let mut out = Vec::with_capacity(m * dim);
            for _ in 0..m {
                let start = out.len();
                out.extend(b.iter().map(|&x| x + noise.sample(&mut rng)));
                let norm = out[start..].iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    out[start..].iter_mut().for_each(|x| *x /= norm);
                }
            }
            out
        })
        .collect();
    let ids = (0..config.g).map(|i| IdentityId(format!("id{i}"))).collect();
    MatchDataset::from_embedding_matrix(ids, counts, dim, blocks.concat(), Dissimilarity::Euclidean)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub g: usize,
    pub m: usize,
    /// Independent calibration datasets pooled for the reference rate.
    pub reps: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig { g: 200, m: 10, reps: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub metric: Metric,
    pub target: f64,
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
    /// Error rate at `threshold`, pooled over all calibration datasets;
    /// used as the true value when scoring coverage.
    #[serde(with = "crate::serde_float")]
    pub truth: f64,
    /// Error rate at `threshold` on the dataset the quantile came from.
    #[serde(with = "crate::serde_float")]
    pub achieved: f64,
    pub config: CalibrationConfig,
    pub warnings: Vec<String>,
}

/// Threshold achieving `target` on a large calibration sample: the
/// `(k+1)`-th smallest impostor score for FAR (`k = round(target N)`), the
/// `k`-th largest genuine score for FRR. Rates of 1 (FAR) or 0 (FRR) map
/// just above the largest score.
pub fn calibrate_threshold(
    model: &SyntheticConfig,
    calib: &CalibrationConfig,
    metric: Metric,
    target: f64,
) -> Result<Calibration> {
    if !(0.0..=1.0).contains(&target) {
        return Err(invalid(format!("target rate {target} outside [0, 1]")));
    }
    if calib.reps == 0 {
        return Err(invalid("need at least one calibration dataset"));
    }
    let cfg = |r: usize| SyntheticConfig {
        g: calib.g,
        m: calib.m,
        m_range: None,
        ..model.with_seed(derive_seed(model.seed, TAG_CALIBRATION, r as u64))
    };
    let first = generate_synthetic(&cfg(0))?;
    let (gen, imp) = first.collect_scores()?;
    let mut scores: Vec<f64> = match metric {
        Metric::Far => imp.into_iter().map(|s| s.0).collect(),
        Metric::Frr => gen.into_iter().map(|s| s.0).collect(),
    };
    let n = scores.len();
    if n == 0 {
        return Err(invalid("calibration sample has no comparisons"));
    }
    scores.sort_by(f64::total_cmp);
    let mut warnings = Vec::new();
    let k = (target * n as f64).round() as usize;
    if (k as f64 / n as f64 - target).abs() > 0.5 / n as f64 + 1e-15 || (k == 0 && target > 0.0) {
        let msg = format!(
            "target {target} not reachable with {n} calibration scores; using {}",
            k as f64 / n as f64
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    let above_max = scores[n - 1].next_up();
    let threshold = match metric {
        Metric::Far => {
            if k >= n {
                above_max
            } else {
                scores[k]
            }
        }
        Metric::Frr => {
            if k == 0 {
                above_max
            } else {
                scores[n - k]
            }
        }
    };
    let rate = |ds: &MatchDataset| -> Result<(u64, u64)> {
        let c = CellCounts::at_threshold(ds, threshold)?;
        let m = ds.instance_counts();
        let g = m.len();
        let (mut ones, mut total) = (0u64, 0u64);
        for i in 0..g {
            match metric {
                Metric::Frr => {
                    ones += c.ones(i, i);
                    total += (m[i] * (m[i] - 1) / 2) as u64;
                }
                Metric::Far => {
                    for j in i + 1..g {
                        ones += c.ones(i, j);
                        total += (m[i] * m[j]) as u64;
                    }
                }
            }
        }
        Ok((ones, total))
    };
    let (o0, t0) = rate(&first)?;
    drop(first);
    let (mut ones, mut total) = (o0, t0);
    for r in 1..calib.reps {
        let (o, t) = rate(&generate_synthetic(&cfg(r))?)?;
        ones += o;
        total += t;
    }
    Ok(Calibration {
        metric,
        target,
        threshold,
        truth: ones as f64 / total as f64,
        achieved: o0 as f64 / t0 as f64,
        config: calib.clone(),
        warnings,
    })
}

/// What a coverage method sees in one replication.
pub struct ReplicationData<'a> {
    pub index: usize,
    pub dataset: &'a MatchDataset,
    pub aggregates: &'a PairAggregates,
    pub store: &'a OutcomeStore,
    pub metric: Metric,
    pub alpha: f64,
    /// Seed reserved for resampling in this replication.
    pub seed: u64,
}

pub trait CoverageMethod: Send + Sync {
    fn name(&self) -> String;
    fn interval(&self, data: &ReplicationData<'_>) -> Result<(f64, f64)>;
}

pub struct WilsonMethod {
    pub mode: WilsonMode,
    pub options: WilsonOptions,
}

impl CoverageMethod for WilsonMethod {
    fn name(&self) -> String {
        match self.mode {
            WilsonMode::Adjusted => "wilson".into(),
            WilsonMode::Naive => "naive-wilson".into(),
        }
    }

    fn interval(&self, d: &ReplicationData<'_>) -> Result<(f64, f64)> {
        let r = wilson_interval(d.metric, d.aggregates, self.mode, d.alpha, self.options)?;
        Ok((r.lower, r.upper))
    }
}

pub struct BootstrapMethod {
    pub scheme: Scheme,
    pub b: usize,
}

impl CoverageMethod for BootstrapMethod {
    fn name(&self) -> String {
        method_name(self.scheme).into()
    }

    fn interval(&self, d: &ReplicationData<'_>) -> Result<(f64, f64)> {
        let input = BootstrapInput::with_store(d.aggregates, d.store);
        let dist = bootstrap_distribution(input, self.scheme, d.metric, self.b, d.seed)?;
        let r = percentile_interval(&dist, d.alpha)?;
        Ok((r.lower, r.upper))
    }
}

/// Short method names used on the command line.
pub fn method_name(scheme: Scheme) -> &'static str {
    match scheme {
        Scheme::Subsets => "subsets",
        Scheme::TwoLevel => "two-level",
        Scheme::Vertex => "vertex",
        Scheme::DoubleOrNothing => "don",
    }
}

/// `wilson`, `naive-wilson`, `subsets`, `two-level`, `vertex` or `don`.
pub fn method_from_name(name: &str, b: usize) -> Result<Box<dyn CoverageMethod>> {
    Ok(match name {
        "wilson" => Box::new(WilsonMethod {
            mode: WilsonMode::Adjusted,
            options: WilsonOptions::default(),
        }),
        "naive-wilson" => Box::new(WilsonMethod {
            mode: WilsonMode::Naive,
            options: WilsonOptions::default(),
        }),
        other => Box::new(BootstrapMethod {
            scheme: other.parse()?,
            b,
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoverage {
    pub method: String,
    pub replications: usize,
    pub hits: usize,
    /// Replications where the method could not produce an interval.
    pub failures: usize,
    pub coverage: f64,
    /// 95% naive Wilson interval on the hit proportion.
    pub coverage_ci: (f64, f64),
    #[serde(with = "crate::serde_float")]
    pub mean_width: f64,
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: usize,
    #[serde(with = "crate::serde_float")]
    pub estimate: f64,
    /// `(lower, upper)` per method; `None` on failure.
    pub intervals: Vec<Option<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub metric: Metric,
    #[serde(with = "crate::serde_float")]
    pub truth: f64,
    #[serde(with = "crate::serde_float")]
    pub threshold: f64,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub model: SyntheticConfig,
    pub methods: Vec<MethodCoverage>,
    #[serde(with = "crate::serde_float")]
    pub mean_estimate: f64,
    pub log: Option<Vec<ReplicationRecord>>,
}

impl CoverageReport {
    pub fn method(&self, name: &str) -> Option<&MethodCoverage> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// `method,replications,hits,failures,coverage,coverage_lower,coverage_upper,mean_width`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let e = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record([
            "method",
            "replications",
            "hits",
            "failures",
            "coverage",
            "coverage_lower",
            "coverage_upper",
            "mean_width",
        ])
        .map_err(e)?;
        for m in &self.methods {
            w.write_record([
                m.method.clone(),
                m.replications.to_string(),
                m.hits.to_string(),
                m.failures.to_string(),
                m.coverage.to_string(),
                m.coverage_ci.0.to_string(),
                m.coverage_ci.1.to_string(),
                m.mean_width.to_string(),
            ])
            .map_err(e)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub metric: Metric,
    #[serde(with = "crate::serde_float")]
    pub value: f64,
}

/// Draws `replications` datasets from `model` (replication `r` uses a seed
/// derived from `(model.seed, r)`), thresholds them at `threshold` and
/// records whether each method's interval contains `truth.value`.
/// A method failing in a replication is counted, not fatal.
pub fn run_coverage_experiment(
    model: &SyntheticConfig,
    threshold: f64,
    truth: Truth,
    methods: &[Box<dyn CoverageMethod>],
    alpha: f64,
    replications: usize,
    keep_log: bool,
) -> Result<CoverageReport> {
    model.validate()?;
    check_alpha(alpha)?;
    if replications == 0 {
        return Err(invalid("need at least one replication"));
    }
    if methods.is_empty() {
        return Err(invalid("no coverage methods given"));
    }
    let records: Vec<(ReplicationRecord, Vec<Option<String>>)> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<_> {
            let ds = generate_synthetic(&model.with_seed(derive_seed(model.seed, TAG_DATA, r as u64)))?;
            let counts = CellCounts::at_threshold(&ds, threshold)?;
            let agg = counts.aggregates();
            let store = counts.outcome_store();
            let estimate = crate::estimators::estimate(&agg, truth.metric).map(|e| e.value).unwrap_or(f64::NAN);
            let data = ReplicationData {
                index: r,
                dataset: &ds,
                aggregates: &agg,
                store: &store,
                metric: truth.metric,
                alpha,
                seed: derive_seed(model.seed, TAG_RESAMPLE, r as u64),
            };
            let mut intervals = Vec::with_capacity(methods.len());
            let mut errors = Vec::with_capacity(methods.len());
            for m in methods {
                match m.interval(&data) {
                    Ok(iv) => {
                        intervals.push(Some(iv));
                        errors.push(None);
                    }
                    Err(e) => {
                        intervals.push(None);
                        errors.push(Some(e.to_string()));
                    }
                }
            }
            Ok((
                ReplicationRecord {
                    index: r,
                    estimate,
                    intervals,
                },
                errors,
            ))
        })
        .collect::<Result<_>>()?;

    let mut summary = Vec::with_capacity(methods.len());
    for (k, m) in methods.iter().enumerate() {
        let mut hits = 0;
        let mut failures = 0;
        let mut width = 0.0;
        let mut first_error = None;
        for (rec, errs) in &records {
            match rec.intervals[k] {
                Some((lo, hi)) => {
                    width += hi - lo;
                    if lo <= truth.value && truth.value <= hi {
                        hits += 1;
                    }
                }
                None => {
                    failures += 1;
                    if first_error.is_none() {
                        first_error = errs[k].clone();
                    }
                }
            }
        }
        let done = replications - failures;
        // failed replications count as misses
        let coverage = hits as f64 / replications as f64;
        summary.push(MethodCoverage {
            method: m.name(),
            replications,
            hits,
            failures,
            coverage,
            coverage_ci: wilson_core(coverage, replications as f64, 0.05)?,
            mean_width: if done > 0 { width / done as f64 } else { f64::NAN },
            first_error,
        });
    }
    let ests: Vec<f64> = records.iter().map(|r| r.0.estimate).filter(|x| x.is_finite()).collect();
    Ok(CoverageReport {
        metric: truth.metric,
        truth: truth.value,
        threshold,
        alpha,
        replications,
        seed: model.seed,
        model: model.clone(),
        methods: summary,
        mean_estimate: ests.iter().sum::<f64>() / ests.len().max(1) as f64,
        log: keep_log.then(|| records.into_iter().map(|r| r.0).collect()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::InstanceRef;

    fn small(seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            g: 8,
            m: 3,
            dim: 16,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn generator_is_deterministic_and_normalized() {
        let a = generate_synthetic(&small(5)).unwrap();
        let b = generate_synthetic(&small(5)).unwrap();
        let c = generate_synthetic(&small(6)).unwrap();
        let r = |i, k| InstanceRef { identity: i, instance: k };
        let s = a.score(r(0, 0), r(3, 1)).unwrap();
        assert_eq!(s, b.score(r(0, 0), r(3, 1)).unwrap());
        assert_ne!(s, c.score(r(0, 0), r(3, 1)).unwrap());
        // unit vectors are at most 2 apart
        assert!(s > 0.0 && s <= 2.0);
    }

    #[test]
    fn zero_noise_collapses_identities() {
        let cfg = SyntheticConfig {
            noise_param: 0.0,
            ..small(1)
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let r = |i, k| InstanceRef { identity: i, instance: k };
        assert_eq!(ds.score(r(2, 0), r(2, 2)).unwrap(), 0.0);
        let agg = PairAggregates::at_threshold(&ds, 1e-9).unwrap();
        assert_eq!(crate::estimators::estimate(&agg, Metric::Frr).unwrap().value, 0.0);
    }

    #[test]
    fn noise_scale_modes() {
        let v = SyntheticConfig::default();
        assert!((v.noise_stddev() - 5f64.sqrt()).abs() < 1e-15);
        let s = SyntheticConfig {
            noise_scale: NoiseScale::Stddev,
            ..v
        };
        assert_eq!(s.noise_stddev(), 5.0);
    }

    #[test]
    fn unbalanced_counts_in_range() {
        let cfg = SyntheticConfig {
            m_range: Some((2, 10)),
            g: 40,
            dim: 8,
            ..Default::default()
        };
        let counts = cfg.instance_counts();
        assert!(counts.iter().all(|&m| (2..=10).contains(&m)));
        assert!(counts.windows(2).any(|w| w[0] != w[1]));
        assert_eq!(generate_synthetic(&cfg).unwrap().instance_counts(), counts);
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SyntheticConfig { g: 1, ..small(0) },
            SyntheticConfig { m: 1, ..small(0) },
            SyntheticConfig { dim: 0, ..small(0) },
            SyntheticConfig {
                noise_param: -1.0,
                ..small(0)
            },
        ] {
            assert!(generate_synthetic(&cfg).is_err());
        }
    }

    fn calib() -> CalibrationConfig {
        CalibrationConfig { g: 30, m: 4, reps: 1 }
    }

    #[test]
    fn calibration_quantiles() {
        let model = small(2);
        let c = calibrate_threshold(&model, &calib(), Metric::Far, 0.01).unwrap();
        let n = 30 * 29 / 2 * 16;
        assert!((c.achieved - (0.01 * n as f64).round() / n as f64).abs() < 1e-12);
        assert_eq!(c.achieved, c.truth);
        let all = calibrate_threshold(&model, &calib(), Metric::Far, 1.0).unwrap();
        assert_eq!(all.achieved, 1.0);
        let none = calibrate_threshold(&model, &calib(), Metric::Frr, 0.0).unwrap();
        assert_eq!(none.achieved, 0.0);
        let f = calibrate_threshold(&model, &calib(), Metric::Frr, 0.1).unwrap();
        assert!((f.achieved - 18.0 / 180.0).abs() < 1e-12);
        let mut prev = f64::NEG_INFINITY;
        for t in [0.001, 0.01, 0.05, 0.2, 0.5] {
            let c = calibrate_threshold(&model, &calib(), Metric::Far, t).unwrap();
            assert!(c.threshold >= prev);
            prev = c.threshold;
        }
        let tiny = calibrate_threshold(&model, &calib(), Metric::Far, 1e-6).unwrap();
        assert!(!tiny.warnings.is_empty());
        assert!(calibrate_threshold(&model, &calib(), Metric::Far, 1.5).is_err());
    }

    struct Fixed(f64, f64);

    impl CoverageMethod for Fixed {
        fn name(&self) -> String {
            format!("fixed[{},{}]", self.0, self.1)
        }

        fn interval(&self, _: &ReplicationData<'_>) -> Result<(f64, f64)> {
            Ok((self.0, self.1))
        }
    }

    struct Failing;

    impl CoverageMethod for Failing {
        fn name(&self) -> String {
            "failing".into()
        }

        fn interval(&self, _: &ReplicationData<'_>) -> Result<(f64, f64)> {
            Err(invalid("nope"))
        }
    }

    #[test]
    fn degenerate_methods() {
        let model = small(3);
        let truth = Truth {
            metric: Metric::Far,
            value: 0.2,
        };
        let methods: Vec<Box<dyn CoverageMethod>> = vec![Box::new(Fixed(0.0, 1.0)), Box::new(Fixed(0.5, 0.5)), Box::new(Failing)];
        let rep = run_coverage_experiment(&model, 1.0, truth, &methods, 0.05, 20, true).unwrap();
        assert_eq!(rep.methods[0].coverage, 1.0);
        assert_eq!(rep.methods[0].mean_width, 1.0);
        assert_eq!(rep.methods[1].coverage, 0.0);
        assert_eq!(rep.methods[2].failures, 20);
        assert_eq!(rep.methods[2].first_error.as_deref(), Some("invalid input: nope"));
        assert_eq!(rep.log.as_ref().unwrap().len(), 20);
        let (lo, hi) = rep.methods[0].coverage_ci;
        assert!(lo > 0.8 && hi == 1.0);
    }

    #[test]
    fn report_is_reproducible_and_exports() {
        let model = small(4);
        let methods = vec![method_from_name("wilson", 100).unwrap(), method_from_name("don", 100).unwrap()];
        let truth = Truth {
            metric: Metric::Far,
            value: 0.1,
        };
        let a = run_coverage_experiment(&model, 1.0, truth, &methods, 0.05, 12, false).unwrap();
        let b = run_coverage_experiment(&model, 1.0, truth, &methods, 0.05, 12, false).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
        assert!(method_from_name("bogus", 100).is_err());
    }
}
