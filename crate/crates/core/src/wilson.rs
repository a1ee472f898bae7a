//! Wilson score intervals with naive or dependence-adjusted effective sample sizes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data_model::{Metric, PairAggregates};
use crate::error::{invalid, Result};
use crate::estimators::{estimate, ErrorEstimate};
use crate::variance::{estimate_variance, FrrDeltaMode, VarianceEstimate};

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `z_{1 - alpha/2}`.
pub fn z_two_sided(alpha: f64) -> f64 {
    normal_quantile(1.0 - alpha / 2.0)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Wilson score interval for a proportion `p_hat` observed on `n_star`
/// effective trials, clipped to `[0, 1]`. The lower bound is exactly 0 at
/// `p_hat = 0` and the upper bound exactly 1 at `p_hat = 1`.
pub fn wilson_core(p_hat: f64, n_star: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(n_star > 0.0) {
        return Err(invalid(format!("effective sample size must be positive, got {n_star}")));
    }
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(invalid(format!("proportion {p_hat} outside [0, 1]")));
    }
    check_alpha(alpha)?;
    let z = z_two_sided(alpha);
    let z2 = z * z;
    let denom = n_star + z2;
    let center = (p_hat * n_star + z2 / 2.0) / denom;
    let half = z * n_star.sqrt() / denom * (p_hat * (1.0 - p_hat) + z2 / (4.0 * n_star)).sqrt();
    let lower = if p_hat == 0.0 { 0.0 } else { (center - half).clamp(0.0, 1.0) };
    let upper = if p_hat == 1.0 { 1.0 } else { (center + half).clamp(0.0, 1.0) };
    Ok((lower, upper))
}

/// Plain Wald interval, `p_hat +- z sqrt(p_hat (1 - p_hat) / n)`, unclipped.
/// Only used to sanity-check Wilson widths.
pub fn wald_interval(p_hat: f64, n_star: f64, alpha: f64) -> (f64, f64) {
    let half = z_two_sided(alpha) * (p_hat * (1.0 - p_hat) / n_star).sqrt();
    (p_hat - half, p_hat + half)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeKind {
    Naive,
    Adjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSampleSize {
    #[serde(with = "crate::serde_float")]
    pub value: f64,
    pub kind: SizeKind,
    /// The lower bound (`G/2` for FAR, `G` for FRR) was binding.
    pub floor_applied: bool,
    /// The naive pair count was binding.
    pub cap_applied: bool,
}

fn adjusted_n(p: f64, var_of_estimate: f64, floor: f64, naive_pairs: f64) -> EffectiveSampleSize {
    let num = p * (1.0 - p);
    let ratio = if num == 0.0 {
        // p at the boundary: the ratio is 0 (or 0/0), the floor decides
        0.0
    } else if var_of_estimate <= 0.0 {
        f64::INFINITY
    } else {
        num / var_of_estimate
    };
    let mut value = ratio;
    let mut cap_applied = false;
    if value > naive_pairs {
        value = naive_pairs;
        cap_applied = true;
    }
    let mut floor_applied = false;
    if value < floor {
        value = floor;
        floor_applied = true;
        cap_applied = false;
    }
    EffectiveSampleSize {
        value,
        kind: SizeKind::Adjusted,
        floor_applied,
        cap_applied,
    }
}

/// `N* = max(FAR (1 - FAR) / Var(FAR), floor(G/2))`, capped at `naive_pairs`.
pub fn effective_n_far(
    far: &ErrorEstimate,
    var_far: &VarianceEstimate,
    g: usize,
    naive_pairs: f64,
) -> Result<EffectiveSampleSize> {
    if g < 2 {
        return Err(invalid("effective FAR sample size needs at least two identities"));
    }
    Ok(adjusted_n(far.value, var_far.of_estimate(g), (g / 2) as f64, naive_pairs))
}

/// `N* = max(FRR (1 - FRR) / Var(FRR), G)`, capped at `naive_pairs`.
pub fn effective_n_frr(
    frr: &ErrorEstimate,
    var_frr: &VarianceEstimate,
    g: usize,
    naive_pairs: f64,
) -> Result<EffectiveSampleSize> {
    if g < 1 {
        return Err(invalid("effective FRR sample size needs at least one identity"));
    }
    Ok(adjusted_n(frr.value, var_frr.of_estimate(g), g as f64, naive_pairs))
}

/// Naive count: distinct comparisons treated as independent trials.
pub fn effective_n_naive(est: &ErrorEstimate) -> EffectiveSampleSize {
    EffectiveSampleSize {
        value: est.n_naive,
        kind: SizeKind::Naive,
        floor_applied: false,
        cap_applied: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub metric: Metric,
    pub method: String,
    #[serde(with = "crate::serde_float")]
    pub lower: f64,
    #[serde(with = "crate::serde_float")]
    pub upper: f64,
    #[serde(with = "crate::serde_float")]
    pub point: f64,
    pub alpha: f64,
    pub diagnostics: BTreeMap<String, Value>,
}

impl IntervalResult {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WilsonMode {
    Naive,
    Adjusted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WilsonOptions {
    pub frr_mode: FrrDeltaMode,
}

/// Point estimate, variance (adjusted mode) and effective sample size,
/// composed into a Wilson interval.
pub fn wilson_interval(
    metric: Metric,
    agg: &PairAggregates,
    mode: WilsonMode,
    alpha: f64,
    opts: WilsonOptions,
) -> Result<IntervalResult> {
    check_alpha(alpha)?;
    let est = estimate(agg, metric)?;
    let g = agg.g();
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("setting".into(), json!(est.setting));
    diagnostics.insert("g".into(), json!(g));
    diagnostics.insert("naive_pairs".into(), json!(est.n_naive));
    let n_star = match mode {
        WilsonMode::Naive => effective_n_naive(&est),
        WilsonMode::Adjusted => {
            let var = estimate_variance(agg, &est, opts.frr_mode)?;
            diagnostics.insert("variance_estimator".into(), json!(var.estimator));
            diagnostics.insert("scaled_variance".into(), json!(var.scaled_variance));
            diagnostics.insert("scaled_variance_raw".into(), json!(var.raw));
            diagnostics.insert("variance_clamped".into(), json!(var.clamped));
            if let Some(c) = var.components {
                diagnostics.insert("var_y12".into(), json!(c.var_y12));
                diagnostics.insert("cov_y12_y13".into(), json!(c.cov_y12_y13));
            }
            match metric {
                Metric::Far => effective_n_far(&est, &var, g, est.n_naive)?,
                Metric::Frr => effective_n_frr(&est, &var, g, est.n_naive)?,
            }
        }
    };
    diagnostics.insert("n_star".into(), json!(n_star.value));
    diagnostics.insert("n_star_floor_applied".into(), json!(n_star.floor_applied));
    diagnostics.insert("n_star_cap_applied".into(), json!(n_star.cap_applied));
    let (lower, upper) = wilson_core(est.value, n_star.value, alpha)?;
    Ok(IntervalResult {
        metric,
        method: match mode {
            WilsonMode::Naive => "naive-wilson".into(),
            WilsonMode::Adjusted => "wilson".into(),
        },
        lower,
        upper,
        point: est.value,
        alpha,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::Setting;
    use crate::variance::VarianceEstimator;
    use proptest::prelude::*;

    const Z2: f64 = 3.841_458_820_694_124;

    /// Independent evaluation of the score interval by solving
    /// `(p - p_hat)^2 = z^2 p (1 - p) / n` for `p`.
    fn wilson_by_quadratic(p_hat: f64, n: f64, z2: f64) -> (f64, f64) {
        let a = 1.0 + z2 / n;
        let b = -(2.0 * p_hat + z2 / n);
        let c = p_hat * p_hat;
        let disc = (b * b - 4.0 * a * c).sqrt();
        ((-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a))
    }

    #[test]
    fn quantile_accuracy() {
        assert!((z_two_sided(0.05) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.995) - 2.575_829_303_548_901).abs() < 1e-12);
        assert!((normal_quantile(1e-6) + 4.753_424_308_822_899).abs() < 1e-9);
    }

    #[test]
    fn zero_and_one_closed_forms() {
        let (l, u) = wilson_core(0.0, 100.0, 0.05).unwrap();
        assert_eq!(l, 0.0);
        assert!((u - Z2 / (100.0 + Z2)).abs() < 1e-12);
        assert!((u - 0.036994).abs() < 1e-5);
        let (l, u) = wilson_core(1.0, 100.0, 0.05).unwrap();
        assert_eq!(u, 1.0);
        assert!((l - (1.0 - Z2 / (100.0 + Z2))).abs() < 1e-12);
    }

    #[test]
    fn matches_quadratic_oracle() {
        let (l, u) = wilson_core(0.1, 50.0, 0.05).unwrap();
        let (ol, ou) = wilson_by_quadratic(0.1, 50.0, Z2);
        assert!((l - ol).abs() < 1e-12 && (u - ou).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(wilson_core(0.1, 0.0, 0.05).is_err());
        assert!(wilson_core(0.1, 10.0, 1.0).is_err());
        assert!(wilson_core(1.1, 10.0, 0.05).is_err());
    }

    fn est(metric: Metric, value: f64, n: f64) -> ErrorEstimate {
        ErrorEstimate {
            metric,
            value,
            n_naive: n,
            setting: Setting::Balanced,
        }
    }

    fn var(metric: Metric, scaled: f64) -> VarianceEstimate {
        VarianceEstimate {
            target: metric,
            estimator: VarianceEstimator::Plugin,
            raw: scaled,
            scaled_variance: scaled.max(0.0),
            clamped: scaled < 0.0,
            components: None,
        }
    }

    #[test]
    fn far_effective_n_examples() {
        let n = effective_n_far(&est(Metric::Far, 0.01, 153125.0), &var(Metric::Far, 4e-6 * 50.0), 50, 153125.0)
            .unwrap();
        assert!((n.value - 2475.0).abs() < 1e-6);
        assert!(!n.floor_applied && !n.cap_applied);

        let n = effective_n_far(&est(Metric::Far, 0.0, 153125.0), &var(Metric::Far, 1e-3), 50, 153125.0).unwrap();
        assert_eq!(n.value, 25.0);
        assert!(n.floor_applied);

        let n = effective_n_far(&est(Metric::Far, 0.1, 1000.0), &var(Metric::Far, -1e-4), 50, 1000.0).unwrap();
        assert_eq!(n.value, 1000.0);
        assert!(n.cap_applied);
    }

    #[test]
    fn frr_effective_n_examples() {
        let n = effective_n_frr(&est(Metric::Frr, 0.1, 1e6), &var(Metric::Frr, 1.8e-5 * 50.0), 50, 1e6).unwrap();
        assert!((n.value - 5000.0).abs() < 1e-6);
        let n = effective_n_frr(&est(Metric::Frr, 0.0, 500.0), &var(Metric::Frr, 0.0), 50, 500.0).unwrap();
        assert_eq!(n.value, 50.0);
        assert!(n.floor_applied);
    }

    fn zero_frr_agg() -> PairAggregates {
        PairAggregates::from_means(vec![5; 50], vec![vec![0.0; 50]; 50]).unwrap()
    }

    #[test]
    fn all_zero_frr_intervals() {
        let a = zero_frr_agg();
        let adj = wilson_interval(Metric::Frr, &a, WilsonMode::Adjusted, 0.05, Default::default()).unwrap();
        assert_eq!(adj.lower, 0.0);
        assert!((adj.upper - Z2 / (50.0 + Z2)).abs() < 1e-12);
        assert!((adj.upper - 0.071347).abs() < 1e-5);
        let naive = wilson_interval(Metric::Frr, &a, WilsonMode::Naive, 0.05, Default::default()).unwrap();
        assert_eq!(naive.diagnostics["n_star"], json!(500.0));
        assert!((naive.upper - Z2 / (500.0 + Z2)).abs() < 1e-12);
        assert!((naive.upper - 0.0076252).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn bounds_ordered_and_contain_estimate(p in 0.0f64..=1.0, n in 0.01f64..1e7, alpha in 0.001f64..0.5) {
            let (l, u) = wilson_core(p, n, alpha).unwrap();
            prop_assert!(0.0 <= l && l <= u && u <= 1.0);
            prop_assert!(l <= p + 1e-12 && p <= u + 1e-12);
        }

        #[test]
        fn width_decreases_with_n(p in 0.01f64..0.99, n in 1.0f64..1e6, alpha in 0.001f64..0.5) {
            let (l1, u1) = wilson_core(p, n, alpha).unwrap();
            let (l2, u2) = wilson_core(p, n * 1.5, alpha).unwrap();
            prop_assert!(u2 - l2 < u1 - l1);
        }

        #[test]
        fn close_to_wald_away_from_boundary(p in 0.05f64..0.95, n in 2000.0f64..1e6) {
            let (l, u) = wilson_core(p, n, 0.05).unwrap();
            let (wl, wu) = wald_interval(p, n, 0.05);
            let ratio = (u - l) / (wu - wl);
            prop_assert!((ratio - 1.0).abs() < 0.1, "ratio {}", ratio);
        }

        #[test]
        fn adjusted_n_within_floor_and_cap(p in 0.0f64..0.5, v in -1e-3f64..1e-2, g in 3usize..200) {
            let naive = (g * (g - 1) * 2) as f64;
            let n = effective_n_far(&est(Metric::Far, p, naive), &var(Metric::Far, v), g, naive).unwrap();
            prop_assert!(n.value >= (g / 2) as f64);
            prop_assert!(n.value <= naive);
        }
    }
}
