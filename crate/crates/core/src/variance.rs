//! Variance estimators for `sqrt(G) * FRR` and `sqrt(G) * FAR`.
//!
//! Impostor cells that share an identity are correlated, so the FAR variance
//! has a covariance term `Cov(Y_12, Y_13)` on top of the cell variance. All
//! estimators here report the variance of the `sqrt(G)`-scaled statistic;
//! divide by `G` for the variance of the estimate itself.

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::data_model::{Metric, PairAggregates};
use crate::error::{invalid, Result};
use crate::estimators::ErrorEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceEstimator {
    Plugin,
    Jackknife,
    UnbalancedDelta,
}

/// How the unbalanced FRR variance is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrrDeltaMode {
    /// Sample-moment plug-in of the full delta-method expansion; can go negative.
    DeltaFull,
    /// Assumes instance counts independent of outcomes; always nonnegative.
    #[default]
    DeltaIndependent,
}

/// The two pieces of the FAR variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarComponents {
    pub var_y12: f64,
    pub cov_y12_y13: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub target: Metric,
    pub estimator: VarianceEstimator,
    /// Value before clamping; may be negative.
    pub raw: f64,
    /// `max(raw, 0)`.
    pub scaled_variance: f64,
    pub clamped: bool,
    pub components: Option<FarComponents>,
}

impl VarianceEstimate {
    fn new(
        target: Metric,
        estimator: VarianceEstimator,
        raw: f64,
        components: Option<FarComponents>,
    ) -> Self {
        let clamped = raw < 0.0;
        VarianceEstimate {
            target,
            estimator,
            raw,
            scaled_variance: if clamped { 0.0 } else { raw },
            clamped,
            components,
        }
    }

    /// Variance of the unscaled estimate, `scaled_variance / G`.
    pub fn of_estimate(&self, g: usize) -> f64 {
        self.scaled_variance / g as f64
    }
}

fn need_g(agg: &PairAggregates, min: usize, what: &str) -> Result<usize> {
    let g = agg.g();
    if g < min {
        return Err(invalid(format!("{what} needs at least {min} identities, got {g}")));
    }
    Ok(g)
}

/// `(1/G) sum_i (Y_ii - FRR)^2` in the balanced setting.
pub fn var_frr_plugin(agg: &PairAggregates, frr: &ErrorEstimate) -> Result<VarianceEstimate> {
    let g = need_g(agg, 2, "FRR variance")?;
    if !agg.is_balanced() {
        return Err(invalid("plug-in FRR variance needs a balanced dataset"));
    }
    let raw = (0..g).map(|i| (agg.y(i, i) - frr.value).powi(2)).sum::<f64>() / g as f64;
    Ok(VarianceEstimate::new(Metric::Frr, VarianceEstimator::Plugin, raw, None))
}

/// Per identity `i`: `(sum_j d_ij, sum_j d_ij^2)` over `j != i`, with
/// `d_ij = Y_ij - FAR`, in double-double precision.
fn row_deviation_sums(agg: &PairAggregates, far: f64) -> Vec<(Dd, Dd)> {
    (0..agg.g())
        .map(|i| {
            let mut s1 = Dd::default();
            let mut s2 = Dd::default();
            for (j, &y) in agg.row(i).iter().enumerate() {
                if j != i {
                    let d = Dd::difference(y, far);
                    s1 = s1 + d;
                    s2 = s2 + d.square();
                }
            }
            (s1, s2)
        })
        .collect()
}

fn sum_sq(rows: &[(Dd, Dd)]) -> Dd {
    rows.iter().map(|r| r.1).sum()
}

/// Sum over ordered triples `(i, j, k)` of distinct identities of `d_ij d_ik`,
/// evaluated per row as `(sum_j d_ij)^2 - sum_j d_ij^2`.
fn sum_triples(rows: &[(Dd, Dd)]) -> Dd {
    rows.iter().map(|r| r.0.square() - r.1).sum()
}

/// Plug-in `Var(Y_12)`: mean squared deviation of the off-diagonal cells.
pub fn var_y12_plugin(agg: &PairAggregates, far: &ErrorEstimate) -> Result<f64> {
    let g = need_g(agg, 2, "Var(Y12)")?;
    let rows = row_deviation_sums(agg, far.value);
    Ok(sum_sq(&rows).div_f64((g * (g - 1)) as f64).to_f64())
}

/// Plug-in `Cov(Y_12, Y_13)`: average product of deviations over ordered
/// triples `(i, j, k)` of distinct identities.
pub fn cov_y12_y13_plugin(agg: &PairAggregates, far: &ErrorEstimate) -> Result<f64> {
    let g = need_g(agg, 3, "Cov(Y12, Y13)")?;
    let rows = row_deviation_sums(agg, far.value);
    Ok(sum_triples(&rows).div_f64((g * (g - 1) * (g - 2)) as f64).to_f64())
}

/// `2/(G-1) Var(Y12) + 4(G-2)/(G-1) Cov(Y12, Y13)`, clamped at zero.
///
/// Both terms are combined before rounding: with three identities the
/// estimate is exactly zero, and the terms cancel.
pub fn var_far_plugin(agg: &PairAggregates, far: &ErrorEstimate) -> Result<VarianceEstimate> {
    let gu = need_g(agg, 3, "FAR variance")?;
    let g = gu as f64;
    let rows = row_deviation_sums(agg, far.value);
    let (sq, tri) = (sum_sq(&rows), sum_triples(&rows));
    let var_y12 = sq.div_f64(g * (g - 1.0)).to_f64();
    let cov_y12_y13 = tri.div_f64(g * (g - 1.0) * (g - 2.0)).to_f64();
    // 2 sq / (G (G-1)^2) + 4 tri / (G (G-1)^2)
    let raw = (sq.scale(2.0) + tri.scale(4.0)).div_f64(g * (g - 1.0) * (g - 1.0)).to_f64();
    Ok(VarianceEstimate::new(
        Metric::Far,
        VarianceEstimator::Plugin,
        raw,
        Some(FarComponents {
            var_y12,
            cov_y12_y13,
        }),
    ))
}

/// Leave-one-identity-out jackknife. Numerically identical to
/// [`var_far_plugin`], computed from raw cell sums instead of deviations.
pub fn var_far_jackknife(agg: &PairAggregates, far: &ErrorEstimate) -> Result<VarianceEstimate> {
    let gu = need_g(agg, 3, "FAR jackknife")?;
    let g = gu as f64;
    let mut row = vec![Dd::default(); gu];
    let mut col = vec![Dd::default(); gu];
    let mut total = Dd::default();
    for i in 0..gu {
        for (j, &y) in agg.row(i).iter().enumerate() {
            if j != i {
                let y = Dd::from_f64(y);
                row[i] = row[i] + y;
                col[j] = col[j] + y;
                total = total + y;
            }
        }
    }
    let denom = (g - 1.0) * (g - 2.0);
    let f = Dd::from_f64(far.value);
    let ss: Dd = (0..gu)
        .map(|i| ((total - row[i] - col[i]).div_f64(denom) - f).square())
        .sum();
    let sq = sum_sq(&row_deviation_sums(agg, far.value));
    // (G-2)^2/G ss - 2 Var(Y12)/(G-1)
    let raw = (ss.scale((g - 2.0) * (g - 2.0)).div_f64(g) - sq.scale(2.0).div_f64(g * (g - 1.0) * (g - 1.0))).to_f64();
    Ok(VarianceEstimate::new(Metric::Far, VarianceEstimator::Jackknife, raw, None))
}

/// Delta-method FRR variance for unequal instance counts.
pub fn var_frr_unbalanced(
    agg: &PairAggregates,
    frr: &ErrorEstimate,
    mode: FrrDeltaMode,
) -> Result<VarianceEstimate> {
    let gu = need_g(agg, 2, "unbalanced FRR variance")?;
    let g = gu as f64;
    let m: Vec<f64> = (0..gu).map(|i| agg.m_tilde(i)).collect();
    let a: Vec<f64> = (0..gu)
        .map(|i| if m[i] > 0.0 { m[i] * agg.y(i, i) } else { 0.0 })
        .collect();
    let m_mean = m.iter().sum::<f64>() / g;
    if m_mean == 0.0 {
        return Err(invalid("no identity has two or more instances"));
    }
    let raw = match mode {
        FrrDeltaMode::DeltaFull => {
            let a_mean = a.iter().sum::<f64>() / g;
            let var_a = a.iter().map(|x| (x - a_mean).powi(2)).sum::<f64>() / g;
            let var_m = m.iter().map(|x| (x - m_mean).powi(2)).sum::<f64>() / g;
            let cov_am = a
                .iter()
                .zip(&m)
                .map(|(x, y)| (x - a_mean) * (y - m_mean))
                .sum::<f64>()
                / g;
            var_a / m_mean.powi(2) - 2.0 * a_mean * cov_am / m_mean.powi(3)
                + a_mean.powi(2) * var_m / m_mean.powi(4)
        }
        FrrDeltaMode::DeltaIndependent => {
            let num = (0..gu)
                .filter(|&i| m[i] > 0.0)
                .map(|i| m[i].powi(2) * (agg.y(i, i) - frr.value).powi(2))
                .sum::<f64>()
                / g;
            num / m_mean.powi(2)
        }
    };
    Ok(VarianceEstimate::new(Metric::Frr, VarianceEstimator::UnbalancedDelta, raw, None))
}

/// Delta-method FAR variance for unequal instance counts: the balanced
/// plug-in with each cell deviation weighted by its instance counts and the
/// moments normalized by the mean instance count to the fourth power.
pub fn var_far_unbalanced(agg: &PairAggregates, far: &ErrorEstimate) -> Result<VarianceEstimate> {
    let gu = need_g(agg, 3, "unbalanced FAR variance")?;
    let g = gu as f64;
    let m: Vec<f64> = agg.instances().iter().map(|&x| x as f64).collect();
    let m_mean4 = (m.iter().sum::<f64>() / g).powi(4);
    let mut pair_sum = 0.0;
    let mut triple_sum = 0.0;
    for i in 0..gu {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (j, y) in agg.row(i).iter().enumerate() {
            if j != i {
                let wd = m[j] * (y - far.value);
                s1 += wd;
                s2 += wd * wd;
            }
        }
        let mi2 = m[i] * m[i];
        pair_sum += mi2 * s2;
        triple_sum += mi2 * (s1 * s1 - s2);
    }
    let var_y12 = pair_sum / (g * (g - 1.0)) / m_mean4;
    let cov_y12_y13 = triple_sum / (g * (g - 1.0) * (g - 2.0)) / m_mean4;
    let raw = 2.0 / (g - 1.0) * var_y12 + 4.0 * (g - 2.0) / (g - 1.0) * cov_y12_y13;
    Ok(VarianceEstimate::new(
        Metric::Far,
        VarianceEstimator::UnbalancedDelta,
        raw,
        Some(FarComponents {
            var_y12,
            cov_y12_y13,
        }),
    ))
}

/// Default estimator for the aggregates' setting: plug-in when balanced,
/// delta-method otherwise.
pub fn estimate_variance(
    agg: &PairAggregates,
    est: &ErrorEstimate,
    frr_mode: FrrDeltaMode,
) -> Result<VarianceEstimate> {
    match (est.metric, agg.is_balanced()) {
        (Metric::Frr, true) => var_frr_plugin(agg, est),
        (Metric::Frr, false) => var_frr_unbalanced(agg, est, frr_mode),
        (Metric::Far, true) => var_far_plugin(agg, est),
        (Metric::Far, false) => var_far_unbalanced(agg, est),
    }
}
