//! FRR and FAR point estimates from identity-level means.

use serde::{Deserialize, Serialize};

use crate::data_model::{Metric, PairAggregates, Setting};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub metric: Metric,
    #[serde(with = "crate::serde_float")]
    pub value: f64,
    /// Distinct comparisons behind the estimate, as if they were independent.
    pub n_naive: f64,
    pub setting: Setting,
}

/// `FRR = (1/G) sum_i Y_ii`. Requires the same `M >= 2` for every identity.
pub fn estimate_frr_balanced(agg: &PairAggregates) -> Result<ErrorEstimate> {
    let g = agg.g();
    if g == 0 {
        return Err(invalid("no identities"));
    }
    if !agg.is_balanced() {
        return Err(invalid("balanced FRR estimator needs equal instance counts"));
    }
    if agg.m(0) < 2 {
        return Err(invalid("FRR needs at least two instances per identity"));
    }
    let value = (0..g).map(|i| agg.y(i, i)).sum::<f64>() / g as f64;
    Ok(ErrorEstimate {
        metric: Metric::Frr,
        value,
        n_naive: agg.genuine_pairs(),
        setting: Setting::Balanced,
    })
}

/// `FAR = sum_{i != j} Y_ij / (G (G - 1))`.
pub fn estimate_far_balanced(agg: &PairAggregates) -> Result<ErrorEstimate> {
    let g = agg.g();
    if g < 2 {
        return Err(invalid("FAR needs at least two identities"));
    }
    if !agg.is_balanced() {
        return Err(invalid("balanced FAR estimator needs equal instance counts"));
    }
    let mut sum = 0.0;
    for i in 0..g {
        for j in 0..g {
            if i != j {
                sum += agg.y(i, j);
            }
        }
    }
    Ok(ErrorEstimate {
        metric: Metric::Far,
        value: sum / (g * (g - 1)) as f64,
        n_naive: agg.impostor_pairs(),
        setting: Setting::Balanced,
    })
}

/// Mean of the diagonal cells weighted by `M_i (M_i - 1)`. Identities with a
/// single instance carry zero weight.
pub fn estimate_frr_unbalanced(agg: &PairAggregates) -> Result<ErrorEstimate> {
    let g = agg.g();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..g {
        let w = agg.m_tilde(i);
        if w > 0.0 {
            num += w * agg.y(i, i);
            den += w;
        }
    }
    if den == 0.0 {
        return Err(invalid("no identity has two or more instances"));
    }
    Ok(ErrorEstimate {
        metric: Metric::Frr,
        value: num / den,
        n_naive: agg.genuine_pairs(),
        setting: Setting::Unbalanced,
    })
}

/// Mean of the off-diagonal cells weighted by `M_i M_j`.
pub fn estimate_far_unbalanced(agg: &PairAggregates) -> Result<ErrorEstimate> {
    let g = agg.g();
    if g < 2 {
        return Err(invalid("FAR needs at least two identities"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..g {
        let mi = agg.m(i) as f64;
        for j in 0..g {
            if i != j {
                let w = mi * agg.m(j) as f64;
                num += w * agg.y(i, j);
                den += w;
            }
        }
    }
    Ok(ErrorEstimate {
        metric: Metric::Far,
        value: num / den,
        n_naive: agg.impostor_pairs(),
        setting: Setting::Unbalanced,
    })
}

/// Picks the balanced or unbalanced estimator from the instance counts.
pub fn estimate(agg: &PairAggregates, metric: Metric) -> Result<ErrorEstimate> {
    match (metric, agg.setting()) {
        (Metric::Frr, Setting::Balanced) => estimate_frr_balanced(agg),
        (Metric::Frr, Setting::Unbalanced) => estimate_frr_unbalanced(agg),
        (Metric::Far, Setting::Balanced) => estimate_far_balanced(agg),
        (Metric::Far, Setting::Unbalanced) => estimate_far_unbalanced(agg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agg(m: Vec<usize>, y: Vec<Vec<f64>>) -> PairAggregates {
        PairAggregates::from_means(m, y).unwrap()
    }

    #[test]
    fn frr_balanced_examples() {
        let a = agg(vec![2, 2], vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(estimate_frr_balanced(&a).unwrap().value, 0.5);
        let z = agg(vec![3; 3], vec![vec![0.0; 3]; 3]);
        assert_eq!(estimate_frr_balanced(&z).unwrap().value, 0.0);
        let mut y = vec![vec![0.0; 3]; 3];
        y[0][0] = 1.0 / 3.0;
        y[2][2] = 1.0 / 6.0;
        let v = estimate_frr_balanced(&agg(vec![4; 3], y)).unwrap().value;
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn far_balanced_examples() {
        let mut y = vec![vec![0.0; 3]; 3];
        y[0][1] = 1.0;
        y[1][0] = 1.0;
        let v = estimate_far_balanced(&agg(vec![1; 3], y)).unwrap().value;
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        let z = agg(vec![1; 3], vec![vec![0.0; 3]; 3]);
        assert_eq!(estimate_far_balanced(&z).unwrap().value, 0.0);
        let y = vec![
            vec![0.0, 0.1, 0.2],
            vec![0.1, 0.0, 0.3],
            vec![0.2, 0.3, 0.0],
        ];
        let v = estimate_far_balanced(&agg(vec![2; 3], y)).unwrap().value;
        assert!((v - 0.2).abs() < 1e-15);
        assert!(estimate_far_balanced(&agg(vec![2], vec![vec![0.0]])).is_err());
    }

    #[test]
    fn frr_unbalanced_examples() {
        let a = agg(vec![3, 2], vec![vec![1.0 / 6.0, 0.0], vec![0.0, 0.0]]);
        assert!((estimate_frr_unbalanced(&a).unwrap().value - 0.125).abs() < 1e-15);
        let single = agg(vec![4], vec![vec![0.25]]);
        assert_eq!(estimate_frr_unbalanced(&single).unwrap().value, 0.25);
        let none = agg(vec![1, 1], vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(estimate_frr_unbalanced(&none).is_err());
    }

    #[test]
    fn far_unbalanced_examples() {
        let a = agg(vec![2, 1], vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert_eq!(estimate_far_unbalanced(&a).unwrap().value, 0.5);
        let mut y = vec![vec![0.0; 3]; 3];
        y[0][1] = 1.0;
        y[1][0] = 1.0;
        let v = estimate_far_unbalanced(&agg(vec![2, 1, 1], y)).unwrap().value;
        assert!((v - 0.4).abs() < 1e-15);
    }

    #[test]
    fn balanced_requires_balance() {
        let a = agg(vec![3, 2], vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(estimate_frr_balanced(&a).is_err());
        assert_eq!(estimate(&a, Metric::Frr).unwrap().setting, Setting::Unbalanced);
    }
}
