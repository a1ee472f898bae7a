//! End to end on synthetic data, checked against direct counting over
//! every pair of instances.

use matchci::bootstrap::{bootstrap_distribution, percentile_interval, BootstrapInput, Scheme};
use matchci::synthetic::{generate_synthetic, SyntheticConfig};
use matchci::wilson::{wilson_interval, WilsonMode, WilsonOptions};
use matchci::{estimate, CellCounts, InstanceRef, MatchDataset, Metric};

fn pooled_rates(ds: &MatchDataset, t: f64) -> (f64, f64) {
    let refs: Vec<InstanceRef> = (0..ds.g())
        .flat_map(|i| (0..ds.instances_of(i)).map(move |k| InstanceRef { identity: i, instance: k }))
        .collect();
    let (mut ge, mut gn, mut ie, mut inn) = (0u64, 0u64, 0u64, 0u64);
    for a in 0..refs.len() {
        for b in a + 1..refs.len() {
            let s = ds.score(refs[a], refs[b]).unwrap();
            if refs[a].identity == refs[b].identity {
                gn += 1;
                ge += (s >= t) as u64;
            } else {
                inn += 1;
                ie += (s < t) as u64;
            }
        }
    }
    (ge as f64 / gn as f64, ie as f64 / inn as f64)
}

fn unbalanced(seed: u64) -> MatchDataset {
    generate_synthetic(&SyntheticConfig {
        g: 25,
        m_range: Some((2, 10)),
        dim: 32,
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn unbalanced_estimates_are_pooled_rates() {
    for seed in 0..5 {
        let ds = unbalanced(seed);
        assert!(!ds.is_balanced());
        let (gen, imp) = ds.collect_scores().unwrap();
        let mut s: Vec<f64> = gen.iter().map(|x| x.0).chain(imp.iter().map(|x| x.0)).collect();
        s.sort_by(f64::total_cmp);
        for q in [0.05, 0.2, 0.5] {
            let t = s[(q * s.len() as f64) as usize];
            let agg = CellCounts::at_threshold(&ds, t).unwrap().aggregates();
            let (frr, far) = pooled_rates(&ds, t);
            assert!((estimate(&agg, Metric::Frr).unwrap().value - frr).abs() < 1e-12);
            assert!((estimate(&agg, Metric::Far).unwrap().value - far).abs() < 1e-12);
        }
    }
}

#[test]
fn intervals_bracket_estimates_on_unbalanced_data() {
    let ds = unbalanced(42);
    let (_, imp) = ds.collect_scores().unwrap();
    let mut s: Vec<f64> = imp.iter().map(|x| x.0).collect();
    s.sort_by(f64::total_cmp);
    let t = s[s.len() / 50];
    let counts = CellCounts::at_threshold(&ds, t).unwrap();
    let (agg, store) = (counts.aggregates(), counts.outcome_store());
    for metric in [Metric::Frr, Metric::Far] {
        let p = estimate(&agg, metric).unwrap().value;
        for mode in [WilsonMode::Adjusted, WilsonMode::Naive] {
            let iv = wilson_interval(metric, &agg, mode, 0.05, WilsonOptions::default()).unwrap();
            assert!(iv.lower <= p && p <= iv.upper, "{metric} {mode:?}");
        }
        let adjusted = wilson_interval(metric, &agg, WilsonMode::Adjusted, 0.05, WilsonOptions::default()).unwrap();
        let naive = wilson_interval(metric, &agg, WilsonMode::Naive, 0.05, WilsonOptions::default()).unwrap();
        assert!(adjusted.width() >= naive.width() - 1e-15);
        for scheme in [Scheme::Subsets, Scheme::TwoLevel, Scheme::Vertex, Scheme::DoubleOrNothing] {
            let dist = bootstrap_distribution(BootstrapInput::with_store(&agg, &store), scheme, metric, 400, 9).unwrap();
            let iv = percentile_interval(&dist, 0.05).unwrap();
            assert!(iv.lower <= iv.upper && iv.lower >= 0.0 && iv.upper <= 1.0);
        }
    }
}
