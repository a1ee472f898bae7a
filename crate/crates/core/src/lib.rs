//! Error rates for matching tasks (FRR / FAR) and confidence intervals that
//! stay valid when comparisons share identities and error rates are small.
//!
//! The pipeline is: score pairs of instances, threshold them into binary
//! outcomes, aggregate to identity-level means ([`PairAggregates`]), then
//! build intervals from those means with Wilson ([`wilson`]) or bootstrap
//! ([`bootstrap`]) methods.

pub mod data_model;
pub mod error;
pub mod estimators;
pub mod rng;
pub mod variance;
pub mod wilson;
pub mod bootstrap;
pub mod roc;
pub mod protocol;
pub mod synthetic;
pub mod io;
pub mod cli;
mod serde_float;
mod dd;

pub use data_model::{
    aggregate_pairs, threshold_outcomes, CellCounts, ComparisonOutcome, Dissimilarity, IdentityId,
    Instance, InstanceRef, MatchDataset, Metric, OutcomeStore, PairAggregates, ScoreRecord,
    Setting,
};
pub use error::{Error, Result};
pub use estimators::{estimate, ErrorEstimate};
pub use variance::{estimate_variance, FrrDeltaMode, VarianceEstimate};
pub use wilson::{wilson_interval, IntervalResult, WilsonMode, WilsonOptions};
pub use bootstrap::{bootstrap_distribution, percentile_interval, BootstrapDistribution, BootstrapInput, Scheme};
pub use roc::{empirical_roc, roc_interval_bootstrap, roc_interval_parametric, EmpiricalRoc, RocPointInterval};
pub use protocol::{plan_far_protocol, plan_frr_protocol, ProtocolPlan};
pub use synthetic::{calibrate_threshold, generate_synthetic, run_coverage_experiment, CoverageReport, SyntheticConfig};
