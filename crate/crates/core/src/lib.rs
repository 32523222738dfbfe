//! Anomalous subgroup discovery on categorical tables and post-discovery
//! analysis of the subgroups it finds.
//!
//! The discovery side searches for the subset of records, described by a
//! conjunction of per-feature value sets, whose outcome odds most exceed the
//! dataset baseline under a Bernoulli likelihood-ratio statistic
//! ([`scan::scan`]), and calibrates its score with a parametric bootstrap
//! ([`significance`]). The analysis side ranks the subset's feature values by
//! relevance ([`relevance`]) and searches for value substitutions that remove
//! the anomaly ([`substitution`]).

pub mod dataset;
pub mod descriptor;
pub mod error;
pub mod exhaustive;
pub mod io;
pub mod pipeline;
pub mod relevance;
pub mod scan;
pub mod scoring;
pub mod significance;
pub mod substitution;
pub mod synth;

pub use dataset::{Dataset, Feature, Schema};
pub use descriptor::{LabeledConstraint, SubsetDescriptor};
pub use error::{Error, Result};
pub use exhaustive::exhaustive_scan;
pub use io::{load_csv, load_csv_with, CsvOptions};
pub use relevance::{rank_feature_relevance, RelevanceConfig, RelevanceEntry};
pub use scan::{scan, ScanConfig, ScanResult};
pub use scoring::{bernoulli_score, odds_ratio, optimal_q, EffectMeasures, ScorePanel};
pub use significance::{empirical_p_value, BootstrapConfig, NullDistribution, PValue};
pub use substitution::{
    cross_substitute_greedy, enumerate_substitutions, single_substitution_sweep, GreedyConfig, GreedyOutcome,
    SubstitutionCandidate, SubstitutionOutcome,
};
pub use synth::{generate_synthetic, SyntheticCohort, SyntheticSpec};
