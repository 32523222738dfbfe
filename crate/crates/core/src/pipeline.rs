//! End-to-end orchestration: discovery, relevance ranking, substitution
//! sweep and greedy cross-substitution, collected into one [`Report`].

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Feature};
use crate::descriptor::{LabeledConstraint, SubsetDescriptor};
use crate::error::{Error, Result};
use crate::relevance::{self, RelevanceConfig, RelevanceEntry};
use crate::scan::{self, FeatureOrder, ScanConfig, ScanResult};
use crate::scoring::{EffectMeasures, ScorePanel};
use crate::significance::{self, BootstrapConfig, NullDistribution, PValue};
use crate::substitution::{self, GreedyConfig, GreedyOutcome, Retention, StoppingRule, SubstitutionOutcome};

pub const TOOL_NAME: &str = "postscan";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Offset between the scan seed and the bootstrap seed so the two stages
/// draw from unrelated streams.
const BOOTSTRAP_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub outcome: String,
    pub boolean_outcomes: bool,
    pub seed: u64,
    pub restarts: usize,
    pub max_passes: usize,
    pub feature_order: FeatureOrder,
    pub replicates: usize,
    pub alpha: f64,
    pub relevance: RelevanceConfig,
    pub stopping: Option<StoppingRule>,
    pub retention: Retention,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    /// Worker threads; 0 means one per core. Does not affect results.
    #[serde(skip_serializing)]
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            outcome: "y".into(),
            boolean_outcomes: false,
            seed: 0,
            restarts: ScanConfig::default().n_restarts,
            max_passes: ScanConfig::default().max_passes,
            feature_order: FeatureOrder::Fixed,
            replicates: BootstrapConfig::default().n_replicates,
            alpha: 0.05,
            relevance: RelevanceConfig::default(),
            stopping: None,
            retention: Retention::default(),
            out: PathBuf::from("out"),
            workers: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.scan_config().validate()?;
        self.bootstrap_config().validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if self.outcome.is_empty() {
            return Err(Error::config("outcome column name is empty"));
        }
        if let relevance::Selection::Threshold(t) = self.relevance.selection {
            if !t.is_finite() {
                return Err(Error::config("relevance threshold must be finite"));
            }
        }
        Ok(())
    }

    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig {
            n_restarts: self.restarts,
            max_passes: self.max_passes,
            seed: self.seed,
            feature_order: self.feature_order,
        }
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_replicates: self.replicates,
            seed: self.seed ^ BOOTSTRAP_SEED_OFFSET,
            scan: self.scan_config(),
        }
    }

    pub fn greedy_config(&self) -> GreedyConfig {
        GreedyConfig {
            stopping: self.stopping.unwrap_or(StoppingRule::PValueAbove(self.alpha)),
            retention: self.retention,
        }
    }
}

/// Runs `f` on a pool with `workers` threads (0 = rayon default).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_records: usize,
    pub n_positive: usize,
    pub global_mean: f64,
    pub features: Vec<Feature>,
}

impl DatasetSummary {
    pub fn of(dataset: &Dataset) -> Self {
        DatasetSummary {
            n_records: dataset.len(),
            n_positive: dataset.n_positive(),
            global_mean: dataset.global_mean(),
            features: dataset.schema().features().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub subset: Vec<LabeledConstraint>,
    pub descriptor: SubsetDescriptor,
    pub panel: ScorePanel,
    pub effects: Option<EffectMeasures>,
    pub p_value: PValue,
    pub restart_index: usize,
    /// Maximum scan scores of the null replicates, reused for every later p-value.
    pub null_scores: Vec<f64>,
}

impl Discovery {
    pub fn scan_result(&self) -> ScanResult {
        ScanResult {
            descriptor: self.descriptor.clone(),
            panel: self.panel,
            effects: self.effects,
            restart_index: self.restart_index,
        }
    }

    pub fn null_distribution(&self) -> Result<NullDistribution> {
        NullDistribution::new(self.null_scores.clone())
    }
}

/// Run-dependent values, kept apart so reproducibility checks can mask them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Metadata {
    pub generated_at_unix: u64,
    pub hostname: String,
    pub workers: usize,
    pub stage_seconds: BTreeMap<String, f64>,
}

impl Metadata {
    pub fn capture(workers: usize) -> Self {
        Metadata {
            generated_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            hostname: std::env::var("HOSTNAME")
                .ok()
                .or_else(|| std::fs::read_to_string("/etc/hostname").ok())
                .map(|h| h.trim().to_owned())
                .unwrap_or_default(),
            workers,
            stage_seconds: BTreeMap::new(),
        }
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.stage_seconds.insert(stage.to_owned(), start.elapsed().as_secs_f64());
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub config: PipelineConfig,
    pub dataset: DatasetSummary,
    pub discovery: Discovery,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relevance: Option<Vec<RelevanceEntry>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub substitutions: Option<Vec<SubstitutionOutcome>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub greedy: Option<GreedyOutcome>,
    pub metadata: Metadata,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Csv(format!("cannot serialize report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("cannot parse report: {e}")))
    }
}

/// Scan, then score the winner against the bootstrap null.
pub fn discover(dataset: &Dataset, config: &PipelineConfig) -> Result<Discovery> {
    let result = scan::scan(dataset, &config.scan_config())?;
    let null = significance::null_distribution(dataset, &config.bootstrap_config())?;
    discovery_from(dataset, result, null)
}

fn discovery_from(dataset: &Dataset, result: ScanResult, null: NullDistribution) -> Result<Discovery> {
    let p = null.p_value(result.panel.score)?;
    let effects = result.effects.map(|mut e| {
        e.p_value = Some(p.value);
        e.p_at_floor = p.at_floor;
        e
    });
    Ok(Discovery {
        subset: result.descriptor.to_labeled(dataset.schema()),
        descriptor: result.descriptor,
        panel: result.panel,
        effects,
        p_value: p,
        restart_index: result.restart_index,
        null_scores: null.scores,
    })
}

pub fn rank(dataset: &Dataset, discovery: &Discovery, config: &PipelineConfig) -> Result<Vec<RelevanceEntry>> {
    relevance::rank_feature_relevance(dataset, &discovery.scan_result(), &config.relevance)
}

pub fn sweep(
    dataset: &Dataset,
    discovery: &Discovery,
    ranking: &[RelevanceEntry],
    config: &PipelineConfig,
) -> Result<Vec<SubstitutionOutcome>> {
    let null = discovery.null_distribution()?;
    substitution::sweep_with_null(dataset, &discovery.scan_result(), ranking, config.alpha, &null)
}

pub fn greedy(
    dataset: &Dataset,
    discovery: &Discovery,
    ranking: &[RelevanceEntry],
    config: &PipelineConfig,
) -> Result<GreedyOutcome> {
    let null = discovery.null_distribution()?;
    substitution::greedy_with_null(dataset, &discovery.scan_result(), ranking, &config.greedy_config(), &null)
}

/// Discovery-only report.
pub fn run_discovery(dataset: &Dataset, config: &PipelineConfig) -> Result<Report> {
    config.validate()?;
    let mut metadata = Metadata::capture(config.workers);
    let result = metadata.time("scan", || scan::scan(dataset, &config.scan_config()))?;
    let null = metadata.time("bootstrap", || {
        significance::null_distribution(dataset, &config.bootstrap_config())
    })?;
    let discovery = discovery_from(dataset, result, null)?;
    Ok(Report {
        tool: ToolInfo::default(),
        config: config.clone(),
        dataset: DatasetSummary::of(dataset),
        discovery,
        relevance: None,
        substitutions: None,
        greedy: None,
        metadata,
    })
}

/// Full pipeline: scan, rank, sweep, greedy.
pub fn run_pipeline(dataset: &Dataset, config: &PipelineConfig) -> Result<Report> {
    let mut report = run_discovery(dataset, config)?;
    if report.discovery.descriptor.is_empty() {
        // nothing to explain: the best subset is the whole table
        return Ok(report);
    }
    let mut metadata = std::mem::take(&mut report.metadata);
    let ranking = metadata.time("rank", || rank(dataset, &report.discovery, config))?;
    let outcomes = metadata.time("sweep", || sweep(dataset, &report.discovery, &ranking, config))?;
    let greedy_outcome = metadata.time("greedy", || greedy(dataset, &report.discovery, &ranking, config))?;
    report.relevance = Some(ranking);
    report.substitutions = Some(outcomes);
    report.greedy = Some(greedy_outcome);
    report.metadata = metadata;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_happens_first() {
        let cfg = PipelineConfig {
            restarts: 0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = PipelineConfig {
            alpha: 1.5,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seed_reaches_every_stage() {
        let cfg = PipelineConfig {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(cfg.scan_config().seed, 42);
        assert_eq!(cfg.bootstrap_config().scan.seed, 42);
        assert_ne!(cfg.bootstrap_config().seed, 42);
        assert_eq!(cfg.greedy_config().stopping, StoppingRule::PValueAbove(0.05));
    }
}
