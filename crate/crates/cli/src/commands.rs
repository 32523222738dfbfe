use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use postscan::pipeline::{self, PipelineConfig, Report};
use postscan::synth::{generate_synthetic, SyntheticSpec};
use postscan::{CsvOptions, Dataset, LabeledConstraint, RelevanceEntry, Schema, SubsetDescriptor};
use serde::{Deserialize, Serialize};

use crate::{tables, CommonArgs, RankArgs, SubstituteArgs, SynthArgs};

pub fn resolve_config(args: &CommonArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(v) = &args.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &args.outcome {
        cfg.outcome = v.clone();
    }
    if args.boolean_outcomes {
        cfg.boolean_outcomes = true;
    }
    if let Some(v) = args.restarts {
        cfg.restarts = v;
    }
    if let Some(v) = args.replicates {
        cfg.replicates = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if let Some(v) = &args.out {
        cfg.out = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_dataset(cfg: &PipelineConfig) -> Result<Dataset> {
    let Some(input) = &cfg.input else {
        bail!("no input file given (use --input or `input` in the config file)");
    };
    let options = CsvOptions::new(&cfg.outcome).with_boolean_aliases(cfg.boolean_outcomes);
    Ok(postscan::load_csv_with(input, &options)?)
}

fn out_path(cfg: &PipelineConfig, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create {}", cfg.out.display()))?;
    Ok(cfg.out.join(name))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(Report::from_json(&text)?)
}

/// The scan report must describe the dataset being analysed.
fn check_report_matches(report: &Report, dataset: &Dataset) -> Result<()> {
    if report.dataset.n_records != dataset.len() || report.dataset.n_positive != dataset.n_positive() {
        bail!(
            "scan report covers {} records ({} positive), input has {} ({} positive)",
            report.dataset.n_records,
            report.dataset.n_positive,
            dataset.len(),
            dataset.n_positive()
        );
    }
    report.discovery.descriptor.validate(dataset.schema())?;
    Ok(())
}

fn summarize(report: &Report, dataset: &Dataset) {
    let d = &report.discovery;
    println!(
        "N = {}, positives = {}, global mean = {:.6}",
        report.dataset.n_records, report.dataset.n_positive, report.dataset.global_mean
    );
    println!("subset {}", d.descriptor.display(dataset.schema()));
    println!(
        "  size {}, positives {}, score {:.4}, p = {:.6}{}",
        d.panel.n_subset,
        d.panel.n_positive,
        d.panel.score,
        d.p_value.value,
        if d.p_value.at_floor { " (floor)" } else { "" }
    );
    if let Some(e) = d.effects {
        println!("  odds ratio {:.3} (95% CI {:.3} to {:.3})", e.odds_ratio, e.ci_low, e.ci_high);
    }
}

pub fn scan(args: &CommonArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let dataset = load_dataset(&cfg)?;
    let report = pipeline::with_workers(cfg.workers, || pipeline::run_discovery(&dataset, &cfg))??;
    write_json(&out_path(&cfg, "scan.json")?, &report)?;
    summarize(&report, &dataset);
    Ok(())
}

fn ranking_for(report: &Report, dataset: &Dataset, cfg: &PipelineConfig) -> Result<Vec<RelevanceEntry>> {
    Ok(pipeline::rank(dataset, &report.discovery, cfg)?)
}

pub fn rank(args: &RankArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let dataset = load_dataset(&cfg)?;
    let scan_path = args.scan_report.clone().unwrap_or_else(|| cfg.out.join("scan.json"));
    let report = read_report(&scan_path)?;
    check_report_matches(&report, &dataset)?;
    let ranking = ranking_for(&report, &dataset, &cfg)?;
    write_json(&out_path(&cfg, "relevance.json")?, &ranking)?;
    tables::write_relevance(&out_path(&cfg, "relevance.csv")?, &ranking)?;
    for e in &ranking {
        let ratio = e.deviation_ratio.map_or("undefined".to_owned(), |r| format!("{r:.2}"));
        println!("{:>3}. {} = {}  D.R {}", e.rank, e.feature, e.value, ratio);
    }
    Ok(())
}

pub fn substitute(args: &SubstituteArgs) -> Result<()> {
    let cfg = resolve_config(&args.common)?;
    let dataset = load_dataset(&cfg)?;
    let scan_path = args.scan_report.clone().unwrap_or_else(|| cfg.out.join("scan.json"));
    let report = read_report(&scan_path)?;
    check_report_matches(&report, &dataset)?;

    let relevance_path = args.relevance.clone().unwrap_or_else(|| cfg.out.join("relevance.json"));
    let ranking: Vec<RelevanceEntry> = if relevance_path.exists() {
        let text = fs::read_to_string(&relevance_path)?;
        serde_json::from_str(&text).with_context(|| format!("invalid ranking {}", relevance_path.display()))?
    } else if args.relevance.is_some() {
        bail!("relevance file {} not found", relevance_path.display());
    } else if report.discovery.descriptor.is_empty() {
        Vec::new()
    } else {
        ranking_for(&report, &dataset, &cfg)?
    };

    let outcomes = if report.discovery.descriptor.is_empty() {
        Vec::new()
    } else {
        pipeline::with_workers(cfg.workers, || pipeline::sweep(&dataset, &report.discovery, &ranking, &cfg))??
    };
    write_json(&out_path(&cfg, "substitutions.json")?, &outcomes)?;
    tables::write_substitution_plot(&out_path(&cfg, "substitution_plot.csv")?, &outcomes)?;
    tables::write_substitution_table(&out_path(&cfg, "substitution_table.csv")?, &outcomes)?;
    println!("{} substitutions evaluated", outcomes.len());
    Ok(())
}

pub fn pipeline(args: &CommonArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let dataset = load_dataset(&cfg)?;
    let report = pipeline::with_workers(cfg.workers, || pipeline::run_pipeline(&dataset, &cfg))??;
    write_json(&out_path(&cfg, "report.json")?, &report)?;
    if let Some(ranking) = &report.relevance {
        tables::write_relevance(&out_path(&cfg, "relevance.csv")?, ranking)?;
    }
    if let Some(outcomes) = &report.substitutions {
        tables::write_substitution_plot(&out_path(&cfg, "substitution_plot.csv")?, outcomes)?;
        tables::write_substitution_table(&out_path(&cfg, "substitution_table.csv")?, outcomes)?;
    }
    summarize(&report, &dataset);
    if let Some(g) = &report.greedy {
        tables::write_greedy_trace(&out_path(&cfg, "greedy_trace.csv")?, g)?;
        println!(
            "greedy: {} substitutions kept, final score {:.4}, p = {:.6}, denormalized: {}",
            g.applied().count(),
            g.panel.score,
            g.p_value,
            g.denormalized
        );
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthFile {
    records: Option<usize>,
    cardinalities: Option<Vec<usize>>,
    base_rate: Option<f64>,
    odds_multiplier: Option<f64>,
    planted: Option<String>,
    seed: Option<u64>,
    outcome: Option<String>,
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct PlantedSummary<'a> {
    spec: &'a SyntheticSpec,
    planted: Vec<LabeledConstraint>,
    n_records: usize,
    n_positive: usize,
    global_mean: f64,
    n_members: usize,
    member_positives: usize,
    /// Expected outcome rate given the realised planted fraction.
    expected_global_mean: f64,
}

/// Parses `0=1,2;3=0` into a descriptor.
fn parse_planted(text: &str) -> Result<SubsetDescriptor> {
    let mut d = SubsetDescriptor::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((feature, values)) = part.split_once('=') else {
            bail!("planted constraint `{part}` is not of the form feature=v1,v2");
        };
        let feature: usize = feature.trim().parse().with_context(|| format!("bad feature index in `{part}`"))?;
        let values = values
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("bad value index in `{part}`"))?;
        d.constrain(feature, values);
    }
    Ok(d)
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let file: SynthFile = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))?
        }
        None => SynthFile::default(),
    };
    let cardinalities = match &args.cardinalities {
        Some(text) => text
            .split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .context("bad --cardinalities")?,
        None => file.cardinalities.clone().unwrap_or_else(|| vec![2, 3, 4, 5, 2]),
    };
    let planted_text = args.planted.clone().or(file.planted.clone()).unwrap_or_else(|| "0=1;2=0,1".into());
    let spec = SyntheticSpec {
        n_records: args.records.or(file.records).unwrap_or(2000),
        cardinalities,
        base_rate: args.base_rate.or(file.base_rate).unwrap_or(0.05),
        planted: parse_planted(&planted_text)?,
        odds_multiplier: args.odds_multiplier.or(file.odds_multiplier).unwrap_or(3.0),
        seed: args.seed.or(file.seed).unwrap_or(0),
    };
    let outcome = args.outcome.clone().or(file.outcome).unwrap_or_else(|| "y".into());
    let out = args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out"));

    let cohort = generate_synthetic(&spec)?;
    fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
    postscan::io::save_csv(&cohort.dataset, &outcome, out.join("cohort.csv"))?;

    let schema: &Schema = cohort.dataset.schema();
    let n = cohort.dataset.len();
    let member_positives = cohort.members.iter().filter(|&&i| cohort.dataset.outcomes()[i]).count();
    let fraction = cohort.members.len() as f64 / n as f64;
    let summary = PlantedSummary {
        spec: &spec,
        planted: cohort.planted.to_labeled(schema),
        n_records: n,
        n_positive: cohort.dataset.n_positive(),
        global_mean: cohort.dataset.global_mean(),
        n_members: cohort.members.len(),
        member_positives,
        expected_global_mean: fraction * spec.planted_rate() + (1.0 - fraction) * spec.base_rate,
    };
    write_json(&out.join("planted.json"), &summary)?;
    println!(
        "wrote {} records ({} in planted subset) to {}",
        n,
        cohort.members.len(),
        out.join("cohort.csv").display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_syntax() {
        let d = parse_planted("0=1; 2=0,1").unwrap();
        assert_eq!(d, SubsetDescriptor::from_constraints([(0, vec![1]), (2, vec![0, 1])]));
        assert!(parse_planted("0:1").is_err());
        assert!(parse_planted("a=1").is_err());
    }
}
