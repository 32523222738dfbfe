//! Plot-ready CSV tables.

use std::path::Path;

use anyhow::{Context, Result};
use postscan::substitution::GreedyOutcome;
use postscan::{RelevanceEntry, SubstitutionOutcome};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    wtr.write_record(header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub const RELEVANCE_HEADER: [&str; 7] = [
    "Feature",
    "Value",
    "D.R",
    "Rank",
    "E_Value",
    "Subset_Deviation",
    "Global_Deviation",
];

pub fn write_relevance(path: &Path, ranking: &[RelevanceEntry]) -> Result<()> {
    write_rows(
        path,
        &RELEVANCE_HEADER,
        ranking.iter().map(|e| {
            vec![
                e.feature.clone(),
                e.value.clone(),
                opt(e.deviation_ratio),
                e.rank.to_string(),
                e.e_value.to_string(),
                e.subset_deviation.to_string(),
                e.global_deviation.to_string(),
            ]
        }),
    )
}

pub const PLOT_HEADER: [&str; 7] = [
    "feature",
    "from_value",
    "to_value",
    "new_score",
    "p_value",
    "odds_ratio",
    "p_at_floor",
];

/// One row per nonempty substitution.
pub fn write_substitution_plot(path: &Path, outcomes: &[SubstitutionOutcome]) -> Result<()> {
    write_rows(
        path,
        &PLOT_HEADER,
        outcomes.iter().filter(|o| !o.empty).map(|o| {
            vec![
                o.candidate.feature.clone(),
                o.candidate.from_values.join("|"),
                o.candidate.to_value.clone(),
                o.new_score.to_string(),
                opt(o.new_p),
                opt(o.new_or),
                o.p_at_floor.to_string(),
            ]
        }),
    )
}

pub const TABLE_HEADER: [&str; 6] = ["Feature Value", "Substitute", "O_Score", "N_Score", "O_OR", "N_OR"];

pub fn write_substitution_table(path: &Path, outcomes: &[SubstitutionOutcome]) -> Result<()> {
    write_rows(
        path,
        &TABLE_HEADER,
        outcomes.iter().map(|o| {
            vec![
                o.candidate.from_values.join("|"),
                o.candidate.to_value.clone(),
                o.old_score.to_string(),
                o.new_score.to_string(),
                opt(o.old_or),
                opt(o.new_or),
            ]
        }),
    )
}

pub fn write_greedy_trace(path: &Path, greedy: &GreedyOutcome) -> Result<()> {
    write_rows(
        path,
        &[
            "feature",
            "from_value",
            "to_value",
            "score_before",
            "score_after",
            "p_value",
            "odds_ratio",
            "retained",
        ],
        greedy.trace.iter().map(|s| {
            vec![
                s.feature.clone(),
                s.from_value.clone(),
                s.to_value.clone(),
                s.score_before.to_string(),
                s.score_after.to_string(),
                opt(s.p_value),
                opt(s.odds_ratio),
                s.retained.to_string(),
            ]
        }),
    )
}
