//! CSV ingestion and serialization.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::dataset::{Dataset, Feature, Schema};
use crate::error::{Error, Result};

/// Label given to empty cells.
pub const MISSING_LABEL: &str = "<missing>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub outcome_column: String,
    /// Also accept `false`/`true` (any case) as outcome values.
    pub boolean_aliases: bool,
}

impl CsvOptions {
    pub fn new(outcome_column: impl Into<String>) -> Self {
        CsvOptions {
            outcome_column: outcome_column.into(),
            boolean_aliases: false,
        }
    }

    pub fn with_boolean_aliases(mut self, yes: bool) -> Self {
        self.boolean_aliases = yes;
        self
    }

    fn parse_outcome(&self, raw: &str) -> Option<bool> {
        match raw {
            "0" => Some(false),
            "1" => Some(true),
            _ if self.boolean_aliases && raw.eq_ignore_ascii_case("false") => Some(false),
            _ if self.boolean_aliases && raw.eq_ignore_ascii_case("true") => Some(true),
            _ => None,
        }
    }
}

/// Loads a cohort file; every column except the outcome is categorical.
pub fn load_csv(path: impl AsRef<Path>, outcome_column: &str) -> Result<Dataset> {
    load_csv_with(path, &CsvOptions::new(outcome_column))
}

pub fn load_csv_with(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, options)
}

pub fn read_csv(reader: impl Read, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::Csv("header row is empty".into()));
    }
    let outcome_at = header
        .iter()
        .position(|h| *h == options.outcome_column)
        .ok_or_else(|| Error::Load {
            row: 0,
            column: options.outcome_column.clone(),
            message: "outcome column not found in header".into(),
        })?;
    let feature_at: Vec<usize> = (0..header.len()).filter(|&i| i != outcome_at).collect();

    let mut lookups: Vec<HashMap<String, u32>> = vec![HashMap::new(); feature_at.len()];
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); feature_at.len()];
    let mut columns: Vec<Vec<u32>> = vec![Vec::new(); feature_at.len()];
    let mut outcomes = Vec::new();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
        if record.len() != header.len() {
            return Err(Error::Load {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let raw = &record[outcome_at];
        let y = options.parse_outcome(raw).ok_or_else(|| Error::Load {
            row,
            column: options.outcome_column.clone(),
            message: format!("non-binary outcome value `{raw}`"),
        })?;
        outcomes.push(y);
        for (k, &col) in feature_at.iter().enumerate() {
            let cell = &record[col];
            let label = if cell.is_empty() { MISSING_LABEL } else { cell };
            let idx = match lookups[k].get(label) {
                Some(&idx) => idx,
                None => {
                    let idx = labels[k].len() as u32;
                    lookups[k].insert(label.to_owned(), idx);
                    labels[k].push(label.to_owned());
                    idx
                }
            };
            columns[k].push(idx);
        }
    }
    if outcomes.is_empty() {
        return Err(Error::Csv("file has a header but no records".into()));
    }

    let features = feature_at
        .iter()
        .zip(labels)
        .map(|(&col, categories)| Feature {
            name: header[col].clone(),
            categories,
        })
        .collect();
    Dataset::from_columns(Schema::new(features)?, columns, outcomes)
}

/// Writes feature labels followed by the outcome column as `0`/`1`.
pub fn write_csv(dataset: &Dataset, outcome_column: &str, writer: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let schema = dataset.schema();
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    let mut header: Vec<&str> = schema.features().iter().map(|f| f.name.as_str()).collect();
    header.push(outcome_column);
    wtr.write_record(&header).map_err(csv_err)?;
    for i in 0..dataset.len() {
        let mut fields: Vec<&str> = (0..dataset.n_features())
            .map(|z| schema.feature(z).categories[dataset.value(i, z)].as_str())
            .collect();
        fields.push(if dataset.outcomes()[i] { "1" } else { "0" });
        wtr.write_record(&fields).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

pub fn save_csv(dataset: &Dataset, outcome_column: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(dataset, outcome_column, std::io::BufWriter::new(file))
}
