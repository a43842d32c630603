//! Dataset ingestion: public math-word-problem distributions in JSON
//! shapes (arrays, line-delimited, or concatenated objects) and a CSV
//! fallback. Answers are parsed to exact rationals, including percent
//! and fraction answer strings.

use crate::mask::ProblemRecord;
use crate::numeric::parse_number_literal;
use num::BigRational;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Math23kJson,
    Weak12kJson,
    Csv,
}

impl std::str::FromStr for DatasetFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "math23k_json" => Ok(DatasetFormat::Math23kJson),
            "weak12k_json" => Ok(DatasetFormat::Weak12kJson),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(format!("unknown dataset format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Supervision {
    /// Text and answer only; reference equations are stripped at load so
    /// they cannot leak into the search.
    Weak,
    /// Reference equations are kept on the records.
    Full,
}

impl std::str::FromStr for Supervision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weak" => Ok(Supervision::Weak),
            "full" => Ok(Supervision::Full),
            other => Err(format!("unknown supervision mode `{other}`")),
        }
    }
}

/// Accepted field names, tried in order. Release variants of the same
/// dataset disagree on names, so these are configurable.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
#[serde(default)]
pub struct FieldAliases {
    pub id: Vec<String>,
    pub text: Vec<String>,
    pub answer: Vec<String>,
    pub equation: Vec<String>,
}

impl Default for FieldAliases {
    fn default() -> Self {
        FieldAliases {
            id: vec!["id".into()],
            text: vec!["original_text".into(), "segmented_text".into(), "text".into()],
            answer: vec!["ans".into(), "answer".into()],
            equation: vec!["equation".into()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub supervision: Supervision,
    /// Abort when the malformed fraction exceeds this.
    pub malformed_threshold: f64,
    pub aliases: FieldAliases,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            supervision: Supervision::Weak,
            malformed_threshold: 0.01,
            aliases: FieldAliases::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedRecord {
    /// Record id when known, otherwise the item's position.
    pub location: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct DatasetFile {
    pub records: Vec<ProblemRecord>,
    pub supervision: Supervision,
    pub malformed: Vec<MalformedRecord>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} does not parse as {format:?}: {reason}")]
    Syntax {
        path: String,
        format: DatasetFormat,
        reason: String,
    },
    #[error(
        "{count} of {total} records are malformed (threshold {threshold}); first: {first_location}: {first_reason}"
    )]
    TooManyMalformed {
        count: usize,
        total: usize,
        threshold: f64,
        first_location: String,
        first_reason: String,
    },
}

pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    options: &LoadOptions,
) -> Result<DatasetFile, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let items: Vec<serde_json::Map<String, serde_json::Value>> = match format {
        DatasetFormat::Math23kJson | DatasetFormat::Weak12kJson => {
            parse_json_items(&text).map_err(|reason| LoadError::Syntax {
                path: path.display().to_string(),
                format,
                reason,
            })?
        }
        DatasetFormat::Csv => parse_csv_items(&text).map_err(|reason| LoadError::Syntax {
            path: path.display().to_string(),
            format,
            reason,
        })?,
    };

    let total = items.len();
    let mut records = Vec::with_capacity(total);
    let mut malformed = Vec::new();
    let mut seen_ids = HashSet::new();
    for (position, item) in items.into_iter().enumerate() {
        match record_from_item(&item, position, options, &mut seen_ids) {
            Ok(record) => records.push(record),
            Err(entry) => malformed.push(entry),
        }
    }
    let threshold = options.malformed_threshold;
    if !malformed.is_empty() && malformed.len() as f64 > threshold * total as f64 {
        let first = &malformed[0];
        return Err(LoadError::TooManyMalformed {
            count: malformed.len(),
            total,
            threshold,
            first_location: first.location.clone(),
            first_reason: first.reason.clone(),
        });
    }
    Ok(DatasetFile {
        records,
        supervision: options.supervision,
        malformed,
    })
}

/// Accepts a JSON array, line-delimited objects, or a concatenated
/// stream of (possibly pretty-printed) objects.
fn parse_json_items(text: &str) -> Result<Vec<serde_json::Map<String, serde_json::Value>>, String> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(text).map_err(|e| e.to_string());
    }
    let stream = serde_json::Deserializer::from_str(text).into_iter();
    let mut items = Vec::new();
    for item in stream {
        items.push(item.map_err(|e| e.to_string())?);
    }
    Ok(items)
}

fn parse_csv_items(text: &str) -> Result<Vec<serde_json::Map<String, serde_json::Value>>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let mut items = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        let mut map = serde_json::Map::new();
        for (key, value) in headers.iter().zip(row.iter()) {
            map.insert(key.to_string(), serde_json::Value::String(value.to_string()));
        }
        items.push(map);
    }
    Ok(items)
}

fn field<'a>(
    item: &'a serde_json::Map<String, serde_json::Value>,
    aliases: &[String],
) -> Option<&'a serde_json::Value> {
    aliases.iter().find_map(|name| item.get(name))
}

fn value_as_string(value: &serde_json::Value) -> Option<String> {
    match value {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_answer(raw: &str) -> Option<BigRational> {
    parse_number_literal(raw)
}

fn record_from_item(
    item: &serde_json::Map<String, serde_json::Value>,
    position: usize,
    options: &LoadOptions,
    seen_ids: &mut HashSet<String>,
) -> Result<ProblemRecord, MalformedRecord> {
    let aliases = &options.aliases;
    let location = |id: Option<&str>| match id {
        Some(id) => format!("id {id}"),
        None => format!("item {position}"),
    };
    let id = field(item, &aliases.id)
        .and_then(value_as_string)
        .ok_or_else(|| MalformedRecord {
            location: location(None),
            reason: "missing id".into(),
        })?;
    if !seen_ids.insert(id.clone()) {
        return Err(MalformedRecord {
            location: location(Some(&id)),
            reason: "duplicate id".into(),
        });
    }
    let text = field(item, &aliases.text)
        .and_then(value_as_string)
        .filter(|t| !t.trim().is_empty())
        .ok_or_else(|| MalformedRecord {
            location: location(Some(&id)),
            reason: "missing problem text".into(),
        })?;
    let raw_answer = field(item, &aliases.answer)
        .and_then(value_as_string)
        .ok_or_else(|| MalformedRecord {
            location: location(Some(&id)),
            reason: "missing answer".into(),
        })?;
    let answer = parse_answer(&raw_answer).ok_or_else(|| MalformedRecord {
        location: location(Some(&id)),
        reason: format!("unparseable answer `{raw_answer}`"),
    })?;
    let reference_equation = match options.supervision {
        Supervision::Weak => None,
        Supervision::Full => field(item, &aliases.equation).and_then(value_as_string),
    };
    Ok(ProblemRecord {
        id,
        text,
        answer,
        reference_equation,
    })
}
