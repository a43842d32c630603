//! Training-set export: one line-delimited JSON record per solved
//! problem, id-sorted, with a stable field order so identical states
//! export byte-identically.

use crate::distill::{Provenance, SolvedPair};
use crate::refine::RefinedPair;
use crate::SurfaceSyntax;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub id: String,
    pub masked_text: String,
    pub equation: String,
    pub provenance: Provenance,
}

/// Builds the export rows from the conciseness-passed solved set and
/// the refine-harvested set, sorted by id.
pub fn training_records(
    refined: &[RefinedPair],
    harvested: &[SolvedPair],
    style: SurfaceSyntax,
) -> Vec<TrainingRecord> {
    let mut records: Vec<TrainingRecord> = refined
        .iter()
        .map(|rp| TrainingRecord {
            id: rp.pair.masked.problem.id.clone(),
            masked_text: rp.pair.masked.masked_text.clone(),
            equation: rp.pair.equation.render(style),
            provenance: rp.export_provenance(),
        })
        .chain(harvested.iter().map(|pair| TrainingRecord {
            id: pair.masked.problem.id.clone(),
            masked_text: pair.masked.masked_text.clone(),
            equation: pair.equation.render(style),
            provenance: pair.provenance,
        }))
        .collect();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    records
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
}

pub fn write_training_records(records: &[TrainingRecord], mut writer: impl Write) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn export_training_set(
    refined: &[RefinedPair],
    harvested: &[SolvedPair],
    path: &Path,
    style: SurfaceSyntax,
) -> Result<Vec<TrainingRecord>, ExportError> {
    let records = training_records(refined, harvested, style);
    let map_io = |source: std::io::Error| ExportError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(map_io)?;
    let mut writer = std::io::BufWriter::new(file);
    write_training_records(&records, &mut writer).map_err(map_io)?;
    writer.flush().map_err(map_io)?;
    Ok(records)
}

pub fn read_training_set(path: &Path) -> Result<Vec<TrainingRecord>, ExportError> {
    let file = std::fs::File::open(path).map_err(|source| ExportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| ExportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrainingRecord =
            serde_json::from_str(&line).map_err(|e| ExportError::Malformed {
                path: path.display().to_string(),
                line: index + 1,
                reason: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}
