//! Anonymized study export: a header line followed by one row per
//! annotation. Output is byte-deterministic for a given live state.

use serde::{Deserialize, Serialize};

use crate::error::StudyError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportHeader {
    pub study: String,
    pub groups: Vec<String>,
    pub control_count: usize,
    pub session_length: usize,
    pub levels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportRow {
    pub participant: String,
    pub group: String,
    pub rank: usize,
    pub instance_id: String,
    pub difficulty: u8,
    pub choice_order: Vec<String>,
    pub choice: String,
    pub correct: bool,
    pub elapsed_ms: u64,
}

pub fn write_export(header: &ExportHeader, rows: &[ExportRow]) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("row serializes"));
        out.push('\n');
    }
    out
}

/// Parses and sanity-checks an export.
pub fn parse_export(text: &str) -> Result<(ExportHeader, Vec<ExportRow>), StudyError> {
    let bad = |line: usize, e: &dyn std::fmt::Display| StudyError::MalformedExport(format!("line {line}: {e}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| StudyError::MalformedExport("empty export".into()))?;
    let header: ExportHeader = serde_json::from_str(first).map_err(|e| bad(1, &e))?;
    if header.control_count > header.session_length {
        return Err(bad(1, &"control_count exceeds session_length"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let row: ExportRow = serde_json::from_str(line).map_err(|e| bad(i + 1, &e))?;
        if !header.groups.contains(&row.group) {
            return Err(bad(i + 1, &format!("unknown group '{}'", row.group)));
        }
        if row.rank == 0 || row.rank > header.session_length {
            return Err(bad(i + 1, &format!("rank {} outside 1..={}", row.rank, header.session_length)));
        }
        if row.elapsed_ms == 0 {
            return Err(bad(i + 1, &"elapsed_ms must be positive"));
        }
        if !row.choice_order.contains(&row.choice) {
            return Err(bad(i + 1, &"choice is not among the presented choices"));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
