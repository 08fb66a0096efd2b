//! Report rendering: canonical JSON and flat CSV.
//!
//! Canonical JSON sorts object keys, writes every float with 17 significant
//! digits in scientific notation and integers as integers, so
//! render → parse → render is byte-identical.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::audit::AuditReport;
use crate::embedding::format_f64;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("non-finite number at {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub const CSV_HEADER: [&str; 10] = [
    "table",
    "language",
    "category",
    "group",
    "statistic",
    "effect_size",
    "p_value",
    "mode",
    "permutations",
    "seed",
];

pub fn render(report: &AuditReport, format: ReportFormat) -> Result<Vec<u8>, RenderError> {
    match format {
        ReportFormat::Json => Ok(to_canonical_json(report)?.into_bytes()),
        ReportFormat::Csv => to_csv(report),
    }
}

pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, RenderError> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &value, 0, "")?;
    out.push('\n');
    Ok(out)
}

pub fn parse_report(bytes: &[u8]) -> Result<AuditReport, RenderError> {
    Ok(serde_json::from_slice(bytes)?)
}

fn write_value(
    out: &mut String,
    value: &Value,
    depth: usize,
    path: &str,
) -> Result<(), RenderError> {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat_n("  ", d));
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                let f = n
                    .as_f64()
                    .ok_or_else(|| RenderError::NonFinite(path.to_string()))?;
                if !f.is_finite() {
                    return Err(RenderError::NonFinite(path.to_string()));
                }
                out.push_str(&format_f64(f));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s)?),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, item, depth + 1, &format!("{path}/{i}"))?;
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&serde_json::to_string(key)?);
                out.push_str(": ");
                write_value(out, &map[key.as_str()], depth + 1, &format!("{path}/{key}"))?;
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
    Ok(())
}

/// One row per completed run; skipped pairs are not included.
pub fn to_csv(report: &AuditReport) -> Result<Vec<u8>, RenderError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for run in &report.runs {
        let r = &run.result;
        w.write_record([
            run.table.as_str(),
            run.language.as_str(),
            run.category.as_str(),
            run.group.as_str(),
            &format_f64(r.statistic),
            &format_f64(r.effect_size),
            &format_f64(r.p_value),
            &r.permutation_mode.to_string(),
            &r.permutation_count.to_string(),
            &r.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| RenderError::Csv(e.into_error().into()))
}
