//! `report-merge`: one CSV row of constants per JSON report.

use std::path::PathBuf;

use serde_json::Value;

use crate::CliError;

/// Columns looked up at the top level of a report, then under `constants`.
pub const COLUMNS: &[&str] = &[
    "command",
    "covering_id",
    "n_sets",
    "N",
    "D",
    "C_tilde",
    "C_mU",
    "delta",
    "osc_norm",
    "R_norm",
    "sigma",
    "holds_D",
    "holds_58",
    "contraction_bound",
    "contraction_bound_sharp",
    "contraction_observed",
    "contraction_exact",
    "C1",
    "C2",
    "D_const",
    "seed",
];

fn cell(report: &Value, key: &str) -> String {
    let found = report
        .get(key)
        .or_else(|| report.get("constants").and_then(|c| c.get(key)));
    match found {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(v) => v.to_string(),
    }
}

pub fn merge_reports(paths: &[PathBuf]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    let mut header = vec!["file"];
    header.extend_from_slice(COLUMNS);
    header.push("passed");
    w.write_record(&header).map_err(io)?;
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let report: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{} is not a JSON report: {e}", path.display())))?;
        if report.get("schema_version").and_then(Value::as_str).is_none() {
            return Err(CliError::Config(format!("{} has no schema_version", path.display())));
        }
        let mut row = vec![path.display().to_string()];
        row.extend(COLUMNS.iter().map(|k| cell(&report, k)));
        let passed = match report.get("failing") {
            Some(Value::Array(a)) => a.is_empty().to_string(),
            _ => String::new(),
        };
        row.push(passed);
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}
