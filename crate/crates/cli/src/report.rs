//! Report rows and serialization. One row per requested check; a row that
//! could not be computed at all fails with a sentinel margin and the error
//! text in its details.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use slopebench_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
}

/// Margin reported when a check errored before producing one. Finite so the
/// JSON stays typed; nothing legitimate gets near it.
pub const ERROR_MARGIN: f64 = -f64::MAX;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub check_id: String,
    pub status: CheckStatus,
    pub worst_margin: f64,
    pub details: Value,
}

impl ReportRow {
    /// Row with status pass iff `worst_margin >= -tolerance`.
    pub fn from_margin(check_id: &str, worst_margin: f64, tolerance: f64, details: Value) -> Self {
        let status =
            if worst_margin >= -tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        ReportRow { check_id: check_id.into(), status, worst_margin, details }
    }

    pub fn from_outcome(check_id: &str, passed: bool, worst_margin: f64, details: Value) -> Self {
        ReportRow {
            check_id: check_id.into(),
            status: if passed { CheckStatus::Pass } else { CheckStatus::Fail },
            worst_margin,
            details,
        }
    }

    pub fn from_error(check_id: &str, err: &Error) -> Self {
        ReportRow {
            check_id: check_id.into(),
            status: CheckStatus::Fail,
            worst_margin: ERROR_MARGIN,
            details: serde_json::json!({ "error": err.to_string() }),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

/// Serialize rows. Text is one line per row, `check_id status worst_margin`;
/// JSON is the full structure with stable field order.
pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot emit an empty report"));
    }
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows)
                .map_err(|e| Error::invalid(format!("report serialization: {e}")))?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Text => {
            let mut s = String::new();
            for r in rows {
                let status = if r.passed() { "pass" } else { "fail" };
                s.push_str(&format!("{} {} {}\n", r.check_id, status, r.worst_margin));
            }
            Ok(s)
        }
    }
}
