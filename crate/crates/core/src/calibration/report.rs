use serde::{Deserialize, Serialize};

/// JSON-serializable calibration summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Calibration kind, e.g. `tone` or `ringdown`.
    pub method: String,
    pub estimate: f64,
    pub uncertainty: f64,
    /// Named windows (Hz or s, per method).
    pub windows: Vec<(String, (f64, f64))>,
    /// SHA-256 of each input file or dataset.
    pub input_hashes: Vec<String>,
    /// Method-specific details.
    pub details: serde_json::Value,
}

impl CalibrationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
