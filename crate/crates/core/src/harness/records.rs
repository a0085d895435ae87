use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One line of the result log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub operation: String,
    pub payload: Value,
    /// seconds
    pub wall_time: f64,
    /// seconds since the Unix epoch
    pub timestamp: u64,
}

impl ResultRecord {
    pub fn new(config_hash: impl Into<String>, operation: impl Into<String>, payload: Value, wall_time: f64) -> Self {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            config_hash: config_hash.into(),
            operation: operation.into(),
            payload,
            wall_time,
            timestamp,
        }
    }
}

/// Appends `record` as one JSON line.
pub fn append_record(path: &Path, record: &ResultRecord) -> std::io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(record).map_err(std::io::Error::other)?;
    writeln!(file, "{line}")
}

/// Reads every record of a JSON-lines log.
pub fn read_records(path: &Path) -> std::io::Result<Vec<ResultRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(std::io::Error::other))
        .collect()
}

/// Writes a numeric table with a header row.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()
}
