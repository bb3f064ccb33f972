//! Versioned JSON reports.
//!
//! The creation time is confined to the `generated_at_unix` header field, so
//! two runs with the same configuration produce identical reports once that
//! field is removed.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::energy::{EnergyBreakdown, TERM_NAMES};
use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// Header field that holds the only time-dependent value.
pub const TIMESTAMP_FIELD: &str = "generated_at_unix";

#[derive(Debug, Clone, Serialize)]
pub struct Report<T: Serialize> {
    pub schema_version: u32,
    pub generated_at_unix: u64,
    pub command: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &str, body: T) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            generated_at_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            command: command.to_owned(),
            body,
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// `report` as a JSON value without its timestamp.
pub fn without_timestamp(report: &[u8]) -> Result<Value> {
    let mut v: Value = serde_json::from_slice(report)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove(TIMESTAMP_FIELD);
    }
    Ok(v)
}

/// Energy terms grouped as regularity and fidelity, with the weights, the
/// weighted total, and the terms that were skipped for having zero weight.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport(pub EnergyBreakdown);

impl Serialize for EnergyReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let e = &self.0;
        let terms = e.terms();
        let group = |range: std::ops::Range<usize>| -> serde_json::Map<String, Value> {
            range.map(|i| (TERM_NAMES[i].to_owned(), Value::from(terms[i]))).collect()
        };
        let weights: serde_json::Map<String, Value> = e
            .weights
            .as_array()
            .iter()
            .enumerate()
            .map(|(i, w)| (format!("gamma{}", i + 1), Value::from(*w)))
            .collect();
        serde_json::json!({
            "regularity": group(0..5),
            "fidelity": group(5..7),
            "weights": weights,
            "total": e.total,
            "skipped": e.skipped,
        })
        .serialize(s)
    }
}
