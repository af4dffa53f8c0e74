use serde::Serialize;
use serde_json::Value;

/// One experiment run as written to disk.
#[derive(Debug, Serialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub input_digest: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub results: Value,
    pub errors: Value,
    /// Only present with `--timing`, so reruns stay byte-identical by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl ResultRecord {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("records serialize")
    }
}
