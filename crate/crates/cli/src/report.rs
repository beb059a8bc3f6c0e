use std::io::Write;
use std::time::Instant;

use radialcap::constellation::BalanceProfile;
use radialcap::Error;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Inconclusive,
    InputError,
    NumericFailure,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Inconclusive => 10,
            Status::InputError => 2,
            Status::NumericFailure => 3,
        }
    }

    pub fn of_error(e: &Error) -> Status {
        if e.is_numeric() {
            Status::NumericFailure
        } else {
            Status::InputError
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
}

/// The single JSON document printed by `--json`.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub inputs: Value,
    pub outcome: Value,
    pub evidence: Value,
    pub timings: Timings,
}

impl Report {
    pub fn new(command: &'static str, inputs: Value, started: Instant) -> Self {
        Report {
            command,
            inputs,
            outcome: Value::Null,
            evidence: Value::Null,
            timings: Timings {
                total_seconds: started.elapsed().as_secs_f64(),
            },
        }
    }

    pub fn print(&self) {
        emit(&format!("{}\n", serde_json::to_string_pretty(self).expect("report serializes")));
    }
}

/// Writes to standard output, ignoring a closed pipe.
pub fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

pub fn error_value(e: &Error) -> Value {
    json!({
        "kind": "error",
        "exit_code": Status::of_error(e).code(),
        "message": e.to_string(),
    })
}

/// Balance profile without its samples, which run to thousands of points.
pub fn balance_summary(b: &BalanceProfile) -> Value {
    json!({
        "p": b.p,
        "interval": b.interval(),
        "samples": b.values.len(),
        "min": b.min_value(),
        "max": b.max_value(),
        "sign_summary": b.sign_summary,
        "truncated_at": b.truncated_at,
    })
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}
