use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Outcome of one check. `margin` is positive when the check passes with
/// room to spare and negative by the amount of the violation otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub params: Value,
    pub pass: bool,
    /// Serialized as `null` when undefined (NaN).
    #[serde(with = "nan_as_null")]
    pub margin: f64,
    pub witness: Value,
    pub seed: u64,
    pub runtime_ms: f64,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, params: Value, seed: u64) -> Self {
        Self {
            name: name.into(),
            params,
            pass: false,
            margin: f64::NAN,
            witness: Value::Null,
            seed,
            runtime_ms: 0.0,
        }
    }

    pub fn verdict(mut self, pass: bool, margin: f64, witness: Value) -> Self {
        self.pass = pass;
        self.margin = margin;
        self.witness = witness;
        self
    }

    /// A failed report carrying an error message as the witness.
    pub fn failed(name: impl Into<String>, params: Value, seed: u64, err: impl std::fmt::Display) -> Self {
        Self::new(name, params, seed).verdict(false, f64::NAN, Value::String(err.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// `PASS name (margin …)` / `FAIL …`, for logs.
    pub fn summary_line(&self) -> String {
        format!(
            "{} {} margin={:.3e} runtime_ms={:.0}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.margin,
            self.runtime_ms
        )
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Runs `check` and stamps its wall time into the report.
pub fn timed(check: impl FnOnce() -> CheckReport) -> CheckReport {
    let start = Instant::now();
    let mut r = check();
    r.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn json_round_trip_keeps_fields() {
        let r = CheckReport::new("demo", json!({"n": 3}), 7).verdict(true, 0.25, json!([1, 2]));
        let back: CheckReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["name", "params", "pass", "margin", "witness", "seed", "runtime_ms"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn failed_report_is_not_a_pass() {
        let r = CheckReport::failed("x", Value::Null, 0, "boom");
        assert!(!r.pass);
        assert_eq!(r.witness, json!("boom"));
        assert!(r.summary_line().starts_with("FAIL x"));
        let back: CheckReport = serde_json::from_str(&r.to_json()).unwrap();
        assert!(back.margin.is_nan() && !back.pass);
    }

    #[test]
    fn timed_records_runtime() {
        let r = timed(|| {
            std::thread::sleep(std::time::Duration::from_millis(2));
            CheckReport::new("t", Value::Null, 0)
        });
        assert!(r.runtime_ms >= 2.0);
    }
}
