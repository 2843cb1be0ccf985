use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::rational_json;
use crate::rational::Rational;

/// Machine-readable result of one experiment. Everything in it is a
/// deterministic function of the experiment parameters and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub parameters: BTreeMap<String, Value>,
    pub instances: Vec<Instance>,
    pub assertions: Vec<Assertion>,
    pub summary: BTreeMap<String, Value>,
    pub totals: Totals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub description: String,
    pub values: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    /// The statement being checked.
    pub claim: String,
    pub instance: Option<String>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub instances: usize,
    pub assertions: usize,
    pub passed: usize,
    pub failed: usize,
}

impl ExperimentReport {
    pub(crate) fn new(experiment: &str, seed: u64) -> Self {
        ExperimentReport {
            experiment: experiment.to_owned(),
            seed,
            parameters: BTreeMap::new(),
            instances: Vec::new(),
            assertions: Vec::new(),
            summary: BTreeMap::new(),
            totals: Totals { instances: 0, assertions: 0, passed: 0, failed: 0 },
        }
    }

    pub(crate) fn param(&mut self, key: &str, value: Value) {
        self.parameters.insert(key.to_owned(), value);
    }

    pub(crate) fn push(&mut self, (instance, assertions): (Instance, Vec<Assertion>)) {
        self.instances.push(instance);
        self.assertions.extend(assertions);
    }

    pub(crate) fn assert(&mut self, name: &str, claim: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion { name: name.into(), claim: claim.into(), instance: None, passed, detail });
    }

    pub(crate) fn finish(mut self) -> Self {
        let passed = self.assertions.iter().filter(|a| a.passed).count();
        self.totals = Totals {
            instances: self.instances.len(),
            assertions: self.assertions.len(),
            passed,
            failed: self.assertions.len() - passed,
        };
        self
    }

    pub fn all_passed(&self) -> bool {
        self.totals.failed == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("reports serialize")
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        serde_json::from_value(value.clone()).map_err(|source| Error::Json { context: "read report".into(), source })
    }

    /// One row per instance; columns are the union of value keys. Exact
    /// values are written as `p/q`, certified ones by their estimate.
    pub fn to_csv(&self) -> String {
        let mut keys: Vec<&String> = self.instances.iter().flat_map(|i| i.values.keys()).collect();
        keys.sort();
        keys.dedup();
        let mut out = String::from("id");
        for k in &keys {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for inst in &self.instances {
            out.push_str(&inst.id);
            for k in &keys {
                out.push(',');
                if let Some(v) = inst.values.get(*k) {
                    out.push_str(&csv_cell(v));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn one_line(&self) -> String {
        format!(
            "{}: {}/{} assertions passed over {} instances",
            self.experiment, self.totals.passed, self.totals.assertions, self.totals.instances
        )
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Object(m) => m
            .get("exact")
            .or_else(|| m.get("estimate"))
            .map(csv_cell)
            .unwrap_or_default(),
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

impl Instance {
    pub(crate) fn new(id: impl Into<String>, description: impl Into<String>) -> Self {
        Instance { id: id.into(), description: description.into(), values: BTreeMap::new() }
    }

    pub(crate) fn exact(&mut self, key: &str, q: &Rational) {
        self.values.insert(key.to_owned(), rational_json(q));
    }

    /// A certified value known to lie in `[lo, hi]`.
    pub(crate) fn interval(&mut self, key: &str, lo: f64, hi: f64) {
        self.values.insert(key.to_owned(), json!({ "estimate": format!("{:.12e}", (lo + hi) / 2.0), "lo": format!("{lo:.12e}"), "hi": format!("{hi:.12e}") }));
    }

    pub(crate) fn value(&mut self, key: &str, v: Value) {
        self.values.insert(key.to_owned(), v);
    }

    pub(crate) fn check(&self, name: &str, claim: &str, passed: bool, detail: String) -> Assertion {
        Assertion { name: name.into(), claim: claim.into(), instance: Some(self.id.clone()), passed, detail }
    }
}
