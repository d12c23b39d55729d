//! Report document written by every command.

use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    /// Plain description of the statement being checked.
    pub anchor: String,
    pub pass: bool,
    pub result: Value,
}

impl Check {
    pub fn new(name: &str, anchor: &str, pass: bool, result: impl Serialize) -> Self {
        Self { name: name.into(), anchor: anchor.into(), pass, result: to_value(result) }
    }
}

/// A flat table for `--csv`.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub parameters: Value,
    pub result: Value,
    pub checks: Vec<Check>,
    pub table: Option<Table>,
}

impl Outcome {
    pub fn new(parameters: Value, result: impl Serialize) -> Self {
        Self { parameters, result: to_value(result), checks: Vec::new(), table: None }
    }

    pub fn check(mut self, c: Check) -> Self {
        self.checks.push(c);
        self
    }

    pub fn with_table(mut self, t: Table) -> Self {
        self.table = Some(t);
        self
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn document(&self, command: &str, config_hash: &str) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| json!({"name": c.name, "anchor": c.anchor, "pass": c.pass, "result": c.result}))
            .collect();
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "parameters": self.parameters,
            "result": self.result,
            "checks": checks,
            "pass": self.pass(),
            "toolkit_version": env!("CARGO_PKG_VERSION"),
            "config_hash": config_hash,
        })
    }

    /// The table of the command, or one row per check.
    pub fn csv(&self) -> String {
        if let Some(t) = &self.table {
            return t.render();
        }
        let mut t = Table::new(&["check", "pass", "anchor"]);
        for c in &self.checks {
            t.push(vec![c.name.clone(), c.pass.to_string(), format!("\"{}\"", c.anchor.replace('"', "'"))]);
        }
        t.render()
    }
}

/// Serializes a value; serde_json writes non-finite floats as `null`.
pub fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Keeps non-finite floats visible as strings.
pub fn float(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}
