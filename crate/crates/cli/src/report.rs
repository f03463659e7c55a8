//! Flat key/value reports rendered as JSON, CSV or text.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

/// Fields in insertion order.
#[derive(Debug, Default)]
pub struct Report {
    fields: Vec<(String, Value)>,
}

/// Numbers with infinities kept as the strings `inf` and `-inf`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

pub fn histogram(h: &[(usize, usize)]) -> Value {
    Value::Array(h.iter().map(|&(s, c)| serde_json::json!([s, c])).collect())
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        self.fields.push((key.to_string(), v.into()));
        self
    }

    pub fn render(&self, f: Format) -> String {
        match f {
            Format::Json => {
                let mut out = String::from("{\n");
                for (i, (k, v)) in self.fields.iter().enumerate() {
                    let sep = if i + 1 < self.fields.len() { "," } else { "" };
                    let _ = writeln!(out, "  {}: {}{sep}", Value::String(k.clone()), v);
                }
                out.push_str("}\n");
                out
            }
            Format::Csv => {
                let head: Vec<String> = self.fields.iter().map(|(k, _)| csv_cell(k)).collect();
                let row: Vec<String> = self.fields.iter().map(|(_, v)| csv_cell(&plain(v))).collect();
                format!("{}\n{}\n", head.join(","), row.join(","))
            }
            Format::Text => {
                let mut out = String::new();
                for (k, v) in &self.fields {
                    let _ = writeln!(out, "{k}: {}", plain(v));
                }
                out
            }
        }
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        v => v.to_string(),
    }
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new();
        r.put("status", "optimal").put("value", num(-1.5)).put("gamma", num(f64::NEG_INFINITY));
        r.put("cliques", histogram(&[(3, 2)]));
        r
    }

    #[test]
    fn json_keeps_order_and_infinities() {
        let s = sample().render(Format::Json);
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["gamma"], "-inf");
        assert!(s.find("status").unwrap() < s.find("value").unwrap());
    }

    #[test]
    fn csv_quotes_arrays() {
        let s = sample().render(Format::Csv);
        assert_eq!(s, "status,value,gamma,cliques\noptimal,-1.5,-inf,\"[[3,2]]\"\n");
    }

    #[test]
    fn text_lines() {
        assert!(sample().render(Format::Text).starts_with("status: optimal\nvalue: -1.5\n"));
    }
}
