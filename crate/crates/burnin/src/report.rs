//! Structured text reports.
//!
//! Reports are JSON-style ordered maps written with every float at 17
//! significant digits, so that re-ingesting printed values reproduces the
//! original doubles bit for bit. Rendering is fully deterministic:
//! insertion order is preserved and nothing time- or machine-dependent is
//! ever emitted.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Bool(bool),
    Int(i64),
    /// Arbitrarily large nonnegative integer, kept as decimal digits.
    BigInt(String),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Map(Report),
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}
impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}
impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}
impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}
impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}
impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}
impl From<Report> for Value {
    fn from(v: Report) -> Self {
        Value::Map(v)
    }
}
impl From<&[f64]> for Value {
    fn from(v: &[f64]) -> Self {
        Value::List(v.iter().map(|&x| Value::Float(x)).collect())
    }
}

/// Insertion-ordered key/value section.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    entries: Vec<(String, Value)>,
}

/// Formats a float with 17 significant digits (round-trip exact for f64).
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "\"nan\"".to_string()
    } else if x > 0.0 {
        "\"inf\"".to_string()
    } else {
        "\"-inf\"".to_string()
    }
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.entries.push((key.to_string(), value.into()));
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.push(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// Looks up a (possibly nested) key path like `"result.n_star"`.
    pub fn lookup(&self, path: &str) -> Option<&Value> {
        let mut cur = self;
        let mut parts = path.split('.').peekable();
        while let Some(part) = parts.next() {
            let v = cur.get(part)?;
            if parts.peek().is_none() {
                return Some(v);
            }
            match v {
                Value::Map(m) => cur = m,
                _ => return None,
            }
        }
        None
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out.push('\n');
        out
    }

    fn render_into(&self, out: &mut String, indent: usize) {
        out.push_str("{\n");
        let pad = "  ".repeat(indent + 1);
        for (i, (k, v)) in self.entries.iter().enumerate() {
            let _ = write!(out, "{pad}\"{k}\": ");
            render_value(v, out, indent + 1);
            if i + 1 < self.entries.len() {
                out.push(',');
            }
            out.push('\n');
        }
        let _ = write!(out, "{}}}", "  ".repeat(indent));
    }
}

fn render_value(v: &Value, out: &mut String, indent: usize) {
    match v {
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Value::BigInt(digits) => {
            let _ = write!(out, "{digits}");
        }
        Value::Float(x) => {
            let _ = write!(out, "{}", fmt_float(*x));
        }
        Value::Str(s) => {
            let _ = write!(out, "\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        }
        Value::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render_value(item, out, indent);
            }
            out.push(']');
        }
        Value::Map(m) => m.render_into(out, indent),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for x in [32.990, -0.92973, 1.766533e-49, 3.0079, f64::MIN_POSITIVE] {
            let s = fmt_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn rendering_is_deterministic_and_ordered() {
        let mut r = Report::new();
        r.push("beta", 1.5_f64);
        r.push("alpha", 2_i64);
        let mut inner = Report::new();
        inner.push("n_star", Value::BigInt("123456789012345678901234".into()));
        r.push("result", inner);
        let a = r.render();
        let b = r.render();
        assert_eq!(a, b);
        // Insertion order, not alphabetical.
        let beta_pos = a.find("beta").unwrap();
        let alpha_pos = a.find("alpha").unwrap();
        assert!(beta_pos < alpha_pos);
        assert!(a.contains("123456789012345678901234"));
    }

    #[test]
    fn lookup_walks_nested_sections() {
        let r = Report::new()
            .with("inputs", Report::new().with("sse", 32.990_f64))
            .with("flag", true);
        match r.lookup("inputs.sse") {
            Some(Value::Float(x)) => assert_eq!(*x, 32.990),
            other => panic!("unexpected {other:?}"),
        }
        assert!(r.lookup("inputs.missing").is_none());
    }
}
