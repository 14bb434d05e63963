//! Untyped block-language values and their coercions.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

/// A runtime value. Literals in project documents are numbers, strings or
/// booleans; everything is coerced on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Num(f64),
    Text(String),
}

impl Default for Value {
    fn default() -> Self {
        Value::Num(0.0)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

/// Length of the longest prefix of `s` that reads as a decimal number.
fn numeric_prefix_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut n_digits = i - digits_start;
    if i < b.len() && b[i] == b'.' {
        let mut j = i + 1;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        n_digits += j - i - 1;
        if n_digits > 0 {
            i = j;
        }
    }
    if n_digits == 0 {
        return 0;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        let exp_start = j;
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_start {
            i = j;
        }
    }
    i
}

/// Parses a leading numeral, returning 0 when there is none.
pub fn parse_leading_number(s: &str) -> f64 {
    let t = s.trim();
    let n = numeric_prefix_len(t);
    if n == 0 {
        return 0.0;
    }
    t[..n].parse::<f64>().unwrap_or(0.0)
}

/// True when the whole string (ignoring surrounding whitespace) is a number.
pub fn is_numeric_text(s: &str) -> bool {
    let t = s.trim();
    !t.is_empty() && numeric_prefix_len(t) == t.len()
}

/// Formats a number the way the block language displays it: integers
/// without a fractional part.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Infinity".into() } else { "-Infinity".into() };
    }
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{}", x)
    }
}

impl Value {
    pub fn to_number(&self) -> f64 {
        let x = match self {
            Value::Num(x) => *x,
            Value::Bool(b) => {
                if *b {
                    1.0
                } else {
                    0.0
                }
            }
            Value::Text(s) => parse_leading_number(s),
        };
        if x.is_nan() {
            0.0
        } else {
            x
        }
    }

    pub fn to_bool(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            Value::Num(x) => *x != 0.0 && !x.is_nan(),
            Value::Text(s) => {
                let t = s.trim();
                t.eq_ignore_ascii_case("true") || parse_leading_number(t) != 0.0
            }
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Value::Text(s) => s.clone(),
            Value::Num(x) => format_number(*x),
            Value::Bool(b) => b.to_string(),
        }
    }

    /// Numeric view used by comparisons: `Some` when the value reads as a
    /// number in full.
    pub fn as_comparable_number(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Bool(_) => None,
            Value::Text(s) => {
                if is_numeric_text(s) {
                    Some(parse_leading_number(s))
                } else {
                    None
                }
            }
        }
    }

    /// Scratch-style comparison: numeric when both sides are numbers,
    /// otherwise case-insensitive text comparison.
    pub fn compare(&self, other: &Value) -> Ordering {
        match (self.as_comparable_number(), other.as_comparable_number()) {
            (Some(a), Some(b)) => a.partial_cmp(&b).unwrap_or(Ordering::Equal),
            _ => self
                .to_text()
                .to_lowercase()
                .cmp(&other.to_text().to_lowercase()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
