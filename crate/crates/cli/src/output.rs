//! Record rendering: CSV or JSON lines, numbers at 12 significant digits,
//! preceded by `#` comment lines echoing the effective configuration.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

pub const SIG_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "jsonl",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" | "jsonl" => Ok(Format::Json),
            other => bail!("unknown format '{other}' (expected csv or json)"),
        }
    }
}

/// Rounds to [`SIG_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Plain decimal rendering of [`round_sig`]; never uses an exponent.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let r = round_sig(x);
    // normalize -0 so output does not depend on the sign of zero
    if r == 0.0 {
        return "0".to_string();
    }
    format!("{r}")
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .map(|x| {
                let r = round_sig(x);
                Number::from_f64(if r == 0.0 { 0.0 } else { r }).map_or(Value::Null, Value::Number)
            })
            .unwrap_or(Value::Null),
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_value).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

fn cell(v: &Value) -> Result<String> {
    Ok(match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format_number(x),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        Value::Array(_) | Value::Object(_) => {
            bail!("nested values cannot be written as CSV cells")
        }
    })
}

fn as_object<T: Serialize>(row: &T) -> Result<Map<String, Value>> {
    match serde_json::to_value(row)? {
        Value::Object(m) => Ok(m),
        _ => bail!("record did not serialize to an object"),
    }
}

/// Renders `rows` after the `#`-prefixed `header` lines.
pub fn render<T: Serialize>(header: &[String], rows: &[T], format: Format) -> Result<String> {
    let mut out = String::new();
    for line in header {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            let mut columns: Option<Vec<String>> = None;
            for row in rows {
                let obj = as_object(row)?;
                if columns.is_none() {
                    let keys: Vec<String> = obj.keys().cloned().collect();
                    w.write_record(&keys)?;
                    columns = Some(keys);
                }
                let cells = obj.values().map(cell).collect::<Result<Vec<_>>>()?;
                w.write_record(&cells)?;
            }
            let bytes = w.into_inner().context("flushing CSV")?;
            out.push_str(&String::from_utf8(bytes)?);
        }
        Format::Json => {
            for row in rows {
                let v = round_value(Value::Object(as_object(row)?));
                out.push_str(&serde_json::to_string(&v)?);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// Parses rendered output back into records, skipping `#` lines.
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str, format: Format) -> Result<Vec<T>> {
    match format {
        Format::Csv => {
            let mut r = csv::ReaderBuilder::new()
                .comment(Some(b'#'))
                .from_reader(text.as_bytes());
            r.deserialize()
                .map(|row| row.context("parsing CSV row"))
                .collect()
        }
        Format::Json => text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).context("parsing JSON line"))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    struct Row {
        name: String,
        x: f64,
        n: u64,
        maybe: Option<f64>,
    }

    #[test]
    fn numbers_are_plain_decimal() {
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(0.000012345678901234), "0.0000123456789012");
        assert_eq!(format_number(2.0), "2");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(123_456_789.123_456_78), "123456789.123");
        assert_eq!(format_number(f64::NAN), "NaN");
    }

    #[test]
    fn csv_and_json_round_trip() {
        let rows = vec![
            Row { name: "a".into(), x: 0.1 + 0.2, n: 3, maybe: None },
            Row { name: "b,c".into(), x: -1e-7, n: 0, maybe: Some(2.0 / 3.0) },
        ];
        let header = vec!["cmd: test".to_string()];
        for format in [Format::Csv, Format::Json] {
            let text = render(&header, &rows, format).unwrap();
            assert!(text.starts_with("# cmd: test\n"));
            let back: Vec<Row> = parse(&text, format).unwrap();
            assert_eq!(back.len(), 2);
            assert_eq!(back[0].x, round_sig(0.1 + 0.2));
            assert_eq!(back[0].maybe, None);
            assert_eq!(back[1].name, "b,c");
            assert_eq!(back[1].maybe, Some(round_sig(2.0 / 3.0)));
        }
    }
}
