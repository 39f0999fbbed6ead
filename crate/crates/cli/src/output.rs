//! File writers: CSV with '.' decimals and LF endings, pretty JSON, bit lines.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

pub fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report values serialize");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// One bit per line, as ASCII '0' or '1'.
pub fn bit_lines(bits: &[u8]) -> String {
    let mut s = String::with_capacity(bits.len() * 2);
    for b in bits {
        s.push(if *b == 0 { '0' } else { '1' });
        s.push('\n');
    }
    s
}

pub fn parse_bit_lines(text: &str) -> Option<Vec<u8>> {
    text.lines()
        .map(|l| match l.trim() {
            "0" => Some(0),
            "1" => Some(1),
            _ => None,
        })
        .collect()
}

/// Shortest round-trip form, in exponent notation outside `[1e-6, 1e15)`;
/// empty for a missing value.
pub fn num(v: Option<f64>) -> String {
    v.map(|x| {
        let a = x.abs();
        if a == 0.0 || (1e-6..1e15).contains(&a) || !a.is_finite() {
            x.to_string()
        } else {
            format!("{x:e}")
        }
    })
    .unwrap_or_default()
}

/// In-memory CSV table with a fixed header.
#[derive(Debug)]
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self {
            columns: header.len(),
            text,
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns, "CSV row width");
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        write_bytes(path, self.text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[num(Some(0.25)), num(None)]);
        c.row(&[num(Some(-1.0)), num(Some(1e-20))]);
        assert_eq!(c.as_str(), "a,b\n0.25,\n-1,1e-20\n");
        for x in [3.0814879110195774e-33, 0.1, 1e-6, 123456.75, -2.5e20] {
            assert_eq!(num(Some(x)).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn bits_round_trip() {
        let bits = [0, 1, 1, 0];
        let text = bit_lines(&bits);
        assert_eq!(text, "0\n1\n1\n0\n");
        assert_eq!(parse_bit_lines(&text).unwrap(), bits);
        assert!(parse_bit_lines("0\n2\n").is_none());
    }
}
