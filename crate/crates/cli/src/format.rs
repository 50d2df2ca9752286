//! Number formatting and table output shared by every emitted document.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON formatter writing floats through [`fmt_f64`].
struct SigDigits<'a>(PrettyFormatter<'a>);

impl Formatter for SigDigits<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Canonical JSON bytes (two-space indent, trailing newline). Non-finite
/// floats become `null`.
pub fn to_json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

/// A numeric table with named, unit-carrying columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: impl IntoIterator<Item = (String, &'static str)>) -> Self {
        Self {
            columns: columns
                .into_iter()
                .map(|(name, unit)| Column {
                    name,
                    unit: unit.to_string(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    /// CSV with a `name [unit]` header; values use the same digits as JSON.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut s = self
            .columns
            .iter()
            .map(|c| format!("{} [{}]", c.name, c.unit))
            .collect::<Vec<_>>()
            .join(",");
        s.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s.into_bytes()
    }
}
