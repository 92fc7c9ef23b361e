//! CSV and JSON-lines writers. CSV output starts with `# key = value`
//! metadata lines; JSON-lines output starts with one `{"metadata": …}` object.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::error::CliError;

/// One `probabilities` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub detector: String,
    pub outcome: String,
    pub probability: f64,
    pub derivative: f64,
}

/// One `sample` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub index: u64,
    pub x1: f64,
    pub x2: f64,
}

/// One `random-walk` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkRow {
    pub event: u64,
    pub step: i64,
    pub net_signal: i64,
}

pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => {
            Box::new(BufWriter::new(File::create(p).map_err(|e| {
                CliError::Io(format!("cannot create {}: {e}", p.display()))
            })?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn write_rows<T: Serialize>(
    out: &mut dyn Write,
    format: Format,
    metadata: &BTreeMap<&'static str, String>,
    notes: &[String],
    rows: &[T],
) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            for (k, v) in metadata {
                writeln!(out, "# {k} = {v}")?;
            }
            for n in notes {
                writeln!(out, "# note = {n}")?;
            }
            let mut w = csv::Writer::from_writer(&mut *out);
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::JsonLines => {
            let mut meta: BTreeMap<&str, serde_json::Value> = metadata
                .iter()
                .map(|(k, v)| (*k, serde_json::Value::from(v.as_str())))
                .collect();
            if !notes.is_empty() {
                meta.insert("notes", serde_json::Value::from(notes.to_vec()));
            }
            serde_json::to_writer(&mut *out, &serde_json::json!({ "metadata": meta }))?;
            writeln!(out)?;
            for r in rows {
                serde_json::to_writer(&mut *out, r)?;
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Parses CSV written by [`write_rows`], skipping metadata lines.
#[cfg(test)]
pub fn read_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(CliError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_every_bit() {
        let rows = vec![
            SampleRow {
                index: 0,
                x1: 0.1 + 0.2,
                x2: -1.0 / 3.0,
            },
            SampleRow {
                index: 1,
                x1: f64::MIN_POSITIVE,
                x2: 1e300,
            },
            SampleRow {
                index: 2,
                x1: -0.0,
                x2: std::f64::consts::PI,
            },
        ];
        let mut buf = Vec::new();
        let meta = BTreeMap::from([("seed", "1".to_string())]);
        write_rows(&mut buf, Format::Csv, &meta, &["n".into()], &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# seed = 1\n# note = n\nindex,x1,x2\n"));
        let back: Vec<SampleRow> = read_csv(&text).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.x1.to_bits(), b.x1.to_bits());
            assert_eq!(a.x2.to_bits(), b.x2.to_bits());
        }
    }

    #[test]
    fn json_lines_have_metadata_first() {
        let rows = vec![WalkRow {
            event: 1,
            step: 2,
            net_signal: 2,
        }];
        let mut buf = Vec::new();
        write_rows(&mut buf, Format::JsonLines, &BTreeMap::new(), &[], &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("{\"metadata\""));
        let row: WalkRow = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(row, rows[0]);
    }
}
