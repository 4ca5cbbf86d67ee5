//! Output tables and their deterministic serialisation.

use std::path::Path;

use crate::error::{CliError, CliResult};

pub const TOOL: &str = concat!("popcross ", env!("CARGO_PKG_VERSION"));

/// Header comment carried by every output file.
pub fn header(config_hash: &str) -> String {
    format!("{TOOL} config-sha256={config_hash}")
}

/// Shortest round-trip decimal, switching to exponent form for very large or
/// small magnitudes. NaN and infinities are spelled out.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 || (1e-5..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&v| num(v)).collect());
    }

    fn to_bytes(&self, header: &str) -> CliResult<Vec<u8>> {
        let mut buf = format!("# {header}\r\n").into_bytes();
        {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(&mut buf);
            let io = |e: csv::Error| CliError::Io(e.to_string());
            w.write_record(&self.columns).map_err(io)?;
            for r in &self.rows {
                w.write_record(r).map_err(io)?;
            }
            w.flush()?;
        }
        Ok(buf)
    }
}

/// Everything a command writes, assembled in memory before touching disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub header: String,
    pub tables: Vec<Table>,
    pub summary: serde_json::Value,
    /// File name of the JSON summary.
    pub summary_file: &'static str,
}

impl Artifacts {
    pub fn files(&self) -> CliResult<Vec<(String, Vec<u8>)>> {
        let mut out = Vec::with_capacity(self.tables.len() + 1);
        for t in &self.tables {
            out.push((format!("{}.csv", t.name), t.to_bytes(&self.header)?));
        }
        let mut summary = serde_json::json!({ "header": self.header });
        if let (Some(dst), serde_json::Value::Object(src)) = (summary.as_object_mut(), &self.summary) {
            dst.extend(src.clone());
        }
        let mut bytes = serde_json::to_vec_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
        bytes.push(b'\n');
        out.push((self.summary_file.into(), bytes));
        Ok(out)
    }

    /// Writes each file through a temporary name so that no file is left
    /// half-written.
    pub fn write(&self, dir: &Path) -> CliResult<Vec<String>> {
        let files = self.files()?;
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &files {
            let tmp = dir.join(format!(".{name}.tmp"));
            std::fs::write(&tmp, bytes)?;
            std::fs::rename(&tmp, dir.join(name))?;
        }
        Ok(files.into_iter().map(|(n, _)| n).collect())
    }
}

/// Reads a table written by [`Table`], skipping the header comment.
pub fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let cols: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| CliError::domain(format!("{}: `{s}` is not a number", path.display()))))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((cols, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(74.5), "74.5");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(1e-12), "1e-12");
        assert_eq!(num(2.5e20), "2.5e20");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(-3.0), "-3");
    }

    #[test]
    fn tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("demo", &["t", "x"]);
        t.push_nums(&[0.0, 1.0]);
        t.push_nums(&[0.5, 1e-9]);
        let a = Artifacts { header: header("abc"), tables: vec![t], summary: serde_json::json!({"k": 1}), summary_file: "summary.json" };
        let names = a.write(dir.path()).unwrap();
        assert_eq!(names, vec!["demo.csv", "summary.json"]);
        let text = std::fs::read_to_string(dir.path().join("demo.csv")).unwrap();
        assert!(text.starts_with(&format!("# {TOOL} config-sha256=abc\r\n")));
        let (cols, rows) = read_table(&dir.path().join("demo.csv")).unwrap();
        assert_eq!(cols, vec!["t", "x"]);
        assert_eq!(rows, vec![vec![0.0, 1.0], vec![0.5, 1e-9]]);
        let summary: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["k"], 1);
        assert!(summary["header"].as_str().unwrap().contains("abc"));
    }
}
