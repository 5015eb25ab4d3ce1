//! CSV input and output. Floats are written with Rust's shortest
//! round-trip formatting, so reading a file back gives the same bits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::CliError;

pub fn fmt(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// A CSV file with a header row, kept as strings until a column is asked for.
pub struct Table {
    source: String,
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table, CliError> {
        let source = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Data(format!("{source}: {e}")))?;
        let headers = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("{source}: {e}")))?
            .iter()
            .map(|h| h.to_ascii_lowercase())
            .collect();
        let rows = rdr
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Data(format!("{source}: {e}")))?;
        Ok(Table { source, headers, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn has(&self, name: &str) -> bool {
        self.headers.iter().any(|h| h == name)
    }

    fn index(&self, name: &str) -> Result<usize, CliError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("{}: missing column '{name}'", self.source)))
    }

    pub fn strings(&self, name: &str) -> Result<Vec<String>, CliError> {
        let k = self.index(name)?;
        Ok(self.rows.iter().map(|r| r.get(k).unwrap_or("").to_string()).collect())
    }

    pub fn floats(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let k = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s = r.get(k).unwrap_or("");
                s.parse::<f64>().map_err(|_| {
                    CliError::Data(format!("{}: row {}: '{s}' in column '{name}' is not a number", self.source, i + 2))
                })
            })
            .collect()
    }
}

pub struct CsvOut {
    out: BufWriter<File>,
    path: String,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<CsvOut, CliError> {
        let file = File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut w = CsvOut {
            out: BufWriter::new(file),
            path: path.display().to_string(),
        };
        w.row(header.iter().map(|s| s.to_string()))?;
        Ok(w)
    }

    /// Fields are numbers and plain identifiers, so no quoting is needed.
    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<(), CliError> {
        let line = fields.into_iter().collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}").map_err(|e| CliError::Data(format!("{}: {e}", self.path)))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::Data(format!("{}: {e}", self.path)))
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// `t,y` observations.
pub fn read_pairs(path: &Path, tu: crate::TimeUnit) -> Result<Vec<(f64, f64)>, CliError> {
    let table = Table::read(path)?;
    let t = table.floats("t")?;
    let y = table.floats("y")?;
    Ok(t.into_iter().map(|t| tu.ingest(t)).zip(y).collect())
}

pub fn read_dataset(path: &Path, tu: crate::TimeUnit) -> Result<beta_loclik::loclik::Dataset, CliError> {
    let (t, y) = read_pairs(path, tu)?.into_iter().unzip();
    beta_loclik::loclik::Dataset::new(t, y).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Shape curves `t,alpha,beta` (other columns ignored).
pub struct ShapeCurve {
    pub grid: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn read_shape_curve(path: &Path, tu: crate::TimeUnit) -> Result<ShapeCurve, CliError> {
    let table = Table::read(path)?;
    let grid: Vec<f64> = table.floats("t")?.into_iter().map(|t| tu.ingest(t)).collect();
    let alpha = table.floats("alpha")?;
    let beta = table.floats("beta")?;
    if grid.is_empty() {
        return Err(CliError::Data(format!("{}: no rows", path.display())));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(CliError::Data(format!("{}: t must be strictly increasing", path.display())));
    }
    if alpha.iter().chain(&beta).any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(CliError::Data(format!("{}: shapes must be positive and finite", path.display())));
    }
    Ok(ShapeCurve { grid, alpha, beta })
}
