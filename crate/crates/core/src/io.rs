//! Flat `key = value` configuration files, CSV tables, legacy VTK output and
//! run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::solver::StepRecord;

/// Parse `key = value` lines. Blank lines and lines starting with `#` are
/// skipped; keys outside `allowed` and repeated keys are rejected.
pub fn parse_config(text: &str, allowed: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if !allowed.contains(&k) {
            return Err(Error::Config(format!("line {}: unknown key '{k}'", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: key '{k}' given twice", i + 1)));
        }
    }
    Ok(out)
}

/// Read and parse a configuration file.
pub fn read_config(path: &Path, allowed: &[&str]) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, allowed)
}

/// A CSV table of floating point columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Dimension {
                expected: self.header.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    /// CSV text with 17 significant digits; empty cells for NaN.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(
                row.iter()
                    .map(|v| if v.is_nan() { String::new() } else { format!("{v:.16e}") }),
            )?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is ASCII"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))
    }

    /// Parse CSV text with a header row; empty cells read as NaN.
    pub fn parse(text: &str) -> Result<Table> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Dimension {
                    expected: header.len(),
                    got: rec.len(),
                });
            }
            let row = rec
                .iter()
                .map(|cell| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        cell.parse::<f64>()
                            .map_err(|_| Error::Csv(format!("row {}: '{cell}' is not a number", i + 1)))
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn read(path: &Path) -> Result<Table> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Table::parse(&text)
    }
}

/// Per-step solver statistics as a table.
pub fn stats_table(steps: &[StepRecord]) -> Table {
    let mut t = Table::new(["step", "time", "newton_iters", "final_residual", "linear_iters"]);
    for s in steps {
        t.rows.push(vec![
            s.step as f64,
            s.time,
            s.newton.iterations as f64,
            s.newton.final_residual(),
            s.newton.linear_iterations as f64,
        ]);
    }
    t
}

/// Legacy ASCII VTK unstructured grid with cell scalars.
pub fn vtk_string(mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<String> {
    for (name, values) in fields {
        if values.len() != mesh.n_cells() {
            return Err(Error::Dimension {
                expected: mesh.n_cells(),
                got: values.len(),
            });
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Parameter(format!("invalid VTK field name '{name}'")));
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nmfmfe\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e} 0", p[0], p[1]);
    }
    let size: usize = mesh.cells().iter().map(|c| c.vertices.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {}", mesh.n_cells(), size);
    for c in mesh.cells() {
        let _ = write!(s, "{}", c.vertices.len());
        for v in &c.vertices {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_cells());
    for c in mesh.cells() {
        let _ = writeln!(s, "{}", c.kind.vtk_type());
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "CELL_DATA {}", mesh.n_cells());
        for (name, values) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in *values {
                let _ = writeln!(s, "{v:.16e}");
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(mesh: &Mesh, fields: &[(&str, &[f64])], path: &Path) -> Result<()> {
    fs::write(path, vtk_string(mesh, fields)?).map_err(|e| Error::io(path, e))
}

/// Write the resolved configuration and the package version as `key = value`.
pub fn write_manifest(path: &Path, entries: &BTreeMap<String, String>) -> Result<()> {
    let mut s = format!("version = {}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
