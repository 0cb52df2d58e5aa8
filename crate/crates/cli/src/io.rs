//! CSV tables: output with `# key = value` metadata lines, and ingestion of
//! measured traces and steady-state populations.

use std::collections::HashMap;
use std::path::Path;

use nvdnp_core::{ExperimentTrace, FieldConfig};

use crate::error::{CliError, CliResult};

/// A CSV table preceded by metadata comment lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { meta: Vec::new(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let mut out = Vec::new();
        for (k, v) in &self.meta {
            out.extend_from_slice(format!("# {k} = {v}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::usage(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_bytes()?)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
    }
}

/// Shortest representation that round-trips.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

struct RawCsv {
    meta: HashMap<String, String>,
    columns: HashMap<String, usize>,
    /// `(line number, fields)`.
    rows: Vec<(u64, Vec<String>)>,
}

fn read_raw(path: &Path) -> CliResult<RawCsv> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut meta = HashMap::new();
    for line in text.lines() {
        let Some(rest) = line.trim_start().strip_prefix('#') else { continue };
        if let Some((k, v)) = rest.split_once(['=', ':']) {
            meta.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let columns = reader
        .headers()
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_ascii_lowercase(), i))
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(RawCsv { meta, columns, rows })
}

impl RawCsv {
    fn column(&self, path: &Path, name: &str) -> CliResult<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| CliError::usage(format!("{}: missing column '{name}'", path.display())))
    }

    fn meta_f64(&self, path: &Path, key: &str) -> CliResult<Option<f64>> {
        self.meta
            .get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::usage(format!("{}: header '{key}' = '{v}' is not a number", path.display())))
            })
            .transpose()
    }
}

fn cell(path: &Path, line: u64, row: &[String], idx: usize, name: &str) -> CliResult<f64> {
    let s = row.get(idx).map(String::as_str).unwrap_or("");
    let v: f64 = s
        .parse()
        .map_err(|_| CliError::usage(format!("{}: row at line {line}: {name} = '{s}' is not a number", path.display())))?;
    if !v.is_finite() {
        return Err(CliError::usage(format!("{}: row at line {line}: {name} is not finite", path.display())));
    }
    Ok(v)
}

/// Reads a measured trace. Needs `b_gauss` and `theta_deg` header lines and
/// columns `t_us, p_plus1, p_zero`, with an optional `sigma` column.
pub fn read_trace(path: &Path) -> CliResult<ExperimentTrace> {
    let raw = read_raw(path)?;
    let b = raw
        .meta_f64(path, "b_gauss")?
        .ok_or_else(|| CliError::usage(format!("{}: missing '# b_gauss = ...' header", path.display())))?;
    let theta = raw
        .meta_f64(path, "theta_deg")?
        .ok_or_else(|| CliError::usage(format!("{}: missing '# theta_deg = ...' header", path.display())))?;
    let (ct, c1, c0) = (raw.column(path, "t_us")?, raw.column(path, "p_plus1")?, raw.column(path, "p_zero")?);
    let cs = raw.columns.get("sigma").copied();
    let (mut times, mut p1, mut p0) = (Vec::new(), Vec::new(), Vec::new());
    let mut sigma = cs.map(|_| Vec::new());
    for (k, (line, row)) in raw.rows.iter().enumerate() {
        let t = cell(path, *line, row, ct, "t_us")?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(CliError::usage(format!(
                    "{}: row {} (line {line}): t_us = {t} does not increase past {prev}",
                    path.display(),
                    k + 1
                )));
            }
        }
        times.push(t);
        for (col, name, dst) in [(c1, "p_plus1", &mut p1), (c0, "p_zero", &mut p0)] {
            let v = cell(path, *line, row, col, name)?;
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::usage(format!(
                    "{}: row {} (line {line}): {name} = {v} outside [0, 1]",
                    path.display(),
                    k + 1
                )));
            }
            dst.push(v);
        }
        if let (Some(idx), Some(s)) = (cs, sigma.as_mut()) {
            s.push(cell(path, *line, row, idx, "sigma")?);
        }
    }
    ExperimentTrace::new(FieldConfig::new(b, theta), times, p1, p0, sigma)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// Steady-state populations, one row per field. `b_gauss` may be omitted
/// when the field comes from the frequency calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyRow {
    pub b_gauss: Option<f64>,
    pub p_plus1: f64,
    pub p_zero: f64,
}

pub fn read_steady(path: &Path) -> CliResult<Vec<SteadyRow>> {
    let raw = read_raw(path)?;
    let (c1, c0) = (raw.column(path, "p_plus1")?, raw.column(path, "p_zero")?);
    let cb = raw.columns.get("b_gauss").copied();
    let default_b = raw.meta_f64(path, "b_gauss")?;
    let mut out = Vec::new();
    for (line, row) in &raw.rows {
        let b = match cb {
            Some(i) if row.get(i).is_some_and(|s| !s.is_empty()) => Some(cell(path, *line, row, i, "b_gauss")?),
            _ => default_b,
        };
        out.push(SteadyRow { b_gauss: b, p_plus1: cell(path, *line, row, c1, "p_plus1")?, p_zero: cell(path, *line, row, c0, "p_zero")? });
    }
    if out.is_empty() {
        return Err(CliError::usage(format!("{}: no data rows", path.display())));
    }
    Ok(out)
}
