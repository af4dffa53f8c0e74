//! Pattern files, window sidecars and output sinks.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ppboot_core::{Interval1, LinePattern, PlanarPattern, PointPattern, Window2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowFile {
    window: WindowSpec,
}

pub enum Region {
    Planar(Window2),
    Line(Interval1),
}

impl WindowSpec {
    pub fn region(&self) -> CliResult<Region> {
        match (self.y_min, self.y_max) {
            (Some(y_min), Some(y_max)) => Ok(Region::Planar(Window2::new(self.x_min, self.x_max, y_min, y_max)?)),
            (None, None) => Ok(Region::Line(Interval1::new(self.x_min, self.x_max)?)),
            _ => Err(CliError::Data("window needs both y_min and y_max or neither".into())),
        }
    }

    pub fn from_planar(w: &Window2) -> Self {
        Self { x_min: w.x_min, x_max: w.x_max, y_min: Some(w.y_min), y_max: Some(w.y_max) }
    }

    /// `"x_min,x_max[,y_min,y_max]"`.
    pub fn parse_literal(s: &str) -> Option<Self> {
        let v: Vec<f64> = s.split(',').map(|t| t.trim().parse().ok()).collect::<Option<_>>()?;
        match v[..] {
            [a, b] => Some(Self { x_min: a, x_max: b, y_min: None, y_max: None }),
            [a, b, c, d] => Some(Self { x_min: a, x_max: b, y_min: Some(c), y_max: Some(d) }),
            _ => None,
        }
    }
}

/// A window given inline as numbers or as a path to a sidecar file.
pub fn resolve_window(arg: &str) -> CliResult<WindowSpec> {
    match WindowSpec::parse_literal(arg) {
        Some(w) => Ok(w),
        None => read_window(Path::new(arg)).map(|(w, _)| w),
    }
}

pub fn resolve_planar(arg: &str) -> CliResult<Window2> {
    match resolve_window(arg)?.region()? {
        Region::Planar(w) => Ok(w),
        Region::Line(_) => Err(CliError::Config(format!("window {arg:?} is an interval; a rectangle is needed"))),
    }
}

pub fn resolve_interval(arg: &str) -> CliResult<Interval1> {
    match resolve_window(arg)?.region()? {
        Region::Line(i) => Ok(i),
        Region::Planar(_) => Err(CliError::Config(format!("window {arg:?} is a rectangle; an interval is needed"))),
    }
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

pub fn read_window(path: &Path) -> CliResult<(WindowSpec, Vec<u8>)> {
    let bytes = read_bytes(path)?;
    let file: WindowFile = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Data(format!("bad window file {}: {e}", path.display())))?;
    Ok((file.window, bytes))
}

/// `pattern.csv` → `pattern.window.json`.
pub fn default_window_path(csv: &Path) -> PathBuf {
    csv.with_extension("window.json")
}

pub enum Loaded {
    Planar(PlanarPattern),
    Line(LinePattern),
}

pub struct Input {
    pub pattern: Loaded,
    /// sha256 over the CSV bytes followed by the sidecar bytes.
    pub digest: String,
}

pub fn digest_bytes(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Reads a point pattern from CSV (header `x` or `x,y`) and its window sidecar.
pub fn ingest_pattern(csv_path: &Path, window_path: Option<&Path>) -> CliResult<Input> {
    let window_path = window_path.map(Path::to_path_buf).unwrap_or_else(|| default_window_path(csv_path));
    let (spec, window_bytes) = read_window(&window_path)?;
    let csv_bytes = read_bytes(csv_path)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(csv_bytes.as_slice());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", csv_path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    let dims = match header.as_slice() {
        [x] if x == "x" => 1,
        [x, y] if x == "x" && y == "y" => 2,
        _ => return Err(CliError::Data(format!("{}: header must be `x` or `x,y`", csv_path.display()))),
    };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", csv_path.display())))?;
        let values: Vec<f64> = record
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| CliError::Data(format!("data row {}: expected {dims} finite numbers", i + 1)))?;
        rows.push(values);
    }
    let pattern = match (spec.region()?, dims) {
        (Region::Planar(w), 2) => Loaded::Planar(PointPattern::new(rows.iter().map(|r| [r[0], r[1]]).collect(), w)?),
        (Region::Line(i), 1) => Loaded::Line(PointPattern::new(rows.iter().map(|r| r[0]).collect(), i)?),
        _ => return Err(CliError::Data("pattern dimension does not match its window".into())),
    };
    Ok(Input { pattern, digest: digest_bytes(&[&csv_bytes, &window_bytes]) })
}

pub fn planar(input: Input) -> CliResult<(PlanarPattern, String)> {
    match input.pattern {
        Loaded::Planar(p) => Ok((p, input.digest)),
        Loaded::Line(_) => Err(CliError::Data("a planar pattern (header x,y) is required".into())),
    }
}

pub fn line(input: Input) -> CliResult<(LinePattern, String)> {
    match input.pattern {
        Loaded::Line(p) => Ok((p, input.digest)),
        Loaded::Planar(_) => Err(CliError::Data("a pattern on an interval (header x) is required".into())),
    }
}

pub fn write_output(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let result = match out {
        Some(path) => fs::write(path, bytes),
        None => io::stdout().lock().write_all(bytes),
    };
    result.map_err(|e| CliError::Data(format!("cannot write output: {e}")))
}

pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_json(value: &serde_json::Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("json values serialize");
    bytes.push(b'\n');
    bytes
}
