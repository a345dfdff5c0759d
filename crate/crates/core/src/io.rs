//! File formats: field snapshots, mesh files, CSV time series and flat
//! key-value configuration.
//!
//! A snapshot is a pair of files: `<stem>.bin` holding `M * M` little-endian
//! `f64` values in row-major order, and `<stem>.json` holding the metadata.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::EnergyReport;
use crate::error::{Error, Result};
use crate::grid::{GridField, SpectralGrid};
use crate::kernels::TimeMesh;

/// JSON sidecar of a field snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    #[serde(rename = "M")]
    pub modes: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub time: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub step_index: usize,
}

fn with_extension(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Strips a trailing `.bin` or `.json` so either file names the snapshot.
pub fn snapshot_stem(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") | Some("json") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

pub fn write_snapshot(stem: &Path, field: &GridField, meta: &SnapshotMeta) -> Result<()> {
    if field.modes() != meta.modes {
        return Err(Error::DimensionMismatch {
            expected: meta.modes,
            found: format!("{}x{}", field.modes(), field.modes()),
        });
    }
    let bin = with_extension(stem, "bin");
    let json = with_extension(stem, "json");
    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let text = serde_json::to_string_pretty(meta).expect("snapshot metadata serializes");
    fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotMeta, GridField)> {
    let stem = snapshot_stem(path);
    let bin = with_extension(&stem, "bin");
    let json = with_extension(&stem, "json");
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let meta: SnapshotMeta =
        serde_json::from_str(&text).map_err(|e| Error::format(&json, e.to_string()))?;
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let expected = meta.modes * meta.modes * 8;
    if bytes.len() != expected {
        return Err(Error::format(
            &bin,
            format!("expected {expected} bytes for M = {}, found {}", meta.modes, bytes.len()),
        ));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let grid = SpectralGrid::new(meta.modes, meta.length)?;
    let field = GridField::from_values(&grid, values)?;
    Ok((meta, field))
}

/// One step size per line, shortest round-trip decimal form.
pub fn write_mesh(path: &Path, mesh: &TimeMesh) -> Result<()> {
    let mut out = String::new();
    for tau in mesh.steps() {
        writeln!(out, "{tau:?}").expect("write to String");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a mesh file; blank lines and `#` comments are skipped.
pub fn read_mesh(path: &Path) -> Result<TimeMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut steps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tau: f64 = line
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: not a number: '{line}'", lineno + 1)))?;
        steps.push(tau);
    }
    if steps.is_empty() {
        return Err(Error::format(path, "mesh file has no steps"));
    }
    TimeMesh::from_steps(&steps).map_err(|e| Error::format(path, e.to_string()))
}

pub const SERIES_HEADER: &str =
    "step_index,t,tau,ratio,mass,E,E_mod,iterations,restriction_satisfied";

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV time series, 17 significant digits per real column.
pub fn series_csv(records: &[EnergyReport]) -> String {
    let mut out = String::with_capacity(records.len() * 160);
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.step_index,
            sci(r.t),
            sci(r.tau),
            sci(r.ratio),
            sci(r.mass),
            sci(r.energy),
            sci(r.modified_energy),
            r.iterations,
            r.restriction_satisfied
        )
        .expect("write to String");
    }
    out
}

pub fn write_series_csv(path: &Path, records: &[EnergyReport]) -> Result<()> {
    fs::write(path, series_csv(records)).map_err(|e| Error::io(path, e))
}

pub fn read_series_csv(path: &Path) -> Result<Vec<EnergyReport>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SERIES_HEADER => {}
        _ => return Err(Error::format(path, "missing or unexpected header row")),
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::format(path, format!("row {}: bad {what}", lineno + 1));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(bad("column count"));
        }
        let real = |i: usize, name: &str| cols[i].trim().parse::<f64>().map_err(|_| bad(name));
        out.push(EnergyReport {
            step_index: cols[0].trim().parse().map_err(|_| bad("step_index"))?,
            t: real(1, "t")?,
            tau: real(2, "tau")?,
            ratio: real(3, "ratio")?,
            mass: real(4, "mass")?,
            energy: real(5, "E")?,
            modified_energy: real(6, "E_mod")?,
            iterations: cols[7].trim().parse().map_err(|_| bad("iterations"))?,
            restriction_satisfied: cols[8].trim().parse().map_err(|_| bad("restriction_satisfied"))?,
        });
    }
    Ok(out)
}

/// Parses `key = value` lines. `#` starts a comment; keys are trimmed and
/// kept case-sensitive.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("config line {}: expected 'key = value', got '{raw}'", lineno + 1))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", lineno + 1)));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_key_values(&text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
