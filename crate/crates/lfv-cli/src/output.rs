//! CSV/JSON artifacts and their provenance records.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use lfv_core::sim::FIX_THRESHOLD;
use lfv_core::stationary::RESIDUAL_TOL;

pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn render(cell: &Cell) -> String {
    match cell {
        Cell::Int(i) => i.to_string(),
        Cell::Float(f) => fmt_float(*f),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
    }
}

/// Writes artifacts into one directory, each with a `<stem>.provenance.json`.
pub struct Artifacts {
    dir: PathBuf,
    config: Value,
    hash: String,
    seed: u64,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, config: Value, seed: u64) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        let hash = config_hash(&config);
        Ok(Artifacts { dir: dir.to_path_buf(), config, hash, seed, written: Vec::new() })
    }

    pub fn csv(&mut self, stem: &str, header: &[&str], rows: Vec<Vec<Cell>>) -> std::io::Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in &rows {
            let line: Vec<String> = row.iter().map(render).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        self.write(&format!("{stem}.csv"), stem, &text)
    }

    pub fn json(&mut self, stem: &str, value: &impl Serialize) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(&format!("{stem}.json"), stem, &text)
    }

    fn write(&mut self, name: &str, stem: &str, text: &str) -> std::io::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        let prov = json!({
            "artifact": name,
            "artifact_sha256": hex(&Sha256::digest(text.as_bytes())),
            "config": self.config,
            "config_sha256": self.hash,
            "seed": self.seed,
            "lfv_version": env!("CARGO_PKG_VERSION"),
            "tolerances": tolerances(),
        });
        let mut p = serde_json::to_string_pretty(&prov).map_err(std::io::Error::other)?;
        p.push('\n');
        fs::write(self.dir.join(format!("{stem}.provenance.json")), p)?;
        self.written.push(path);
        Ok(())
    }
}

/// Library tolerances that affect artifact values, recorded with each file.
fn tolerances() -> Value {
    json!({
        "stationary_residual": RESIDUAL_TOL,
        "absorption_threshold": FIX_THRESHOLD,
    })
}

pub fn config_hash(config: &Value) -> String {
    hex(&Sha256::digest(config.to_string().as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.5e-300, -7.0, f64::MIN_POSITIVE, 123456789.123456789] {
            let s = fmt_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn text_cells_are_quoted_when_needed() {
        assert_eq!(render(&Cell::from("2,1,1")), "\"2,1,1\"");
        assert_eq!(render(&Cell::from("series")), "series");
    }

    #[test]
    fn hash_depends_on_config() {
        assert_ne!(config_hash(&json!({"n": 1})), config_hash(&json!({"n": 2})));
        assert_eq!(config_hash(&json!({"n": 1})).len(), 64);
    }
}
