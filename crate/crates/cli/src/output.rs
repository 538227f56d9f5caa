//! Output files with a metadata header.
//!
//! CSV files start with `# key = value` lines. JSON files are an object with a
//! `metadata` member. The only field that varies between identical runs is
//! `wall_time_s`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    /// Full config with defaults, minus the output directory and worker count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
    pub wall_time_s: f64,
}

impl Metadata {
    pub fn for_config(cfg: &RunConfig, wall_time_s: f64) -> Self {
        let mut echo = serde_json::to_value(cfg).expect("config serializes");
        echo["output"].as_object_mut().map(|o| o.remove("dir"));
        echo["mode"].as_object_mut().map(|o| o.remove("workers"));
        let h = cfg.grid.length / (cfg.grid.n as f64 + 1.0);
        Self {
            tool: "stefan".into(),
            version: VERSION.into(),
            config_hash: Some(cfg.hash()),
            seed: Some(cfg.solver.seed),
            grid: Some(json!({ "n": cfg.grid.n, "L": cfg.grid.length, "h": h })),
            dt: Some(cfg.solver.dt),
            scheme: Some(cfg.solver.scheme.to_string()),
            config: Some(echo),
            wall_time_s,
        }
    }

    pub fn bare(wall_time_s: f64) -> Self {
        Self {
            tool: "stefan".into(),
            version: VERSION.into(),
            config_hash: None,
            seed: None,
            grid: None,
            dt: None,
            scheme: None,
            config: None,
            wall_time_s,
        }
    }

    fn csv_header(&self) -> String {
        let mut s = String::new();
        let v = serde_json::to_value(self).expect("metadata serializes");
        for (k, val) in v.as_object().expect("object") {
            let text = match val {
                Value::String(t) => t.clone(),
                other => other.to_string(),
            };
            let _ = writeln!(s, "# {k} = {text}");
        }
        s
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn put(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        self.put(name, contents)
    }

    pub fn csv(
        &mut self,
        name: &str,
        meta: &Metadata,
        columns: &[String],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut s = meta.csv_header();
        s.push_str(&columns.join(","));
        s.push('\n');
        for r in rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        self.put(name, &s)
    }

    /// `{"metadata": …}` merged with the members of `body`.
    pub fn json(&mut self, name: &str, meta: &Metadata, body: Value) -> Result<(), CliError> {
        let mut obj = serde_json::Map::new();
        obj.insert("metadata".into(), serde_json::to_value(meta).expect("metadata serializes"));
        match body {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("json serializes");
        s.push('\n');
        self.put(name, &s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_lists_metadata_first() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = Writer::new(dir.path()).unwrap();
        let meta = Metadata::bare(1.5);
        w.csv("t.csv", &meta, &["a".into(), "b".into()], vec![vec![num(0.1), num(2.0)]]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines.contains(&"# tool = stefan"));
        assert!(lines.contains(&"# wall_time_s = 1.5"));
        assert_eq!(&lines[lines.len() - 2..], &["a,b", "0.1,2"]);
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-17, 6.02e23] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }
}
