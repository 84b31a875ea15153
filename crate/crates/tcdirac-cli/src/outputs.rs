//! Atomic output emission: everything is written into a staging directory
//! and moved into place only after the whole run succeeded.
//!
//! All CSV files use '.' decimals, ',' separators, '\n' line endings and a
//! mandatory header row; floats are printed with fixed 17-digit scientific
//! notation so byte-identical reruns are a formatting property, not luck.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub struct Stage {
    staging: PathBuf,
    final_dir: PathBuf,
    files: Vec<String>,
}

pub fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

impl Stage {
    pub fn new(out_dir: &Path) -> Result<Self, String> {
        let staging = out_dir.join(".staging");
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| format!("cannot clear staging dir: {e}"))?;
        }
        fs::create_dir_all(&staging)
            .map_err(|e| format!("cannot create output dir {}: {e}", out_dir.display()))?;
        Ok(Stage { staging, final_dir: out_dir.to_path_buf(), files: Vec::new() })
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> Result<(), String> {
        let path = self.staging.join(name);
        let mut f = fs::File::create(&path).map_err(|e| format!("cannot create {name}: {e}"))?;
        f.write_all(content.as_bytes()).map_err(|e| format!("cannot write {name}: {e}"))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), String> {
        let mut out = String::new();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| fmt(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        self.write_text(name, &out)
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), String> {
        let text = serde_json::to_string_pretty(value).map_err(|e| format!("json encode: {e}"))?;
        self.write_text(name, &format!("{text}\n"))
    }

    /// Move every staged file into the output directory and drop the staging
    /// area. Nothing lands in the output directory on failure paths.
    pub fn commit(self) -> Result<Vec<String>, String> {
        for name in &self.files {
            let from = self.staging.join(name);
            let to = self.final_dir.join(name);
            fs::rename(&from, &to).map_err(|e| format!("cannot move {name} into place: {e}"))?;
        }
        fs::remove_dir_all(&self.staging).map_err(|e| format!("cannot remove staging dir: {e}"))?;
        Ok(self.files)
    }

    pub fn abort(self) {
        let _ = fs::remove_dir_all(&self.staging);
    }
}
