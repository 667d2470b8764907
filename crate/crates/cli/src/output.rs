//! Output directory bookkeeping: every file goes through [`OutDir::write`] so
//! the manifest can list it.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub struct OutDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Writes `manifest.json` listing every file written so far and itself.
    pub fn finish(mut self, mut manifest: serde_json::Value) -> Result<Vec<String>> {
        self.files.push("manifest.json".into());
        self.files.sort();
        manifest["files"] = serde_json::json!(self.files);
        let files = self.files.clone();
        self.write_json("manifest.json", &manifest)?;
        Ok(files)
    }
}

/// Label of `p` in file names: `2`, `1.1`, `3.75`.
pub fn p_label(p: f64) -> String {
    format!("{p}")
}

/// CSV with `header` and one row per entry of `rows`.
pub fn csv(header: &str, rows: &[Vec<String>]) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}
