use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use snls::experiments::{write_diagnostics_csv, DiagnosticRow, MeanCurves};

pub const CODE_VERSION: &str = concat!("snls ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to repeat a run: the command, the effective recipe and
/// the hashes of what it produced.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, R: Serialize> {
    pub code_version: &'a str,
    pub command: &'a str,
    pub seed: u64,
    pub recipe: &'a R,
    pub result: serde_json::Value,
    pub files: Vec<FileEntry>,
}

/// Output directory that remembers the files written to it.
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn target(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.written.push(PathBuf::from(rel));
        Ok(path)
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        let path = self.target(rel)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(rel, &text)
    }

    pub fn write_rows(&mut self, rel: &str, rows: &[DiagnosticRow]) -> Result<()> {
        let path = self.target(rel)?;
        let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        write_diagnostics_csv(rows, BufWriter::new(file))?;
        Ok(())
    }

    /// Registers a file written by someone else (e.g. a worker thread).
    pub fn record(&mut self, rel: &str) {
        self.written.push(PathBuf::from(rel));
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Writes `manifest.json` listing every recorded file with its hash.
    pub fn finish<R: Serialize>(
        self,
        command: &str,
        seed: u64,
        recipe: &R,
        result: serde_json::Value,
    ) -> Result<()> {
        let mut files = Vec::with_capacity(self.written.len());
        for rel in &self.written {
            let bytes = fs::read(self.root.join(rel))?;
            files.push(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: format!("{:x}", Sha256::digest(&bytes)),
            });
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            code_version: CODE_VERSION,
            command,
            seed,
            recipe,
            result,
            files,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.root.join("manifest.json"), text)?;
        Ok(())
    }
}

pub fn curves_csv(c: &MeanCurves) -> String {
    let mut out = String::from("t,alive,mean_M_dis,var_M_dis,mean_H_dis,var_H_dis\n");
    for k in 0..c.t.len() {
        out.push_str(&format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            c.t[k], c.alive[k], c.mean_mass[k], c.var_mass[k], c.mean_energy[k], c.var_energy[k]
        ));
    }
    out
}
