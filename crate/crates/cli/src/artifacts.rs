//! Run-directory plumbing: hashed manifests, CSV traces, image round trips.

use std::fs;
use std::path::{Path, PathBuf};

use red_core::{load_image, save_image, Image, RunReport};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{write_err, CliError};

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Runtime(format!("cannot hash {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub task: String,
    pub seed: u64,
    pub red_version: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

/// Collects every file written into one run directory.
pub struct RunDir {
    root: PathBuf,
    inputs: Vec<FileHash>,
    outputs: Vec<PathBuf>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| write_err(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = sha256_file(path).map_err(|e| CliError::Config(e.to_string()))?;
        let path = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
        self.inputs.push(FileHash { path, sha256 });
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| write_err(&path, e))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn write_toml<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = toml::to_string(value).map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
        self.write_text(name, &text)
    }

    /// Saves `img` as 8-bit PNG and returns what was persisted.
    pub fn save_image(&mut self, name: &str, img: &Image) -> Result<Image, CliError> {
        let path = self.path(name);
        save_image(img, &path).map_err(|e| write_err(&path, e))?;
        self.outputs.push(path.clone());
        load_image(&path).map_err(|e| CliError::Runtime(e.to_string()))
    }

    pub fn csv(&mut self, name: &str, header: &[&str]) -> Result<csv::Writer<fs::File>, CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        self.outputs.push(path);
        Ok(w)
    }

    /// CSV with the header taken from the row type's field names.
    pub fn write_rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| write_err(&path, e))?;
        self.outputs.push(path);
        Ok(())
    }

    /// Writes `manifest.toml`; call last.
    pub fn finish(self, task: &str, seed: u64) -> Result<(), CliError> {
        let outputs = self
            .outputs
            .iter()
            .map(|p| {
                Ok(FileHash {
                    path: p.file_name().map(PathBuf::from).unwrap_or_else(|| p.clone()),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let manifest = Manifest {
            task: task.to_string(),
            seed,
            red_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            outputs,
        };
        let path = self.root.join("manifest.toml");
        let text = toml::to_string(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(&path, text).map_err(|e| write_err(&path, e))
    }
}

pub const TRACE_HEADER: [&str; 4] = ["iteration", "energy", "grad_norm", "psnr"];

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per recorded iterate; row 0 is the initial point.
pub fn write_trace(dir: &mut RunDir, name: &str, report: &RunReport) -> Result<(), CliError> {
    let mut w = dir.csv(name, &TRACE_HEADER)?;
    for (k, (e, g)) in report.energy_trace.iter().zip(&report.grad_norm_trace).enumerate() {
        let p = report.psnr_trace.as_ref().map(|t| t[k]);
        w.write_record([k.to_string(), e.to_string(), g.to_string(), fmt_opt(p)])?;
    }
    w.flush().map_err(|e| write_err(&dir.path(name), e))
}

/// `beta_k` and `sigma_f(k)` of a Plug-and-Play run, one row per outer iteration.
pub fn write_schedule(dir: &mut RunDir, name: &str, report: &RunReport) -> Result<(), CliError> {
    let Some(s) = &report.schedule else {
        return Ok(());
    };
    let mut w = dir.csv(name, &["iteration", "beta", "sigma_f"])?;
    for (k, (b, sf)) in s.beta.iter().zip(&s.sigma_f).enumerate() {
        w.write_record([(k + 1).to_string(), b.to_string(), sf.to_string()])?;
    }
    w.flush().map_err(|e| write_err(&dir.path(name), e))
}
