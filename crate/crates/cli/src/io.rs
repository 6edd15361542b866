//! File formats: plain-text path files, JSON documents, CSV rows and the
//! run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ntci_core::SegmentPath;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Version of every JSON and CSV layout written by this crate.
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

fn io_err<'a>(stage: &'static str, path: &'a Path) -> impl FnOnce(std::io::Error) -> CliError + 'a {
    move |source| CliError::Io {
        stage,
        path: path.to_path_buf(),
        source,
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err("output", dir))
}

/// Header `# dt= tau= T= d=`, then one `t v_1 … v_d` line per grid point
/// from `-τ` to `T`.
pub fn format_path(p: &SegmentPath) -> String {
    let g = p.grid();
    let mut s = String::new();
    writeln!(s, "# dt={:.16e} tau={:.16e} T={:.16e} d={}", g.dt(), g.delay(), p.horizon(), g.dim()).unwrap();
    for i in 0..p.len_points() {
        write!(s, "{:.16e}", p.time(i)).unwrap();
        for v in p.point(i) {
            write!(s, " {v:.16e}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

/// Write `bytes` and return their SHA-256.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<String> {
    fs::write(path, bytes).map_err(io_err("output", path))?;
    Ok(sha256_hex(bytes))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Output {
        stage: "output",
        detail: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

/// Header plus one line per record.
pub fn to_csv<T: Serialize>(records: &[T]) -> Result<String> {
    let err = |e: csv::Error| CliError::Output {
        stage: "output",
        detail: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output {
        stage: "output",
        detail: e.to_string(),
    })?;
    String::from_utf8(bytes).map_err(|e| CliError::Output {
        stage: "output",
        detail: e.to_string(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    /// Noise seed of the path (absent for summary files).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub sha256: String,
}

/// Record of a run; the only output that carries a timestamp.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<C: Serialize> {
    pub schema_version: u32,
    pub command: String,
    pub created_unix: u64,
    pub root_seed: u64,
    pub config: C,
    pub files: Vec<ManifestEntry>,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(command: &str, root_seed: u64, config: C) -> Self {
        Manifest {
            schema_version: OUTPUT_SCHEMA_VERSION,
            command: command.to_string(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            root_seed,
            config,
            files: Vec::new(),
        }
    }

    /// Write `bytes` under `dir/name` and record it.
    pub fn add(&mut self, dir: &Path, name: &str, seed: Option<u64>, bytes: &[u8]) -> Result<PathBuf> {
        let path = dir.join(name);
        let sha256 = write_file(&path, bytes)?;
        self.files.push(ManifestEntry {
            file: name.to_string(),
            seed,
            sha256,
        });
        Ok(path)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        write_file(&path, to_json(self)?.as_bytes())?;
        Ok(path)
    }
}
