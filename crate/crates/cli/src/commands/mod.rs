//! Subcommands. Each has a `run` that returns engine results and rendered
//! documents, and an `execute` that writes files and returns the text for
//! standard output.

pub mod constants;
pub mod convergence;
pub mod couple;
pub mod simulate;
pub mod verify;

use std::path::Path;

use crate::config::{ExperimentConfig, Format};
use crate::error::Result;
use crate::io::{self, Manifest};

/// Write the rendered JSON/CSV documents selected by `output.formats`, plus
/// a manifest, and list what was written.
pub(crate) fn write_documents(
    cfg: &ExperimentConfig,
    command: &str,
    stem: &str,
    json: &str,
    csv: &str,
) -> Result<Vec<String>> {
    let dir: &Path = &cfg.output.dir;
    io::create_dir(dir)?;
    let mut manifest = Manifest::new(command, cfg.sim.seed, cfg);
    let mut written = Vec::new();
    if cfg.output.wants(Format::Json) {
        written.push(manifest.add(dir, &format!("{stem}.json"), None, json.as_bytes())?);
    }
    if cfg.output.wants(Format::Csv) {
        written.push(manifest.add(dir, &format!("{stem}.csv"), None, csv.as_bytes())?);
    }
    written.push(manifest.write(dir)?);
    Ok(written.iter().map(|p| p.display().to_string()).collect())
}
