//! Reference-law ensemble written as one text file per path.

use ntci_core::simulate::simulate_ensemble;
use ntci_core::{Executor, PathEnsemble};

use crate::config::ExperimentConfig;
use crate::error::{Result, Stage};
use crate::io::{self, Manifest};

pub fn run<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<PathEnsemble> {
    let ex = cfg.experiment()?;
    simulate_ensemble(&ex.coeffs, &ex.initial, &ex.sim, None, exec).stage("simulate")
}

pub fn path_file_name(index: usize) -> String {
    format!("path_{index:05}.txt")
}

/// Writes `output.dir/paths/path_NNNNN.txt` and `output.dir/manifest.json`.
pub fn execute<E: Executor>(cfg: &ExperimentConfig, exec: &E) -> Result<String> {
    let ens = run(cfg, exec)?;
    let dir = cfg.output.dir.join("paths");
    io::create_dir(&dir)?;
    let mut manifest = Manifest::new("simulate", cfg.sim.seed, cfg);
    for (i, (p, seed)) in ens.paths().iter().zip(ens.seeds()).enumerate() {
        let name = path_file_name(i);
        manifest.add(&dir, &name, Some(*seed), io::format_path(p).as_bytes())?;
        manifest.files.last_mut().expect("entry just added").file = format!("paths/{name}");
    }
    let m = manifest.write(&cfg.output.dir)?;
    Ok(format!(
        "simulated {} paths ({} steps each)\nmanifest {}\n",
        ens.len(),
        ens.paths().first().map(|p| p.steps()).unwrap_or(0),
        m.display()
    ))
}
