use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Provenance record written as `manifest.txt`. It carries no timestamps
/// or absolute paths, so identical runs produce identical manifests.
#[derive(Debug, Default)]
pub struct Manifest {
    pub subcommand: String,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn render(&self) -> Result<String> {
        let mut s = String::new();
        s.push_str(&format!("tool trialscope {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("subcommand {}\n", self.subcommand));
        s.push_str(&format!("seed {}\n", self.seed));
        let mut config = self.config.clone();
        config.sort();
        for (k, v) in config {
            s.push_str(&format!("config {k}={v}\n"));
        }
        let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let mut inputs = self.inputs.clone();
        inputs.sort();
        inputs.dedup();
        for p in &inputs {
            s.push_str(&format!("input {} {}\n", sha256_file(p)?, name(p)));
        }
        let mut outputs = self.outputs.clone();
        outputs.sort();
        outputs.dedup();
        for p in &outputs {
            s.push_str(&format!("output {} {}\n", sha256_file(p)?, name(p)));
        }
        Ok(s)
    }
}
