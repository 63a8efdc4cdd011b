//! On-disk model and manifest wrappers.
//!
//! Every output of the CLI embeds (or sits next to) a manifest recording the
//! tool version, format version, master seed, and the flags that produced
//! it. Manifests contain no timestamps, so identical invocations produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use cgp_core::model_io::{self, SavedModel};

use crate::error::{CliError, Result};

pub const TOOL: &str = "cgp";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub format_version: u32,
    pub master_seed: u64,
    /// Flag name to rendered value, sorted for stable serialization.
    pub args: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(master_seed: u64, args: BTreeMap<String, String>) -> Self {
        Manifest {
            tool: TOOL.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: model_io::FORMAT_VERSION,
            master_seed,
            args,
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct ModelFile {
    pub manifest: Manifest,
    pub model: SavedModel,
}

pub fn save_model(path: &Path, file: &ModelFile) -> Result<()> {
    let json = serde_json::to_string_pretty(file)?;
    fs::write(path, json).map_err(|e| CliError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let raw = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: ModelFile = serde_json::from_str(&raw)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    if file.model.format_version != model_io::FORMAT_VERSION {
        return Err(CliError::Parse(format!(
            "{}: model format version {} not supported (expected {})",
            path.display(),
            file.model.format_version,
            model_io::FORMAT_VERSION
        )));
    }
    Ok(file)
}

/// Writes the sidecar manifest for a CSV output.
pub fn write_manifest_sidecar(out: &Path, manifest: &Manifest) -> Result<()> {
    let mut path = out.as_os_str().to_owned();
    path.push(".manifest.json");
    let path = Path::new(&path);
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(path, json).map_err(|e| CliError::io(path, e))
}
