//! Run records embedded in JSON outputs and written beside CSV outputs.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crvar_core::config::RunConfig;

/// What produced an artifact: tool version, subcommand, the effective
/// configuration and digests of the input files. Output paths are left
/// out so identical runs into different directories agree byte for byte.
#[derive(Debug, Clone)]
pub struct Provenance {
    command: &'static str,
    config: Option<RunConfig>,
    arguments: Value,
    inputs: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &'static str, config: Option<&RunConfig>, arguments: impl Serialize) -> Result<Self> {
        Ok(Provenance {
            command,
            config: config.cloned(),
            arguments: serde_json::to_value(arguments)?,
            inputs: Vec::new(),
        })
    }

    /// Records the SHA-256 of an input file.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.inputs.push((name, digest));
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        let inputs: Vec<Value> = self
            .inputs
            .iter()
            .map(|(name, sha)| json!({ "file": name, "sha256": sha }))
            .collect();
        json!({
            "tool": "crvar",
            "version": crvar_core::VERSION,
            "command": self.command,
            "arguments": self.arguments,
            "config": self.config,
            "inputs": inputs,
        })
    }

    /// Writes `<output>.provenance.json`.
    pub fn write_sidecar(&self, output: &Path) -> Result<PathBuf> {
        let path = sidecar_path(output);
        let mut text = serde_json::to_string_pretty(&self.to_value())?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    output.with_file_name(name)
}

/// `report.json` -> `report.roc.csv`.
pub fn roc_path(report: &Path) -> PathBuf {
    report.with_extension("roc.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_paths() {
        assert_eq!(sidecar_path(Path::new("d/f.csv")), PathBuf::from("d/f.csv.provenance.json"));
        assert_eq!(roc_path(Path::new("d/report.json")), PathBuf::from("d/report.roc.csv"));
    }

    #[test]
    fn output_paths_do_not_leak() {
        let p = Provenance::new("train", Some(&RunConfig::default()), json!({ "seed": 3 })).unwrap();
        let v = p.to_value();
        assert_eq!(v["command"], "train");
        assert_eq!(v["config"]["folds"], 5);
        assert_eq!(v["version"], crvar_core::VERSION);
    }
}
