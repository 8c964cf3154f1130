//! `run.json`: what a rerun needs to reproduce a pipeline's outputs.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const FILE_NAME: &str = "run.json";
pub const TOOL: &str = "pgso";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub flag: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Every flag spelled out, excluding `--out` and `--threads`.
    pub args: Vec<String>,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    /// Written files, relative to the output location.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, config: BTreeMap<String, String>, seed: u64) -> Self {
        Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, flag: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path).with_context(|| format!("{flag}: cannot read {}", path.display()))?;
        self.inputs.push(InputDigest { flag: flag.into(), path: path.to_path_buf(), sha256 });
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).with_context(|| format!("--out: cannot write {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("--manifest: cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("--manifest: {} is not a run manifest", path.display()))
    }

    /// Fails if any recorded input no longer matches its digest.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let now = sha256_file(&input.path)
                .with_context(|| format!("--manifest: input {} ({}) is unreadable", input.path.display(), input.flag))?;
            if now != input.sha256 {
                bail!("--manifest: input {} ({}) changed since the recorded run", input.path.display(), input.flag);
            }
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_stable() {
        let mut config = BTreeMap::new();
        config.insert("epochs".to_string(), "200".to_string());
        config.insert("depth".to_string(), "3".to_string());
        let mut m = RunManifest::new("train", vec!["--seed".into(), "1".into()], config, 1);
        m.outputs.push("history.csv".into());
        let json = m.to_json();
        let back: RunManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), json);
        assert!(json.find("\"depth\"").unwrap() < json.find("\"epochs\"").unwrap());
    }

    #[test]
    fn detects_changed_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        std::fs::write(&p, "3\n0 1\n").unwrap();
        let mut m = RunManifest::new("analyze", vec![], BTreeMap::new(), 0);
        m.add_input("--graph", &p).unwrap();
        m.verify_inputs().unwrap();
        std::fs::write(&p, "3\n0 2\n").unwrap();
        assert!(m.verify_inputs().unwrap_err().to_string().contains("changed"));
    }

    #[test]
    fn digest_of_empty_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e");
        std::fs::write(&p, "").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
