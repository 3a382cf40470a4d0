//! Run manifests written next to every artifact a command produces.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command_line: Vec<String>,
    /// sha256 of the canonical JSON of the resolved command configuration.
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash a file's contents; directories hash their sorted file listing
/// with contents.
pub fn hash_path(path: &Path) -> std::io::Result<String> {
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        let mut h = Sha256::new();
        for f in files {
            let rel = f.strip_prefix(path).unwrap_or(&f);
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(std::fs::read(&f)?);
            h.update([0]);
        }
        Ok(hex::encode(h.finalize()))
    } else {
        Ok(sha256_hex(&std::fs::read(path)?))
    }
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Collects manifest fields while a command runs.
#[derive(Debug)]
pub struct ManifestBuilder {
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn start(command_line: Vec<String>, config: &impl Serialize) -> Self {
        let config_json = serde_json::to_string(config).expect("config serializes");
        Self {
            manifest: RunManifest {
                tool: "minrepair".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command_line,
                config_hash: sha256_hex(config_json.as_bytes()),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::new(),
                seeds: BTreeMap::new(),
                started_at: now(),
                finished_at: String::new(),
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> std::io::Result<&mut Self> {
        self.manifest
            .inputs
            .insert(path.display().to_string(), hash_path(path)?);
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> std::io::Result<&mut Self> {
        self.manifest
            .outputs
            .insert(path.display().to_string(), hash_path(path)?);
        Ok(self)
    }

    pub fn seed(&mut self, name: &str, seed: u64) -> &mut Self {
        self.manifest.seeds.insert(name.into(), seed);
        self
    }

    pub fn finish(mut self) -> RunManifest {
        self.manifest.finished_at = now();
        self.manifest
    }
}

impl RunManifest {
    /// `<artifact>.manifest.json` next to the primary output.
    pub fn path_for(artifact: &Path) -> PathBuf {
        let mut name = artifact.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        artifact.with_file_name(name)
    }

    pub fn write(&self, artifact: &Path) -> std::io::Result<PathBuf> {
        let path = Self::path_for(artifact);
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        std::fs::write(&path, json)?;
        Ok(path)
    }
}
