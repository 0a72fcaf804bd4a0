//! Run manifest: per-stage input keys and artifact digests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{sha256_hex, CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Digest of everything the stage's output depends on.
    pub key: String,
    /// Artifact path (relative to the output directory) to SHA-256.
    pub artifacts: BTreeMap<String, String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Missing(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

impl RunManifest {
    pub fn load_or_new(out: &Path, config_digest: &str, seed: u64) -> CliResult<Self> {
        let path = out.join(MANIFEST_FILE);
        let mut m = if path.is_file() {
            serde_json::from_slice(&std::fs::read(&path)?)?
        } else {
            RunManifest::default()
        };
        m.tool_version = env!("CARGO_PKG_VERSION").to_string();
        m.config_digest = config_digest.to_string();
        m.seed = seed;
        Ok(m)
    }

    pub fn save(&self, out: &Path) -> CliResult<()> {
        let tmp = out.join(format!("{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        std::fs::rename(tmp, out.join(MANIFEST_FILE))?;
        Ok(())
    }

    /// True when `stage` was completed with `key` and its artifacts are
    /// still on disk unchanged.
    pub fn is_fresh(&self, out: &Path, stage: &str, key: &str) -> bool {
        match self.stages.get(stage) {
            Some(r) if r.key == key => r
                .artifacts
                .iter()
                .all(|(p, d)| file_digest(&out.join(p)).map(|x| &x == d).unwrap_or(false)),
            _ => false,
        }
    }

    pub fn record(&mut self, out: &Path, stage: &str, key: &str, files: &[String], seconds: f64) -> CliResult<()> {
        let mut artifacts = BTreeMap::new();
        for f in files {
            artifacts.insert(f.clone(), file_digest(&out.join(f))?);
        }
        self.stages.insert(stage.to_string(), StageRecord { key: key.to_string(), artifacts, seconds });
        Ok(())
    }

    pub fn digest_of(&self, stage: &str, file: &str) -> Option<&str> {
        self.stages.get(stage)?.artifacts.get(file).map(String::as_str)
    }

    /// Re-hashes every artifact of `stage`; errors on any mismatch.
    pub fn verify(&self, out: &Path, stage: &str) -> CliResult<()> {
        let r = self
            .stages
            .get(stage)
            .ok_or_else(|| CliError::Missing(format!("stage `{stage}` has not been run")))?;
        for (p, d) in &r.artifacts {
            if &file_digest(&out.join(p))? != d {
                return Err(CliError::Missing(format!("{p} changed since stage `{stage}` recorded it")));
            }
        }
        Ok(())
    }
}

/// Digest of a list of labelled parts, for stage keys.
pub fn key_of(parts: &[(&str, &str)]) -> String {
    let mut s = String::new();
    for (k, v) in parts {
        s.push_str(k);
        s.push('\u{1f}');
        s.push_str(v);
        s.push('\u{1e}');
    }
    sha256_hex(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn freshness_tracks_key_and_content() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "x").unwrap();
        let mut m = RunManifest::load_or_new(dir.path(), "cfg", 1).unwrap();
        m.record(dir.path(), "s", "k1", &["a.txt".into()], 0.0).unwrap();
        assert!(m.is_fresh(dir.path(), "s", "k1"));
        assert!(!m.is_fresh(dir.path(), "s", "k2"));
        m.save(dir.path()).unwrap();
        let m = RunManifest::load_or_new(dir.path(), "cfg", 1).unwrap();
        std::fs::write(dir.path().join("a.txt"), "y").unwrap();
        assert!(!m.is_fresh(dir.path(), "s", "k1"));
        assert!(m.verify(dir.path(), "s").is_err());
    }

    #[test]
    fn keys_separate_parts() {
        assert_ne!(key_of(&[("a", "bc")]), key_of(&[("ab", "c")]));
    }
}
