//! Run manifests: what a run produced, in what order, with content hashes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::imat::{atomic_write, read_matrix};
use crate::error::{Error, Result};

/// Semantic role of an artifact in the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileRole {
    /// Stimulus feature matrix.
    S,
    /// Layer activation matrix.
    L,
    /// Decision variable column.
    R,
    /// Feature map artifact.
    Map,
    /// Dissimilarity artifact.
    Rdm,
}

/// One artifact: path relative to the run directory, creation order, role
/// (when it has one), matrix shape (when it is a matrix), content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub order: usize,
    pub role: Option<FileRole>,
    pub shape: Option<(usize, usize)>,
    pub sha256: String,
}

/// JSON record of a run: id, global seed, per-stage seeds, the config that
/// produced it, and the artifact inventory in creation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub seed: u64,
    pub stage_seeds: BTreeMap<String, u64>,
    pub config: serde_json::Value,
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl Manifest {
    pub fn new(run_id: impl Into<String>, seed: u64, config: serde_json::Value) -> Manifest {
        Manifest {
            run_id: run_id.into(),
            seed,
            stage_seeds: BTreeMap::new(),
            config,
            files: Vec::new(),
        }
    }

    pub fn stage_seed(&mut self, stage: &str, seed: u64) {
        self.stage_seeds.insert(stage.to_string(), seed);
    }

    /// Hash an already-written artifact and append it to the inventory.
    pub fn record_file(
        &mut self,
        run_dir: &Path,
        rel_path: &str,
        role: Option<FileRole>,
        shape: Option<(usize, usize)>,
    ) -> Result<()> {
        let bytes = fs::read(run_dir.join(rel_path))?;
        self.files.push(ManifestEntry {
            path: rel_path.to_string(),
            order: self.files.len(),
            role,
            shape,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Write `manifest.json` into the run directory.
    pub fn write(&self, run_dir: &Path) -> Result<PathBuf> {
        let path = run_dir.join(MANIFEST_NAME);
        atomic_write(&path, self.to_json()?.as_bytes())?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let bytes = fs::read(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.display().to_string())
            } else {
                Error::from(e)
            }
        })?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Check the inventory against the directory: every file exists, hashes
    /// match, and declared matrix shapes match the stored headers.
    pub fn verify(&self, run_dir: &Path) -> Result<()> {
        for entry in &self.files {
            let path = run_dir.join(&entry.path);
            let bytes = fs::read(&path).map_err(|e| {
                if e.kind() == std::io::ErrorKind::NotFound {
                    Error::MissingInput(path.display().to_string())
                } else {
                    Error::from(e)
                }
            })?;
            let hash = sha256_hex(&bytes);
            if hash != entry.sha256 {
                return Err(Error::CorruptFile {
                    path: path.display().to_string(),
                    detail: format!("sha256 {hash} does not match manifest {}", entry.sha256),
                });
            }
            if let Some(shape) = entry.shape {
                let m = read_matrix(&path)?;
                if m.dim() != shape {
                    return Err(Error::CorruptFile {
                        path: path.display().to_string(),
                        detail: format!(
                            "shape {:?} does not match manifest {:?}",
                            m.dim(),
                            shape
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::imat::write_matrix;
    use ndarray::Array2;

    fn sample_manifest(dir: &Path) -> Manifest {
        let m = Array2::from_shape_fn((3, 2), |(i, j)| i as f64 + j as f64 * 0.5);
        write_matrix(&dir.join("s.imat"), &m).unwrap();
        fs::write(dir.join("history.json"), b"{}\n").unwrap();
        let mut manifest = Manifest::new(
            "test-run",
            7,
            serde_json::json!({"preset": "smoke", "seed": 7}),
        );
        manifest.stage_seed("train", 42);
        manifest
            .record_file(dir, "s.imat", Some(FileRole::S), Some((3, 2)))
            .unwrap();
        manifest.record_file(dir, "history.json", None, None).unwrap();
        manifest
    }

    #[test]
    fn round_trip_preserves_everything() {
        let d = tempfile::tempdir().unwrap();
        let manifest = sample_manifest(d.path());
        let path = manifest.write(d.path()).unwrap();
        let back = Manifest::read(&path).unwrap();
        assert_eq!(manifest, back);
        assert_eq!(back.files[0].order, 0);
        assert_eq!(back.files[1].order, 1);
        assert_eq!(back.files[0].role, Some(FileRole::S));
    }

    #[test]
    fn serialization_is_deterministic() {
        let d = tempfile::tempdir().unwrap();
        let manifest = sample_manifest(d.path());
        assert_eq!(manifest.to_json().unwrap(), manifest.to_json().unwrap());
        manifest.write(d.path()).unwrap();
        let a = fs::read(d.path().join(MANIFEST_NAME)).unwrap();
        manifest.write(d.path()).unwrap();
        let b = fs::read(d.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn verify_accepts_intact_run() {
        let d = tempfile::tempdir().unwrap();
        let manifest = sample_manifest(d.path());
        manifest.verify(d.path()).unwrap();
    }

    #[test]
    fn verify_catches_missing_file() {
        let d = tempfile::tempdir().unwrap();
        let manifest = sample_manifest(d.path());
        fs::remove_file(d.path().join("history.json")).unwrap();
        assert!(matches!(
            manifest.verify(d.path()),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn verify_catches_content_change() {
        let d = tempfile::tempdir().unwrap();
        let manifest = sample_manifest(d.path());
        fs::write(d.path().join("history.json"), b"{\"edited\": true}\n").unwrap();
        assert!(matches!(
            manifest.verify(d.path()),
            Err(Error::CorruptFile { .. })
        ));
    }

    #[test]
    fn verify_catches_shape_mismatch() {
        let d = tempfile::tempdir().unwrap();
        let mut manifest = sample_manifest(d.path());
        manifest.files[0].shape = Some((2, 3));
        // refresh the hash so only the shape is wrong
        let bytes = fs::read(d.path().join("s.imat")).unwrap();
        manifest.files[0].sha256 = sha256_hex(&bytes);
        match manifest.verify(d.path()) {
            Err(Error::CorruptFile { detail, .. }) => {
                assert!(detail.contains("shape"), "{detail}")
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn roles_serialize_lowercase() {
        let json = serde_json::to_string(&FileRole::Map).unwrap();
        assert_eq!(json, "\"map\"");
        let json = serde_json::to_string(&FileRole::S).unwrap();
        assert_eq!(json, "\"s\"");
    }
}
