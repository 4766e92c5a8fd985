//! Versioned JSON documents, atomic writes and the hash manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::SeedStreams;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: unsupported format_version {found} (expected {FORMAT_VERSION})")]
    Version { path: String, found: u32 },
    #[error("{path}: missing artifact; run the `{stage}` stage first")]
    Missing { path: String, stage: &'static str },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Envelope shared by every JSON artifact.
#[derive(Serialize, Deserialize)]
struct Document<T> {
    format_version: u32,
    kind: String,
    body: T,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
    kind: String,
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so an
/// interrupted stage never leaves a half-written artifact behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_document<T: Serialize>(path: &Path, kind: &str, body: &T) -> Result<(), ArtifactError> {
    let doc = Document {
        format_version: FORMAT_VERSION,
        kind: kind.to_owned(),
        body,
    };
    let mut text = serde_json::to_vec_pretty(&doc).map_err(|e| ArtifactError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push(b'\n');
    write_atomic(path, &text)
}

pub fn read_document<T: DeserializeOwned>(
    path: &Path,
    kind: &str,
    stage: &'static str,
) -> Result<T, ArtifactError> {
    if !path.exists() {
        return Err(ArtifactError::Missing {
            path: path.display().to_string(),
            stage,
        });
    }
    let text = fs::read(path).map_err(io_err(path))?;
    let format = |message: String| ArtifactError::Format {
        path: path.display().to_string(),
        message,
    };
    let header: Header = serde_json::from_slice(&text).map_err(|e| format(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(ArtifactError::Version {
            path: path.display().to_string(),
            found: header.format_version,
        });
    }
    if header.kind != kind {
        return Err(format(format!("expected a `{kind}` document, found `{}`", header.kind)));
    }
    let doc: Document<T> = serde_json::from_slice(&text).map_err(|e| format(e.to_string()))?;
    Ok(doc.body)
}

pub fn sha256_file(path: &Path) -> Result<String, ArtifactError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Seeds, versions and content hashes of everything in an output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub master_seed: u64,
    pub seeds: Option<SeedStreams>,
    pub config_sha256: String,
    /// Relative path to SHA-256, for every artifact written so far.
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Discrepancy {
    Missing(String),
    Modified(String),
}

impl std::fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Discrepancy::Missing(p) => write!(f, "missing: {p}"),
            Discrepancy::Modified(p) => write!(f, "hash mismatch: {p}"),
        }
    }
}

impl Manifest {
    pub fn load_or_default(dir: &Path) -> Result<Self, ArtifactError> {
        let path = dir.join(MANIFEST_FILE);
        if path.exists() {
            read_document(&path, "manifest", "pipeline")
        } else {
            Ok(Self::default())
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), ArtifactError> {
        write_document(&dir.join(MANIFEST_FILE), "manifest", self)
    }

    /// Hashes `relative` (inside `dir`) and records it.
    pub fn record(&mut self, dir: &Path, relative: &str) -> Result<(), ArtifactError> {
        let hash = sha256_file(&dir.join(relative))?;
        self.files.insert(relative.to_owned(), hash);
        Ok(())
    }

    /// Re-hashes every listed file.
    pub fn verify(&self, dir: &Path) -> Result<Vec<Discrepancy>, ArtifactError> {
        let mut out = Vec::new();
        for (rel, hash) in &self.files {
            let path = dir.join(rel);
            if !path.exists() {
                out.push(Discrepancy::Missing(rel.clone()));
            } else if &sha256_file(&path)? != hash {
                out.push(Discrepancy::Modified(rel.clone()));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        write_document(&path, "numbers", &vec![1.5, 2.25]).unwrap();
        let back: Vec<f64> = read_document(&path, "numbers", "test").unwrap();
        assert_eq!(back, vec![1.5, 2.25]);

        assert!(matches!(
            read_document::<Vec<f64>>(&path, "other", "test"),
            Err(ArtifactError::Format { .. })
        ));
        let text = fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 9");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            read_document::<Vec<f64>>(&path, "numbers", "test"),
            Err(ArtifactError::Version { found: 9, .. })
        ));
        assert!(matches!(
            read_document::<Vec<f64>>(&dir.path().join("none.json"), "numbers", "test"),
            Err(ArtifactError::Missing { .. })
        ));
    }

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("abc");
        fs::write(&path, b"abc").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        fs::write(dir.path().join("b.csv"), "y\n2\n").unwrap();
        let mut m = Manifest::default();
        m.record(dir.path(), "a.csv").unwrap();
        m.record(dir.path(), "b.csv").unwrap();
        m.save(dir.path()).unwrap();
        let m = Manifest::load_or_default(dir.path()).unwrap();
        assert!(m.verify(dir.path()).unwrap().is_empty());

        fs::write(dir.path().join("a.csv"), "x\n3\n").unwrap();
        fs::remove_file(dir.path().join("b.csv")).unwrap();
        assert_eq!(
            m.verify(dir.path()).unwrap(),
            vec![
                Discrepancy::Modified("a.csv".into()),
                Discrepancy::Missing("b.csv".into())
            ]
        );
    }
}
