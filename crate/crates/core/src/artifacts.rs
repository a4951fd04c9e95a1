//! On-disk artifacts and the workspace layout that chains them.
//!
//! Machine-written JSON artifacts share one envelope:
//!
//! ```json
//! {"v":1,"kind":"model","digest":"<sha256 of body>","body":{...}}
//! ```
//!
//! The digest is taken over the exact body bytes, so corruption is detected
//! on load and downstream artifacts can record which upstream they used.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::Corpus;
use crate::lda::TopicModel;
use crate::rules::CategoryMapping;

pub const ENVELOPE_VERSION: u32 = 1;
pub const CLASSIFICATION_META_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: invalid JSON: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: schema version {found} not supported (expected {expected})", path.display())]
    Version { path: PathBuf, found: u32, expected: u32 },
    #[error("{}: expected a {expected} artifact, found {found}", path.display())]
    WrongKind {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{}: digest mismatch, file is corrupt", path.display())]
    Corrupt { path: PathBuf },
    #[error("stale artifact: {0}")]
    Stale(String),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Json {
        path: path.to_path_buf(),
        source,
    }
}

/// Write via a temporary sibling and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, ArtifactError> {
    fs::read(path).map_err(io_err(path))
}

/// Serialize `body` inside an envelope. Returns the file text and the body digest.
pub fn encode_envelope<T: Serialize>(kind: &str, body: &T) -> Result<(String, String), serde_json::Error> {
    let body = serde_json::to_string(body)?;
    let digest = sha256_hex(body.as_bytes());
    let text = format!(
        "{{\"v\":{ENVELOPE_VERSION},\"kind\":{},\"digest\":\"{digest}\",\"body\":{body}}}\n",
        serde_json::to_string(kind)?
    );
    Ok((text, digest))
}

#[derive(Deserialize)]
struct EnvelopeIn<'a> {
    v: u32,
    kind: String,
    digest: String,
    #[serde(borrow)]
    body: &'a serde_json::value::RawValue,
}

/// Parse an envelope, verifying version, kind and digest.
pub fn decode_envelope<T: DeserializeOwned>(path: &Path, kind: &str, text: &str) -> Result<(T, String), ArtifactError> {
    let env: EnvelopeIn<'_> = serde_json::from_str(text).map_err(json_err(path))?;
    if env.v != ENVELOPE_VERSION {
        return Err(ArtifactError::Version {
            path: path.into(),
            found: env.v,
            expected: ENVELOPE_VERSION,
        });
    }
    if env.kind != kind {
        return Err(ArtifactError::WrongKind {
            path: path.into(),
            expected: kind.into(),
            found: env.kind,
        });
    }
    if sha256_hex(env.body.get().as_bytes()) != env.digest {
        return Err(ArtifactError::Corrupt { path: path.into() });
    }
    let body = serde_json::from_str(env.body.get()).map_err(json_err(path))?;
    Ok((body, env.digest))
}

fn save_enveloped<T: Serialize>(path: &Path, kind: &str, body: &T) -> Result<String, ArtifactError> {
    let (text, digest) = encode_envelope(kind, body).map_err(json_err(path))?;
    write_atomic(path, text.as_bytes())?;
    Ok(digest)
}

fn load_enveloped<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<(T, String), ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    decode_envelope(path, kind, &text)
}

/// Returns the corpus digest.
pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<String, ArtifactError> {
    save_enveloped(path, "corpus", corpus)
}

pub fn load_corpus(path: &Path) -> Result<(Corpus, String), ArtifactError> {
    load_enveloped(path, "corpus")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    /// Digest of the corpus artifact the model was trained on.
    pub corpus_digest: String,
    pub model: TopicModel,
}

/// Returns the model digest.
pub fn save_model(path: &Path, file: &ModelFile) -> Result<String, ArtifactError> {
    save_enveloped(path, "model", file)
}

pub fn load_model(path: &Path) -> Result<(ModelFile, String), ArtifactError> {
    load_enveloped(path, "model")
}

pub fn mapping_digest(mapping: &CategoryMapping) -> String {
    sha256_hex(serde_json::to_string(mapping).expect("mapping serializes").as_bytes())
}

/// Mapping files are hand-edited, so they are plain pretty JSON.
pub fn save_mapping(path: &Path, mapping: &CategoryMapping) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string_pretty(mapping).map_err(json_err(path))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn load_mapping(path: &Path) -> Result<CategoryMapping, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

/// Sidecar written next to a classification CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationMeta {
    pub v: u32,
    pub corpus_digest: String,
    pub model_digest: String,
    pub mapping_digest: String,
    pub rank_rule: String,
    pub keyword: String,
    /// SHA-256 of the CSV bytes.
    pub classification_digest: String,
}

pub fn classification_meta_path(csv_path: &Path) -> PathBuf {
    let mut p = csv_path.as_os_str().to_owned();
    p.push(".meta.json");
    PathBuf::from(p)
}

pub fn save_classification_meta(csv_path: &Path, meta: &ClassificationMeta) -> Result<(), ArtifactError> {
    let path = classification_meta_path(csv_path);
    let mut text = serde_json::to_string_pretty(meta).map_err(json_err(&path))?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())
}

pub fn load_classification_meta(csv_path: &Path) -> Result<Option<ClassificationMeta>, ArtifactError> {
    let path = classification_meta_path(csv_path);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let meta: ClassificationMeta = serde_json::from_str(&text).map_err(json_err(&path))?;
    if meta.v != CLASSIFICATION_META_VERSION {
        return Err(ArtifactError::Version {
            path,
            found: meta.v,
            expected: CLASSIFICATION_META_VERSION,
        });
    }
    Ok(Some(meta))
}

/// Conventional file names inside a workspace directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus(&self) -> PathBuf {
        self.root.join("corpus.json")
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model.json")
    }

    pub fn mapping(&self) -> PathBuf {
        self.root.join("mapping.json")
    }

    pub fn classification(&self) -> PathBuf {
        self.root.join("classification.csv")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn ui_dir(&self) -> PathBuf {
        self.root.join("ui")
    }

    /// Timestamps go here, never into artifacts.
    pub fn log(&self) -> PathBuf {
        self.root.join("run.log")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    use crate::ingest::{build_corpus, Administration, DocumentMeta, IngestConfig};

    fn tiny_corpus() -> Corpus {
        let metas = vec![
            DocumentMeta::new("a", Administration::Reagan, 1983),
            DocumentMeta::new("b", Administration::Bush, 1991),
        ];
        let texts: HashMap<_, _> = [("a", "missile treaty"), ("b", "missile treaty soviet")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        build_corpus(&metas, &texts, &IngestConfig::default()).unwrap()
    }

    #[test]
    fn corpus_round_trip_and_digest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        let corpus = tiny_corpus();
        let digest = save_corpus(&path, &corpus).unwrap();
        let (back, d2) = load_corpus(&path).unwrap();
        assert_eq!(back, corpus);
        assert_eq!(digest, d2);
    }

    #[test]
    fn corruption_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        save_corpus(&path, &tiny_corpus()).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("missile", "missilf");
        fs::write(&path, text).unwrap();
        assert!(matches!(load_corpus(&path), Err(ArtifactError::Corrupt { .. })));
    }

    #[test]
    fn wrong_kind_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        save_corpus(&path, &tiny_corpus()).unwrap();
        assert!(matches!(load_model(&path), Err(ArtifactError::WrongKind { .. })));
        let text = fs::read_to_string(&path).unwrap().replacen("\"v\":1", "\"v\":9", 1);
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_corpus(&path),
            Err(ArtifactError::Version { found: 9, .. })
        ));
    }

    #[test]
    fn mapping_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mapping.json");
        let m = CategoryMapping::all_other(3);
        save_mapping(&path, &m).unwrap();
        assert_eq!(load_mapping(&path).unwrap(), m);
        assert_eq!(mapping_digest(&m), mapping_digest(&load_mapping(&path).unwrap()));
    }

    #[test]
    fn missing_meta_is_none() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(load_classification_meta(&dir.path().join("c.csv")).unwrap(), None);
        assert!(classification_meta_path(Path::new("out/c.csv")).ends_with("c.csv.meta.json"));
    }
}
