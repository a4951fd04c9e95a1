//! Manifest loading, tokenization, interference flagging and corpus encoding.

mod manifest;
mod tokenize;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use manifest::{
    count_by_administration, load_manifest, parse_manifest, write_manifest, Administration, DocumentMeta,
    MANIFEST_HEADER,
};
pub use tokenize::{bundled_stopwords, tokenize, IngestConfig, STOPWORDS_VERSION};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {}: {source}", path.display())]
    MissingFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate doc_id {doc_id:?} at manifest row {row}")]
    DuplicateDocId { doc_id: String, row: usize },
    #[error("malformed manifest row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("no readable text for document {0:?}")]
    MissingText(String),
}

/// A manifest entry together with its text and derived tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub meta: DocumentMeta,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub impacted: bool,
}

impl Document {
    /// Tokenize `raw_text` and resolve the interference flag.
    pub fn new(meta: DocumentMeta, raw_text: String, config: &IngestConfig) -> Self {
        let tokens = tokenize(&raw_text, config);
        let mut doc = Document {
            meta,
            raw_text,
            tokens,
            impacted: false,
        };
        doc.impacted = flag_interference(&doc, config);
        doc
    }

    pub fn doc_id(&self) -> &str {
        &self.meta.doc_id
    }
}

/// Fraction of characters that are neither alphanumeric nor whitespace.
pub fn non_alphanumeric_ratio(text: &str) -> f64 {
    let mut total = 0usize;
    let mut noise = 0usize;
    for c in text.chars() {
        total += 1;
        if !c.is_alphanumeric() && !c.is_whitespace() {
            noise += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        noise as f64 / total as f64
    }
}

/// The manual override wins; otherwise the document is impacted when its
/// noise ratio exceeds `config.interference_ratio`.
pub fn flag_interference(doc: &Document, config: &IngestConfig) -> bool {
    match doc.meta.impacted_override {
        Some(flag) => flag,
        None => non_alphanumeric_ratio(&doc.raw_text) > config.interference_ratio,
    }
}

/// Terms sorted lexicographically; the index of a term is its position.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    digest: String,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Vocabulary {
    /// Build from any set of terms. Order is canonicalized.
    pub fn from_terms<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = terms.into_iter().map(Into::into).collect();
        Self::from_sorted_unique(sorted.into_iter().collect())
    }

    fn from_sorted_unique(terms: Vec<String>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        let mut hasher = Sha256::new();
        for t in &terms {
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hex::encode(hasher.finalize());
        Vocabulary { terms, index, digest }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, index: u32) -> Option<&str> {
        self.terms.get(index as usize).map(String::as_str)
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    /// SHA-256 over the ordered term list; binds models to a vocabulary.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Map tokens to indices, dropping out-of-vocabulary tokens.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.index_of(t.as_ref())).collect()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = String;

    fn try_from(terms: Vec<String>) -> Result<Self, Self::Error> {
        if let Some(w) = terms.windows(2).find(|w| w[0] >= w[1]) {
            return Err(format!("vocabulary not strictly sorted at {:?}", w[1]));
        }
        Ok(Self::from_sorted_unique(terms))
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.terms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedDoc {
    pub doc_id: String,
    pub tokens: Vec<u32>,
}

impl EncodedDoc {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedCorpus {
    pub docs: Vec<EncodedDoc>,
    pub vocab: Vocabulary,
}

impl EncodedCorpus {
    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }

    /// Documents that encode to nothing. They are kept for classification.
    pub fn empty_docs(&self) -> impl Iterator<Item = &str> {
        self.docs.iter().filter(|d| d.is_empty()).map(|d| d.doc_id.as_str())
    }
}

/// Everything ingestion produces: the documents (in manifest order) and
/// their vocabulary encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub config: IngestConfig,
    pub documents: Vec<Document>,
    pub encoded: EncodedCorpus,
}

impl Corpus {
    pub fn metas(&self) -> Vec<DocumentMeta> {
        self.documents.iter().map(|d| d.meta.clone()).collect()
    }

    /// Manifest rows with `impacted_override` filled from the resolved flag,
    /// so every document has a clean/impacted value for grouping.
    pub fn resolved_metas(&self) -> Vec<DocumentMeta> {
        self.documents
            .iter()
            .map(|d| DocumentMeta {
                impacted_override: Some(d.impacted),
                ..d.meta.clone()
            })
            .collect()
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.meta.doc_id == doc_id)
    }
}

/// Read each document's text from `text_root/source_path`.
pub fn load_texts(metas: &[DocumentMeta], text_root: &Path) -> Result<HashMap<String, String>, IngestError> {
    metas
        .par_iter()
        .map(|m| {
            std::fs::read_to_string(text_root.join(&m.source_path))
                .map(|text| (m.doc_id.clone(), text))
                .map_err(|_| IngestError::MissingText(m.doc_id.clone()))
        })
        .collect()
}

/// Tokenize every document, build the vocabulary from terms with document
/// frequency at least `config.min_df`, and encode.
pub fn build_corpus(
    metas: &[DocumentMeta],
    texts: &HashMap<String, String>,
    config: &IngestConfig,
) -> Result<Corpus, IngestError> {
    let documents: Vec<Document> = metas
        .par_iter()
        .map(|m| {
            texts
                .get(&m.doc_id)
                .map(|text| Document::new(m.clone(), text.clone(), config))
                .ok_or_else(|| IngestError::MissingText(m.doc_id.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &documents {
        let distinct: BTreeSet<&str> = doc.tokens.iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let vocab = Vocabulary::from_terms(
        df.into_iter()
            .filter(|(_, n)| *n >= config.min_df)
            .map(|(t, _)| t.to_owned()),
    );

    let docs = documents
        .par_iter()
        .map(|d| EncodedDoc {
            doc_id: d.meta.doc_id.clone(),
            tokens: vocab.encode(&d.tokens),
        })
        .collect();

    Ok(Corpus {
        config: config.clone(),
        documents,
        encoded: EncodedCorpus { docs, vocab },
    })
}
