use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Version tag of the bundled stopword list. Bump when the list changes.
pub const STOPWORDS_VERSION: &str = "en-1";

const BUNDLED_STOPWORDS: &str = include_str!("stopwords.txt");

/// The bundled English stopword list.
pub fn bundled_stopwords() -> &'static BTreeSet<String> {
    static WORDS: OnceLock<BTreeSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| {
        BUNDLED_STOPWORDS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect()
    })
}

/// Preprocessing knobs shared by tokenization, interference flagging and
/// vocabulary construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Tokens with fewer characters are dropped.
    pub min_token_len: usize,
    /// A term enters the vocabulary only if it occurs in at least this many documents.
    pub min_df: usize,
    /// Non-alphanumeric character ratio above which a document counts as impacted.
    pub interference_ratio: f64,
    pub stopwords_version: String,
    pub stopwords: BTreeSet<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            min_token_len: 2,
            min_df: 2,
            interference_ratio: 0.20,
            stopwords_version: STOPWORDS_VERSION.to_owned(),
            stopwords: bundled_stopwords().clone(),
        }
    }
}

impl IngestConfig {
    /// Same defaults, with a caller-supplied stopword list.
    pub fn with_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        IngestConfig {
            stopwords_version: "custom".to_owned(),
            stopwords: words.into_iter().map(Into::into).collect(),
            ..IngestConfig::default()
        }
    }
}

/// Lowercase, split on anything that is not alphabetic, then drop short
/// tokens and stopwords. Digits and punctuation never survive.
pub fn tokenize(raw_text: &str, config: &IngestConfig) -> Vec<String> {
    // Lowercase before splitting: some case mappings emit combining marks.
    raw_text
        .to_lowercase()
        .split(|c: char| !c.is_alphabetic())
        .filter(|tok| !tok.is_empty() && tok.chars().count() >= config.min_token_len)
        .filter(|tok| !config.stopwords.contains(*tok))
        .map(str::to_owned)
        .collect()
}
