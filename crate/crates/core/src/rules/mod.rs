//! Weighted category vectors and the document-identification rule.
//!
//! A relevant topic spreads its theta mass over its three ranked categories
//! with [`RankWeights`]; an irrelevant topic sends all of it to Other. A
//! document is selected for reading when it contains the keyword and the
//! Other mass stays below [`OTHER_DOMINANCE_THRESHOLD`].

mod mapping;
mod output;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::category::Category;
use crate::ingest::{Corpus, Document};
use crate::lda::{infer_theta, LdaError, TopicModel};

pub use mapping::{validate_mapping, CategoryMapping, MappingEntry, Violation, MAPPING_VERSION};
pub use output::{read_classification_csv, write_classification_csv, CLASSIFICATION_HEADER};

/// `other_dominates` holds when the Other weight is at least this (inclusive).
pub const OTHER_DOMINANCE_THRESHOLD: f64 = 0.50;

pub const DEFAULT_KEYWORD: &str = "nuclear";

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("expected a vector of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("theta row is not a probability vector (sum {0})")]
    NotStochastic(f64),
    #[error("mapping is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidMapping(Vec<Violation>),
    #[error("invalid rank weights: {0}")]
    InvalidWeights(String),
    #[error(transparent)]
    Model(#[from] LdaError),
    #[error("classification file row {row}: {reason}")]
    MalformedRecord { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Share of a relevant topic's mass given to its first, second and third
/// ranked category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankWeights {
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

impl RankWeights {
    /// Identifier of the default 3:2:1 rule, recorded alongside outputs.
    pub const DEFAULT_RULE: &'static str = "rank-3-2-1/v1";

    pub fn validate(&self) -> Result<(), RulesError> {
        let w = [self.first, self.second, self.third];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(RulesError::InvalidWeights(
                "weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(RulesError::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.first, self.second, self.third]
    }
}

impl Default for RankWeights {
    fn default() -> Self {
        RankWeights {
            first: 1.0 / 2.0,
            second: 1.0 / 3.0,
            third: 1.0 / 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleConfig {
    pub keyword: String,
    pub weights: RankWeights,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            keyword: DEFAULT_KEYWORD.to_owned(),
            weights: RankWeights::default(),
        }
    }
}

/// Per-document output of the rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub doc_id: String,
    /// Weighted category frequencies indexed by category code; `wc[7]` is Other.
    pub wc: [f64; 8],
    pub contains_nuclear: bool,
    pub other_dominates: bool,
    pub analyze_document: bool,
    pub top3: Vec<Category>,
}

/// Exact-token keyword test; tokens are already lowercase.
pub fn contains_keyword(doc: &Document, keyword: &str) -> bool {
    let keyword = keyword.to_lowercase();
    doc.tokens.contains(&keyword)
}

fn check_theta(theta_row: &[f64], k: usize) -> Result<(), RulesError> {
    if theta_row.len() != k {
        return Err(RulesError::DimensionMismatch {
            expected: k,
            found: theta_row.len(),
        });
    }
    let sum: f64 = theta_row.iter().sum();
    if theta_row.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(RulesError::NotStochastic(sum));
    }
    Ok(())
}

/// `ranks[k]` is topic k's ranked triple from a validated mapping.
fn weighted_from_table(theta_row: &[f64], ranks: &[[Category; 3]], weights: &RankWeights) -> [f64; 8] {
    let w = weights.as_array();
    let mut parts: [Vec<f64>; 8] = Default::default();
    for (&mass, triple) in theta_row.iter().zip(ranks) {
        if triple.iter().all(|c| c.is_other()) {
            parts[Category::Other.index()].push(mass);
        } else {
            for (c, share) in triple.iter().zip(w) {
                parts[c.index()].push(mass * share);
            }
        }
    }
    // Summing each category's contributions in sorted order makes the result
    // independent of topic numbering.
    let mut wc = [0.0; 8];
    for (slot, mut contributions) in wc.iter_mut().zip(parts) {
        contributions.sort_by(f64::total_cmp);
        *slot = contributions.iter().sum();
    }
    wc
}

fn prepared_table(mapping: &CategoryMapping, k: usize) -> Result<Vec<[Category; 3]>, RulesError> {
    validate_mapping(mapping, k).map_err(RulesError::InvalidMapping)?;
    Ok(mapping.rank_table())
}

/// `wc[c] = Σ_k theta[k] · weight(k, c)` with the default 1/2, 1/3, 1/6 rank weights.
pub fn weighted_category_vector(theta_row: &[f64], mapping: &CategoryMapping) -> Result<[f64; 8], RulesError> {
    weighted_category_vector_with(theta_row, mapping, &RankWeights::default())
}

pub fn weighted_category_vector_with(
    theta_row: &[f64],
    mapping: &CategoryMapping,
    weights: &RankWeights,
) -> Result<[f64; 8], RulesError> {
    weights.validate()?;
    check_theta(theta_row, mapping.k)?;
    let ranks = prepared_table(mapping, mapping.k)?;
    Ok(weighted_from_table(theta_row, &ranks, weights))
}

/// Up to three signaling categories by descending weight (ties by code),
/// positive weight only. Empty for Other-dominated documents, which are
/// not eligible for categorization.
fn top3(wc: &[f64; 8], other_dominates: bool) -> Vec<Category> {
    if other_dominates {
        return Vec::new();
    }
    let mut cats: Vec<Category> = Category::SIGNALING
        .into_iter()
        .filter(|c| wc[c.index()] > 0.0)
        .collect();
    cats.sort_by(|a, b| wc[b.index()].total_cmp(&wc[a.index()]).then(a.cmp(b)));
    cats.truncate(3);
    cats
}

/// Build a record from a weighted vector and the keyword flag.
pub fn decide(doc_id: &str, wc: [f64; 8], contains_nuclear: bool) -> ClassificationRecord {
    let other_dominates = wc[Category::Other.index()] >= OTHER_DOMINANCE_THRESHOLD;
    ClassificationRecord {
        doc_id: doc_id.to_owned(),
        top3: top3(&wc, other_dominates),
        wc,
        contains_nuclear,
        other_dominates,
        analyze_document: contains_nuclear && !other_dominates,
    }
}

pub fn classify_document(
    doc: &Document,
    theta_row: &[f64],
    mapping: &CategoryMapping,
    config: &RuleConfig,
) -> Result<ClassificationRecord, RulesError> {
    let wc = weighted_category_vector_with(theta_row, mapping, &config.weights)?;
    Ok(decide(doc.doc_id(), wc, contains_keyword(doc, &config.keyword)))
}

/// Theta row for every corpus document, in corpus order: the training row
/// when the model saw the document, a fold-in estimate otherwise.
pub fn corpus_thetas(corpus: &Corpus, model: &TopicModel) -> Result<Vec<Vec<f64>>, RulesError> {
    model.check_vocab(&corpus.encoded.vocab)?;
    corpus
        .encoded
        .docs
        .par_iter()
        .map(|doc| match model.theta_for(&doc.doc_id) {
            Some(row) => Ok(row.to_vec()),
            None => Ok(infer_theta(model, &corpus.encoded.vocab, doc)?),
        })
        .collect()
}

/// Classify documents given precomputed theta rows (same order).
pub fn classify_with_thetas(
    documents: &[Document],
    thetas: &[Vec<f64>],
    mapping: &CategoryMapping,
    config: &RuleConfig,
) -> Result<Vec<ClassificationRecord>, RulesError> {
    config.weights.validate()?;
    if documents.len() != thetas.len() {
        return Err(RulesError::DimensionMismatch {
            expected: documents.len(),
            found: thetas.len(),
        });
    }
    let ranks = prepared_table(mapping, mapping.k)?;
    documents
        .par_iter()
        .zip(thetas)
        .map(|(doc, theta)| {
            check_theta(theta, mapping.k)?;
            let wc = weighted_from_table(theta, &ranks, &config.weights);
            Ok(decide(doc.doc_id(), wc, contains_keyword(doc, &config.keyword)))
        })
        .collect()
}

/// One record per document in manifest order.
pub fn classify_corpus(
    corpus: &Corpus,
    model: &TopicModel,
    mapping: &CategoryMapping,
    config: &RuleConfig,
) -> Result<Vec<ClassificationRecord>, RulesError> {
    validate_mapping(mapping, model.k()).map_err(RulesError::InvalidMapping)?;
    let thetas = corpus_thetas(corpus, model)?;
    classify_with_thetas(&corpus.documents, &thetas, mapping, config)
}
