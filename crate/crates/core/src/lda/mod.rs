//! Latent Dirichlet allocation trained by collapsed Gibbs sampling.
//!
//! Sampling runs on integer counts. Estimates of the topic-word (`phi`) and
//! document-topic (`theta`) distributions average count snapshots taken
//! every `thinning` sweeps after `burn_in`:
//!
//! ```text
//! phi[k][w]   = (n_kw + beta)  / (n_k + V * beta)
//! theta[d][k] = (n_dk + alpha) / (N_d + K * alpha)
//! ```
//!
//! with the counts replaced by their snapshot means.

mod infer;
mod sampler;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::{EncodedCorpus, Vocabulary};

pub use infer::infer_theta;
pub use sampler::GibbsSampler;

/// Row sums of `phi` and `theta` must be within this of 1.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LdaError {
    #[error("corpus has no tokens to sample")]
    EmptyCorpus,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("topic {topic} out of range for a {k}-topic model")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("requested {n} words from a vocabulary of {v}")]
    InvalidTopN { n: usize, v: usize },
    #[error("vocabulary digest {found} does not match the model's {expected}")]
    VocabularyMismatch { expected: String, found: String },
    #[error("document {0:?} is not part of the model")]
    UnknownDocument(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl TrainingConfig {
    /// Defaults: `alpha = 50 / K`, `beta = 0.01`, 1000 sweeps, 200 burn-in,
    /// a snapshot every 10th sweep.
    pub fn new(topics: usize, seed: u64) -> Self {
        TrainingConfig {
            topics,
            alpha: 50.0 / topics.max(1) as f64,
            beta: 0.01,
            iterations: 1000,
            burn_in: 200,
            thinning: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), LdaError> {
        let bad = |msg: String| Err(LdaError::InvalidConfig(msg));
        if self.topics == 0 || self.topics > u16::MAX as usize {
            return bad(format!("topic count {} must be in 1..={}", self.topics, u16::MAX));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return bad(format!("alpha {} must be positive", self.alpha));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("beta {} must be positive", self.beta));
        }
        if self.iterations <= self.burn_in {
            return bad(format!(
                "iterations {} must exceed burn_in {}",
                self.iterations, self.burn_in
            ));
        }
        if self.thinning == 0 {
            return bad("thinning must be at least 1".into());
        }
        Ok(())
    }

    /// Sweeps `burn_in + thinning`, `burn_in + 2 * thinning`, ... are
    /// averaged. When that schedule is empty the final sweep is used.
    pub fn is_sample_sweep(&self, sweep: usize) -> bool {
        if sweep <= self.burn_in || sweep > self.iterations {
            return false;
        }
        if self.iterations - self.burn_in < self.thinning {
            return sweep == self.iterations;
        }
        (sweep - self.burn_in).is_multiple_of(self.thinning)
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig::new(40, 0)
    }
}

/// Stable 64-bit key for a document's random streams.
pub(crate) fn rng_key_for_doc(seed: u64, doc_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(doc_id.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stream for one document in one sweep; draws are consumed in token order.
pub(crate) fn keyed_rng(doc_key: u64, domain: u64, sweep: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&doc_key.to_le_bytes());
    seed[8..16].copy_from_slice(&domain.to_le_bytes());
    seed[16..24].copy_from_slice(&sweep.to_le_bytes());
    seed[24..].copy_from_slice(&splitmix64(doc_key ^ sweep.rotate_left(32) ^ domain).to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Train a model: `K` topics over `corpus`, fully determined by
/// `(corpus, config)`.
pub fn train(corpus: &EncodedCorpus, config: &TrainingConfig) -> Result<TopicModel, LdaError> {
    Ok(GibbsSampler::new(corpus, config)?.run())
}

/// Like [`train`], calling `observe` after every sweep.
pub fn train_observed<F>(
    corpus: &EncodedCorpus,
    config: &TrainingConfig,
    mut observe: F,
) -> Result<TopicModel, LdaError>
where
    F: FnMut(&GibbsSampler<'_>),
{
    let mut sampler = GibbsSampler::new(corpus, config)?;
    while !sampler.is_finished() {
        sampler.sweep();
        observe(&sampler);
    }
    Ok(sampler.into_model())
}

/// A trained model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    config: TrainingConfig,
    vocab: Vocabulary,
    doc_ids: Vec<String>,
    doc_index: HashMap<String, usize>,
    phi: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
    assignments: Vec<Vec<u16>>,
}

fn check_stochastic(name: &str, rows: &[Vec<f64>], width: usize) -> Result<(), LdaError> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(LdaError::InvalidModel(format!(
                "{name} row {i} has {} entries, expected {width}",
                row.len()
            )));
        }
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(LdaError::InvalidModel(format!(
                "{name} row {i} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            return Err(LdaError::InvalidModel(format!("{name} row {i} sums to {sum}")));
        }
    }
    Ok(())
}

impl TopicModel {
    /// Assemble a model, checking every structural invariant.
    pub fn from_parts(
        config: TrainingConfig,
        vocab: Vocabulary,
        doc_ids: Vec<String>,
        phi: Vec<Vec<f64>>,
        theta: Vec<Vec<f64>>,
        assignments: Vec<Vec<u16>>,
    ) -> Result<Self, LdaError> {
        config.validate()?;
        let k = config.topics;
        if phi.len() != k {
            return Err(LdaError::InvalidModel(format!(
                "phi has {} rows, expected {k}",
                phi.len()
            )));
        }
        check_stochastic("phi", &phi, vocab.len())?;
        if theta.len() != doc_ids.len() || assignments.len() != doc_ids.len() {
            return Err(LdaError::InvalidModel(
                "theta/assignments/doc_ids lengths differ".into(),
            ));
        }
        check_stochastic("theta", &theta, k)?;
        if assignments.iter().flatten().any(|&z| z as usize >= k) {
            return Err(LdaError::InvalidModel("assignment outside 0..K".into()));
        }
        let mut doc_index = HashMap::with_capacity(doc_ids.len());
        for (i, id) in doc_ids.iter().enumerate() {
            if doc_index.insert(id.clone(), i).is_some() {
                return Err(LdaError::InvalidModel(format!("duplicate doc_id {id:?}")));
            }
        }
        Ok(TopicModel {
            config,
            vocab,
            doc_ids,
            doc_index,
            phi,
            theta,
            assignments,
        })
    }

    pub fn k(&self) -> usize {
        self.config.topics
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_hash(&self) -> &str {
        self.vocab.digest()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    pub fn theta(&self) -> &[Vec<f64>] {
        &self.theta
    }

    pub fn assignments(&self) -> &[Vec<u16>] {
        &self.assignments
    }

    /// The training theta row for `doc_id`, if it was in the training corpus.
    pub fn theta_for(&self, doc_id: &str) -> Option<&[f64]> {
        self.doc_index.get(doc_id).map(|&i| self.theta[i].as_slice())
    }

    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<(), LdaError> {
        if vocab.digest() == self.vocab_hash() {
            Ok(())
        } else {
            Err(LdaError::VocabularyMismatch {
                expected: self.vocab_hash().to_owned(),
                found: vocab.digest().to_owned(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic_id: usize,
    pub top_words: Vec<(String, f64)>,
}

/// The `n` most probable terms of a topic, ties broken by vocabulary index.
pub fn top_words(model: &TopicModel, topic_id: usize, n: usize) -> Result<TopicSummary, LdaError> {
    let k = model.k();
    if topic_id >= k {
        return Err(LdaError::TopicOutOfRange { topic: topic_id, k });
    }
    let v = model.vocab.len();
    if n == 0 || n > v {
        return Err(LdaError::InvalidTopN { n, v });
    }
    let row = &model.phi[topic_id];
    let mut idx: Vec<usize> = (0..v).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    let top_words = idx[..n]
        .iter()
        .map(|&w| (model.vocab.terms()[w].clone(), row[w]))
        .collect();
    Ok(TopicSummary { topic_id, top_words })
}

/// Sum over tokens of `ln Σ_k theta[d][k] · phi[k][w]`.
pub fn log_likelihood(model: &TopicModel, corpus: &EncodedCorpus) -> Result<f64, LdaError> {
    model.check_vocab(&corpus.vocab)?;
    let mut ll = 0.0;
    for doc in &corpus.docs {
        let theta = model
            .theta_for(&doc.doc_id)
            .ok_or_else(|| LdaError::UnknownDocument(doc.doc_id.clone()))?;
        for &w in &doc.tokens {
            let p: f64 = theta.iter().zip(&model.phi).map(|(t, row)| t * row[w as usize]).sum();
            ll += p.ln();
        }
    }
    Ok(ll)
}

// Serialized form: matrices are written row-major with exactly 12 decimals.

#[derive(Serialize)]
struct ModelOut<'a> {
    config: &'a TrainingConfig,
    vocab_hash: &'a str,
    vocab: &'a Vocabulary,
    doc_ids: &'a [String],
    phi: Box<serde_json::value::RawValue>,
    theta: Box<serde_json::value::RawValue>,
    assignments: &'a [Vec<u16>],
}

#[derive(Deserialize)]
struct ModelIn {
    config: TrainingConfig,
    vocab_hash: String,
    vocab: Vocabulary,
    doc_ids: Vec<String>,
    phi: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
    assignments: Vec<Vec<u16>>,
}

fn fixed12(rows: &[Vec<f64>]) -> Box<serde_json::value::RawValue> {
    let mut s = String::with_capacity(rows.iter().map(|r| r.len() * 16).sum::<usize>() + 2);
    s.push('[');
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push('[');
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            s.push_str(&format!("{x:.12}"));
        }
        s.push(']');
    }
    s.push(']');
    serde_json::value::RawValue::from_string(s).expect("formatted matrix is valid JSON")
}

/// Rescale rows whose 12-decimal rounding pushed the sum out of tolerance.
/// Rows already within tolerance are left untouched so that a load/save
/// cycle reproduces the same bytes.
fn renormalize(rows: &mut [Vec<f64>]) {
    for row in rows {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 && (sum - 1.0).abs() > STOCHASTIC_TOLERANCE / 2.0 {
            row.iter_mut().for_each(|p| *p /= sum);
        }
    }
}

impl Serialize for TopicModel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ModelOut {
            config: &self.config,
            vocab_hash: self.vocab_hash(),
            vocab: &self.vocab,
            doc_ids: &self.doc_ids,
            phi: fixed12(&self.phi),
            theta: fixed12(&self.theta),
            assignments: &self.assignments,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TopicModel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let mut raw = ModelIn::deserialize(deserializer)?;
        if raw.vocab_hash != raw.vocab.digest() {
            return Err(D::Error::custom("vocab_hash does not match the stored vocabulary"));
        }
        renormalize(&mut raw.phi);
        renormalize(&mut raw.theta);
        TopicModel::from_parts(raw.config, raw.vocab, raw.doc_ids, raw.phi, raw.theta, raw.assignments)
            .map_err(D::Error::custom)
    }
}
