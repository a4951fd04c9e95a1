use rand::Rng;

use super::{keyed_rng, rng_key_for_doc, LdaError, TopicModel};
use crate::ingest::{EncodedDoc, Vocabulary};

const FOLD_IN_DOMAIN: u64 = 0x666f_6c64_0000_0002;

/// Fold a document into a trained model: Gibbs-sample its token topics with
/// `phi` held fixed, using the training sweep schedule and seed.
///
/// The conditional for a token of word `w` is `(n_dk + alpha) * phi[k][w]`.
/// Empty documents map to the uniform vector.
pub fn infer_theta(model: &TopicModel, vocab: &Vocabulary, doc: &EncodedDoc) -> Result<Vec<f64>, LdaError> {
    model.check_vocab(vocab)?;
    let k = model.k();
    if doc.tokens.is_empty() {
        return Ok(vec![1.0 / k as f64; k]);
    }
    let v = vocab.len();
    if let Some(&w) = doc.tokens.iter().find(|&&w| w as usize >= v) {
        return Err(LdaError::InvalidModel(format!(
            "token index {w} outside vocabulary of {v}"
        )));
    }

    let config = model.config();
    let alpha = config.alpha;
    // Topic weights per token, fixed for the whole run. A word that no
    // topic can emit falls back to the prior alone.
    let columns: Vec<Vec<f64>> = doc
        .tokens
        .iter()
        .map(|&w| {
            let col: Vec<f64> = model.phi().iter().map(|row| row[w as usize]).collect();
            if col.iter().all(|&p| p == 0.0) {
                vec![1.0; k]
            } else {
                col
            }
        })
        .collect();

    let key = rng_key_for_doc(config.seed, &doc.doc_id);
    let mut init = keyed_rng(key, FOLD_IN_DOMAIN, 0);
    let mut topics: Vec<usize> = doc.tokens.iter().map(|_| init.random_range(0..k)).collect();
    let mut counts = vec![0u32; k];
    for &t in &topics {
        counts[t] += 1;
    }

    let mut acc = vec![0u64; k];
    let mut samples = 0u64;
    let mut cumulative = vec![0.0; k];
    for sweep in 1..=config.iterations {
        let mut rng = keyed_rng(key, FOLD_IN_DOMAIN, sweep as u64);
        for (pos, col) in columns.iter().enumerate() {
            counts[topics[pos]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (counts[t] as f64 + alpha) * col[t];
                cumulative[t] = total;
            }
            let u = rng.random::<f64>() * total;
            let new = cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);
            counts[new] += 1;
            topics[pos] = new;
        }
        if config.is_sample_sweep(sweep) {
            for (a, &n) in acc.iter_mut().zip(&counts) {
                *a += n as u64;
            }
            samples += 1;
        }
    }

    let s = samples.max(1) as f64;
    if samples == 0 {
        acc = counts.iter().map(|&n| n as u64).collect();
    }
    let denom = s * doc.tokens.len() as f64 + s * k as f64 * alpha;
    Ok(acc.iter().map(|&n| (n as f64 + s * alpha) / denom).collect())
}
