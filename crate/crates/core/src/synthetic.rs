//! Synthetic corpora with known structure, for tests, benchmarks and demos.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use crate::category::Category;
use crate::ingest::{
    build_corpus, Administration, Corpus, DocumentMeta, EncodedCorpus, EncodedDoc, IngestConfig, Vocabulary,
};
use crate::lda::{TopicModel, TrainingConfig};
use crate::rules::CategoryMapping;

#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub docs: usize,
    pub vocab: usize,
    pub topics: usize,
    pub tokens_per_doc: usize,
    /// Symmetric Dirichlet concentration of each document's topic mix.
    pub doc_concentration: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            docs: 500,
            vocab: 200,
            topics: 5,
            tokens_per_doc: 100,
            doc_concentration: 0.2,
            seed: 2024,
        }
    }
}

/// A corpus sampled from known generating distributions.
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub corpus: EncodedCorpus,
    /// Generating topic-word distributions, `topics × vocab`.
    pub phi: Vec<Vec<f64>>,
    /// Generating document-topic proportions, `docs × topics`.
    pub theta: Vec<Vec<f64>>,
}

/// Topic `t` owns the `t`-th contiguous block of the vocabulary, with
/// Zipf-shaped weights over a shuffled order inside the block.
pub fn planted_corpus(spec: &PlantedSpec) -> PlantedCorpus {
    assert!(
        spec.topics > 0 && spec.vocab >= spec.topics,
        "need at least one word per topic"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let width = spec.vocab.to_string().len();
    let terms: Vec<String> = (0..spec.vocab).map(|i| format!("w{i:0width$}")).collect();
    let vocab = Vocabulary::from_terms(terms.clone());

    let block = spec.vocab / spec.topics;
    let mut phi = vec![vec![0.0; spec.vocab]; spec.topics];
    for (t, row) in phi.iter_mut().enumerate() {
        let start = t * block;
        let end = if t + 1 == spec.topics {
            spec.vocab
        } else {
            start + block
        };
        let mut words: Vec<usize> = (start..end).collect();
        words.shuffle(&mut rng);
        let norm: f64 = (1..=words.len()).map(|r| 1.0 / r as f64).sum();
        for (r, &w) in words.iter().enumerate() {
            row[w] = 1.0 / (r as f64 + 1.0) / norm;
        }
    }

    let gamma = Gamma::new(spec.doc_concentration, 1.0).expect("positive concentration");
    let word_dists: Vec<WeightedIndex<f64>> = phi
        .iter()
        .map(|row| WeightedIndex::new(row).expect("valid topic"))
        .collect();
    let mut theta = Vec::with_capacity(spec.docs);
    let mut docs = Vec::with_capacity(spec.docs);
    let id_width = spec.docs.to_string().len();
    for d in 0..spec.docs {
        let mut mix: Vec<f64> = (0..spec.topics).map(|_| gamma.sample(&mut rng).max(1e-300)).collect();
        let sum: f64 = mix.iter().sum();
        mix.iter_mut().for_each(|p| *p /= sum);
        let topic_dist = WeightedIndex::new(&mix).expect("valid mix");
        let tokens = (0..spec.tokens_per_doc)
            .map(|_| {
                let t = topic_dist.sample(&mut rng);
                let w = word_dists[t].sample(&mut rng);
                vocab.index_of(&terms[w]).expect("term in vocabulary")
            })
            .collect();
        docs.push(EncodedDoc {
            doc_id: format!("doc{d:0id_width$}"),
            tokens,
        });
        theta.push(mix);
    }

    PlantedCorpus {
        corpus: EncodedCorpus { docs, vocab },
        phi,
        theta,
    }
}

/// Indices of the `n` largest entries, ties by index.
pub fn top_indices(row: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// Greedy one-to-one matching of learned to planted topics by top-`n` word
/// overlap. Returns `(learned, planted, overlap)` triples, best pairs first.
pub fn greedy_topic_matching(learned: &[Vec<f64>], planted: &[Vec<f64>], n: usize) -> Vec<(usize, usize, usize)> {
    let learned_top: Vec<Vec<usize>> = learned.iter().map(|r| top_indices(r, n)).collect();
    let planted_top: Vec<Vec<usize>> = planted.iter().map(|r| top_indices(r, n)).collect();
    let mut pairs = Vec::new();
    for (i, a) in learned_top.iter().enumerate() {
        for (j, b) in planted_top.iter().enumerate() {
            pairs.push((i, j, a.iter().filter(|w| b.contains(w)).count()));
        }
    }
    pairs.sort_by(|x, y| y.2.cmp(&x.2).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    let mut used_l = vec![false; learned.len()];
    let mut used_p = vec![false; planted.len()];
    let mut out = Vec::new();
    for (i, j, o) in pairs {
        if !used_l[i] && !used_p[j] {
            used_l[i] = true;
            used_p[j] = true;
            out.push((i, j, o));
        }
    }
    out
}

/// A 404-document corpus, model and mapping whose classification against
/// the manifest gold labels gives the confusion matrix (118, 28, 18, 240).
pub struct ResultsFixture {
    pub corpus: Corpus,
    pub model: TopicModel,
    pub mapping: CategoryMapping,
}

pub fn results_matrix_fixture() -> ResultsFixture {
    // (gold, text, dominant topic) per block: topic 0 is mapped to signaling
    // categories, topic 1 to Other.
    let blocks: [(bool, &str, usize, usize); 5] = [
        (true, "nuclear missile treaty reductions", 0, 118),
        (false, "nuclear missile treaty reductions", 0, 28),
        (true, "missile treaty reductions", 0, 18),
        (false, "nuclear trade economic market", 1, 40),
        (false, "trade economic market", 1, 200),
    ];
    // Spread administrations (297/67/40) and impacted flags (53) across blocks.
    let admin_of = |i: usize| match (i * 7) % 404 {
        j if j < 297 => (Administration::Reagan, 1981 + (j % 8) as u16),
        j if j < 364 => (Administration::Bush, 1989 + (j % 4) as u16),
        j => (Administration::Clinton, 1993 + (j % 8) as u16),
    };
    let mut metas = Vec::new();
    let mut texts = HashMap::new();
    let mut dominant = Vec::new();
    let mut i = 0usize;
    for (gold, text, topic, count) in blocks {
        for _ in 0..count {
            let id = format!("PD-{i:03}");
            let (admin, year) = admin_of(i);
            let mut m = DocumentMeta::new(id.clone(), admin, year);
            m.impacted_override = Some((i * 13) % 404 < 53);
            m.gold_relevant = Some(gold);
            m.gold_categories = gold.then(|| [Category::ArmsControl].into());
            texts.insert(id, text.to_owned());
            metas.push(m);
            dominant.push(topic);
            i += 1;
        }
    }
    let corpus = build_corpus(&metas, &texts, &IngestConfig::default()).expect("fixture texts present");

    let vocab = corpus.encoded.vocab.clone();
    let v = vocab.len();
    let signal = ["missile", "nuclear", "reductions", "treaty"];
    let row = |words: &[&str]| -> Vec<f64> {
        let hits: Vec<usize> = words
            .iter()
            .filter_map(|w| vocab.index_of(w))
            .map(|i| i as usize)
            .collect();
        let mut r = vec![0.0; v];
        for &h in &hits {
            r[h] = 1.0 / hits.len() as f64;
        }
        r
    };
    let phi = vec![row(&signal), row(&["economic", "market", "trade"])];
    let theta = dominant
        .iter()
        .map(|&t| if t == 0 { vec![0.875, 0.125] } else { vec![0.125, 0.875] })
        .collect();
    let doc_ids = corpus.encoded.docs.iter().map(|d| d.doc_id.clone()).collect();
    let assignments = corpus.encoded.docs.iter().map(|d| vec![0; d.tokens.len()]).collect();
    let config = TrainingConfig {
        iterations: 2,
        burn_in: 1,
        thinning: 1,
        ..TrainingConfig::new(2, 0)
    };
    let model =
        TopicModel::from_parts(config, vocab, doc_ids, phi, theta, assignments).expect("fixture model is valid");

    let mut mapping = CategoryMapping::all_other(2);
    mapping.set(
        0,
        "arms control and strategic missiles",
        [
            Category::ArmsControl,
            Category::Programs,
            Category::MonitoringVerification,
        ],
    );
    mapping.set(1, "trade and economics", [Category::Other; 3]);
    ResultsFixture { corpus, model, mapping }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_corpus_shape() {
        let spec = PlantedSpec {
            docs: 20,
            ..PlantedSpec::default()
        };
        let p = planted_corpus(&spec);
        assert_eq!(p.corpus.docs.len(), 20);
        assert_eq!(p.corpus.vocab.len(), 200);
        assert!(p.corpus.docs.iter().all(|d| d.tokens.len() == 100));
        for row in &p.phi {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(row.iter().filter(|&&x| x > 0.0).count(), 40);
        }
        // Deterministic in the seed.
        assert_eq!(planted_corpus(&spec).corpus, p.corpus);
    }

    #[test]
    fn greedy_matching_is_one_to_one() {
        let a = vec![vec![0.0, 0.1, 0.9], vec![0.8, 0.2, 0.0]];
        let b = vec![vec![0.9, 0.1, 0.0], vec![0.0, 0.2, 0.8]];
        let m = greedy_topic_matching(&a, &b, 1);
        assert_eq!(m, vec![(0, 1, 1), (1, 0, 1)]);
    }
}
