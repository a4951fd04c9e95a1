use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{keyed_rng, rng_key_for_doc, LdaError, TopicModel, TrainingConfig};
use crate::ingest::EncodedCorpus;

const TRAIN_DOMAIN: u64 = 0x7472_6169_6e00_0001;

struct SampledDoc {
    /// Position in the corpus.
    corpus_index: usize,
    key: u64,
    words: Vec<u32>,
    topics: Vec<u16>,
}

/// Collapsed Gibbs sampler state over integer counts.
///
/// Documents are visited in ascending `doc_id` order and every document
/// draws from its own stream keyed by `(seed, doc_id, sweep)`, so the
/// result does not depend on the order documents appear in the corpus.
pub struct GibbsSampler<'a> {
    corpus: &'a EncodedCorpus,
    config: TrainingConfig,
    k: usize,
    v: usize,
    docs: Vec<SampledDoc>,
    /// Row-major `docs.len() × k`.
    doc_topic: Vec<u32>,
    /// Word-major `v × k`.
    word_topic: Vec<u32>,
    topic_total: Vec<u32>,
    sweeps_done: usize,
    acc_doc_topic: Vec<u64>,
    acc_word_topic: Vec<u64>,
    acc_topic_total: Vec<u64>,
    samples: u64,
    weights: Vec<f64>,
}

impl<'a> GibbsSampler<'a> {
    /// Validate inputs and draw the initial random assignment (sweep 0).
    pub fn new(corpus: &'a EncodedCorpus, config: &TrainingConfig) -> Result<Self, LdaError> {
        config.validate()?;
        if corpus.docs.is_empty() || corpus.total_tokens() == 0 {
            return Err(LdaError::EmptyCorpus);
        }
        let k = config.topics;
        let v = corpus.vocab.len();
        if let Some(bad) = corpus
            .docs
            .iter()
            .flat_map(|d| d.tokens.iter())
            .find(|&&w| w as usize >= v)
        {
            return Err(LdaError::InvalidModel(format!(
                "token index {bad} outside vocabulary of {v}"
            )));
        }

        let mut order: Vec<usize> = (0..corpus.docs.len()).filter(|&i| !corpus.docs[i].is_empty()).collect();
        order.sort_by(|&a, &b| corpus.docs[a].doc_id.cmp(&corpus.docs[b].doc_id));

        let mut docs = Vec::with_capacity(order.len());
        let mut doc_topic = vec![0u32; order.len() * k];
        let mut word_topic = vec![0u32; v * k];
        let mut topic_total = vec![0u32; k];
        for (d, &ci) in order.iter().enumerate() {
            let src = &corpus.docs[ci];
            let key = rng_key_for_doc(config.seed, &src.doc_id);
            let mut rng = keyed_rng(key, TRAIN_DOMAIN, 0);
            let topics: Vec<u16> = src.tokens.iter().map(|_| rng.random_range(0..k) as u16).collect();
            for (&w, &t) in src.tokens.iter().zip(&topics) {
                doc_topic[d * k + t as usize] += 1;
                word_topic[w as usize * k + t as usize] += 1;
                topic_total[t as usize] += 1;
            }
            docs.push(SampledDoc {
                corpus_index: ci,
                key,
                words: src.tokens.clone(),
                topics,
            });
        }

        Ok(GibbsSampler {
            corpus,
            config: config.clone(),
            k,
            v,
            acc_doc_topic: vec![0; doc_topic.len()],
            acc_word_topic: vec![0; word_topic.len()],
            acc_topic_total: vec![0; k],
            docs,
            doc_topic,
            word_topic,
            topic_total,
            sweeps_done: 0,
            samples: 0,
            weights: vec![0.0; k],
        })
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps_done
    }

    pub fn is_finished(&self) -> bool {
        self.sweeps_done >= self.config.iterations
    }

    /// Resample every token once, then record a snapshot if this sweep is
    /// on the thinning schedule.
    pub fn sweep(&mut self) {
        let k = self.k;
        let alpha = self.config.alpha;
        let beta = self.config.beta;
        let v_beta = self.v as f64 * beta;
        let sweep = self.sweeps_done as u64 + 1;

        for (d, doc) in self.docs.iter_mut().enumerate() {
            let mut rng: ChaCha8Rng = keyed_rng(doc.key, TRAIN_DOMAIN, sweep);
            let dt = &mut self.doc_topic[d * k..(d + 1) * k];
            for (pos, &w) in doc.words.iter().enumerate() {
                let old = doc.topics[pos] as usize;
                let wt = &mut self.word_topic[w as usize * k..(w as usize + 1) * k];
                dt[old] -= 1;
                wt[old] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (dt[t] as f64 + alpha) * (wt[t] as f64 + beta) / (self.topic_total[t] as f64 + v_beta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                dt[new] += 1;
                wt[new] += 1;
                self.topic_total[new] += 1;
                doc.topics[pos] = new as u16;
            }
        }

        self.sweeps_done += 1;
        if self.config.is_sample_sweep(self.sweeps_done) {
            self.accumulate();
        }
    }

    fn accumulate(&mut self) {
        for (acc, &n) in self.acc_doc_topic.iter_mut().zip(&self.doc_topic) {
            *acc += n as u64;
        }
        for (acc, &n) in self.acc_word_topic.iter_mut().zip(&self.word_topic) {
            *acc += n as u64;
        }
        for (acc, &n) in self.acc_topic_total.iter_mut().zip(&self.topic_total) {
            *acc += n as u64;
        }
        self.samples += 1;
    }

    /// Verify count conservation: per-document topic counts sum to the
    /// document length, per-topic word counts sum to the topic total, and
    /// every count agrees with the assignment vector.
    pub fn check_counts(&self) -> Result<(), String> {
        let k = self.k;
        let mut word_topic = vec![0u32; self.v * k];
        let mut topic_total = vec![0u32; k];
        for (d, doc) in self.docs.iter().enumerate() {
            let row = &self.doc_topic[d * k..(d + 1) * k];
            let sum: u64 = row.iter().map(|&n| n as u64).sum();
            if sum != doc.words.len() as u64 {
                return Err(format!(
                    "doc {d}: topic counts sum to {sum}, length {}",
                    doc.words.len()
                ));
            }
            let mut recount = vec![0u32; k];
            for (&w, &t) in doc.words.iter().zip(&doc.topics) {
                if t as usize >= k {
                    return Err(format!("doc {d}: assignment {t} out of range"));
                }
                recount[t as usize] += 1;
                word_topic[w as usize * k + t as usize] += 1;
                topic_total[t as usize] += 1;
            }
            if recount != row {
                return Err(format!("doc {d}: counts disagree with assignments"));
            }
        }
        if word_topic != self.word_topic {
            return Err("topic-word counts disagree with assignments".into());
        }
        if topic_total != self.topic_total {
            return Err("topic totals disagree with assignments".into());
        }
        for t in 0..k {
            let col: u64 = (0..self.v).map(|w| self.word_topic[w * k + t] as u64).sum();
            if col != self.topic_total[t] as u64 {
                return Err(format!(
                    "topic {t}: word counts sum to {col}, total {}",
                    self.topic_total[t]
                ));
            }
        }
        Ok(())
    }

    /// Token log-likelihood under the point estimate from the current counts.
    pub fn current_log_likelihood(&self) -> f64 {
        let k = self.k;
        let alpha = self.config.alpha;
        let beta = self.config.beta;
        let v_beta = self.v as f64 * beta;
        let k_alpha = k as f64 * alpha;
        let mut ll = 0.0;
        for (d, doc) in self.docs.iter().enumerate() {
            let len = doc.words.len() as f64;
            let dt = &self.doc_topic[d * k..(d + 1) * k];
            for &w in &doc.words {
                let wt = &self.word_topic[w as usize * k..(w as usize + 1) * k];
                let p: f64 = (0..k)
                    .map(|t| {
                        (dt[t] as f64 + alpha) / (len + k_alpha) * (wt[t] as f64 + beta)
                            / (self.topic_total[t] as f64 + v_beta)
                    })
                    .sum();
                ll += p.ln();
            }
        }
        ll
    }

    /// Run the remaining sweeps and build the model.
    pub fn run(mut self) -> TopicModel {
        while !self.is_finished() {
            self.sweep();
        }
        self.into_model()
    }

    /// Estimate phi and theta from the averaged snapshots. If no snapshot
    /// was taken yet, the current state is used.
    pub fn into_model(mut self) -> TopicModel {
        if self.samples == 0 {
            self.accumulate();
        }
        let k = self.k;
        let v = self.v;
        let s = self.samples as f64;
        let alpha = self.config.alpha;
        let beta = self.config.beta;

        let mut phi = vec![vec![0.0; v]; k];
        for (t, row) in phi.iter_mut().enumerate() {
            let denom = self.acc_topic_total[t] as f64 + s * v as f64 * beta;
            for (w, p) in row.iter_mut().enumerate() {
                *p = (self.acc_word_topic[w * k + t] as f64 + s * beta) / denom;
            }
        }

        let n_docs = self.corpus.docs.len();
        let mut theta = vec![vec![1.0 / k as f64; k]; n_docs];
        let mut assignments = vec![Vec::new(); n_docs];
        for (d, doc) in self.docs.iter_mut().enumerate() {
            let len = doc.words.len() as f64;
            let denom = s * len + s * k as f64 * alpha;
            let row = &mut theta[doc.corpus_index];
            for (t, p) in row.iter_mut().enumerate() {
                *p = (self.acc_doc_topic[d * k + t] as f64 + s * alpha) / denom;
            }
            assignments[doc.corpus_index] = std::mem::take(&mut doc.topics);
        }

        let doc_ids = self.corpus.docs.iter().map(|d| d.doc_id.clone()).collect();
        TopicModel::from_parts(self.config, self.corpus.vocab.clone(), doc_ids, phi, theta, assignments)
            .expect("sampler produced an invalid model")
    }
}
