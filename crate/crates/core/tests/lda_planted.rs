//! Sampler behavior on corpora drawn from known topics.

use pdtriage_core::ingest::EncodedCorpus;
use pdtriage_core::lda::{
    infer_theta, log_likelihood, top_words, train, train_observed, GibbsSampler, TopicModel, TrainingConfig,
};
use pdtriage_core::synthetic::{greedy_topic_matching, planted_corpus, top_indices, PlantedCorpus, PlantedSpec};
use rayon::prelude::*;

fn planted() -> PlantedCorpus {
    planted_corpus(&PlantedSpec::default())
}

fn trained(p: &PlantedCorpus) -> TopicModel {
    train(&p.corpus, &TrainingConfig::new(5, 17)).unwrap()
}

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[test]
fn recovers_planted_topics() {
    let p = planted();
    let model = trained(&p);
    let matching = greedy_topic_matching(model.phi(), &p.phi, 10);
    assert_eq!(matching.len(), 5);
    let mean = matching.iter().map(|m| m.2 as f64).sum::<f64>() / 5.0;
    assert!(mean >= 7.0, "mean top-10 overlap {mean}: {matching:?}");

    // Each learned top-10 should sit inside its planted topic's top-20.
    let subset_hits = matching
        .iter()
        .filter(|&&(learned, planted_id, _)| {
            let planted_top20 = top_indices(&p.phi[planted_id], 20);
            top_words(&model, learned, 10)
                .unwrap()
                .top_words
                .iter()
                .all(|(term, _)| planted_top20.contains(&(model.vocab().index_of(term).unwrap() as usize)))
        })
        .count();
    assert!(
        subset_hits as f64 >= 0.8 * 5.0,
        "{subset_hits}/5 summaries inside planted top-20"
    );
}

#[test]
fn fold_in_reproduces_training_theta() {
    let p = planted();
    let model = trained(&p);
    let worst = p.corpus.docs[..50]
        .par_iter()
        .map(|doc| {
            let inferred = infer_theta(&model, &p.corpus.vocab, doc).unwrap();
            assert!((inferred.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            total_variation(&inferred, model.theta_for(&doc.doc_id).unwrap())
        })
        .reduce(|| 0.0, f64::max);
    assert!(worst <= 0.15, "worst total variation {worst}");
}

#[test]
fn log_likelihood_improves_over_sweeps() {
    let p = planted();
    let improved = (0..20u64)
        .into_par_iter()
        .filter(|&seed| {
            let mut first = None;
            let mut last = None;
            train_observed(
                &p.corpus,
                &TrainingConfig::new(5, seed),
                |s: &GibbsSampler<'_>| match s.sweeps_done() {
                    1 => first = Some(s.current_log_likelihood()),
                    1000 => last = Some(s.current_log_likelihood()),
                    _ => {}
                },
            )
            .unwrap();
            last.unwrap() > first.unwrap()
        })
        .count();
    assert!(improved >= 19, "{improved}/20 runs improved");
}

#[test]
fn counts_conserved_after_every_sweep() {
    let p = planted_corpus(&PlantedSpec {
        docs: 60,
        ..PlantedSpec::default()
    });
    let cfg = TrainingConfig {
        iterations: 120,
        burn_in: 20,
        ..TrainingConfig::new(5, 3)
    };
    let mut sweeps = 0;
    let model = train_observed(&p.corpus, &cfg, |s| {
        s.check_counts().unwrap();
        sweeps += 1;
    })
    .unwrap();
    assert_eq!(sweeps, 120);
    for row in model.phi().iter().chain(model.theta()) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(row.iter().all(|&x| x >= 0.0));
    }
    assert!(model.assignments().iter().flatten().all(|&z| z < 5));
    let ll = log_likelihood(&model, &p.corpus).unwrap();
    assert!(ll.is_finite() && ll <= 0.0);
}

#[test]
fn training_is_bit_identical_and_order_free() {
    let p = planted_corpus(&PlantedSpec {
        docs: 80,
        ..PlantedSpec::default()
    });
    let cfg = TrainingConfig {
        iterations: 150,
        burn_in: 50,
        ..TrainingConfig::new(5, 99)
    };
    let a = train(&p.corpus, &cfg).unwrap();
    let b = train(&p.corpus, &cfg).unwrap();
    assert_eq!(a, b);
    let a_bits: Vec<u64> = a.phi().iter().flatten().map(|x| x.to_bits()).collect();
    let b_bits: Vec<u64> = b.phi().iter().flatten().map(|x| x.to_bits()).collect();
    assert_eq!(a_bits, b_bits);

    let mut docs = p.corpus.docs.clone();
    docs.reverse();
    docs.rotate_left(17);
    let shuffled = EncodedCorpus {
        docs,
        vocab: p.corpus.vocab.clone(),
    };
    let c = train(&shuffled, &cfg).unwrap();
    assert_eq!(a.phi(), c.phi());
    for doc in &p.corpus.docs {
        assert_eq!(a.theta_for(&doc.doc_id), c.theta_for(&doc.doc_id));
    }
}
