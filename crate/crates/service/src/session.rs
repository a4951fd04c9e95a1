//! Loaded workspace state and mapping revisions.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use pdtriage_core::artifacts::{self, ArtifactError, Workspace};
use pdtriage_core::eval::{evaluate, EvalError, EvaluationReport, GoldPolicy, GroupBy};
use pdtriage_core::ingest::{Corpus, DocumentMeta};
use pdtriage_core::lda::{top_words, TopicModel, TopicSummary};
use pdtriage_core::rules::{
    classify_with_thetas, corpus_thetas, validate_mapping, CategoryMapping, ClassificationRecord, RuleConfig,
    RulesError, Violation,
};
use thiserror::Error;

pub const TOP_WORDS: usize = 10;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("mapping rejected")]
    Invalid(Vec<Violation>),
}

/// Everything derived from one mapping revision. Immutable once published.
#[derive(Debug)]
pub struct Snapshot {
    pub revision: u64,
    pub mapping: CategoryMapping,
    pub records: Vec<ClassificationRecord>,
    /// Present when the manifest carries gold labels.
    pub report: Option<EvaluationReport>,
}

impl Snapshot {
    pub fn flagged(&self) -> usize {
        self.records.iter().filter(|r| r.analyze_document).count()
    }
}

pub struct Session {
    corpus: Corpus,
    model: TopicModel,
    metas: Vec<DocumentMeta>,
    by_id: HashMap<String, usize>,
    // Frozen at load: edits only change the mapping, never the model.
    thetas: Vec<Vec<f64>>,
    topics: Vec<TopicSummary>,
    has_gold: bool,
    rules: RuleConfig,
    mapping_path: Option<PathBuf>,
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
}

impl Session {
    /// Build a session; `mapping_path` is where accepted edits are persisted.
    pub fn new(
        corpus: Corpus,
        model: TopicModel,
        mapping: CategoryMapping,
        mapping_path: Option<PathBuf>,
    ) -> Result<Self, SessionError> {
        validate_mapping(&mapping, model.k()).map_err(SessionError::Invalid)?;
        let thetas = corpus_thetas(&corpus, &model)?;
        let topics = (0..model.k())
            .map(|k| top_words(&model, k, TOP_WORDS.min(model.vocab().len())))
            .collect::<Result<_, _>>()
            .map_err(RulesError::from)?;
        let metas = corpus.resolved_metas();
        let has_gold = metas.iter().any(|m| m.gold_relevant.is_some());
        let by_id = metas.iter().enumerate().map(|(i, m)| (m.doc_id.clone(), i)).collect();
        let rules = RuleConfig::default();
        let first = compute(&corpus, &metas, &thetas, &rules, has_gold, mapping, 1)?;
        Ok(Session {
            corpus,
            model,
            metas,
            by_id,
            thetas,
            topics,
            has_gold,
            rules,
            mapping_path,
            current: RwLock::new(Arc::new(first)),
            writer: Mutex::new(()),
        })
    }

    /// Load corpus, model and mapping from a workspace. A missing mapping
    /// file starts every topic as Other.
    pub fn open(ws: &Workspace) -> Result<Self, SessionError> {
        let (corpus, corpus_digest) = artifacts::load_corpus(&ws.corpus())?;
        let (model_file, _) = artifacts::load_model(&ws.model())?;
        if model_file.corpus_digest != corpus_digest {
            return Err(ArtifactError::Stale(format!(
                "{} was trained on a different corpus than {}",
                ws.model().display(),
                ws.corpus().display()
            ))
            .into());
        }
        let model = model_file.model;
        let mapping = if ws.mapping().exists() {
            artifacts::load_mapping(&ws.mapping())?
        } else {
            CategoryMapping::all_other(model.k())
        };
        Session::new(corpus, model, mapping, Some(ws.mapping()))
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock poisoned").clone()
    }

    /// Validate, recompute, persist, then publish. Writers are serialized;
    /// readers only wait for the final pointer swap.
    pub fn apply_mapping(&self, mapping: CategoryMapping) -> Result<Arc<Snapshot>, SessionError> {
        let _guard = self.writer.lock().expect("writer lock poisoned");
        validate_mapping(&mapping, self.model.k()).map_err(SessionError::Invalid)?;
        let revision = self.snapshot().revision + 1;
        let next = compute(
            &self.corpus,
            &self.metas,
            &self.thetas,
            &self.rules,
            self.has_gold,
            mapping,
            revision,
        )?;
        if let Some(path) = &self.mapping_path {
            artifacts::save_mapping(path, &next.mapping)?;
        }
        let next = Arc::new(next);
        *self.current.write().expect("snapshot lock poisoned") = next.clone();
        log::info!("mapping revision {revision}: {} documents flagged", next.flagged());
        Ok(next)
    }

    pub fn topics(&self) -> &[TopicSummary] {
        &self.topics
    }

    pub fn has_gold(&self) -> bool {
        self.has_gold
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn model(&self) -> &TopicModel {
        &self.model
    }

    /// Manifest row with the resolved impacted flag.
    pub fn meta(&self, doc_id: &str) -> Option<(usize, &DocumentMeta)> {
        self.by_id.get(doc_id).map(|&i| (i, &self.metas[i]))
    }

    pub fn metas(&self) -> &[DocumentMeta] {
        &self.metas
    }
}

fn compute(
    corpus: &Corpus,
    metas: &[DocumentMeta],
    thetas: &[Vec<f64>],
    rules: &RuleConfig,
    has_gold: bool,
    mapping: CategoryMapping,
    revision: u64,
) -> Result<Snapshot, SessionError> {
    let records = classify_with_thetas(&corpus.documents, thetas, &mapping, rules)?;
    let report = if has_gold {
        Some(evaluate(
            &records,
            metas,
            GroupBy::Administration,
            GoldPolicy::RestrictToLabeled,
        )?)
    } else {
        None
    };
    Ok(Snapshot {
        revision,
        mapping,
        records,
        report,
    })
}
