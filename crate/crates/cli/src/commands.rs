use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{IsTerminal, Write as _};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use pdtriage_core::artifacts::{self, ArtifactError, ClassificationMeta, ModelFile, Workspace};
use pdtriage_core::eval::{evaluate, GoldPolicy};
use pdtriage_core::ingest::{build_corpus, load_manifest, load_texts, IngestConfig};
use pdtriage_core::lda::{log_likelihood, top_words, train_observed, TrainingConfig};
use pdtriage_core::rules::{
    classify_corpus, read_classification_csv, validate_mapping, write_classification_csv, RankWeights, RuleConfig,
};
use pdtriage_service::Session;

use crate::{ClassifyArgs, Cli, Command, EvalArgs, IngestArgs, ServeArgs, TopicsArgs, TrainArgs};
use crate::{EXIT_DATA, EXIT_INTERNAL, EXIT_USAGE};

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

// Anything surfacing from the pipeline is a data problem unless marked otherwise.
impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_DATA,
            error: e.into(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: anyhow!(msg.into()),
    }
}

fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_INTERNAL,
        error: e.into(),
    }
}

type Result<T> = std::result::Result<T, Failure>;

struct Ctx<'a> {
    ws: Option<Workspace>,
    quiet: bool,
    cli: &'a Cli,
}

impl Ctx<'_> {
    /// Explicit flag, else the workspace default, else a usage error.
    fn path(&self, explicit: &Option<PathBuf>, flag: &str, default: fn(&Workspace) -> PathBuf) -> Result<PathBuf> {
        match (explicit, &self.ws) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(ws)) => Ok(default(ws)),
            (None, None) => Err(usage(format!("--{flag} is required without --workspace"))),
        }
    }

    fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Append a timestamped line to the run log: the workspace's, or one
    /// beside the command's main output.
    fn log_run(&self, output: &Path, what: &str) {
        let path = match &self.ws {
            Some(ws) => ws.log(),
            None => output.parent().unwrap_or(Path::new(".")).join("run.log"),
        };
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let line = format!("{secs} {} {what}\n", command_name(&self.cli.command));
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .and_then(|mut f| f.write_all(line.as_bytes()));
        if let Err(e) = written {
            log::warn!("could not write {}: {e}", path.display());
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest(_) => "ingest",
        Command::Train(_) => "train",
        Command::Topics(_) => "topics",
        Command::Classify(_) => "classify",
        Command::Eval(_) => "eval",
        Command::Serve(_) => "serve",
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        ws: cli.workspace.clone().map(Workspace::new),
        quiet: cli.quiet,
        cli,
    };
    match &cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Topics(a) => topics(&ctx, a),
        Command::Classify(a) => classify(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
    }
}

fn ingest(ctx: &Ctx<'_>, a: &IngestArgs) -> Result<()> {
    let out = ctx.path(&a.out, "out", Workspace::corpus)?;
    let texts = a
        .texts
        .clone()
        .unwrap_or_else(|| a.manifest.parent().unwrap_or(Path::new(".")).join("texts"));
    let metas = load_manifest(&a.manifest)?;
    let raw = load_texts(&metas, &texts).with_context(|| format!("reading texts under {}", texts.display()))?;
    let corpus = build_corpus(&metas, &raw, &IngestConfig::default())?;
    let digest = artifacts::save_corpus(&out, &corpus)?;
    let impacted = corpus.documents.iter().filter(|d| d.impacted).count();
    let empty = corpus.encoded.empty_docs().count();
    println!(
        "ingested {} documents: {} terms, {} tokens, {} impacted, {} empty",
        corpus.documents.len(),
        corpus.encoded.vocab.len(),
        corpus.encoded.total_tokens(),
        impacted,
        empty
    );
    ctx.log_run(
        &out,
        &format!("{} -> {} corpus={digest}", a.manifest.display(), out.display()),
    );
    Ok(())
}

fn train(ctx: &Ctx<'_>, a: &TrainArgs) -> Result<()> {
    let corpus_path = ctx.path(&a.corpus, "corpus", Workspace::corpus)?;
    let out = ctx.path(&a.out, "out", Workspace::model)?;
    let (corpus, corpus_digest) = artifacts::load_corpus(&corpus_path)?;
    let mut config = TrainingConfig::new(a.topics, a.seed);
    config.iterations = a.iters;
    config.burn_in = a.burn_in.unwrap_or(a.iters / 5);
    config.thinning = a.thinning;
    config.beta = a.beta;
    if let Some(alpha) = a.alpha {
        config.alpha = alpha;
    }
    config.validate()?;

    let step = (a.iters / 20).max(1);
    let show = !ctx.quiet && std::io::stderr().is_terminal();
    let model = train_observed(&corpus.encoded, &config, |s| {
        let done = s.sweeps_done();
        if show && (done % step == 0 || done == a.iters) {
            eprint!("\rsweep {done}/{}", a.iters);
            if done == a.iters {
                eprintln!();
            }
        }
    })?;
    let ll = log_likelihood(&model, &corpus.encoded)?;
    let digest = artifacts::save_model(&out, &ModelFile { corpus_digest, model })?;
    println!(
        "trained {} topics over {} documents; log-likelihood {ll:.3}",
        a.topics,
        corpus.documents.len()
    );
    ctx.log_run(
        &out,
        &format!(
            "{} -> {} seed={} model={digest}",
            corpus_path.display(),
            out.display(),
            a.seed
        ),
    );
    Ok(())
}

fn topics(ctx: &Ctx<'_>, a: &TopicsArgs) -> Result<()> {
    let model_path = ctx.path(&a.model, "model", Workspace::model)?;
    let (file, _) = artifacts::load_model(&model_path)?;
    let model = file.model;
    let n = a.top.min(model.vocab().len());
    let mut rows = csv::Writer::from_writer(Vec::new());
    rows.write_record(["topic_id", "rank", "word", "prob"])
        .map_err(internal)?;
    for k in 0..model.k() {
        let summary = top_words(&model, k, n)?;
        let words: Vec<&str> = summary.top_words.iter().map(|(w, _)| w.as_str()).collect();
        println!("{k}\t{}", words.join(" "));
        for (rank, (w, p)) in summary.top_words.iter().enumerate() {
            rows.write_record([k.to_string(), (rank + 1).to_string(), w.clone(), format!("{p:.6}")])
                .map_err(internal)?;
        }
    }
    if let Some(path) = &a.csv {
        artifacts::write_atomic(path, &rows.into_inner().map_err(|e| internal(anyhow!("{e}")))?)?;
    }
    Ok(())
}

fn classify(ctx: &Ctx<'_>, a: &ClassifyArgs) -> Result<()> {
    let model_path = ctx.path(&a.model, "model", Workspace::model)?;
    let corpus_path = ctx.path(&a.corpus, "corpus", Workspace::corpus)?;
    let mapping_path = ctx.path(&a.mapping, "mapping", Workspace::mapping)?;
    let out = ctx.path(&a.out, "out", Workspace::classification)?;

    let (corpus, corpus_digest) = artifacts::load_corpus(&corpus_path)?;
    let (file, model_digest) = artifacts::load_model(&model_path)?;
    if file.corpus_digest != corpus_digest {
        return Err(ArtifactError::Stale(format!(
            "{} was trained on a different corpus than {}; re-run train",
            model_path.display(),
            corpus_path.display()
        ))
        .into());
    }
    let mapping = artifacts::load_mapping(&mapping_path)?;
    if let Err(violations) = validate_mapping(&mapping, file.model.k()) {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(anyhow!("{}: {}", mapping_path.display(), list.join("; ")).into());
    }

    let rules = RuleConfig::default();
    let records = classify_corpus(&corpus, &file.model, &mapping, &rules)?;
    let mut bytes = Vec::new();
    write_classification_csv(&mut bytes, &records)?;
    artifacts::write_atomic(&out, &bytes)?;
    let classification_digest = artifacts::sha256_hex(&bytes);
    artifacts::save_classification_meta(
        &out,
        &ClassificationMeta {
            v: artifacts::CLASSIFICATION_META_VERSION,
            corpus_digest,
            model_digest,
            mapping_digest: artifacts::mapping_digest(&mapping),
            rank_rule: RankWeights::DEFAULT_RULE.into(),
            keyword: rules.keyword.clone(),
            classification_digest: classification_digest.clone(),
        },
    )?;
    let flagged = records.iter().filter(|r| r.analyze_document).count();
    println!("classified {} documents: {flagged} flagged for reading", records.len());
    ctx.log_run(
        &out,
        &format!("-> {} classification={classification_digest}", out.display()),
    );
    Ok(())
}

/// `report.json` -> `report.<suffix>`
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn eval(ctx: &Ctx<'_>, a: &EvalArgs) -> Result<()> {
    let csv_path = ctx.path(&a.classification, "classification", Workspace::classification)?;
    let bytes = artifacts::read_bytes(&csv_path)?;
    let digest = artifacts::sha256_hex(&bytes);
    let meta = artifacts::load_classification_meta(&csv_path)?;
    if let Some(meta) = &meta {
        if meta.classification_digest != digest {
            return Err(ArtifactError::Stale(format!(
                "{} changed after it was written; re-run classify",
                csv_path.display()
            ))
            .into());
        }
    }
    let records = read_classification_csv(bytes.as_slice())?;

    let corpus_path = a
        .corpus
        .clone()
        .or_else(|| ctx.ws.as_ref().map(Workspace::corpus).filter(|p| p.exists()));
    let corpus = match &corpus_path {
        Some(p) => {
            let (corpus, corpus_digest) = artifacts::load_corpus(p)?;
            if let Some(meta) = meta.as_ref().filter(|m| m.corpus_digest != corpus_digest) {
                return Err(ArtifactError::Stale(format!(
                    "{} was classified from corpus {}, not {}",
                    csv_path.display(),
                    &meta.corpus_digest[..12],
                    p.display()
                ))
                .into());
            }
            Some(corpus)
        }
        None => None,
    };
    let mut metas = match (&a.manifest, &corpus) {
        (Some(m), _) => load_manifest(m)?,
        (None, Some(c)) => c.metas(),
        (None, None) => return Err(usage("--manifest is required when no corpus is available")),
    };
    if let Some(c) = &corpus {
        let resolved: HashMap<String, Option<bool>> = c
            .resolved_metas()
            .into_iter()
            .map(|m| (m.doc_id, m.impacted_override))
            .collect();
        for m in metas.iter_mut().filter(|m| m.impacted_override.is_none()) {
            m.impacted_override = resolved.get(&m.doc_id).copied().flatten();
        }
    }

    let policy = if a.labeled_only {
        GoldPolicy::RestrictToLabeled
    } else {
        GoldPolicy::RequireAll
    };
    let mut report = evaluate(&records, &metas, a.group_by, policy)?;
    report.classification_digest = Some(digest);

    let out = match (&a.out, &ctx.ws) {
        (Some(p), _) => p.clone(),
        (None, Some(ws)) => ws.report_json(),
        (None, None) => csv_path.with_file_name("report.json"),
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(internal)?;
    json.push('\n');
    artifacts::write_atomic(&out, json.as_bytes())?;
    artifacts::write_atomic(&sibling(&out, "metrics.csv"), report.metrics_csv().as_bytes())?;
    artifacts::write_atomic(
        &sibling(&out, &format!("by_{}.csv", a.group_by)),
        report.grouped.to_csv().as_bytes(),
    )?;

    print!("{}", report.render_text());
    ctx.progress(&format!("wrote {}", out.display()));
    ctx.log_run(&out, &format!("{} -> {}", csv_path.display(), out.display()));
    Ok(())
}

fn serve(ctx: &Ctx<'_>, a: &ServeArgs) -> Result<()> {
    let ws = ctx.ws.clone().ok_or_else(|| usage("serve needs --workspace"))?;
    let session = Arc::new(Session::open(&ws)?);
    let ui = ws.ui_dir();
    let runtime = tokio::runtime::Runtime::new().map_err(internal)?;
    ctx.progress(&format!(
        "serving {} on http://127.0.0.1:{}",
        ws.root().display(),
        a.port
    ));
    ctx.log_run(&ws.log(), &format!("port={}", a.port));
    runtime
        .block_on(pdtriage_service::serve(session, a.port, Some(ui.as_path())))
        .context("server stopped")?;
    Ok(())
}
